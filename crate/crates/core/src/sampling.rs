//! Posterior sample paths `g ~ p(f | D)`.
//!
//! Two representations: an exact joint draw over a finite candidate set, and a
//! pathwise draw built from random Fourier features (prior path plus an exact
//! data-fit correction through the GP solve) that can be evaluated anywhere.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernel::{cross_vector, KernelFamily, KernelSpec};
use crate::linalg::{cho_solve, cholesky_jittered, SAMPLE_JITTER};
use crate::points::{check_dim, fnv1a_f64, Points, FNV_OFFSET};

/// Random Fourier feature map `φ(x) = scale · cos(Ωx + b)` for the Gaussian
/// kernel, so that `φ(x)ᵀφ(x')` is an unbiased estimate of `k(x, x')`.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    frequencies: Points,
    phases: Vec<f64>,
    scale: f64,
}

impl FeatureMap {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frequencies.dim()
    }

    pub fn frequencies(&self) -> &Points {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        self.frequencies
            .rows()
            .zip(&self.phases)
            .map(|(w, b)| self.scale * (w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b).cos())
            .collect()
    }

    fn weighted(&self, x: &[f64], weights: &[f64]) -> f64 {
        self.frequencies
            .rows()
            .zip(&self.phases)
            .zip(weights)
            .map(|((w, b), c)| c * (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b).cos())
            .sum::<f64>()
            * self.scale
    }

    /// Covariance implied by the feature map, `φ(x)ᵀφ(x2)`.
    pub fn prior_covariance(&self, x: &[f64], x2: &[f64]) -> f64 {
        let a = self.features(x);
        let b = self.features(x2);
        a.iter().zip(&b).map(|(u, v)| u * v).sum()
    }
}

pub fn build_feature_map<R: Rng + ?Sized>(spec: &KernelSpec, m: usize, rng: &mut R) -> Result<FeatureMap> {
    if spec.family != KernelFamily::GaussianArd {
        return Err(Error::Unsupported(format!(
            "random Fourier features are implemented for the Gaussian kernel, not {:?}",
            spec.family
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("feature count must be positive".into()));
    }
    let d = spec.dim();
    let mut freq = Vec::with_capacity(m * d);
    for _ in 0..m {
        for l in &spec.lengthscales {
            let z: f64 = rng.sample(StandardNormal);
            freq.push(z / l);
        }
    }
    let phases = (0..m).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    Ok(FeatureMap {
        frequencies: Points::from_flat(d, freq)?,
        phases,
        scale: (2.0 * spec.output_variance / m as f64).sqrt(),
    })
}

/// A sample path drawn with random features: `g(x) = φ(x)ᵀw + Σ v_i k(x, x_i)`.
#[derive(Debug, Clone)]
pub struct RffPath {
    feature_map: FeatureMap,
    prior_weights: Vec<f64>,
    correction_weights: Vec<f64>,
    train_inputs: Points,
    spec: KernelSpec,
}

impl RffPath {
    pub fn prior_weights(&self) -> &[f64] {
        &self.prior_weights
    }

    pub fn correction_weights(&self) -> &[f64] {
        &self.correction_weights
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.feature_map
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.spec.dim(), x.len())?;
        let prior = self.feature_map.weighted(x, &self.prior_weights);
        if self.train_inputs.is_empty() {
            return Ok(prior);
        }
        let k = cross_vector(&self.spec, &self.train_inputs, x);
        Ok(prior + k.iter().zip(&self.correction_weights).map(|(a, b)| a * b).sum::<f64>())
    }
}

#[derive(Debug, Clone)]
pub enum SampleRepresentation {
    DiscreteValues {
        candidate_ids: Vec<usize>,
        values: Vec<f64>,
    },
    RffPath(RffPath),
}

#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub representation: SampleRepresentation,
    /// Identifies the model the sample was drawn from.
    pub source_model_fingerprint: u64,
}

impl PosteriorSample {
    /// Sample values at every candidate. A discrete sample is only defined on
    /// the candidate set it was drawn over.
    pub fn evaluate(&self, candidates: &Points) -> Result<Vec<f64>> {
        match &self.representation {
            SampleRepresentation::DiscreteValues { values, .. } => {
                if values.len() != candidates.len() {
                    return Err(Error::InvalidArgument(format!(
                        "discrete sample has {} values but {} candidates were given",
                        values.len(),
                        candidates.len()
                    )));
                }
                Ok(values.clone())
            }
            SampleRepresentation::RffPath(path) => candidates.rows().map(|x| path.value(x)).collect(),
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match &self.representation {
            SampleRepresentation::DiscreteValues { values, .. } => Some(values),
            SampleRepresentation::RffPath(_) => None,
        }
    }

    pub fn as_path(&self) -> Option<&RffPath> {
        match &self.representation {
            SampleRepresentation::RffPath(p) => Some(p),
            SampleRepresentation::DiscreteValues { .. } => None,
        }
    }
}

pub fn model_fingerprint(model: &GpModel) -> u64 {
    let spec = model.spec();
    let mut h = fnv1a_f64(FNV_OFFSET, &spec.lengthscales);
    h = fnv1a_f64(h, &[spec.output_variance, model.noise_variance()]);
    h = fnv1a_f64(h, model.data().inputs().as_flat());
    fnv1a_f64(h, model.data().outputs())
}

/// Draws `mean + L z` with `L Lᵀ = cov` (jittered as needed).
pub fn joint_normal_draw<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &nalgebra::DMatrix<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (l, _) = cholesky_jittered(cov, &SAMPLE_JITTER, "posterior covariance over candidates")?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok((mean + l * z).iter().copied().collect())
}

pub fn sample_path_discrete<R: Rng + ?Sized>(
    model: &GpModel,
    candidates: &Points,
    rng: &mut R,
) -> Result<PosteriorSample> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("sampling needs at least one candidate".into()));
    }
    let (mean, cov) = model.posterior_cov(candidates)?;
    let values = joint_normal_draw(&mean, &cov, rng)?;
    Ok(PosteriorSample {
        representation: SampleRepresentation::DiscreteValues {
            candidate_ids: (0..candidates.len()).collect(),
            values,
        },
        source_model_fingerprint: model_fingerprint(model),
    })
}

/// Pathwise posterior draw: a prior RFF path corrected by the GP solve against
/// noisy prior values at the training inputs.
pub fn sample_path_rff<R: Rng + ?Sized>(
    model: &GpModel,
    feature_map: &FeatureMap,
    rng: &mut R,
) -> Result<PosteriorSample> {
    if model.spec().family != KernelFamily::GaussianArd {
        return Err(Error::Unsupported("pathwise sampling needs a Gaussian kernel".into()));
    }
    check_dim(model.dim(), feature_map.dim())?;
    let prior_weights: Vec<f64> = (0..feature_map.len()).map(|_| rng.sample(StandardNormal)).collect();
    let data = model.data();
    let correction_weights = if data.is_empty() {
        Vec::new()
    } else {
        let noise_sd = model.noise_variance().sqrt();
        let residual = DVector::from_iterator(
            data.len(),
            data.inputs().rows().zip(data.outputs()).map(|(x, y)| {
                let eps = if noise_sd > 0.0 {
                    noise_sd * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                y - feature_map.weighted(x, &prior_weights) - eps
            }),
        );
        cho_solve(model.cholesky(), &residual).iter().copied().collect()
    };
    Ok(PosteriorSample {
        representation: SampleRepresentation::RffPath(RffPath {
            feature_map: feature_map.clone(),
            prior_weights,
            correction_weights,
            train_inputs: data.inputs().clone(),
            spec: model.spec().clone(),
        }),
        source_model_fingerprint: model_fingerprint(model),
    })
}

/// Index and value of the largest sample value; ties go to the lowest index.
pub fn sample_max(sample: &PosteriorSample, candidates: &Points) -> Result<(usize, f64)> {
    let values = sample.evaluate(candidates)?;
    argmax_slice(&values).ok_or_else(|| Error::InvalidArgument("no candidates".into()))
}

pub(crate) fn argmax_slice(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}
