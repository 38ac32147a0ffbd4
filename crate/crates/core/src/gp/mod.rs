//! Exact Gaussian-process regression with a zero prior mean.
//!
//! A [`GpModel`] is immutable once fitted. Fantasy conditioning extends the
//! Cholesky factor by a block instead of refactorizing, which is what makes
//! kriging-believer style selection cheap.

mod hyper;

pub use hyper::{fit_hyperparameters, HyperSearchConfig};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{cross_matrix, cross_vector, kernel_matrix, KernelSpec};
use crate::linalg::{cho_solve, cholesky_jittered, log_det_from_cholesky, solve_lower, solve_lower_mat, FIT_JITTER};
use crate::points::{check_dim, Points};

/// Observed input/output pairs together with their global iteration labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Points,
    outputs: Vec<f64>,
    labels: Vec<u64>,
}

impl Dataset {
    pub fn empty(dim: usize) -> Self {
        Dataset {
            inputs: Points::empty(dim),
            outputs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn new(inputs: Points, outputs: Vec<f64>, labels: Vec<u64>) -> Result<Self> {
        if inputs.len() != outputs.len() || outputs.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} inputs, {} outputs and {} labels",
                inputs.len(),
                outputs.len(),
                labels.len()
            )));
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "index labels must be strictly increasing".into(),
            ));
        }
        Ok(Dataset {
            inputs,
            outputs,
            labels,
        })
    }

    /// Labels the rows `1..=n`.
    pub fn from_points(inputs: Points, outputs: Vec<f64>) -> Result<Self> {
        let labels = (1..=outputs.len() as u64).collect();
        Self::new(inputs, outputs, labels)
    }

    pub fn push(&mut self, x: &[f64], y: f64, label: u64) -> Result<()> {
        if let Some(&last) = self.labels.last() {
            if label <= last {
                return Err(Error::InvalidArgument(format!("label {label} does not follow {last}")));
            }
        }
        self.inputs.push(x)?;
        self.outputs.push(y);
        self.labels.push(label);
        Ok(())
    }

    /// Inserts keeping labels sorted; used when observations return out of
    /// order in asynchronous runs.
    pub fn insert_sorted(&mut self, x: &[f64], y: f64, label: u64) -> Result<()> {
        let pos = self.labels.partition_point(|&l| l < label);
        if self.labels.get(pos) == Some(&label) {
            return Err(Error::InvalidArgument(format!("duplicate label {label}")));
        }
        check_dim(self.inputs.dim(), x.len())?;
        let d = self.inputs.dim();
        let mut flat = self.inputs.as_flat().to_vec();
        flat.splice(pos * d..pos * d, x.iter().copied());
        self.inputs = Points::from_flat(d, flat)?;
        self.outputs.insert(pos, y);
        self.labels.insert(pos, label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn inputs(&self) -> &Points {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn next_label(&self) -> u64 {
        self.labels.last().map_or(1, |l| l + 1)
    }

    pub fn with_outputs(&self, outputs: Vec<f64>) -> Result<Self> {
        Self::new(self.inputs.clone(), outputs, self.labels.clone())
    }
}

/// A fitted GP posterior.
#[derive(Debug, Clone)]
pub struct GpModel {
    spec: KernelSpec,
    noise_variance: f64,
    data: Dataset,
    /// Lower Cholesky factor of `K + (noise_variance + jitter)·I`.
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    pub fn fit(spec: &KernelSpec, noise_variance: f64, data: Dataset) -> Result<Self> {
        spec.validate()?;
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance {noise_variance} must be finite and nonnegative"
            )));
        }
        if !data.is_empty() {
            check_dim(spec.dim(), data.dim())?;
        }
        let mut k = kernel_matrix(spec, data.inputs())?;
        for i in 0..data.len() {
            k[(i, i)] += noise_variance;
        }
        let (chol, jitter) = cholesky_jittered(&k, &FIT_JITTER, "GP training covariance")?;
        let y = DVector::from_column_slice(data.outputs());
        let alpha = cho_solve(&chol, &y);
        Ok(GpModel {
            spec: spec.clone(),
            noise_variance,
            data,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if self.data.is_empty() {
            return Ok(0.0);
        }
        Ok(cross_vector(&self.spec, self.data.inputs(), x).dot(&self.alpha))
    }

    /// Posterior variance, clamped to `[0, k(x, x)]`.
    pub fn posterior_var(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let prior = self.spec.diag(x);
        if self.data.is_empty() {
            return Ok(prior);
        }
        let v = solve_lower(&self.chol, &cross_vector(&self.spec, self.data.inputs(), x));
        Ok((prior - v.norm_squared()).clamp(0.0, prior))
    }

    /// Posterior means and (clamped) variances at every row of `points`.
    pub fn predict(&self, points: &Points) -> Result<(Vec<f64>, Vec<f64>)> {
        if points.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        check_dim(self.dim(), points.dim())?;
        let prior: Vec<f64> = points.rows().map(|r| self.spec.diag(r)).collect();
        if self.data.is_empty() {
            return Ok((vec![0.0; points.len()], prior));
        }
        let kxs = cross_matrix(&self.spec, self.data.inputs(), points)?;
        let mean = kxs.tr_mul(&self.alpha);
        let v = solve_lower_mat(&self.chol, &kxs);
        let var = prior
            .iter()
            .zip(v.column_iter())
            .map(|(p, c)| (p - c.norm_squared()).clamp(0.0, *p))
            .collect();
        Ok((mean.iter().copied().collect(), var))
    }

    /// Joint posterior mean vector and covariance matrix over `points`.
    pub fn posterior_cov(&self, points: &Points) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if !points.is_empty() {
            check_dim(self.dim(), points.dim())?;
        }
        let prior = kernel_matrix(&self.spec, points)?;
        if self.data.is_empty() {
            return Ok((DVector::zeros(points.len()), prior));
        }
        let kxs = cross_matrix(&self.spec, self.data.inputs(), points)?;
        let mean = kxs.tr_mul(&self.alpha);
        let v = solve_lower_mat(&self.chol, &kxs);
        let mut cov = prior - v.tr_mul(&v);
        // restore exact symmetry lost to rounding
        let m = cov.nrows();
        for i in 0..m {
            for j in 0..i {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        Ok((mean, cov))
    }

    /// Conditions on extra (typically fantasized) observations by extending
    /// the Cholesky factor with one block. Falls back to a full refit when the
    /// block cannot be factorized at the current jitter.
    pub fn condition_fantasy(&self, new_inputs: &Points, new_outputs: &[f64]) -> Result<GpModel> {
        let m = new_inputs.len();
        if m == 0 {
            return Err(Error::InvalidArgument(
                "fantasy conditioning needs at least one point".into(),
            ));
        }
        if m != new_outputs.len() {
            return Err(Error::InvalidArgument(format!(
                "{m} fantasy inputs but {} outputs",
                new_outputs.len()
            )));
        }
        check_dim(self.dim(), new_inputs.dim())?;

        let mut data = self.data.clone();
        let first = data.next_label();
        for (i, (x, &y)) in new_inputs.rows().zip(new_outputs).enumerate() {
            data.push(x, y, first + i as u64)?;
        }

        let n = self.data.len();
        let mut k22 = kernel_matrix(&self.spec, new_inputs)?;
        for i in 0..m {
            k22[(i, i)] += self.noise_variance + self.jitter;
        }
        let (l21t, schur) = if n == 0 {
            (DMatrix::zeros(0, m), k22)
        } else {
            let k12 = cross_matrix(&self.spec, self.data.inputs(), new_inputs)?;
            let l21t = solve_lower_mat(&self.chol, &k12);
            let schur = k22 - l21t.tr_mul(&l21t);
            (l21t, schur)
        };
        let l22 = match nalgebra::Cholesky::new(schur) {
            Some(c) => c.unpack(),
            None => return GpModel::fit(&self.spec, self.noise_variance, data),
        };

        let mut chol = DMatrix::zeros(n + m, n + m);
        chol.view_mut((0, 0), (n, n)).copy_from(&self.chol);
        chol.view_mut((n, 0), (m, n)).copy_from(&l21t.transpose());
        chol.view_mut((n, n), (m, m)).copy_from(&l22);
        let alpha = cho_solve(&chol, &DVector::from_column_slice(data.outputs()));
        Ok(GpModel {
            spec: self.spec.clone(),
            noise_variance: self.noise_variance,
            data,
            chol,
            alpha,
            jitter: self.jitter,
        })
    }

    /// `log p(y | X)` under the fitted kernel and noise.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.data.len() as f64;
        let y = DVector::from_column_slice(self.data.outputs());
        -0.5 * y.dot(&self.alpha)
            - 0.5 * log_det_from_cholesky(&self.chol)
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Convenience free functions mirroring the method API.
pub fn fit(spec: &KernelSpec, noise_variance: f64, data: Dataset) -> Result<GpModel> {
    GpModel::fit(spec, noise_variance, data)
}

pub fn posterior_mean(model: &GpModel, x: &[f64]) -> Result<f64> {
    model.posterior_mean(x)
}

pub fn posterior_var(model: &GpModel, x: &[f64]) -> Result<f64> {
    model.posterior_var(x)
}

pub fn condition_fantasy(model: &GpModel, new_inputs: &Points, new_outputs: &[f64]) -> Result<GpModel> {
    model.condition_fantasy(new_inputs, new_outputs)
}

pub fn log_marginal_likelihood(model: &GpModel) -> f64 {
    model.log_marginal_likelihood()
}

#[cfg(test)]
mod tests;
