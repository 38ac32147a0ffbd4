//! Covariance functions and Gram matrices.
//!
//! Three families are supported: the linear kernel `σ² xᵀx'`, the Gaussian
//! (squared-exponential) kernel with per-dimension lengthscales, and Matérn-ν
//! for the half-integer smoothness values that have closed forms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{check_dim, Points};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Linear,
    #[serde(alias = "gaussian", alias = "rbf", alias = "se")]
    GaussianArd,
    Matern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// One per input dimension. Ignored by the linear kernel except for its
    /// length, which fixes the input dimension.
    pub lengthscales: Vec<f64>,
    #[serde(rename = "variance")]
    pub output_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

const MATERN_NUS: [f64; 3] = [0.5, 1.5, 2.5];

impl KernelSpec {
    pub fn gaussian(lengthscales: Vec<f64>, output_variance: f64) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::GaussianArd,
            lengthscales,
            output_variance,
            nu: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian_iso(dim: usize, lengthscale: f64, output_variance: f64) -> Result<Self> {
        Self::gaussian(vec![lengthscale; dim], output_variance)
    }

    pub fn matern(nu: f64, lengthscales: Vec<f64>, output_variance: f64) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::Matern,
            lengthscales,
            output_variance,
            nu: Some(nu),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(dim: usize, output_variance: f64) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::Linear,
            lengthscales: vec![1.0; dim],
            output_variance,
            nu: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidKernel("no input dimensions".into()));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidKernel(format!("lengthscale {l} is not positive")));
        }
        if !(self.output_variance.is_finite() && self.output_variance > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "output variance {} is not positive",
                self.output_variance
            )));
        }
        if self.family == KernelFamily::Matern {
            match self.nu {
                Some(nu) if MATERN_NUS.contains(&nu) => {}
                Some(nu) if nu > 0.0 => {
                    return Err(Error::Unsupported(format!(
                        "Matérn nu = {nu}; only 0.5, 1.5 and 2.5 have closed forms"
                    )))
                }
                Some(nu) => return Err(Error::InvalidKernel(format!("Matérn nu = {nu} must be > 0"))),
                None => return Err(Error::InvalidKernel("Matérn kernel requires nu".into())),
            }
        }
        Ok(())
    }

    /// `k(x, x)`, which does not depend on `x` for the stationary families.
    pub fn diag(&self, x: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Linear => self.output_variance * x.iter().map(|v| v * v).sum::<f64>(),
            _ => self.output_variance,
        }
    }

    /// Squared distance with per-dimension lengthscale scaling.
    fn scaled_sq_dist(&self, x: &[f64], x2: &[f64]) -> f64 {
        x.iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum()
    }

    fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Linear => self.output_variance * x.iter().zip(x2).map(|(a, b)| a * b).sum::<f64>(),
            KernelFamily::GaussianArd => self.output_variance * (-0.5 * self.scaled_sq_dist(x, x2)).exp(),
            KernelFamily::Matern => {
                let r = self.scaled_sq_dist(x, x2).sqrt();
                let nu = self.nu.unwrap_or(2.5);
                let shape = if nu == 0.5 {
                    (-r).exp()
                } else if nu == 1.5 {
                    let s = 3f64.sqrt() * r;
                    (1.0 + s) * (-s).exp()
                } else {
                    let s = 5f64.sqrt() * r;
                    (1.0 + s + s * s / 3.0) * (-s).exp()
                };
                self.output_variance * shape
            }
        }
    }
}

pub fn eval_kernel(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    check_dim(spec.dim(), x.len())?;
    check_dim(spec.dim(), x2.len())?;
    Ok(spec.eval_unchecked(x, x2))
}

/// Symmetric Gram matrix over the rows of `points`.
pub fn kernel_matrix(spec: &KernelSpec, points: &Points) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n > 0 {
        check_dim(spec.dim(), points.dim())?;
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = points.row(i);
        for j in 0..=i {
            let v = spec.eval_unchecked(xi, points.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Cross-covariance matrix with `a.len()` rows and `b.len()` columns.
pub fn cross_matrix(spec: &KernelSpec, a: &Points, b: &Points) -> Result<DMatrix<f64>> {
    if !a.is_empty() {
        check_dim(spec.dim(), a.dim())?;
    }
    if !b.is_empty() {
        check_dim(spec.dim(), b.dim())?;
    }
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        spec.eval_unchecked(a.row(i), b.row(j))
    }))
}

/// Column vector `[k(x, x_i)]_i` over the rows of `points`.
pub(crate) fn cross_vector(spec: &KernelSpec, points: &Points, x: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(points.len(), points.rows().map(|r| spec.eval_unchecked(r, x)))
}

/// Lipschitz constant of the posterior standard deviation with respect to the
/// L1 distance.
pub fn lipschitz_sigma(spec: &KernelSpec) -> Result<f64> {
    match spec.family {
        KernelFamily::Linear => Ok(1.0),
        KernelFamily::GaussianArd => Ok(std::f64::consts::SQRT_2 / isotropic_lengthscale(spec)?),
        KernelFamily::Matern => {
            let nu = spec
                .nu
                .ok_or_else(|| Error::InvalidKernel("Matérn kernel requires nu".into()))?;
            if nu <= 1.0 {
                return Err(Error::Unsupported(format!(
                    "Lipschitz constant of sigma needs Matérn nu > 1, got {nu}"
                )));
            }
            let l = isotropic_lengthscale(spec)?;
            Ok(std::f64::consts::SQRT_2 / l * (nu / (nu - 1.0)).sqrt())
        }
    }
}

fn isotropic_lengthscale(spec: &KernelSpec) -> Result<f64> {
    let l = spec.lengthscales[0];
    if spec.lengthscales.iter().any(|&v| v != l) {
        return Err(Error::Unsupported(
            "Lipschitz constant of sigma is defined for isotropic lengthscales only".into(),
        ));
    }
    Ok(l)
}
