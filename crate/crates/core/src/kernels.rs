//! Positive kernels over per-band feature vectors (rows of the endmember
//! matrix) and their Gram matrices.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{dot, Matrix};

/// Denominator convention for the Gaussian kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianScale {
    /// `exp(−‖x−y‖² / (2σ²))`
    #[default]
    TwoSigma2,
    /// `exp(−‖x−y‖² / σ²)`
    Sigma2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum KernelSpec {
    Gaussian {
        sigma2: f64,
        #[serde(default, skip_serializing_if = "is_default_scale")]
        scale: GaussianScale,
    },
    Polynomial {
        degree: u32,
        #[serde(default)]
        offset: f64,
    },
}

fn is_default_scale(s: &GaussianScale) -> bool {
    *s == GaussianScale::TwoSigma2
}

impl KernelSpec {
    /// Gaussian kernel with the default `2σ²` denominator.
    pub fn gaussian(sigma2: f64) -> Self {
        KernelSpec::Gaussian {
            sigma2,
            scale: GaussianScale::TwoSigma2,
        }
    }

    /// `κ(x, y) = xᵀy`
    pub fn linear() -> Self {
        KernelSpec::Polynomial {
            degree: 1,
            offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { sigma2, .. } if !(sigma2 > 0.0 && sigma2.is_finite()) => Err(
                invalid!("gaussian bandwidth must be positive, got {sigma2}"),
            ),
            KernelSpec::Polynomial { degree, .. } if degree < 1 => {
                Err(invalid!("polynomial degree must be at least 1"))
            }
            KernelSpec::Polynomial { offset, .. } if !(offset >= 0.0 && offset.is_finite()) => Err(
                invalid!("polynomial offset must be nonnegative, got {offset}"),
            ),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(invalid!(
                "kernel arguments differ in length: {} vs {}",
                x.len(),
                y.len()
            ));
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma2, scale } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                let denom = match scale {
                    GaussianScale::TwoSigma2 => 2.0 * sigma2,
                    GaussianScale::Sigma2 => sigma2,
                };
                libm::exp(-d2 / denom)
            }
            KernelSpec::Polynomial { degree, offset } => {
                let base = dot(x, y) + offset;
                let mut acc = 1.0;
                for _ in 0..degree {
                    acc *= base;
                }
                acc
            }
        }
    }
}

/// `K_ij = κ(row_i, row_j)` over the rows of `rows`.
pub fn gram_matrix(k: &KernelSpec, rows: &Matrix) -> Matrix {
    let n = rows.rows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = k.eval_unchecked(rows.row(i), rows.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}
