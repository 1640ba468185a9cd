//! Scene-level error and timing metrics.

use crate::error::{invalid, Result};
use crate::linalg::Matrix;

/// How the Frobenius norm of the abundance error is normalised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseConvention {
    /// `‖A − Â‖_F / √(N·R)`
    #[default]
    RootMean,
    /// `‖A − Â‖_F / (N·R)`
    Literal,
}

/// Root-mean-square abundance error over all entries.
pub fn rmse(a_true: &Matrix, a_est: &Matrix) -> Result<f64> {
    rmse_with(a_true, a_est, RmseConvention::RootMean)
}

pub fn rmse_with(a_true: &Matrix, a_est: &Matrix, conv: RmseConvention) -> Result<f64> {
    if a_true.rows() != a_est.rows() || a_true.cols() != a_est.cols() {
        return Err(invalid!(
            "shape mismatch: {}x{} vs {}x{}",
            a_true.rows(),
            a_true.cols(),
            a_est.rows(),
            a_est.cols()
        ));
    }
    let count = (a_true.rows() * a_true.cols()) as f64;
    if count == 0.0 {
        return Err(invalid!("empty abundance matrices"));
    }
    let sq: f64 = a_true
        .as_slice()
        .iter()
        .zip(a_est.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let fro = libm::sqrt(sq);
    Ok(match conv {
        RmseConvention::RootMean => fro / libm::sqrt(count),
        RmseConvention::Literal => fro / count,
    })
}

/// Execution time relative to the FCLS baseline.
pub fn relative_execution_time(t_method: f64, t_fcls: f64) -> Result<f64> {
    if !(t_fcls > 0.0) || !t_fcls.is_finite() {
        return Err(invalid!("baseline time must be positive, got {t_fcls}"));
    }
    if !(t_method >= 0.0) {
        return Err(invalid!("method time must be nonnegative, got {t_method}"));
    }
    Ok(t_method / t_fcls)
}
