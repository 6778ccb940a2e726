//! Scalar analysis functions for the balanced-setting behavior of the
//! parametric loss: the extra term separating it from fixed-weight multi-task
//! learning, and the contrast value pinned at a given center mass.

use crate::error::{CoreError, Result};

/// L_extra(p) = -log(p) - alpha K* log(1 - p), the term the parametric loss
/// adds on top of the multi-task combination. Strictly convex on (0, 1) with
/// unique minimizer 1 / (1 + alpha K*).
pub fn l_extra(p_sup: f64, alpha: f64, k_star: f64) -> Result<f64> {
    if p_sup <= 0.0 || p_sup >= 1.0 || p_sup.is_nan() {
        return Err(CoreError::InvalidArgument(format!(
            "p_sup = {p_sup} outside the open interval (0, 1)"
        )));
    }
    if alpha * k_star <= 0.0 || (alpha * k_star).is_nan() {
        return Err(CoreError::InvalidArgument(format!(
            "alpha * k_star = {} must be positive",
            alpha * k_star
        )));
    }
    Ok(-p_sup.ln() - alpha * k_star * (1.0 - p_sup).ln())
}

/// The contrast value forced by a center mass p at the optimum:
/// -K* log( (alpha / (1 + alpha K*)) / (1 - p) ). Strictly decreasing in p,
/// crossing zero at p = 1 - alpha / (1 + alpha K*).
pub fn supcon_at_fixed_psup(p: f64, alpha: f64, k_star: f64) -> Result<f64> {
    if p <= 0.0 || p >= 1.0 || p.is_nan() {
        return Err(CoreError::InvalidArgument(format!(
            "p = {p} outside the open interval (0, 1)"
        )));
    }
    let pair = alpha / (1.0 + alpha * k_star);
    Ok(-k_star * (pair / (1.0 - p)).ln())
}
