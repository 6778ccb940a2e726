//! Independent numeric verification of the convergence-optimum statements by
//! direct constrained minimization over the probability simplex.
//!
//! The objectives here all have the form f(p) = -sum_i w_i log p_i with
//! nonnegative weights, minimized over the simplex. The solver is a
//! multiplicative exponentiated-gradient iteration that never leaves the
//! simplex; it is the brute-force oracle the closed forms are checked
//! against, so it deliberately uses only the gradient, never the known
//! answer.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::loss::{check_alpha, l_extra, supcon_at_fixed_psup};

/// Probability floor keeping every slot strictly positive. This also bounds
/// how tight a convergence tolerance can be satisfied: the floored zero-weight
/// slots retain a combined mass of about (slots * floor), which holds the
/// stationarity measure of the weighted slots near w_max * slots * floor.
/// Tolerances at or below ~1e-11 are therefore unreachable by construction.
const PROB_FLOOR: f64 = 1e-12;

const MAX_ITERATIONS: usize = 10_000;

/// Exponentiated-gradient step applied to the infinity-normalized centered
/// gradient. Normalization bounds every multiplicative change to e^(+-step)
/// per iteration; a raw step on this objective family explodes whenever a
/// slot sits far below its optimum (the gradient there is -w/p).
const EG_STEP: f64 = 0.5;

/// A point on the probability simplex together with the objective value the
/// solver reached there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexSolution {
    pub probabilities: Vec<f64>,
    pub achieved_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize -sum_i weights[i] * log p_i over a simplex with `n_slots` slots.
/// Slots beyond `weights.len()` carry zero weight. Convergence is declared
/// when the largest simplex-KKT stationarity violation max_i |p_i (g_i -
/// lambda)| falls below `tol`, with lambda the probability-weighted mean
/// gradient.
fn minimize_weighted_log(weights: &[f64], n_slots: usize, tol: f64) -> Result<SimplexSolution> {
    if weights.is_empty() || weights.len() > n_slots {
        return Err(CoreError::InvalidArgument(format!(
            "{} weighted slots do not fit a {n_slots}-slot simplex",
            weights.len()
        )));
    }
    if weights.iter().any(|&w| w <= 0.0 || !w.is_finite()) {
        return Err(CoreError::InvalidArgument(
            "objective weights must be positive and finite".into(),
        ));
    }
    if tol <= 0.0 || tol.is_nan() {
        return Err(CoreError::InvalidArgument(format!(
            "tolerance {tol} must be positive"
        )));
    }

    let total_weight: f64 = weights.iter().sum();
    let grad = |p: f64, w: f64| -> f64 { -w / p };

    let mut p = vec![1.0 / n_slots as f64; n_slots];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;

        // lambda = sum_i p_i g_i; for this objective each weighted slot
        // contributes exactly -w_i.
        let lambda: f64 = -total_weight;
        let mut viol: f64 = 0.0;
        let mut grad_norm: f64 = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            let w = weights.get(i).copied().unwrap_or(0.0);
            let centered = grad(pi, w) - lambda;
            viol = viol.max((pi * centered).abs());
            grad_norm = grad_norm.max(centered.abs());
        }
        if viol < tol {
            converged = true;
            break;
        }

        // p_i <- p_i exp(-step (g_i - lambda) / ||g - lambda||_inf), then
        // renormalize.
        let step = EG_STEP / grad_norm.max(f64::MIN_POSITIVE);
        let mut sum = 0.0;
        for (i, pi) in p.iter_mut().enumerate() {
            let w = weights.get(i).copied().unwrap_or(0.0);
            let expo = -step * (grad(*pi, w) - lambda);
            *pi = (*pi * expo.exp()).max(PROB_FLOOR);
            sum += *pi;
        }
        for pi in &mut p {
            *pi /= sum;
        }
    }

    let achieved_loss = weights
        .iter()
        .zip(&p)
        .map(|(&w, &pi)| -w * pi.ln())
        .sum::<f64>();

    Ok(SimplexSolution {
        probabilities: p,
        achieved_loss,
        iterations,
        converged,
    })
}

/// Minimize the converged supervised-contrast objective
/// -(1/K) sum_{i<K} log p_i over an `m_total`-slot simplex. The first
/// `k_positives` slots are the positives; at the optimum each carries 1/K.
pub fn optimal_supcon_distribution(
    k_positives: usize,
    m_total: usize,
    tol: f64,
) -> Result<SimplexSolution> {
    if k_positives == 0 || k_positives > m_total {
        return Err(CoreError::InvalidArgument(format!(
            "k_positives = {k_positives} must lie in 1..={m_total}"
        )));
    }
    let w = vec![1.0 / k_positives as f64; k_positives];
    minimize_weighted_log(&w, m_total, tol)
}

/// Minimize the converged parametric objective
/// -log p_center - alpha sum_{i<K} log p_i over a simplex with one center
/// slot (index 0) followed by `m_total` sample slots, of which the first
/// `k_positives` are positives. At the optimum the center carries
/// 1/(1 + alpha K) and each positive alpha/(1 + alpha K).
pub fn optimal_paco_distribution(
    alpha: f64,
    k_positives: usize,
    m_total: usize,
    tol: f64,
) -> Result<SimplexSolution> {
    check_alpha(alpha)?;
    if k_positives == 0 || k_positives > m_total {
        return Err(CoreError::InvalidArgument(format!(
            "k_positives = {k_positives} must lie in 1..={m_total}"
        )));
    }
    let mut w = Vec::with_capacity(1 + k_positives);
    w.push(1.0);
    w.extend(std::iter::repeat_n(alpha, k_positives));
    minimize_weighted_log(&w, m_total + 1, tol)
}

/// The analytic minimizer of the extra term: 1 / (1 + alpha K*). Valid for
/// non-integer K*, which the simplex oracles cannot represent.
pub fn l_extra_argmin(alpha: f64, k_star: f64) -> f64 {
    1.0 / (1.0 + alpha * k_star)
}

/// Sample the extra term on a uniform open grid of (0, 1): p_j = j / (n + 1).
pub fn l_extra_curve(alpha: f64, k_star: f64, grid_points: usize) -> Result<Vec<(f64, f64)>> {
    if grid_points < 3 {
        return Err(CoreError::InvalidArgument(format!(
            "grid_points = {grid_points} must be at least 3"
        )));
    }
    let denom = (grid_points + 1) as f64;
    (1..=grid_points)
        .map(|j| {
            let p = j as f64 / denom;
            Ok((p, l_extra(p, alpha, k_star)?))
        })
        .collect()
}

/// Sample the fixed-center-mass contrast value on the same open grid.
pub fn eq8_curve(alpha: f64, k_star: f64, grid_points: usize) -> Result<Vec<(f64, f64)>> {
    if grid_points < 3 {
        return Err(CoreError::InvalidArgument(format!(
            "grid_points = {grid_points} must be at least 3"
        )));
    }
    let denom = (grid_points + 1) as f64;
    (1..=grid_points)
        .map(|j| {
            let p = j as f64 / denom;
            Ok((p, supcon_at_fixed_psup(p, alpha, k_star)?))
        })
        .collect()
}

/// The grid point with the smallest value.
pub fn curve_argmin(curve: &[(f64, f64)]) -> Option<(f64, f64)> {
    curve
        .iter()
        .copied()
        .reduce(|best, cur| if cur.1 < best.1 { cur } else { best })
}
