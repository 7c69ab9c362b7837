//! The least-squares functional `phi(v) = |F(v)|^2 / 2` and its gradient
//! `J(v)^T W F(v)`, where `W` holds the codomain weights.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::Result;
use crate::problems::{ResidualProblem, FD_RELATIVE_STEP};

pub fn phi(problem: &ResidualProblem, v: &DVector<f64>) -> Result<f64> {
    let f = problem.eval_residual(v)?;
    let norm = problem.residual_norm(&f);
    Ok(0.5 * norm * norm)
}

pub fn grad_phi(problem: &ResidualProblem, v: &DVector<f64>) -> Result<DVector<f64>> {
    let f = problem.eval_residual(v)?;
    gradient_from_residual(problem, v, &f)
}

/// Gradient when `F(v)` is already known.
pub(crate) fn gradient_from_residual(
    problem: &ResidualProblem,
    v: &DVector<f64>,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    let jac = problem.eval_jacobian(v)?;
    Ok(jac.matrix.tr_mul(&problem.weight_residual(f)))
}

/// `phi`, `F` and the gradient in one pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub residual: DVector<f64>,
    pub residual_norm: f64,
    pub phi: f64,
    pub gradient: DVector<f64>,
}

pub fn evaluate(problem: &ResidualProblem, v: &DVector<f64>) -> Result<Evaluation> {
    let residual = problem.eval_residual(v)?;
    let residual_norm = problem.residual_norm(&residual);
    let gradient = gradient_from_residual(problem, v, &residual)?;
    Ok(Evaluation {
        phi: 0.5 * residual_norm * residual_norm,
        residual,
        residual_norm,
        gradient,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheckReport {
    pub point: Vec<f64>,
    pub analytic_gradient: Vec<f64>,
    pub numeric_gradient: Vec<f64>,
    /// `max_i |a_i - g_i| / (1 + |g_i|)` with `g` the numeric gradient.
    pub max_relative_error: f64,
}

/// Compares [`grad_phi`] with central differences of `phi`.
///
/// The difference `phi(v + h e_i) - phi(v - h e_i)` is accumulated as
/// `sum_k w_k (F+_k - F-_k)(F+_k + F-_k) / 2`, which equals the difference of
/// the two squared norms but never subtracts two large `phi` values.
pub fn check_gradient(problem: &ResidualProblem, v: &DVector<f64>) -> Result<GradientCheckReport> {
    let analytic = grad_phi(problem, v)?;
    let weights = problem.map().codomain_weights();
    let n = v.len();
    let mut numeric = DVector::zeros(n);
    let mut probe = v.clone();
    for i in 0..n {
        let h = FD_RELATIVE_STEP * (1.0 + v[i].abs());
        let plus = v[i] + h;
        let minus = v[i] - h;
        probe[i] = plus;
        let f_plus = problem.eval_residual(&probe)?;
        probe[i] = minus;
        let f_minus = problem.eval_residual(&probe)?;
        probe[i] = v[i];
        let diff: f64 = f_plus
            .iter()
            .zip(f_minus.iter())
            .enumerate()
            .map(|(k, (a, b))| {
                let w = weights.map_or(1.0, |w| w[k]);
                0.5 * w * (a - b) * (a + b)
            })
            .sum();
        numeric[i] = diff / (plus - minus);
    }
    let max_relative_error = analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, g)| (a - g).abs() / (1.0 + g.abs()))
        .fold(0.0, f64::max);
    Ok(GradientCheckReport {
        point: v.iter().copied().collect(),
        analytic_gradient: analytic.iter().copied().collect(),
        numeric_gradient: numeric.iter().copied().collect(),
        max_relative_error,
    })
}
