//! Ball-constrained descent on `phi` from the ball center.
//!
//! Every iterate stays in the closed ball. Steps are chosen by backtracking
//! until `phi(v + t d) <= phi(v) + sigma t <grad phi(v), d>`; with the default
//! steepest direction `d = -grad phi` this is the usual Armijo test.

use nalgebra::{DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::certificate::Ball;
use crate::error::{Error, Result};
use crate::functional::{evaluate, Evaluation};
use crate::problems::ResidualProblem;

/// Backtracking gives up once the trial step drops below this.
pub const STEP_UNDERFLOW: f64 = 1e-16;

/// Slack allowed on ball containment for reported points.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallPolicy {
    /// Project trial points that leave the ball radially back onto the sphere.
    #[default]
    ClipToBall,
    /// Treat trial points outside the ball as failed line-search trials.
    RejectOutside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentDirection {
    #[default]
    SteepestDescent,
    /// Least-squares solution of `J d = -F`, falling back to steepest descent
    /// when it is not a descent direction.
    GaussNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentConfig {
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub sufficient_decrease: f64,
    pub ball_policy: BallPolicy,
    pub direction: DescentDirection,
    pub record_trace: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-10,
            max_iterations: 10_000,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            sufficient_decrease: 1e-4,
            ball_policy: BallPolicy::ClipToBall,
            direction: DescentDirection::SteepestDescent,
            record_trace: false,
        }
    }
}

impl DescentConfig {
    pub fn gauss_newton() -> Self {
        Self {
            direction: DescentDirection::GaussNewton,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfiguration(what.to_string()));
        if self.residual_tolerance.is_nan() || self.residual_tolerance <= 0.0 {
            return bad("residual_tolerance must be positive");
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad("initial_step must be positive");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return bad("sufficient_decrease must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentStatus {
    Converged,
    MaxIterations,
    Stalled,
}

/// State at iteration `k` and the step accepted from it (0 on the final row).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub phi: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentResult {
    #[serde(serialize_with = "crate::serialize_dvector")]
    pub u: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub in_ball: bool,
    pub status: DescentStatus,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRecord>,
}

pub fn solve(
    problem: &ResidualProblem,
    ball: &Ball,
    config: &DescentConfig,
) -> Result<DescentResult> {
    config.validate()?;
    let mut v = ball.center().clone();
    let mut current = evaluate(problem, &v)?;
    let mut trace = Vec::new();
    let mut iterations = 0;

    let status = loop {
        if current.residual_norm <= config.residual_tolerance {
            break DescentStatus::Converged;
        }
        if iterations >= config.max_iterations {
            break DescentStatus::MaxIterations;
        }
        let gradient_norm = current.gradient.norm();
        if gradient_norm == 0.0 || !gradient_norm.is_finite() {
            break DescentStatus::Stalled;
        }
        let direction = search_direction(problem, &v, &current, config.direction)?;
        let slope = current.gradient.dot(&direction);

        let mut step = config.initial_step;
        let accepted = loop {
            if step < STEP_UNDERFLOW {
                break None;
            }
            let raw = &v + &direction * step;
            let trial = if ball.contains(&raw, 0.0) {
                raw
            } else {
                match config.ball_policy {
                    BallPolicy::ClipToBall => project(ball, raw),
                    BallPolicy::RejectOutside => {
                        step *= config.backtrack_factor;
                        continue;
                    }
                }
            };
            let next = evaluate(problem, &trial)?;
            if next.phi.is_finite()
                && next.phi <= current.phi + config.sufficient_decrease * step * slope
            {
                break Some((trial, next));
            }
            step *= config.backtrack_factor;
        };
        let Some((trial, next)) = accepted else {
            break DescentStatus::Stalled;
        };
        if config.record_trace {
            trace.push(TraceRecord {
                iteration: iterations,
                phi: current.phi,
                gradient_norm,
                step,
            });
        }
        v = trial;
        current = next;
        iterations += 1;
    };

    if config.record_trace {
        trace.push(TraceRecord {
            iteration: iterations,
            phi: current.phi,
            gradient_norm: current.gradient.norm(),
            step: 0.0,
        });
    }
    let in_ball = ball.contains(&v, CONTAINMENT_TOLERANCE);
    Ok(DescentResult {
        residual_norm: current.residual_norm,
        u: v,
        iterations,
        in_ball,
        status,
        trace,
    })
}

fn search_direction(
    problem: &ResidualProblem,
    v: &DVector<f64>,
    current: &Evaluation,
    kind: DescentDirection,
) -> Result<DVector<f64>> {
    let steepest = -&current.gradient;
    if kind == DescentDirection::SteepestDescent {
        return Ok(steepest);
    }
    let mut jac = problem.eval_jacobian(v)?.matrix;
    let mut rhs = -&current.residual;
    if let Some(w) = problem.map().codomain_weights() {
        for (i, mut row) in jac.row_iter_mut().enumerate() {
            let s = w[i].sqrt();
            row *= s;
            rhs[i] *= s;
        }
    }
    let svd = SVD::new(jac, true, true);
    let eps = f64::EPSILON * svd.singular_values.max() * (v.len().max(rhs.len()) as f64);
    match svd.solve(&rhs, eps) {
        Ok(d) if d.iter().all(|x| x.is_finite()) && current.gradient.dot(&d) < 0.0 => Ok(d),
        _ => Ok(steepest),
    }
}

/// Radial projection onto the closed ball.
fn project(ball: &Ball, w: DVector<f64>) -> DVector<f64> {
    let offset = &w - ball.center();
    let dist = offset.norm();
    if dist <= ball.radius() {
        return w;
    }
    let mut p = ball.center() + offset * (ball.radius() / dist);
    // rounding may leave the point a hair outside
    let over = (&p - ball.center()).norm();
    if over > ball.radius() {
        p = ball.center() + (&p - ball.center()) * (ball.radius() / over);
    }
    p
}

/// `|F(u)| <= tolerance` and `|u - x| <= r + 1e-12`.
pub fn verify_solution(
    problem: &ResidualProblem,
    u: &DVector<f64>,
    ball: &Ball,
    tolerance: f64,
) -> bool {
    match problem.eval_residual(u) {
        Ok(f) => problem.residual_norm(&f) <= tolerance && ball.contains(u, CONTAINMENT_TOLERANCE),
        Err(_) => false,
    }
}
