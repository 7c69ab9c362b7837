//! Residual maps `F: R^n -> R^m` whose zeros encode the equation to be solved,
//! together with the built-in problem families.
//!
//! Both the domain and the codomain are finite-dimensional coordinate spaces.
//! The domain always carries the Euclidean inner product; the codomain may
//! carry positive diagonal weights (for example quadrature weights of a
//! discretization), in which case every norm of a residual is the weighted one.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative step used by every central-difference fallback in this crate.
pub const FD_RELATIVE_STEP: f64 = 1e-6;

/// Evaluation rules of a residual map.
///
/// Implementors may assume `v` has length [`input_dim`](Self::input_dim);
/// [`ResidualProblem`] performs the shape checks.
pub trait ResidualMap: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    fn residual(&self, v: &DVector<f64>) -> DVector<f64>;

    /// Analytic Jacobian (`m x n`). `None` selects the finite-difference fallback.
    fn jacobian(&self, _v: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Diagonal weights of the codomain norm; `None` means unweighted.
    fn codomain_weights(&self) -> Option<&DVector<f64>> {
        None
    }

    /// Coefficient `k` when the map is exactly `u -> k u^2 - 1` on `R`.
    fn quadratic_coefficient(&self) -> Option<f64> {
        None
    }
}

/// A Jacobian evaluation together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub matrix: DMatrix<f64>,
    /// `true` when produced by central finite differences.
    pub approximate: bool,
}

/// Shared, immutable handle to a residual map with checked evaluation.
#[derive(Clone)]
pub struct ResidualProblem {
    map: Arc<dyn ResidualMap>,
}

impl fmt::Debug for ResidualProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResidualProblem")
            .field("name", &self.map.name())
            .field("n", &self.map.input_dim())
            .field("m", &self.map.output_dim())
            .finish()
    }
}

impl ResidualProblem {
    pub fn new<M: ResidualMap + 'static>(map: M) -> Self {
        Self { map: Arc::new(map) }
    }

    pub fn from_arc(map: Arc<dyn ResidualMap>) -> Self {
        Self { map }
    }

    pub fn map(&self) -> &dyn ResidualMap {
        self.map.as_ref()
    }

    pub fn name(&self) -> String {
        self.map.name()
    }

    pub fn input_dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.map.output_dim()
    }

    pub fn quadratic_coefficient(&self) -> Option<f64> {
        self.map.quadratic_coefficient()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        let probe = DVector::zeros(self.input_dim());
        self.map.jacobian(&probe).is_some()
    }

    pub fn check_input(&self, v: &DVector<f64>) -> Result<()> {
        let expected = self.input_dim();
        if v.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: v.len(),
            });
        }
        Ok(())
    }

    pub fn eval_residual(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(v)?;
        Ok(self.map.residual(v))
    }

    pub fn eval_jacobian(&self, v: &DVector<f64>) -> Result<Jacobian> {
        self.check_input(v)?;
        Ok(match self.map.jacobian(v) {
            Some(matrix) => Jacobian {
                matrix,
                approximate: false,
            },
            None => Jacobian {
                matrix: finite_difference_jacobian(self.map.as_ref(), v),
                approximate: true,
            },
        })
    }

    /// Norm of a residual vector in this problem's codomain.
    pub fn residual_norm(&self, f: &DVector<f64>) -> f64 {
        weighted_norm(f, self.map.codomain_weights())
    }

    /// Applies the codomain weights to `f` (identity when unweighted).
    pub fn weight_residual(&self, f: &DVector<f64>) -> DVector<f64> {
        match self.map.codomain_weights() {
            Some(w) => f.component_mul(w),
            None => f.clone(),
        }
    }
}

pub(crate) fn weighted_norm(f: &DVector<f64>, weights: Option<&DVector<f64>>) -> f64 {
    match weights {
        Some(w) => f
            .iter()
            .zip(w.iter())
            .map(|(fi, wi)| wi * fi * fi)
            .sum::<f64>()
            .sqrt(),
        None => f.norm(),
    }
}

/// Central differences with per-coordinate step `1e-6 * (1 + |v_i|)`.
///
/// The divisor is the representable distance between the two perturbed
/// points, not the nominal `2h`.
pub fn finite_difference_jacobian(map: &dyn ResidualMap, v: &DVector<f64>) -> DMatrix<f64> {
    let n = map.input_dim();
    let m = map.output_dim();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = v.clone();
    for j in 0..n {
        let h = FD_RELATIVE_STEP * (1.0 + v[j].abs());
        let plus = v[j] + h;
        let minus = v[j] - h;
        probe[j] = plus;
        let f_plus = map.residual(&probe);
        probe[j] = minus;
        let f_minus = map.residual(&probe);
        probe[j] = v[j];
        let width = plus - minus;
        for i in 0..m {
            jac[(i, j)] = (f_plus[i] - f_minus[i]) / width;
        }
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadraticParams {
    pub lambda: f64,
}

/// `F(u) = lambda u^2 - 1` on `R`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    lambda: f64,
}

impl Quadratic {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl ResidualMap for Quadratic {
    fn name(&self) -> String {
        format!("quadratic(lambda={})", self.lambda)
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, self.lambda * v[0] * v[0] - 1.0)
    }

    fn jacobian(&self, v: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 2.0 * self.lambda * v[0]))
    }

    fn quadratic_coefficient(&self) -> Option<f64> {
        Some(self.lambda)
    }
}

/// Builds `F(u) = lambda u^2 - 1`. `lambda` must be finite; `lambda = 0`
/// gives the zero-free map `F = -1`.
pub fn make_quadratic(params: QuadraticParams) -> ResidualProblem {
    ResidualProblem::new(Quadratic {
        lambda: params.lambda,
    })
}

/// Second-order central-difference discretization of
/// `-u'' + gamma u^3 = f` on `[0, 1]` with `u(0) = u(1) = 0`.
#[derive(Debug, Clone)]
pub struct Bvp {
    gamma: f64,
    h: f64,
    forcing: DVector<f64>,
    weights: Option<DVector<f64>>,
}

impl Bvp {
    pub fn grid_points(&self) -> usize {
        self.forcing.len()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nonlinearity(&self) -> f64 {
        self.gamma
    }

    pub fn forcing(&self) -> &DVector<f64> {
        &self.forcing
    }

    /// Interior grid nodes `t_i = i h`, `i = 1..=N`.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.grid_points()).map(move |i| i as f64 * self.h)
    }
}

impl ResidualMap for Bvp {
    fn name(&self) -> String {
        format!("bvp(N={}, gamma={})", self.grid_points(), self.gamma)
    }

    fn input_dim(&self) -> usize {
        self.grid_points()
    }

    fn output_dim(&self) -> usize {
        self.grid_points()
    }

    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.grid_points();
        let inv_h2 = 1.0 / (self.h * self.h);
        DVector::from_fn(n, |i, _| {
            let left = if i == 0 { 0.0 } else { v[i - 1] };
            let right = if i + 1 == n { 0.0 } else { v[i + 1] };
            -(left - 2.0 * v[i] + right) * inv_h2 + self.gamma * v[i].powi(3) - self.forcing[i]
        })
    }

    fn jacobian(&self, v: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.grid_points();
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            jac[(i, i)] = 2.0 * inv_h2 + 3.0 * self.gamma * v[i] * v[i];
            if i > 0 {
                jac[(i, i - 1)] = -inv_h2;
            }
            if i + 1 < n {
                jac[(i, i + 1)] = -inv_h2;
            }
        }
        Some(jac)
    }

    fn codomain_weights(&self) -> Option<&DVector<f64>> {
        self.weights.as_ref()
    }
}

fn build_bvp(
    grid_points: usize,
    nonlinearity_coefficient: f64,
    forcing: impl Fn(f64) -> f64,
    weighted: bool,
) -> Result<Bvp> {
    if grid_points < 2 {
        return Err(Error::InvalidConfiguration(format!(
            "bvp needs at least 2 interior grid points, got {grid_points}"
        )));
    }
    if !nonlinearity_coefficient.is_finite() {
        return Err(Error::InvalidParameter(
            "bvp nonlinearity coefficient must be finite".into(),
        ));
    }
    let h = 1.0 / (grid_points as f64 + 1.0);
    let values = DVector::from_fn(grid_points, |i, _| forcing((i + 1) as f64 * h));
    let weights = weighted.then(|| DVector::from_element(grid_points, h));
    Ok(Bvp {
        gamma: nonlinearity_coefficient,
        h,
        forcing: values,
        weights,
    })
}

/// Discretized boundary-value problem with `grid_points` interior nodes and
/// the unweighted Euclidean codomain norm.
pub fn make_bvp(
    grid_points: usize,
    nonlinearity_coefficient: f64,
    forcing: impl Fn(f64) -> f64,
) -> Result<ResidualProblem> {
    build_bvp(grid_points, nonlinearity_coefficient, forcing, false).map(ResidualProblem::new)
}

/// Same as [`make_bvp`] but the codomain norm carries the quadrature weight
/// `h` on every node, approximating the `L^2(0, 1)` norm.
pub fn make_bvp_weighted(
    grid_points: usize,
    nonlinearity_coefficient: f64,
    forcing: impl Fn(f64) -> f64,
) -> Result<ResidualProblem> {
    build_bvp(grid_points, nonlinearity_coefficient, forcing, true).map(ResidualProblem::new)
}

/// Manufactured solution `u(t) = sin(pi t)`.
pub fn manufactured_solution(t: f64) -> f64 {
    (PI * t).sin()
}

/// Forcing that makes [`manufactured_solution`] exact for the continuous
/// problem: `f(t) = pi^2 sin(pi t) + gamma sin(pi t)^3`.
pub fn manufactured_forcing(nonlinearity_coefficient: f64) -> impl Fn(f64) -> f64 + Copy {
    move |t| {
        let s = (PI * t).sin();
        PI * PI * s + nonlinearity_coefficient * s.powi(3)
    }
}

/// Grid samples of [`manufactured_solution`] at the interior nodes.
pub fn manufactured_grid_solution(grid_points: usize) -> DVector<f64> {
    let h = 1.0 / (grid_points as f64 + 1.0);
    DVector::from_fn(grid_points, |i, _| {
        manufactured_solution((i + 1) as f64 * h)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn quadratic_residual_values() {
        let q1 = make_quadratic(QuadraticParams { lambda: 1.0 });
        assert_eq!(q1.eval_residual(&v(&[2.0])).unwrap()[0], 3.0);
        assert_eq!(q1.eval_residual(&v(&[1.0])).unwrap()[0], 0.0);
        let q2 = make_quadratic(QuadraticParams { lambda: 2.0 });
        assert_eq!(q2.eval_residual(&v(&[0.0])).unwrap()[0], -1.0);
    }

    #[test]
    fn quadratic_jacobian_values() {
        let q1 = make_quadratic(QuadraticParams { lambda: 1.0 });
        let j = q1.eval_jacobian(&v(&[2.0])).unwrap();
        assert!(!j.approximate);
        assert_eq!(j.matrix[(0, 0)], 4.0);
        assert_eq!(q1.eval_jacobian(&v(&[0.0])).unwrap().matrix[(0, 0)], 0.0);
    }

    #[test]
    fn quadratic_zeros() {
        for lambda in [0.5, 1.0, 2.0, 4.0] {
            let q = make_quadratic(QuadraticParams { lambda });
            let u = 1.0 / f64::sqrt(lambda);
            for s in [u, -u] {
                assert!(q.eval_residual(&v(&[s])).unwrap()[0].abs() <= 1e-12);
            }
        }
        let q4 = make_quadratic(QuadraticParams { lambda: 4.0 });
        assert_eq!(q4.eval_residual(&v(&[0.5])).unwrap()[0], 0.0);
        assert_eq!(q4.eval_residual(&v(&[-0.5])).unwrap()[0], 0.0);
    }

    #[test]
    fn zero_lambda_is_constant() {
        let q = make_quadratic(QuadraticParams { lambda: 0.0 });
        for x in [-3.0, 0.0, 1.0, 7.5] {
            assert_eq!(q.eval_residual(&v(&[x])).unwrap()[0], -1.0);
        }
    }

    #[test]
    fn shape_errors() {
        let q = make_quadratic(QuadraticParams { lambda: 1.0 });
        assert_eq!(
            q.eval_residual(&v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        );
        assert!(q.eval_jacobian(&v(&[])).is_err());
    }

    #[test]
    fn bvp_rejects_small_grids() {
        assert!(matches!(
            make_bvp(1, 0.0, |_| 0.0),
            Err(Error::InvalidConfiguration(_))
        ));
        assert!(make_bvp(2, 0.0, |_| 0.0).is_ok());
    }

    #[test]
    fn bvp_homogeneous_zero() {
        let p = make_bvp(10, 0.0, |_| 0.0).unwrap();
        let r = p.eval_residual(&DVector::zeros(10)).unwrap();
        assert_eq!(r.norm(), 0.0);
    }

    #[test]
    fn bvp_manufactured_residual_is_truncation_only() {
        for gamma in [0.0, 1.0] {
            let n = 64;
            let forcing = manufactured_forcing(gamma);
            let p = make_bvp(n, gamma, forcing).unwrap();
            let u = manufactured_grid_solution(n);
            let r = p.eval_residual(&u).unwrap();
            let f_norm =
                DVector::from_fn(n, |i, _| forcing((i + 1) as f64 / (n as f64 + 1.0))).norm();
            assert!(
                r.norm() <= 1e-2 * f_norm,
                "gamma={gamma}: {} vs {}",
                r.norm(),
                f_norm
            );
        }
    }

    #[test]
    fn bvp_weighted_norm_uses_spacing() {
        let p = make_bvp_weighted(3, 0.0, |_| 1.0).unwrap();
        let r = p.eval_residual(&DVector::zeros(3)).unwrap();
        assert_abs_diff_eq!(p.residual_norm(&r), (3.0 * 0.25f64).sqrt(), epsilon = 1e-15);
    }

    #[derive(Debug)]
    struct NoJacobian;

    impl ResidualMap for NoJacobian {
        fn name(&self) -> String {
            "no-jacobian".into()
        }
        fn input_dim(&self) -> usize {
            2
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, v[0] * v[1].sin())
        }
    }

    #[test]
    fn fallback_jacobian_is_flagged() {
        let p = ResidualProblem::new(NoJacobian);
        assert!(!p.has_analytic_jacobian());
        let x = v(&[1.5, 0.3]);
        let j = p.eval_jacobian(&x).unwrap();
        assert!(j.approximate);
        assert_abs_diff_eq!(j.matrix[(0, 0)], 0.3f64.sin(), epsilon = 1e-9);
        assert_abs_diff_eq!(j.matrix[(0, 1)], 1.5 * 0.3f64.cos(), epsilon = 1e-9);
    }
}
