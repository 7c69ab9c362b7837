//! Transformations of the dependent variable (`F -> A o F`, `A(0) = 0`) and of
//! the independent variable (`F = G o B`, so `G = F o B^-1`). Both keep the
//! zero set in correspondence while changing the constants a certificate sees,
//! which is what [`search_mu`] exploits.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{
    certify, quadratic_domination_constant, Ball, Certificate, CertificateMethod, CertifyConfig,
    SamplingConfig,
};
use crate::error::{Error, Result};
use crate::problems::{make_quadratic, QuadraticParams, ResidualMap, ResidualProblem};

const CUBIC_INVERSE_TOLERANCE: f64 = 1e-14;

/// Strictly monotone scalar map `A` with `A(0) = 0`, applied componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DependentTransform {
    /// `A(y) = alpha y`, `alpha != 0`
    LinearScale { alpha: f64 },
    /// `A(y) = y + beta y^3`, `beta >= 0`
    CubicPerturbation { beta: f64 },
}

impl DependentTransform {
    pub fn linear_scale(alpha: f64) -> Result<Self> {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "linear_scale needs a finite nonzero alpha, got {alpha}"
            )));
        }
        Ok(Self::LinearScale { alpha })
    }

    pub fn cubic_perturbation(beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cubic_perturbation needs a finite beta >= 0, got {beta}"
            )));
        }
        Ok(Self::CubicPerturbation { beta })
    }

    pub fn forward(&self, y: f64) -> f64 {
        match *self {
            Self::LinearScale { alpha } => alpha * y,
            Self::CubicPerturbation { beta } => y + beta * y * y * y,
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match *self {
            Self::LinearScale { alpha } => alpha,
            Self::CubicPerturbation { beta } => 1.0 + 3.0 * beta * y * y,
        }
    }

    pub fn inverse(&self, z: f64) -> f64 {
        match *self {
            Self::LinearScale { alpha } => z / alpha,
            Self::CubicPerturbation { beta } => invert_cubic(beta, z),
        }
    }

    fn label(&self) -> String {
        match self {
            Self::LinearScale { alpha } => format!("linear_scale(alpha={alpha})"),
            Self::CubicPerturbation { beta } => format!("cubic_perturbation(beta={beta})"),
        }
    }
}

/// Solves `y + beta y^3 = z` by Newton steps kept inside a sign bracket.
fn invert_cubic(beta: f64, z: f64) -> f64 {
    if beta == 0.0 || z == 0.0 || !z.is_finite() {
        return z;
    }
    // the root has the sign of z and |y| <= min(|z|, cbrt(|z| / beta))
    let bound = z.abs().min((z.abs() / beta).cbrt());
    let (mut lo, mut hi) = if z > 0.0 { (0.0, bound) } else { (-bound, 0.0) };
    let mut y = if z > 0.0 { hi } else { lo };
    for _ in 0..200 {
        let g = y + beta * y * y * y - z;
        if g == 0.0 {
            return y;
        }
        if g > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let newton = y - g / (1.0 + 3.0 * beta * y * y);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - y).abs() <= CUBIC_INVERSE_TOLERANCE * y.abs().max(1.0) {
            return next;
        }
        y = next;
    }
    y
}

/// Affine map of the domain, `B(v) = mu v + nu` coordinatewise, `mu != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum IndependentTransform {
    Scale { mu: f64 },
    Affine { mu: f64, nu: f64 },
}

impl IndependentTransform {
    pub fn scale(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(Self::Scale { mu })
    }

    pub fn affine(mu: f64, nu: f64) -> Result<Self> {
        check_mu(mu)?;
        if !nu.is_finite() {
            return Err(Error::InvalidParameter(
                "affine shift must be finite".into(),
            ));
        }
        Ok(Self::Affine { mu, nu })
    }

    pub fn mu(&self) -> f64 {
        match *self {
            Self::Scale { mu } | Self::Affine { mu, .. } => mu,
        }
    }

    pub fn shift(&self) -> f64 {
        match *self {
            Self::Scale { .. } => 0.0,
            Self::Affine { nu, .. } => nu,
        }
    }

    pub fn forward(&self, v: &DVector<f64>) -> DVector<f64> {
        let (mu, nu) = (self.mu(), self.shift());
        v.map(|x| mu * x + nu)
    }

    pub fn inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        let (mu, nu) = (self.mu(), self.shift());
        v.map(|x| (x - nu) / mu)
    }

    /// `B'(v)`, the same at every point.
    pub fn derivative(&self) -> f64 {
        self.mu()
    }

    /// `(B^-1)'`, the same at every point.
    pub fn inverse_derivative(&self) -> f64 {
        1.0 / self.mu()
    }

    /// `other o self`: apply `self` first, then `other`.
    pub fn then(&self, other: &Self) -> Self {
        let mu = other.mu() * self.mu();
        let nu = other.mu() * self.shift() + other.shift();
        if nu == 0.0 && matches!((self, other), (Self::Scale { .. }, Self::Scale { .. })) {
            Self::Scale { mu }
        } else {
            Self::Affine { mu, nu }
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Scale { mu } => format!("scale(mu={mu})"),
            Self::Affine { mu, nu } => format!("affine(mu={mu}, nu={nu})"),
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu == 0.0 || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "independent transforms need a finite nonzero mu, got {mu}"
        )));
    }
    Ok(())
}

/// Either kind of transform, as named in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    Dependent(DependentTransform),
    Independent(IndependentTransform),
}

#[derive(Debug)]
struct DependentComposite {
    transform: DependentTransform,
    inner: ResidualProblem,
    inverted: bool,
}

impl DependentComposite {
    fn outer(&self, y: f64) -> f64 {
        if self.inverted {
            self.transform.inverse(y)
        } else {
            self.transform.forward(y)
        }
    }

    fn outer_derivative(&self, y: f64) -> f64 {
        if self.inverted {
            1.0 / self.transform.derivative(self.transform.inverse(y))
        } else {
            self.transform.derivative(y)
        }
    }
}

impl ResidualMap for DependentComposite {
    fn name(&self) -> String {
        let inv = if self.inverted { "^-1" } else { "" };
        format!("{}{} o {}", self.transform.label(), inv, self.inner.name())
    }

    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        self.inner.map().residual(v).map(|y| self.outer(y))
    }

    fn jacobian(&self, v: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut jac = self.inner.map().jacobian(v)?;
        let f = self.inner.map().residual(v);
        for (i, mut row) in jac.row_iter_mut().enumerate() {
            row *= self.outer_derivative(f[i]);
        }
        Some(jac)
    }

    fn codomain_weights(&self) -> Option<&DVector<f64>> {
        self.inner.map().codomain_weights()
    }
}

/// `v -> A(F(v))`, Jacobian `diag(A'(F(v))) DF(v)`.
pub fn apply_dependent(
    transform: DependentTransform,
    problem: &ResidualProblem,
) -> ResidualProblem {
    ResidualProblem::new(DependentComposite {
        transform,
        inner: problem.clone(),
        inverted: false,
    })
}

/// `G = A^-1 o F`, so that `A o G` reproduces `F`.
pub fn recover_problem_dependent(
    transform: DependentTransform,
    problem: &ResidualProblem,
) -> ResidualProblem {
    ResidualProblem::new(DependentComposite {
        transform,
        inner: problem.clone(),
        inverted: true,
    })
}

#[derive(Debug)]
struct IndependentComposite {
    transform: IndependentTransform,
    inner: ResidualProblem,
}

impl ResidualMap for IndependentComposite {
    fn name(&self) -> String {
        format!("{} o {}^-1", self.inner.name(), self.transform.label())
    }

    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        self.inner.map().residual(&self.transform.inverse(v))
    }

    fn jacobian(&self, v: &DVector<f64>) -> Option<DMatrix<f64>> {
        let jac = self.inner.map().jacobian(&self.transform.inverse(v))?;
        Some(jac * self.transform.inverse_derivative())
    }

    fn codomain_weights(&self) -> Option<&DVector<f64>> {
        self.inner.map().codomain_weights()
    }

    fn quadratic_coefficient(&self) -> Option<f64> {
        match self.transform {
            IndependentTransform::Scale { mu } => {
                self.inner.quadratic_coefficient().map(|k| k / (mu * mu))
            }
            IndependentTransform::Affine { .. } => None,
        }
    }
}

/// `G = F o B^-1`, so that `G o B` reproduces `F`. For `B(v) = mu v` and
/// `F(u) = lambda u^2 - 1` this is `G(v) = (lambda / mu^2) v^2 - 1`.
pub fn recover_problem_independent(
    transform: IndependentTransform,
    problem: &ResidualProblem,
) -> ResidualProblem {
    ResidualProblem::new(IndependentComposite {
        transform,
        inner: problem.clone(),
    })
}

/// Maps a zero `v*` of `G = F o B^-1` back to the zero `B^-1(v*)` of `F`.
pub fn pull_back_zero(transform: IndependentTransform, v_star: &DVector<f64>) -> DVector<f64> {
    transform.inverse(v_star)
}

/// Image of a ball under `B^-1`. Zeros of `G` found in `ball` pull back into it.
pub fn pull_back_ball(transform: IndependentTransform, ball: &Ball) -> Result<Ball> {
    Ball::new(
        transform.inverse(ball.center()),
        ball.radius() / transform.mu().abs(),
    )
}

/// `|A(g) / (g A'(g))|`. Whenever it is bounded below by `c_G / c` on the
/// ball, a domination constant `c` for `A o G` yields `c_G` for `G`.
pub fn dependent_condition_ratio(transform: DependentTransform, g: f64) -> Result<f64> {
    let slope = transform.derivative(g);
    if g == 0.0 || slope == 0.0 {
        return Err(Error::SingularRatio(format!(
            "ratio undefined at g={g} (A'(g)={slope})"
        )));
    }
    Ok((transform.forward(g) / (g * slope)).abs())
}

/// `(B^-1)'(B(v)) = 1 / B'(v)`, the independent-variable counterpart of
/// [`dependent_condition_ratio`].
pub fn independent_condition_value(transform: IndependentTransform, _v: f64) -> Result<f64> {
    let slope = transform.derivative();
    if slope == 0.0 {
        return Err(Error::SingularRatio("B'(v) vanishes".into()));
    }
    Ok(1.0 / slope)
}

/// The transformed quadratic test expressed on the original residual scale:
/// `|lambda x^2 - mu^2| <= r c(lambda, x, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescaledSides {
    pub c: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformedQuadraticCertificate {
    pub lambda: f64,
    pub mu: f64,
    /// Closed-form certificate of `G(v) = (lambda / mu^2) v^2 - 1` on `B_r(x)`.
    pub certificate: Certificate,
    pub rescaled: RescaledSides,
    /// Both forms reached the same verdict.
    pub forms_agree: bool,
}

pub fn transformed_certificate_quadratic(
    lambda: f64,
    mu: f64,
    x: f64,
    r: f64,
) -> Result<TransformedQuadraticCertificate> {
    let transform = IndependentTransform::scale(mu)?;
    let ball = Ball::scalar(x, r)?;
    let g = recover_problem_independent(transform, &make_quadratic(QuadraticParams { lambda }));
    let certificate = certify(
        &g,
        &ball,
        CertificateMethod::ClosedFormQuadratic,
        &SamplingConfig::default(),
    )?;
    let c = quadratic_domination_constant(lambda, x, r);
    let lhs = (lambda * x * x - mu * mu).abs();
    let rhs = r * c;
    let rescaled = RescaledSides {
        c,
        lhs,
        rhs,
        slack: rhs - lhs,
        passed: lhs <= rhs,
    };
    Ok(TransformedQuadraticCertificate {
        lambda,
        mu,
        forms_agree: certificate.passed == rescaled.passed,
        certificate,
        rescaled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpacing {
    Linear,
    #[default]
    Geometric,
}

/// Grid of `mu` values. Ranges containing 0 are split into a negative and a
/// positive branch with a small neighborhood of 0 removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuGrid {
    pub min: f64,
    pub max: f64,
    pub grid_size: usize,
    #[serde(default)]
    pub spacing: GridSpacing,
    /// Also evaluate `-mu` for every positive grid value.
    #[serde(default)]
    pub mirror_negative: bool,
}

/// Relative size of the neighborhood of 0 removed from a range that contains 0.
pub const ZERO_EXCLUSION_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuGridPoints {
    pub values: Vec<f64>,
    /// Radius of the removed neighborhood of 0, when the range contained 0.
    pub excluded_radius: Option<f64>,
}

impl MuGrid {
    pub fn new(min: f64, max: f64, grid_size: usize, spacing: GridSpacing) -> Self {
        Self {
            min,
            max,
            grid_size,
            spacing,
            mirror_negative: false,
        }
    }

    pub fn points(&self) -> Result<MuGridPoints> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(Error::InvalidConfiguration(format!(
                "mu range [{}, {}] is not a finite interval",
                self.min, self.max
            )));
        }
        if self.grid_size == 0 {
            return Err(Error::InvalidConfiguration(
                "mu grid_size must be at least 1".into(),
            ));
        }
        let mut excluded_radius = None;
        let mut values = if self.min <= 0.0 && 0.0 <= self.max {
            let delta = ZERO_EXCLUSION_FRACTION * self.min.abs().max(self.max.abs());
            excluded_radius = Some(delta);
            let neg = (self.min < -delta).then_some((-delta, self.min));
            let pos = (self.max > delta).then_some((delta, self.max));
            match (neg, pos) {
                (Some(n), Some(p)) => {
                    let n_count = self.grid_size / 2;
                    let p_count = self.grid_size - n_count;
                    let mut v = self.branch(n.1, n.0, n_count);
                    v.extend(self.branch(p.0, p.1, p_count));
                    v
                }
                (Some(n), None) => self.branch(n.1, n.0, self.grid_size),
                (None, Some(p)) => self.branch(p.0, p.1, self.grid_size),
                (None, None) => Vec::new(),
            }
        } else {
            self.branch(self.min, self.max, self.grid_size)
        };
        if self.mirror_negative {
            let mirrored: Vec<f64> = values.iter().filter(|&&m| m > 0.0).map(|m| -m).collect();
            values.extend(mirrored);
        }
        values.retain(|&m| m != 0.0 && m.is_finite());
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.is_empty() {
            return Err(Error::InvalidConfiguration(format!(
                "mu range [{}, {}] leaves no nonzero grid values",
                self.min, self.max
            )));
        }
        Ok(MuGridPoints {
            values,
            excluded_radius,
        })
    }

    /// `count` points from `lo` to `hi` (same sign, `lo <= hi`).
    fn branch(&self, lo: f64, hi: f64, count: usize) -> Vec<f64> {
        if count == 0 {
            return Vec::new();
        }
        if count == 1 || lo == hi {
            return vec![lo];
        }
        let last = (count - 1) as f64;
        (0..count)
            .map(|k| {
                if k + 1 == count {
                    return hi;
                }
                let t = k as f64 / last;
                match self.spacing {
                    GridSpacing::Linear => lo + (hi - lo) * t,
                    GridSpacing::Geometric => {
                        let sign = lo.signum();
                        let (a, b) = (lo.abs().ln(), hi.abs().ln());
                        sign * (a + (b - a) * t).exp()
                    }
                }
            })
            .collect()
    }
}

/// One row of a `mu` sweep. Values are those of the certificate of `mu^2 G`,
/// the residual scale on which `G(v) = (lambda/mu^2) v^2 - 1` reads
/// `|lambda x^2 - mu^2| <= r c(lambda, x, r)`. The verdict is the same as for `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepEntry {
    pub mu: f64,
    pub c: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformSearchResult {
    pub best_parameter: f64,
    /// Certificate of `G = F o B^-1` for the best `mu`, on `G`'s own scale.
    pub certificate: Certificate,
    pub sweep: Vec<SweepEntry>,
    pub any_passed: bool,
    pub excluded_radius: Option<f64>,
}

impl TransformSearchResult {
    pub fn best_entry(&self) -> &SweepEntry {
        self.sweep
            .iter()
            .find(|e| e.mu == self.best_parameter)
            .expect("best parameter is taken from the sweep")
    }
}

/// Certifies `G = F o B_mu^-1` on `ball` for every grid value of `mu` and
/// picks the passing entry with the largest slack; ties go to the smallest
/// `|mu - 1|`, then to the smaller `mu`.
pub fn search_mu(
    problem: &ResidualProblem,
    ball: &Ball,
    grid: &MuGrid,
    config: &CertifyConfig,
) -> Result<TransformSearchResult> {
    let points = grid.points()?;
    let evaluated: Vec<(SweepEntry, Certificate)> = points
        .values
        .par_iter()
        .map(|&mu| {
            let transform = IndependentTransform::scale(mu)?;
            let g = recover_problem_independent(transform, problem);
            let cert = certify(&g, ball, config.method, &config.sampling)?;
            let scale = mu * mu;
            let entry = SweepEntry {
                mu,
                c: scale * cert.c,
                lhs: scale * cert.lhs,
                rhs: scale * cert.rhs,
                slack: scale * cert.slack,
                passed: cert.passed,
            };
            Ok((entry, cert))
        })
        .collect::<Result<_>>()?;

    let any_passed = evaluated.iter().any(|(e, _)| e.passed);
    let (best, cert) = evaluated
        .iter()
        .filter(|(e, _)| e.passed || !any_passed)
        .min_by(|(a, _), (b, _)| {
            b.slack
                .total_cmp(&a.slack)
                .then((a.mu - 1.0).abs().total_cmp(&(b.mu - 1.0).abs()))
                .then(a.mu.total_cmp(&b.mu))
        })
        .expect("grid is non-empty");
    Ok(TransformSearchResult {
        best_parameter: best.mu,
        certificate: cert.clone(),
        sweep: evaluated.iter().map(|(e, _)| *e).collect(),
        any_passed,
        excluded_radius: points.excluded_radius,
    })
}
