//! Existence certificates on a closed ball `B_r(x)`.
//!
//! A certificate pairs a gradient-domination constant `c`, meaning
//! `|grad phi(v)| >= c |F(v)|` for all `v` in the ball, with the center test
//! `|F(x)| <= r c`. When both hold a zero of `F` lies in the ball. A small `c`
//! makes the first inequality easier and the second harder; the certificate
//! records the `slack = r c - |F(x)|` between them.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional;
use crate::problems::ResidualProblem;
use crate::sampling::{BallSampler, MAX_SAMPLES};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    #[serde(serialize_with = "crate::serialize_dvector")]
    center: DVector<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("ball center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn from_slice(center: &[f64], radius: f64) -> Result<Self> {
        Self::new(DVector::from_column_slice(center), radius)
    }

    pub fn scalar(center: f64, radius: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, center), radius)
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `|v - x| <= r + tolerance`.
    pub fn contains(&self, v: &DVector<f64>, tolerance: f64) -> bool {
        (v - &self.center).norm() <= self.radius + tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    ClosedFormQuadratic,
    Sampled,
}

impl std::fmt::Display for CertificateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ClosedFormQuadratic => "closed_form_quadratic",
            Self::Sampled => "sampled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub samples_per_axis: usize,
    pub residual_floor: f64,
    pub safety: f64,
    /// Upper bound on the number of sample points, itself capped at `10^6`.
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            samples_per_axis: 1001,
            residual_floor: 1e-12,
            safety: 0.9,
            max_samples: MAX_SAMPLES,
            seed: 42,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_axis < 2 {
            return Err(Error::InvalidConfiguration(format!(
                "samples_per_axis must be at least 2, got {}",
                self.samples_per_axis
            )));
        }
        if !(self.residual_floor > 0.0 && self.residual_floor.is_finite()) {
            return Err(Error::InvalidConfiguration(
                "residual_floor must be positive".into(),
            ));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidConfiguration(format!(
                "safety must lie in (0, 1], got {}",
                self.safety
            )));
        }
        if self.max_samples == 0 {
            return Err(Error::InvalidConfiguration(
                "max_samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Method plus sampling settings, as passed around by sweeps and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub method: CertificateMethod,
    pub sampling: SamplingConfig,
}

impl CertifyConfig {
    pub fn closed_form() -> Self {
        Self {
            method: CertificateMethod::ClosedFormQuadratic,
            sampling: SamplingConfig::default(),
        }
    }

    pub fn sampled(sampling: SamplingConfig) -> Self {
        Self {
            method: CertificateMethod::Sampled,
            sampling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub ball: Ball,
    pub c: f64,
    /// `|F(x)|`
    pub lhs: f64,
    /// `r c`
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
    pub method: CertificateMethod,
    pub sample_count: usize,
    /// Sampled constants are estimates, not proven lower bounds.
    pub advisory: bool,
}

impl Certificate {
    pub(crate) fn assemble(
        ball: Ball,
        c: f64,
        lhs: f64,
        method: CertificateMethod,
        sample_count: usize,
    ) -> Self {
        let rhs = ball.radius() * c;
        Self {
            ball,
            c,
            lhs,
            rhs,
            slack: rhs - lhs,
            passed: lhs <= rhs,
            method,
            sample_count,
            advisory: method == CertificateMethod::Sampled,
        }
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }

    /// `PASS|FAIL lhs=.. rhs=.. slack=.. c=.. method=..`
    pub fn verdict_line(&self) -> String {
        format!(
            "{} lhs={} rhs={} slack={} c={} method={}",
            self.verdict(),
            self.lhs,
            self.rhs,
            self.slack,
            self.c,
            self.method
        )
    }
}

/// Largest `c` with `|2 lambda v (lambda v^2 - 1)| >= c |lambda v^2 - 1|` on
/// `[x - r, x + r]`: `2|lambda|` times the distance from the interval to 0.
pub fn quadratic_domination_constant(lambda: f64, x: f64, r: f64) -> f64 {
    let distance = if x - r <= 0.0 && 0.0 <= x + r {
        0.0
    } else if 0.0 <= x - r {
        x - r
    } else {
        -x - r
    };
    2.0 * lambda.abs() * distance
}

/// `safety * min |grad phi(v)| / |F(v)|` over deterministic samples of the
/// ball, skipping points with `|F(v)| <= residual_floor`. Returns 0 when no
/// sample survives the floor.
pub fn domination_constant_sampled(
    problem: &ResidualProblem,
    ball: &Ball,
    config: &SamplingConfig,
) -> Result<f64> {
    sampled_constant(problem, ball, config).map(|(c, _)| c)
}

fn sampled_constant(
    problem: &ResidualProblem,
    ball: &Ball,
    config: &SamplingConfig,
) -> Result<(f64, usize)> {
    config.validate()?;
    problem.check_input(ball.center())?;
    let sampler = BallSampler::new(
        ball.center(),
        ball.radius(),
        config.samples_per_axis,
        config.max_samples,
        config.seed,
    );
    let (min_ratio, count) = (0..sampler.candidates())
        .into_par_iter()
        .filter_map(|k| sampler.point(k))
        .map(|v| {
            let f = problem.map().residual(&v);
            let norm = problem.residual_norm(&f);
            if norm <= config.residual_floor || !norm.is_finite() {
                return (f64::INFINITY, 1usize);
            }
            let grad = functional::gradient_from_residual(problem, &v, &f)
                .expect("sample has problem dimension");
            (grad.norm() / norm, 1usize)
        })
        .reduce(
            || (f64::INFINITY, 0),
            |(a, na), (b, nb)| (a.min(b), na + nb),
        );
    let c = if min_ratio.is_finite() {
        config.safety * min_ratio
    } else {
        0.0
    };
    Ok((c, count))
}

pub fn certify(
    problem: &ResidualProblem,
    ball: &Ball,
    method: CertificateMethod,
    sampling: &SamplingConfig,
) -> Result<Certificate> {
    problem.check_input(ball.center())?;
    let f_center = problem.eval_residual(ball.center())?;
    let lhs = problem.residual_norm(&f_center);
    match method {
        CertificateMethod::ClosedFormQuadratic => {
            let lambda = match (problem.quadratic_coefficient(), problem.input_dim()) {
                (Some(lambda), 1) => lambda,
                _ => {
                    return Err(Error::InvalidMethod(format!(
                        "closed_form_quadratic requires a quadratic problem, got {}",
                        problem.name()
                    )))
                }
            };
            let c = quadratic_domination_constant(lambda, ball.center()[0], ball.radius());
            Ok(Certificate::assemble(ball.clone(), c, lhs, method, 0))
        }
        CertificateMethod::Sampled => {
            let (c, count) = sampled_constant(problem, ball, sampling)?;
            Ok(Certificate::assemble(ball.clone(), c, lhs, method, count))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_bvp, make_quadratic, QuadraticParams};

    fn quad(lambda: f64) -> ResidualProblem {
        make_quadratic(QuadraticParams { lambda })
    }

    fn exact_sampling() -> SamplingConfig {
        SamplingConfig {
            safety: 1.0,
            ..SamplingConfig::default()
        }
    }

    #[test]
    fn closed_form_cases() {
        assert_eq!(quadratic_domination_constant(1.0, 2.0, 0.5), 3.0);
        assert_eq!(quadratic_domination_constant(1.0, 0.5, 1.0), 0.0);
        assert_eq!(quadratic_domination_constant(2.0, -3.0, 1.0), 8.0);
        assert_eq!(quadratic_domination_constant(-2.0, -3.0, 1.0), 8.0);
        // touching zero from either side is the straddle case
        assert_eq!(quadratic_domination_constant(1.0, 1.0, 1.0), 0.0);
        assert_eq!(quadratic_domination_constant(1.0, -1.0, 1.0), 0.0);
    }

    #[test]
    fn ball_validation() {
        assert!(Ball::scalar(0.0, 0.0).is_err());
        assert!(Ball::scalar(0.0, -1.0).is_err());
        assert!(Ball::scalar(f64::NAN, 1.0).is_err());
        assert!(Ball::scalar(0.0, 1e-300).is_ok());
    }

    #[test]
    fn sampled_matches_closed_form() {
        let ball = Ball::scalar(2.0, 0.5).unwrap();
        let c = domination_constant_sampled(&quad(1.0), &ball, &exact_sampling()).unwrap();
        assert!((2.99..=3.0).contains(&c), "{c}");
    }

    #[test]
    fn sampled_near_zero_when_straddling() {
        let ball = Ball::scalar(0.5, 1.0).unwrap();
        let c = domination_constant_sampled(&quad(1.0), &ball, &exact_sampling()).unwrap();
        assert!(c <= 0.01, "{c}");
    }

    #[test]
    fn sampled_positive_without_zeros() {
        // -u'' has smallest discrete eigenvalue near pi^2, so the ratio stays away from 0
        let p = make_bvp(6, 0.0, |_| 1.0).unwrap();
        let ball = Ball::new(DVector::zeros(6), 0.5).unwrap();
        let config = SamplingConfig {
            max_samples: 4000,
            ..SamplingConfig::default()
        };
        let c = domination_constant_sampled(&p, &ball, &config).unwrap();
        assert!(c > 1.0, "{c}");
    }

    #[test]
    fn sampled_returns_zero_when_everything_is_a_zero() {
        let p = make_bvp(4, 0.0, |_| 0.0).unwrap();
        let ball = Ball::new(DVector::zeros(4), 1e-20).unwrap();
        let config = SamplingConfig {
            max_samples: 50,
            residual_floor: 1e-6,
            ..SamplingConfig::default()
        };
        assert_eq!(
            domination_constant_sampled(&p, &ball, &config).unwrap(),
            0.0
        );
    }

    #[test]
    fn sampled_rejects_bad_config() {
        let ball = Ball::scalar(2.0, 0.5).unwrap();
        for bad in [
            SamplingConfig {
                samples_per_axis: 1,
                ..SamplingConfig::default()
            },
            SamplingConfig {
                safety: 0.0,
                ..SamplingConfig::default()
            },
            SamplingConfig {
                safety: 1.5,
                ..SamplingConfig::default()
            },
        ] {
            assert!(matches!(
                domination_constant_sampled(&quad(1.0), &ball, &bad),
                Err(Error::InvalidConfiguration(_))
            ));
        }
    }

    #[test]
    fn certify_closed_form_examples() {
        let s = SamplingConfig::default();
        let fail = certify(
            &quad(1.0),
            &Ball::scalar(2.0, 0.5).unwrap(),
            CertificateMethod::ClosedFormQuadratic,
            &s,
        )
        .unwrap();
        assert_eq!((fail.lhs, fail.rhs, fail.passed), (3.0, 1.5, false));
        assert_eq!(fail.slack, -1.5);
        assert_eq!(fail.sample_count, 0);
        assert!(!fail.advisory);

        let pass = certify(
            &quad(1.0),
            &Ball::scalar(1.2, 0.5).unwrap(),
            CertificateMethod::ClosedFormQuadratic,
            &s,
        )
        .unwrap();
        assert!((pass.c - 1.4).abs() < 1e-12);
        assert!((pass.lhs - 0.44).abs() < 1e-12);
        assert!((pass.rhs - 0.7).abs() < 1e-12);
        assert!(pass.passed);
    }

    #[test]
    fn certify_at_exact_zero_passes() {
        let ball = Ball::scalar(1.0, 0.5).unwrap();
        for method in [
            CertificateMethod::ClosedFormQuadratic,
            CertificateMethod::Sampled,
        ] {
            let cert = certify(&quad(1.0), &ball, method, &SamplingConfig::default()).unwrap();
            assert_eq!(cert.lhs, 0.0);
            assert!(cert.passed);
        }
        // c = 0 with lhs = 0 is a tie and counts as passed
        let straddle = Ball::scalar(0.5, 1.0).unwrap();
        let q = quad(4.0);
        let cert = certify(
            &q,
            &straddle,
            CertificateMethod::ClosedFormQuadratic,
            &SamplingConfig::default(),
        )
        .unwrap();
        assert_eq!((cert.c, cert.lhs, cert.passed), (0.0, 0.0, true));
    }

    #[test]
    fn closed_form_requires_quadratic() {
        let p = make_bvp(4, 0.0, |_| 1.0).unwrap();
        let ball = Ball::new(DVector::zeros(4), 1.0).unwrap();
        assert!(matches!(
            certify(
                &p,
                &ball,
                CertificateMethod::ClosedFormQuadratic,
                &SamplingConfig::default()
            ),
            Err(Error::InvalidMethod(_))
        ));
    }

    #[test]
    fn sampled_certificate_is_advisory() {
        let cert = certify(
            &quad(1.0),
            &Ball::scalar(1.2, 0.5).unwrap(),
            CertificateMethod::Sampled,
            &SamplingConfig::default(),
        )
        .unwrap();
        assert!(cert.advisory);
        assert_eq!(cert.sample_count, 1001);
        assert!(cert.verdict_line().starts_with("PASS lhs="));
    }

    #[test]
    fn conflict_between_conditions() {
        let cs: Vec<f64> = [0.5, 1.0]
            .iter()
            .map(|&r| quadratic_domination_constant(1.0, 2.0, r))
            .collect();
        assert_eq!(cs, vec![3.0, 2.0]);
        let rhs: Vec<f64> = [0.5, 1.0].iter().zip(&cs).map(|(r, c)| r * c).collect();
        assert_eq!(rhs, vec![1.5, 2.0]);
    }

    #[test]
    fn sampled_constant_shrinks_with_radius() {
        let s = exact_sampling();
        for (lambda, x) in [(1.0, 2.0), (0.5, -3.0), (2.0, 1.5), (4.0, 3.0)] {
            let cs: Vec<f64> = [0.1, 0.25, 0.5, 1.0]
                .iter()
                .map(|&r| {
                    domination_constant_sampled(&quad(lambda), &Ball::scalar(x, r).unwrap(), &s)
                        .unwrap()
                })
                .collect();
            assert!(cs.windows(2).all(|w| w[1] <= w[0]), "{cs:?}");
        }
    }

    #[test]
    fn sampled_is_order_independent() {
        let p = make_bvp(5, 1.0, |t| t).unwrap();
        let ball = Ball::new(DVector::from_element(5, 0.1), 0.8).unwrap();
        let config = SamplingConfig {
            max_samples: 3000,
            ..SamplingConfig::default()
        };
        let a = certify(&p, &ball, CertificateMethod::Sampled, &config).unwrap();
        let b = certify(&p, &ball, CertificateMethod::Sampled, &config).unwrap();
        assert_eq!(a, b);
    }
}
