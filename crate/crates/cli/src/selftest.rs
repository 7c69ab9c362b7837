//! Built-in consistency checks run by `zerocert selftest`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zerocert_core::certificate::{certify, quadratic_domination_constant};
use zerocert_core::descent::solve;
use zerocert_core::functional::check_gradient;
use zerocert_core::problems::{make_bvp, make_quadratic, manufactured_forcing};
use zerocert_core::transforms::{search_mu, transformed_certificate_quadratic};
use zerocert_core::{
    Ball, CertificateMethod, CertifyConfig, DescentConfig, DescentStatus, GridSpacing, MuGrid,
    QuadraticParams, SamplingConfig,
};

/// Signature of the closed-form constant `c(lambda, x, r)` under test.
pub type ConstantFn = dyn Fn(f64, f64, f64) -> f64;

const BRUTE_POINTS: usize = 20_001;
const GRADIENT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: 0,
            failed: 0,
            first_failure: None,
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.failed == 0)
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<14} {:>7} {:>7}  {}\n",
            "suite", "passed", "failed", "result"
        );
        for s in &self.suites {
            out.push_str(&format!(
                "{:<14} {:>7} {:>7}  {}\n",
                s.name,
                s.passed,
                s.failed,
                if s.failed == 0 { "PASS" } else { "FAIL" }
            ));
            if let Some(f) = &s.first_failure {
                out.push_str(&format!("  first failure: {f}\n"));
            }
        }
        out.push_str(&format!(
            "selftest: {}\n",
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        out
    }
}

pub fn run_selftest() -> SelftestReport {
    run_selftest_with(&quadratic_domination_constant)
}

/// Runs every suite with `constant` standing in for the closed-form constant.
pub fn run_selftest_with(constant: &ConstantFn) -> SelftestReport {
    SelftestReport {
        suites: vec![
            closed_form_suite(constant),
            equivalence_suite(constant),
            gradient_suite(),
            descent_suite(),
        ],
    }
}

fn cases() -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = vec![
        (1.0, 2.0, 0.5),
        (1.0, 1.2, 0.5),
        (1.0, 0.1, 0.5),
        (1.0, -1.5, 0.3),
    ];
    for _ in 0..40 {
        out.push((
            rng.random_range(0.25..4.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.1..1.0),
        ));
    }
    out
}

/// Minimum of `|F'(v) F(v)| / |F(v)| = 2 |lambda v|` over a uniform grid.
fn brute_force_constant(lambda: f64, x: f64, r: f64) -> f64 {
    (0..BRUTE_POINTS)
        .map(|k| {
            let v = x - r + 2.0 * r * k as f64 / (BRUTE_POINTS - 1) as f64;
            2.0 * (lambda * v).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

fn closed_form_suite(constant: &ConstantFn) -> SuiteResult {
    let mut s = SuiteResult::new("closed_form");
    let sampling = SamplingConfig {
        safety: 1.0,
        ..SamplingConfig::default()
    };
    for (lambda, x, r) in cases() {
        let c = constant(lambda, x, r);
        let brute = brute_force_constant(lambda, x, r);
        let spacing_bound = 2.0 * lambda * 2.0 * r / (BRUTE_POINTS - 1) as f64;
        s.check(
            c <= brute + 1e-12 && brute - c <= spacing_bound + 1e-12,
            || format!("lambda={lambda} x={x} r={r}: c={c} brute={brute}"),
        );
        let q = make_quadratic(QuadraticParams { lambda });
        let ball = Ball::scalar(x, r).expect("radius is positive");
        if let Ok(cert) = certify(&q, &ball, CertificateMethod::Sampled, &sampling) {
            let tol = 2.0 * lambda * 2.0 * r / (sampling.samples_per_axis - 1) as f64 + 1e-12;
            s.check((cert.c - c).abs() <= tol, || {
                format!("lambda={lambda} x={x} r={r}: sampled={} closed={c}", cert.c)
            });
        } else {
            s.check(false, || {
                format!("lambda={lambda} x={x} r={r}: sampled certify failed")
            });
        }
    }
    // F(v) = v^2 - 1 on [1.5, 2.5] fails; on [0.7, 1.7] passes.
    s.check(3.0 > 0.5 * constant(1.0, 2.0, 0.5), || {
        "x=2 r=0.5 should fail".into()
    });
    s.check(0.44 <= 0.5 * constant(1.0, 1.2, 0.5), || {
        "x=1.2 r=0.5 should pass".into()
    });
    s
}

fn equivalence_suite(constant: &ConstantFn) -> SuiteResult {
    let mut s = SuiteResult::new("equivalence");
    for lambda in [0.5, 1.0, 2.0] {
        for mu in [0.5, 1.0, 2.0, 3.0] {
            for x in [-2.0, -0.5, 0.4, 1.2, 2.0] {
                for r in [0.25, 0.5, 1.0] {
                    let Ok(t) = transformed_certificate_quadratic(lambda, mu, x, r) else {
                        s.check(false, || {
                            format!("lambda={lambda} mu={mu} x={x} r={r}: error")
                        });
                        continue;
                    };
                    let scaled = (lambda * x * x - mu * mu).abs() <= r * constant(lambda, x, r);
                    s.check(t.forms_agree && t.certificate.passed == scaled, || {
                        format!(
                            "lambda={lambda} mu={mu} x={x} r={r}: transformed={} scaled={scaled}",
                            t.certificate.passed
                        )
                    });
                }
            }
        }
    }
    let q = make_quadratic(QuadraticParams { lambda: 1.0 });
    let ball = Ball::scalar(2.0, 0.5).expect("radius is positive");
    let grid = MuGrid::new(0.5, 3.0, 26, GridSpacing::Linear);
    match search_mu(&q, &ball, &grid, &CertifyConfig::closed_form()) {
        Ok(r) => {
            let best = r.best_entry();
            s.check(r.best_parameter == 2.0 && best.passed, || {
                format!("search picked mu={}", r.best_parameter)
            });
            let (x, mu) = (2.0f64, 2.0f64);
            let direct = (x * x - mu * mu).abs() <= 0.5 * constant(1.0, x, 0.5);
            s.check(direct == best.passed, || {
                "mu=2 verdict disagrees with scaled form".into()
            });
        }
        Err(e) => s.check(false, || format!("search failed: {e}")),
    }
    s
}

fn gradient_suite() -> SuiteResult {
    let mut s = SuiteResult::new("gradient");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut problems = vec![
        make_quadratic(QuadraticParams { lambda: 1.0 }),
        make_quadratic(QuadraticParams { lambda: -2.5 }),
    ];
    for n in [8, 32] {
        problems.push(make_bvp(n, 1.0, manufactured_forcing(1.0)).expect("n >= 2"));
    }
    for p in problems {
        for _ in 0..10 {
            let v = DVector::from_fn(p.input_dim(), |_, _| rng.random_range(-2.0..2.0));
            match check_gradient(&p, &v) {
                Ok(g) => s.check(g.max_relative_error <= GRADIENT_TOLERANCE, || {
                    format!("{}: error {}", p.name(), g.max_relative_error)
                }),
                Err(e) => s.check(false, || format!("{}: {e}", p.name())),
            }
        }
    }
    s
}

fn descent_suite() -> SuiteResult {
    let mut s = SuiteResult::new("descent");
    for (lambda, x, r, root) in [
        (1.0, 1.2, 0.5, 1.0),
        (4.0, 0.6, 0.2, 0.5),
        (1.0, -1.3, 0.5, -1.0),
    ] {
        let q = make_quadratic(QuadraticParams { lambda });
        let ball = Ball::scalar(x, r).expect("radius is positive");
        match solve(&q, &ball, &DescentConfig::default()) {
            Ok(res) => s.check(
                res.status == DescentStatus::Converged && (res.u[0] - root).abs() <= 1e-9,
                || {
                    format!(
                        "lambda={lambda} x={x}: u={} status={:?}",
                        res.u[0], res.status
                    )
                },
            ),
            Err(e) => s.check(false, || format!("lambda={lambda} x={x}: {e}")),
        }
    }
    s
}
