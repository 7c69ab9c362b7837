use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zerocert_core::certificate::{certify, quadratic_domination_constant, CertificateMethod};
use zerocert_core::descent::{solve, DescentConfig, DescentStatus};
use zerocert_core::functional::{grad_phi, phi};
use zerocert_core::problems::{
    make_bvp, make_bvp_weighted, make_quadratic, manufactured_forcing, QuadraticParams,
    ResidualProblem,
};
use zerocert_core::transforms::{
    apply_dependent, dependent_condition_ratio, pull_back_zero, recover_problem_dependent,
    recover_problem_independent, transformed_certificate_quadratic,
};
use zerocert_core::{Ball, DependentTransform, IndependentTransform, SamplingConfig};

fn quad(lambda: f64) -> ResidualProblem {
    make_quadratic(QuadraticParams { lambda })
}

fn builtins() -> Vec<ResidualProblem> {
    vec![
        quad(1.0),
        quad(2.0),
        quad(-0.5),
        make_bvp(16, 0.0, manufactured_forcing(0.0)).unwrap(),
        make_bvp(16, 1.0, manufactured_forcing(1.0)).unwrap(),
        make_bvp(64, 1.0, manufactured_forcing(1.0)).unwrap(),
        make_bvp_weighted(16, 1.0, manufactured_forcing(1.0)).unwrap(),
    ]
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-2.0..=2.0))
}

/// Plain central differences of F, written independently of the library fallback.
fn fd_jacobian_entry(p: &ResidualProblem, v: &DVector<f64>, i: usize, j: usize) -> f64 {
    let h = 1e-6 * (1.0 + v[j].abs());
    let mut plus = v.clone();
    let mut minus = v.clone();
    plus[j] += h;
    minus[j] -= h;
    let fp = p.eval_residual(&plus).unwrap()[i];
    let fm = p.eval_residual(&minus).unwrap()[i];
    (fp - fm) / (plus[j] - minus[j])
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in builtins() {
        let n = p.input_dim();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let v = random_point(&mut rng, n);
            let jac = p.eval_jacobian(&v).unwrap();
            assert!(!jac.approximate);
            for i in 0..p.output_dim() {
                for j in 0..n {
                    let fd = fd_jacobian_entry(&p, &v, i, j);
                    worst = worst.max((jac.matrix[(i, j)] - fd).abs() / (1.0 + fd.abs()));
                }
            }
        }
        assert!(worst <= 1e-6, "{}: {worst}", p.name());
    }
}

#[test]
fn transformed_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let base = make_bvp(8, 1.0, |t| 3.0 * t).unwrap();
    let problems = [
        apply_dependent(DependentTransform::cubic_perturbation(0.01).unwrap(), &base),
        recover_problem_dependent(DependentTransform::cubic_perturbation(2.0).unwrap(), &base),
        recover_problem_independent(IndependentTransform::affine(-1.7, 0.4).unwrap(), &base),
    ];
    for p in problems {
        for _ in 0..20 {
            let v = random_point(&mut rng, 8);
            let jac = p.eval_jacobian(&v).unwrap().matrix;
            for i in 0..8 {
                for j in 0..8 {
                    let fd = fd_jacobian_entry(&p, &v, i, j);
                    let err = (jac[(i, j)] - fd).abs() / (1.0 + fd.abs());
                    assert!(err <= 1e-6, "{} ({i},{j}): {err}", p.name());
                }
            }
        }
    }
}

#[test]
fn phi_vanishes_exactly_at_zeros() {
    for lambda in [0.5f64, 1.0, 2.0, 4.0] {
        let u = DVector::from_element(1, 1.0 / lambda.sqrt());
        let q = quad(lambda);
        let f = q.eval_residual(&u).unwrap().norm();
        assert!(f <= 1e-12);
        assert!(phi(&q, &u).unwrap() <= 1e-24);
        assert!(grad_phi(&q, &u).unwrap().norm() <= 1e-10);
    }
}

#[test]
fn equivalence_of_transformed_forms_on_grid() {
    for lambda in [0.5, 1.0, 2.0] {
        for mu in [0.5, 1.0, 2.0, 3.0] {
            for x in [-3.0, -1.0, 0.4, 1.2, 2.0] {
                for r in [0.25, 0.5, 1.0] {
                    let t = transformed_certificate_quadratic(lambda, mu, x, r).unwrap();
                    // scaled form evaluated here from the closed-form constant directly
                    let c = quadratic_domination_constant(lambda, x, r);
                    let scaled = (lambda * x * x - mu * mu).abs() <= r * c;
                    assert_eq!(t.certificate.passed, scaled, "{lambda} {mu} {x} {r}");
                    assert!(t.forms_agree);
                }
            }
        }
    }
}

#[test]
fn linear_dependent_scale_keeps_verdict() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sampling = SamplingConfig::default();
    for _ in 0..20 {
        let lambda = rng.random_range(0.25..4.0);
        let ball = Ball::scalar(rng.random_range(-3.0..3.0), rng.random_range(0.1..1.0)).unwrap();
        let base = certify(&quad(lambda), &ball, CertificateMethod::Sampled, &sampling).unwrap();
        for alpha in [-2.0, 0.5, 3.0] {
            let scaled = apply_dependent(
                DependentTransform::linear_scale(alpha).unwrap(),
                &quad(lambda),
            );
            let cert = certify(&scaled, &ball, CertificateMethod::Sampled, &sampling).unwrap();
            assert_eq!(cert.passed, base.passed);
            assert!((cert.lhs - alpha.abs() * base.lhs).abs() <= 1e-12 * (1.0 + cert.lhs));
        }
    }
}

#[test]
fn descent_from_passing_certificates_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 60 {
        let lambda = rng.random_range(0.25..4.0);
        let ball = Ball::scalar(rng.random_range(-3.0..3.0), rng.random_range(0.1..1.0)).unwrap();
        let cert = certify(
            &quad(lambda),
            &ball,
            CertificateMethod::ClosedFormQuadratic,
            &SamplingConfig::default(),
        )
        .unwrap();
        if !cert.passed {
            continue;
        }
        checked += 1;
        let res = solve(&quad(lambda), &ball, &DescentConfig::default()).unwrap();
        assert_eq!(res.status, DescentStatus::Converged, "{lambda} {ball:?}");
        assert!(res.residual_norm <= 1e-8);
        assert!(ball.contains(&res.u, 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn phi_is_nonnegative(lambda in -4.0f64..4.0, x in -10.0f64..10.0) {
        let v = DVector::from_element(1, x);
        prop_assert!(phi(&quad(lambda), &v).unwrap() >= 0.0);
    }

    #[test]
    fn scalar_gradient_is_jacobian_times_residual(lambda in -4.0f64..4.0, x in -10.0f64..10.0) {
        let q = quad(lambda);
        let v = DVector::from_element(1, x);
        let j = q.eval_jacobian(&v).unwrap().matrix[(0, 0)];
        let f = q.eval_residual(&v).unwrap()[0];
        prop_assert_eq!(grad_phi(&q, &v).unwrap()[0], j * f);
    }

    #[test]
    fn dependent_round_trip(
        beta in 0.0f64..5.0,
        alpha in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
        lambda in 0.1f64..4.0,
        x in -3.0f64..3.0,
    ) {
        let v = DVector::from_element(1, x);
        let f = quad(lambda).eval_residual(&v).unwrap()[0];
        for a in [
            DependentTransform::cubic_perturbation(beta).unwrap(),
            DependentTransform::linear_scale(alpha).unwrap(),
        ] {
            let g = recover_problem_dependent(a, &quad(lambda));
            let back = apply_dependent(a, &g).eval_residual(&v).unwrap()[0];
            prop_assert!((back - f).abs() <= 1e-10 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn linear_condition_ratio_is_one(alpha in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], g in 0.001f64..100.0, neg in any::<bool>()) {
        let g = if neg { -g } else { g };
        let a = DependentTransform::linear_scale(alpha).unwrap();
        prop_assert!((dependent_condition_ratio(a, g).unwrap() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn identity_scale_reproduces_problem(x in -5.0f64..5.0, lambda in -3.0f64..3.0) {
        let g = recover_problem_independent(IndependentTransform::scale(1.0).unwrap(), &quad(lambda));
        let v = DVector::from_element(1, x);
        prop_assert!((g.eval_residual(&v).unwrap()[0] - quad(lambda).eval_residual(&v).unwrap()[0]).abs() <= 1e-12);
    }

    #[test]
    fn scale_group_closure(
        mu1 in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0],
        mu2 in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0],
        x in -5.0f64..5.0,
    ) {
        let f = make_bvp(3, 1.0, |t| t).unwrap();
        let s1 = IndependentTransform::scale(mu1).unwrap();
        let s2 = IndependentTransform::scale(mu2).unwrap();
        let stepwise = recover_problem_independent(s2, &recover_problem_independent(s1, &f));
        let direct = recover_problem_independent(IndependentTransform::scale(mu1 * mu2).unwrap(), &f);
        let composed = recover_problem_independent(s1.then(&s2), &f);
        let v = DVector::from_vec(vec![x, -0.5 * x, 0.25]);
        let a = stepwise.eval_residual(&v).unwrap();
        let b = direct.eval_residual(&v).unwrap();
        let c = composed.eval_residual(&v).unwrap();
        prop_assert!((&a - &b).amax() <= 1e-12 * (1.0 + a.amax()));
        prop_assert!((&a - &c).amax() <= 1e-12 * (1.0 + a.amax()));
    }

    #[test]
    fn pull_back_matches_transformed_value(
        mu in prop_oneof![-4.0f64..-0.1, 0.1f64..4.0],
        nu in -2.0f64..2.0,
        w in -6.0f64..6.0,
    ) {
        let f = quad(1.3);
        let b = IndependentTransform::affine(mu, nu).unwrap();
        let g = recover_problem_independent(b, &f);
        let v_star = DVector::from_element(1, w);
        let via_g = g.eval_residual(&v_star).unwrap().norm();
        let via_f = f.eval_residual(&pull_back_zero(b, &v_star)).unwrap().norm();
        prop_assert_eq!(via_g, via_f);
    }
}
