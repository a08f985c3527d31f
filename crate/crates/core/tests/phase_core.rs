use std::sync::Arc;

use approx::assert_abs_diff_eq;
use ck_lab::phase_core::user::{load_phase, PhaseConfig, Term};
use ck_lab::phase_core::*;
use ck_lab::LabError;
use proptest::prelude::*;

/// Plain `f64` versions of the built-ins, written independently of the
/// series code.
fn rest_f(x: &[f64], t: f64, xi: &[f64]) -> f64 {
    x.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + 0.5 * t * xi.iter().map(|v| v * v).sum::<f64>()
}

fn br_f(x: &[f64], t: f64, xi: &[f64]) -> f64 {
    let r2: f64 = x.iter().zip(xi).map(|(a, b)| (a - t * b).powi(2)).sum();
    (1.0 + r2).sqrt() / t
}

fn tan_f(x: &[f64], t: f64, xi: &[f64]) -> f64 {
    let m = x.len();
    let head: f64 = (0..m - 1).map(|j| x[j] * xi[j] + 0.5 * t * t * xi[j] * xi[j]).sum();
    head - (t * xi[m - 1] + x[m - 1]).cos().ln()
}

fn worst_f(x: &[f64], t: f64, xi: &[f64]) -> f64 {
    x[0] * xi[0] + x[1] * xi[1] + t * xi[0] * xi[1] + 0.5 * t * t * xi[1] * xi[1]
}

/// Central-difference Hessian in ξ and mixed block `∂_𝐱∂_ξ`.
fn fd_blocks(
    f: &dyn Fn(&[f64], f64, &[f64]) -> f64,
    x: &[f64],
    t: f64,
    xi: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let h = 1e-4;
    let m = xi.len();
    let eval = |dx: &[f64], dxi: &[f64]| {
        let xx: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + b).collect();
        let xs: Vec<f64> = xi.iter().zip(dxi).map(|(a, b)| a + b).collect();
        f(&xx, t + dx[m], &xs)
    };
    let unit = |k: usize, len: usize, s: f64| {
        let mut v = vec![0.0; len];
        v[k] = s;
        v
    };
    let z_x = vec![0.0; m + 1];
    let hess = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let pp = eval(&z_x, &add(&unit(i, m, h), &unit(j, m, h)));
                    let pm = eval(&z_x, &add(&unit(i, m, h), &unit(j, m, -h)));
                    let mp = eval(&z_x, &add(&unit(i, m, -h), &unit(j, m, h)));
                    let mm = eval(&z_x, &add(&unit(i, m, -h), &unit(j, m, -h)));
                    (pp - pm - mp + mm) / (4.0 * h * h)
                })
                .collect()
        })
        .collect();
    let mixed = (0..m + 1)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let pp = eval(&unit(i, m + 1, h), &unit(j, m, h));
                    let pm = eval(&unit(i, m + 1, h), &unit(j, m, -h));
                    let mp = eval(&unit(i, m + 1, -h), &unit(j, m, h));
                    let mm = eval(&unit(i, m + 1, -h), &unit(j, m, -h));
                    (pp - pm - mp + mm) / (4.0 * h * h)
                })
                .collect()
        })
        .collect();
    (hess, mixed)
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + q).collect()
}

#[test]
fn jets_match_finite_differences_of_plain_formulas() {
    type Plain = fn(&[f64], f64, &[f64]) -> f64;
    let cases: Vec<(PhaseSpec, Plain)> = vec![
        (rest(3).unwrap(), rest_f),
        (bochner_riesz(3).unwrap(), br_f),
        (bochner_riesz(4).unwrap(), br_f),
        (tan(3).unwrap(), tan_f),
        (tan(4).unwrap(), tan_f),
        (worst().unwrap(), worst_f),
    ];
    for (phase, f) in cases {
        for p in sample_domain(&phase, 6, 11) {
            let jet = eval_jet(&phase, &p.x, p.t, &p.xi, 2).unwrap();
            assert_abs_diff_eq!(jet.value(), f(&p.x, p.t, &p.xi), epsilon = 1e-13);
            let (h, k) = fd_blocks(&f, &p.x, p.t, &p.xi);
            let hj = jet.hess_xi();
            let kj = jet.mixed();
            for i in 0..h.len() {
                for j in 0..h.len() {
                    assert!((hj[(i, j)] - h[i][j]).abs() < 1e-6, "{} hess", phase.label());
                }
            }
            for i in 0..k.len() {
                for j in 0..h.len() {
                    assert!((kj[(i, j)] - k[i][j]).abs() < 1e-6, "{} mixed", phase.label());
                }
            }
        }
    }
}

#[test]
fn tan_hessian_closed_form() {
    let phase = tan(4).unwrap();
    let (x, t, xi) = ([0.1, -0.05, 0.02], 1.03, [0.1, 0.05, -0.12]);
    let h = eval_jet(&phase, &x, t, &xi, 2).unwrap().hess_xi();
    let sec2 = 1.0 / (t * xi[2] + x[2]).cos().powi(2);
    for i in 0..3 {
        for j in 0..3 {
            let want = match (i, j) {
                (2, 2) => t * t * sec2,
                (a, b) if a == b => t * t,
                _ => 0.0,
            };
            assert_abs_diff_eq!(h[(i, j)], want, epsilon = 1e-14);
        }
    }
}

#[test]
fn rest_gauss_map_is_minus_xi_one() {
    let phase = rest(4).unwrap();
    let xi = [0.1, -0.2, 0.3];
    let g = gauss_map(&phase, &[0.0, 0.1, 0.2], 0.1, &xi).unwrap();
    assert_eq!(g, vec![-0.1, 0.2, -0.3, 1.0]);
    let (det, pd) = check_h2(&phase, &[0.0; 3], 0.0, &xi).unwrap();
    assert_abs_diff_eq!(det, 1.0, epsilon = 1e-15);
    assert!(pd);
}

#[test]
fn worst_matrices_at_origin() {
    let phase = worst().unwrap();
    let g = gauss_map(&phase, &[0.0, 0.0], 0.0, &[0.0, 0.0]).unwrap();
    assert_eq!(g, vec![0.0, 0.0, 1.0]);
    let (m1, m2) = bourgain_matrices(&phase, &[0.0, 0.0], 0.0, &[0.0, 0.0]).unwrap();
    assert_eq!(m1.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    assert_eq!(m2.as_slice(), &[0.0, 0.0, 0.0, 2.0]);
    let r = check_bourgain(&phase, &[0.0, 0.0], 0.0, &[0.0, 0.0], 1e-6).unwrap();
    assert_abs_diff_eq!(r.bourgain_residual, 1.0, epsilon = 1e-15);
    assert!(!r.holds);
}

#[test]
fn gauss_field_transports_grad_xi() {
    for phase in [rest(3).unwrap(), bochner_riesz(4).unwrap(), tan(3).unwrap(), worst().unwrap()] {
        for p in sample_domain(&phase, 20, 3) {
            assert!(gauss_transport_defect(&phase, &p.x, p.t, &p.xi).unwrap() < 1e-13);
        }
    }
}

#[test]
fn abc_triples_hold_with_strict_c() {
    for phase in [
        rest(3).unwrap(),
        rest(4).unwrap(),
        bochner_riesz(3).unwrap(),
        bochner_riesz(4).unwrap(),
        tan(3).unwrap(),
        tan(4).unwrap(),
    ] {
        let abc = ABCData::for_phase(&phase).unwrap();
        let mut signs = std::collections::BTreeSet::new();
        for p in sample_domain(&phase, 30, 5) {
            let r = check_abc(&phase, &abc, &p.x, p.t, &p.xi).unwrap();
            assert!(r.residual < 1e-12, "{}: {}", phase.label(), r.residual);
            assert!(r.det_b.abs() > 0.5);
            assert!(r.g_dc.abs() > 0.1, "{}: (G.grad)c = {}", phase.label(), r.g_dc);
            signs.insert(r.g_dc > 0.0);
            assert!(r.asymmetry == 0.0);
        }
        assert_eq!(signs.len(), 1, "{}: (G.grad)c changes sign", phase.label());
    }
    assert!(ABCData::for_phase(&worst().unwrap()).is_none());
    let naive = ABCData::naive(3);
    let w = worst().unwrap();
    assert!(check_abc(&w, &naive, &[0.1, 0.1], 0.2, &[0.1, 0.2]).unwrap().residual > 0.01);
}

#[test]
fn diffeomorphisms_preserve_verdicts() {
    let tan3 = tan(3).unwrap();
    let w = worst().unwrap();
    for seed in 0..3 {
        let tt = transform_phase(
            &tan3,
            &random_near_identity(tan3.origin_m(), 0.05, seed),
            &random_near_identity(tan3.origin_sigma(), 0.05, seed + 50),
        )
        .unwrap();
        let ww = transform_phase(
            &w,
            &random_near_identity(w.origin_m(), 0.05, seed),
            &random_near_identity(w.origin_sigma(), 0.05, seed + 50),
        )
        .unwrap();
        for p in sample_domain(&tt, 10, seed) {
            assert!(check_bourgain(&tt, &p.x, p.t, &p.xi, 1e-6).unwrap().holds);
        }
        let mut low = 0usize;
        for p in sample_domain(&ww, 10, seed) {
            if check_bourgain(&ww, &p.x, p.t, &p.xi, 1e-6).unwrap().bourgain_residual < 0.1 {
                low += 1;
            }
        }
        assert_eq!(low, 0);
    }
}

#[test]
fn toml_polynomial_phase_reproduces_rest() {
    let cfg: PhaseConfig = toml::from_str(
        r#"
n = 3
[[terms]]
coef = 1.0
x = [1, 0]
xi = [1, 0]
[[terms]]
coef = 1.0
x = [0, 1]
xi = [0, 1]
[[terms]]
coef = 0.5
t = 1
xi = [2, 0]
[[terms]]
coef = 0.5
t = 1
xi = [0, 2]
"#,
    )
    .unwrap();
    let user = load_phase(&cfg).unwrap();
    let r = rest(3).unwrap();
    for p in sample_domain(&r, 10, 2) {
        assert_abs_diff_eq!(user.value(&p.x, p.t, &p.xi), r.value(&p.x, p.t, &p.xi), epsilon = 1e-15);
        assert_eq!(
            gauss_map(&user, &p.x, p.t, &p.xi).unwrap(),
            gauss_map(&r, &p.x, p.t, &p.xi).unwrap()
        );
    }
    let mut bad = cfg.clone();
    bad.terms.push(Term {
        coef: 1.0,
        x: vec![1, 0, 0],
        t: 0,
        xi: vec![],
    });
    assert!(matches!(load_phase(&bad), Err(LabError::Config(_))));
    assert!(load_phase(&PhaseConfig::builtin("tan", 3)).is_ok());
}

#[test]
fn sampled_phase_agrees_with_exact_jets() {
    let exact = tan(3).unwrap();
    let sampled = PhaseSpec::new(
        3,
        PhaseTag::User,
        "tan-sampled",
        exact.domain_m().clone(),
        exact.domain_sigma().clone(),
        exact.origin_m().to_vec(),
        exact.origin_sigma().to_vec(),
        Evaluator::FiniteDifference {
            f: Arc::new(tan_f),
            step: 1e-5,
        },
    )
    .unwrap();
    assert!(sampled.default_tolerance() > exact.default_tolerance());
    for p in sample_domain(&exact, 8, 4) {
        let a = check_bourgain(&exact, &p.x, p.t, &p.xi, 1e-6).unwrap();
        let b = check_bourgain(&sampled, &p.x, p.t, &p.xi, 1e-3).unwrap();
        assert!(b.holds, "residual {}", b.bourgain_residual);
        assert!((a.h2_det - b.h2_det).abs() < 1e-4 * a.h2_det.abs().max(1.0));
    }
}

#[test]
fn errors_are_typed() {
    let phase = tan(3).unwrap();
    assert!(matches!(
        eval_jet(&phase, &[0.0, 0.0], 1.0, &[0.0, 0.0], 5),
        Err(LabError::UnsupportedOrder(5))
    ));
    assert!(matches!(
        check_bourgain(&phase, &[3.0, 0.0], 1.0, &[0.0, 0.0], 1e-6),
        Err(LabError::Domain(_))
    ));
    assert!(matches!(by_name("worst", 4), Err(LabError::Config(_))));
    assert!(matches!(by_name("sphere", 3), Err(LabError::Config(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rest_has_zero_residual_everywhere(
        x in prop::collection::vec(-0.45f64..0.45, 2),
        t in -0.45f64..0.45,
        xi in prop::collection::vec(-0.45f64..0.45, 2),
    ) {
        let phase = rest(3).unwrap();
        let r = check_bourgain(&phase, &x, t, &xi, 1e-12).unwrap();
        prop_assert_eq!(r.bourgain_residual, 0.0);
        prop_assert!((r.h1_sigma_min - 1.0).abs() < 0.5);
        let g = gauss_map(&phase, &x, t, &xi).unwrap();
        prop_assert_eq!(g, vec![-xi[0], -xi[1], 1.0]);
    }

    #[test]
    fn tan_holds_at_random_points(
        x in prop::collection::vec(-0.2f64..0.2, 2),
        t in 0.92f64..1.08,
        xi in prop::collection::vec(-0.2f64..0.2, 2),
    ) {
        let phase = tan(3).unwrap();
        let r = check_bourgain(&phase, &x, t, &xi, 1e-8).unwrap();
        prop_assert!(r.holds, "residual {}", r.bourgain_residual);
        prop_assert!(r.h2_posdef);
    }
}
