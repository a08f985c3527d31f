use approx::assert_abs_diff_eq;
use ck_lab::curve_tracer::*;
use ck_lab::phase_core::*;
use proptest::prelude::*;

/// `X = v − tξ`.
fn rest_curve(xi: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    xi.iter().zip(v).map(|(a, b)| b - t * a).collect()
}

/// `−(x − tξ)/√(1 + |x − tξ|²) = v`, so `x = tξ − v/√(1 − |v|²)`.
fn br_curve(xi: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    let s = (1.0 - v.iter().map(|a| a * a).sum::<f64>()).sqrt();
    xi.iter().zip(v).map(|(a, b)| t * a - b / s).collect()
}

/// `x_j = v_j − t²ξ_j` and `t tan(tξ + x) = v` in the last slot.
fn tan_curve_oracle(xi: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    let m = xi.len();
    let mut x: Vec<f64> = (0..m - 1).map(|j| v[j] - t * t * xi[j]).collect();
    x.push((v[m - 1] / t).atan() - t * xi[m - 1]);
    x
}

#[test]
fn traces_match_closed_forms() {
    type Oracle = fn(&[f64], &[f64], f64) -> Vec<f64>;
    let cases: Vec<(PhaseSpec, Oracle, CurveParam)> = vec![
        (rest(3).unwrap(), rest_curve, CurveParam::new(vec![0.1, -0.2], vec![0.05, 0.1])),
        (rest(4).unwrap(), rest_curve, CurveParam::new(vec![0.1, -0.2, 0.0], vec![0.05, 0.1, -0.1])),
        (bochner_riesz(3).unwrap(), br_curve, CurveParam::new(vec![0.05, -0.1], vec![-0.03, 0.08])),
        (bochner_riesz(4).unwrap(), br_curve, CurveParam::new(vec![0.05, -0.1, 0.02], vec![-0.03, 0.08, 0.0])),
        (tan(3).unwrap(), tan_curve_oracle, CurveParam::new(vec![0.05, -0.04], vec![0.06, 0.1])),
        (tan(4).unwrap(), tan_curve_oracle, CurveParam::new(vec![0.05, -0.04, 0.03], vec![0.06, 0.1, -0.05])),
    ];
    for (phase, oracle, p) in cases {
        let grid = default_t_grid(&phase, 25);
        let s = trace_curve(&phase, &p, &grid).unwrap();
        for (x, &t) in s.points.iter().zip(&grid) {
            let want = oracle(&p.xi, &p.v, t);
            for (a, b) in x.iter().zip(&want) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
        assert!(s.newton_iters.iter().all(|&k| k <= 10), "{}", phase.label());
    }
}

#[test]
fn implicit_derivative_identity_holds() {
    for phase in [rest(3).unwrap(), bochner_riesz(3).unwrap(), tan(3).unwrap(), tan(4).unwrap(), worst().unwrap()] {
        let anchor = CurveParam::new(phase.origin_sigma().to_vec(), phase.origin_v());
        let t = phase.origin_m()[phase.n() - 1] + 0.02;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        for _ in 0..10 {
            let p = ck_lab::straightener::param_at_distance(&anchor, 0.05, &mut rng);
            let r = check_implicit_derivative(&phase, &p.xi, &p.v, t).unwrap();
            assert!(r < 1e-6, "{}: {r:e}", phase.label());
        }
    }
}

#[test]
fn tangent_matches_difference_of_trace() {
    let phase = tan(3).unwrap();
    let p = CurveParam::new(vec![0.05, -0.04], vec![0.06, 0.1]);
    let h = 1e-5;
    let t = 1.01;
    let s = trace_curve(&phase, &p, &[t - h, t, t + h]).unwrap();
    let tan_v = tangent(&phase, &s.points[1], t, &p.xi).unwrap();
    for i in 0..2 {
        let fd = (s.points[2][i] - s.points[0][i]) / (2.0 * h);
        assert_abs_diff_eq!(tan_v[i], fd, epsilon = 1e-8);
    }
    assert_eq!(tan_v[2], 1.0);
}

#[test]
fn interpolation_is_exact_at_nodes_and_linear_between() {
    let phase = rest(3).unwrap();
    let p = CurveParam::new(vec![0.1, 0.2], vec![0.0, 0.0]);
    let grid = linspace(-0.4, 0.4, 5);
    let s = trace_curve(&phase, &p, &grid).unwrap();
    for (x, &t) in s.points.iter().zip(&grid) {
        assert_eq!(&s.interpolate(t), x);
    }
    let mid = s.interpolate(0.1);
    assert_abs_diff_eq!(mid[0], -0.01, epsilon = 1e-15);
    assert_abs_diff_eq!(mid[1], -0.02, epsilon = 1e-15);
    assert_eq!(s.interpolate(-9.0), s.points[0]);
}

#[test]
fn unsolvable_level_is_a_trace_error() {
    // |∇_ξφ| < 1 for the Bochner–Riesz phase.
    let phase = bochner_riesz(3).unwrap();
    let p = CurveParam::new(vec![0.0, 0.0], vec![1.5, 0.0]);
    let err = trace_curve(&phase, &p, &default_t_grid(&phase, 5)).unwrap_err();
    assert!(matches!(err, ck_lab::LabError::Trace { .. } | ck_lab::LabError::IllConditioned(_)), "{err}");
}

#[test]
fn small_closed_form_cases() {
    let r = rest(3).unwrap();
    let x = solve_x(&r, &[1.0, 0.0], &[0.0, 0.0], 0.5, &[0.0, 0.0]).unwrap();
    assert_abs_diff_eq!(x[0], -0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-15);
    let v = v_of(&r, &[0.1, 0.2], 0.3, &[0.2, -0.1]).unwrap();
    assert_abs_diff_eq!(v[0], 0.1 + 0.3 * 0.2, epsilon = 1e-15);
    assert_abs_diff_eq!(v[1], 0.2 - 0.3 * 0.1, epsilon = 1e-15);

    let t3 = tan(3).unwrap();
    let x = solve_x(&t3, &[0.0, 0.0], &[0.0, 0.05], 1.0, &[0.0, 0.0]).unwrap();
    assert_abs_diff_eq!(x[1], 0.05f64.atan(), epsilon = 1e-13);
    let s = trace_curve(&t3, &CurveParam::new(vec![0.0; 2], vec![0.0; 2]), &default_t_grid(&t3, 21)).unwrap();
    assert!(s.points.iter().flatten().all(|v| v.abs() < 1e-14));
    assert_eq!(v_of(&t3, &[0.0, 0.0], 1.0, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

    let w = worst().unwrap();
    let (xi, v) = (vec![0.1, -0.2], vec![0.05, 0.02]);
    let s = trace_curve(&w, &CurveParam::new(xi.clone(), v.clone()), &default_t_grid(&w, 21)).unwrap();
    for (x, &t) in s.points.iter().zip(&s.t_grid) {
        assert_abs_diff_eq!(x[0], v[0] - t * xi[1], epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], v[1] - t * xi[0] - t * t * xi[1], epsilon = 1e-12);
    }
}

#[test]
fn linspace_endpoints() {
    assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    assert_eq!(linspace(0.0, 1.0, 1), vec![0.5]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms(
        a in prop::collection::vec(-1.0f64..1.0, 4),
        b in prop::collection::vec(-1.0f64..1.0, 4),
        c in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let (p, q, r) = (CurveParam::from_stacked(&a), CurveParam::from_stacked(&b), CurveParam::from_stacked(&c));
        prop_assert_eq!(curve_metric(&p, &p), 0.0);
        prop_assert_eq!(curve_metric(&p, &q), curve_metric(&q, &p));
        prop_assert!(curve_metric(&p, &r) <= curve_metric(&p, &q) + curve_metric(&q, &r) + 1e-15);
        prop_assert_eq!(p.stacked(), a);
    }

    #[test]
    fn solve_x_inverts_grad_xi(
        x in prop::collection::vec(-0.2f64..0.2, 2),
        t in 0.92f64..1.08,
        xi in prop::collection::vec(-0.2f64..0.2, 2),
    ) {
        let phase = tan(3).unwrap();
        let v = v_of(&phase, &x, t, &xi).unwrap();
        let back = solve_x(&phase, &xi, &v, t, &[0.0, 0.0]).unwrap();
        prop_assert!((back[0] - x[0]).abs() < 1e-10 && (back[1] - x[1]).abs() < 1e-10);
    }
}
