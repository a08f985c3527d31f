use approx::assert_abs_diff_eq;
use ck_lab::curve_tracer::{default_t_grid, CurveParam};
use ck_lab::fit::dyadic_ladder;
use ck_lab::phase_core::*;
use ck_lab::straightener::*;
use ck_lab::LabError;

fn order_at(phase: &PhaseSpec, anchor: &CurveParam) -> FitReport {
    let abc = ABCData::for_phase(phase).unwrap();
    fit_error_order(phase, &abc, &anchor.xi, &anchor.v, &dyadic_ladder(3, 8), 8, 1).unwrap()
}

fn origin(phase: &PhaseSpec) -> CurveParam {
    CurveParam::new(phase.origin_sigma().to_vec(), phase.origin_v())
}

#[test]
fn error_is_quadratic_off_center() {
    for phase in [tan(3).unwrap(), tan(4).unwrap(), bochner_riesz(3).unwrap()] {
        let r = order_at(&phase, &generic_anchor(&phase));
        let k = r.slope().unwrap();
        assert!((1.8..=2.2).contains(&k), "{}: {k}", phase.label());
        assert!(r.fit.unwrap().r2 > 0.97, "{}: {:?} {:?}", phase.label(), r.fit, r.max_errors);
    }
}

#[test]
fn error_is_cubic_at_the_odd_center() {
    let phase = tan(3).unwrap();
    let k = order_at(&phase, &origin(&phase)).slope().unwrap();
    assert!((k - 3.0).abs() < 0.2, "{k}");
}

#[test]
fn rest_map_is_exact() {
    let phase = rest(3).unwrap();
    for a in [origin(&phase), generic_anchor(&phase)] {
        let r = order_at(&phase, &a);
        assert!(r.exact, "{:?}", r.max_errors);
    }
}

#[test]
fn closed_form_map_straightens_worst_exactly() {
    let phase = worst().unwrap();
    let map = worst_explicit_map();
    let r = fit_map_error_order(&map, &phase, &origin(&phase), &dyadic_ladder(3, 8), 8, 3).unwrap();
    assert!(r.exact, "{:?}", r.max_errors);
    let grid = default_t_grid(&phase, 9);
    for &t in &grid {
        let (y, s) = map.apply(&[0.1, -0.05], t).unwrap();
        assert_eq!(s, t);
        assert_abs_diff_eq!(map.jacobian(&[0.1, -0.05], t).unwrap().determinant().abs(), 1.0, epsilon = 1e-6);
        assert_eq!(y.len(), 2);
    }
}

#[test]
fn naive_data_does_not_straighten_worst() {
    let phase = worst().unwrap();
    let abc = ABCData::naive(3);
    let a = origin(&phase);
    let opts = BuildOptions {
        verify_abc: false,
        ..BuildOptions::default()
    };
    let map = build_straightening_with(&phase, &abc, &a.xi, &a.v, opts).unwrap();
    let r = fit_map_error_order(&map, &phase, &a, &dyadic_ladder(3, 8), 8, 1).unwrap();
    assert!(r.slope().unwrap() < 1.2, "{:?}", r.fit);
    let err = build_straightening(&phase, &abc, &a.xi, &a.v).unwrap_err();
    assert!(matches!(err, LabError::InconsistentData(_)), "{err}");
}

#[test]
fn rest_map_is_translation_along_the_anchor() {
    let phase = rest(3).unwrap();
    let map = build_straightening(&phase, &ABCData::rest(3), &[0.1, 0.0], &[0.0, 0.2]).unwrap();
    // X₀(t) = v₀ − tξ₀.
    let (y, s) = map.apply(&[0.3, 0.4], 0.25).unwrap();
    assert_abs_diff_eq!(y[0], 0.3 - (0.0 - 0.25 * 0.1), epsilon = 1e-12);
    assert_abs_diff_eq!(y[1], 0.4 - 0.2, epsilon = 1e-12);
    assert_abs_diff_eq!(s, 0.25, epsilon = 1e-12);
    let (x, t) = map.inverse(&y, s).unwrap();
    assert_abs_diff_eq!(x[0], 0.3, epsilon = 1e-10);
    assert_abs_diff_eq!(x[1], 0.4, epsilon = 1e-10);
    assert_abs_diff_eq!(t, 0.25, epsilon = 1e-10);
}

#[test]
fn extraction_recovers_the_triple() {
    for phase in [rest(3).unwrap(), bochner_riesz(3).unwrap(), tan(3).unwrap(), tan(4).unwrap()] {
        let abc = ABCData::for_phase(&phase).unwrap();
        let a = generic_anchor(&phase);
        let map = build_straightening(&phase, &abc, &a.xi, &a.v).unwrap();
        let jets = map_jets(&map, &phase, &a.xi, &a.v, &extraction_heights(&phase, 9)).unwrap();
        let ex = extract_abc_from_map(&phase, &jets, &a.xi, &a.v).unwrap();
        assert!(ex.identity_residual < 1e-8, "{}: {:e}", phase.label(), ex.identity_residual);
        assert!((ex.a_matrix() - &map.a0).abs().max() < 1e-8);
        assert!((ex.b_matrix() - &map.b0).abs().max() < 1e-8);
    }
}

#[test]
fn extracted_rest_triple_has_c_equal_to_t() {
    // ∇²_ξ(x·ξ + t|ξ|²/2) = tI.
    let phase = rest(3).unwrap();
    let a = origin(&phase);
    let m = build_straightening(&phase, &ABCData::rest(3), &a.xi, &a.v).unwrap();
    let jets = map_jets(&m, &phase, &a.xi, &a.v, &extraction_heights(&phase, 5)).unwrap();
    let ex = extract_abc_from_map(&phase, &jets, &a.xi, &a.v).unwrap();
    assert!(ex.a_matrix().abs().max() < 1e-9);
    for &(t, c) in &ex.c {
        assert_abs_diff_eq!(c, t, epsilon = 1e-9);
    }
}

/// The same map with `V` doubled.
struct DoubledV(StraighteningMap);

impl Straightening for DoubledV {
    fn apply(&self, x: &[f64], t: f64) -> ck_lab::Result<(Vec<f64>, f64)> {
        self.0.apply(x, t)
    }
    fn xi_map(&self, xi: &[f64], v: &[f64]) -> Vec<f64> {
        self.0.xi_map(xi, v)
    }
    fn v_map(&self, xi: &[f64], v: &[f64]) -> Vec<f64> {
        self.0.v_map(xi, v).iter().map(|a| 2.0 * a).collect()
    }
}

#[test]
fn doubling_v_halves_b_and_keeps_a() {
    let phase = tan(3).unwrap();
    let a = generic_anchor(&phase);
    let map = build_straightening(&phase, &ABCData::tan(3), &a.xi, &a.v).unwrap();
    let heights = [1.0];
    let plain = extract_abc_from_map(&phase, &map_jets(&map, &phase, &a.xi, &a.v, &heights).unwrap(), &a.xi, &a.v).unwrap();
    let twice = DoubledV(map);
    let jets = map_jets(&twice, &phase, &a.xi, &a.v, &heights).unwrap();
    let ex = extract_abc_from_map(&phase, &jets, &a.xi, &a.v).unwrap();
    assert!((ex.a_matrix() - plain.a_matrix()).abs().max() < 1e-8);
    assert!((ex.b_matrix() * 2.0 - plain.b_matrix()).abs().max() < 1e-8);
}

#[test]
fn anchor_errors_are_typed() {
    let phase = bochner_riesz(3).unwrap();
    let err = build_straightening(&phase, &ABCData::bochner_riesz(3), &[0.0, 0.0], &[1.5, 0.0]).unwrap_err();
    assert!(matches!(err, LabError::InvalidAnchor(_)), "{err}");

    let tan3 = tan(3).unwrap();
    let flat = ABCData::new(
        "flat",
        |_, _| nalgebra::DMatrix::zeros(2, 2),
        |_, _| nalgebra::DMatrix::zeros(2, 2),
        |_, t, _| t.clone(),
    );
    let err = build_straightening(&tan3, &flat, &[0.0, 0.0], &[0.0, 0.0]).unwrap_err();
    assert!(matches!(err, LabError::InvalidAnchor(_)), "{err}");
}

#[test]
fn distance_sampling_is_exact_and_seeded() {
    use rand::SeedableRng;
    let c = CurveParam::new(vec![0.1, 0.2], vec![-0.1, 0.3]);
    let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for r in [1e-3, 0.1] {
        let p = param_at_distance(&c, r, &mut r1);
        let d: f64 = p.stacked().iter().zip(c.stacked()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert_abs_diff_eq!(d, r, epsilon = 1e-14);
        assert_eq!(p, param_at_distance(&c, r, &mut r2));
    }
}
