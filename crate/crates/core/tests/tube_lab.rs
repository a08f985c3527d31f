use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use ck_lab::curve_tracer::{curve_metric, CurveParam};
use ck_lab::phase_core::*;
use ck_lab::straightener::generic_anchor;
use ck_lab::tube_lab::*;
use ck_lab::LabError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn tube(xi: [f64; 2], v: [f64; 2], delta: f64) -> Tube {
    Tube::new(CurveParam::new(xi.to_vec(), v.to_vec()), delta).unwrap()
}

#[test]
fn distinct_and_parallel_are_inclusive_at_delta() {
    let d = 0.1;
    let a = tube([0.0, 0.0], [0.0, 0.0], d);
    assert!(essentially_distinct(&a, &tube([0.06, 0.0], [0.0, 0.04], d)).unwrap());
    assert!(!essentially_distinct(&a, &tube([0.05, 0.0], [0.0, 0.04], d)).unwrap());
    assert!(essentially_parallel(&a, &tube([0.06, 0.08], [0.3, 0.0], d)).unwrap());
    assert!(!essentially_parallel(&a, &tube([0.06, 0.081], [0.3, 0.0], d)).unwrap());
    let err = essentially_parallel(&a, &tube([0.0, 0.0], [0.0, 0.0], 0.2)).unwrap_err();
    assert!(matches!(err, LabError::MismatchedDelta(..)));
}

#[test]
fn shading_rejects_bad_intervals() {
    assert!(Shading::new(vec![(0.2, 0.1)]).is_err());
    let s = Shading::new(vec![(0.3, 0.4), (0.0, 0.1)]).unwrap();
    assert_abs_diff_eq!(s.length(), 0.2, epsilon = 1e-15);
    assert!(s.contains(0.05) && !s.contains(0.2));
    assert_eq!(s.span(), Some((0.0, 0.4)));
    assert!(Shading::empty().is_empty());
}

/// Clique number by exhaustive search over subsets.
fn brute_clique(n: usize, adj: &[Vec<bool>]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let ok = members.iter().all(|&i| members.iter().all(|&j| i == j || adj[i][j]));
        if ok {
            best = best.max(members.len());
        }
    }
    best
}

#[test]
fn clique_number_matches_exhaustive_search() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for trial in 0..40 {
        let n = 4 + trial % 11;
        let p = 0.2 + 0.6 * (trial as f64 / 40.0);
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let e = rng.gen_bool(p);
                adj[i][j] = e;
                adj[j][i] = e;
            }
        }
        let g = BitGraph::from_relation(n, |i, j| adj[i][j]);
        assert_eq!(max_clique(&g), brute_clique(n, &adj), "trial {trial}");
    }
}

#[test]
fn covers_are_sound_and_not_wasteful() {
    let phase = rest(3).unwrap();
    let fam = make_sticky_family(&phase, 2f64.powi(-4), FamilyMode::Grid, 1).unwrap();
    assert_eq!(fam.len(), 256);
    for rho in default_scale_ladder(fam.delta) {
        for c in [cover(&fam, rho), cell_cover(&fam, rho)] {
            assert_eq!(c.assignment.len(), fam.len());
            assert!(c.assignment.iter().all(|&k| k < c.len()));
            assert!(c.containment_excess(&fam) <= 1e-12 * rho, "rho = {rho}");
            assert!(c.len() >= packing_lower_bound(&fam, rho));
            let parents = c.to_family(&fam).unwrap();
            assert_eq!(parents.delta, rho);
        }
        assert!(cover(&fam, rho).len() <= fam.len());
    }
    assert_eq!(cover(&fam, 1.0).len(), 1);
}

#[test]
fn single_straight_tube_has_cylinder_volume() {
    let phase = rest(3).unwrap();
    let delta = 0.05;
    let mut fam = TubeFamily::new(&phase, delta, "one");
    fam.push_full(CurveParam::new(vec![0.0, 0.0], vec![0.0, 0.0])).unwrap();
    let height = 0.9;
    let want = PI * delta * delta * height;
    assert_abs_diff_eq!(member_volume(&fam, 0), want, epsilon = 1e-15);
    let got = union_volume(&fam, 128).unwrap();
    assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
    // Voxel centers of the 128-grid over [−0.45, 0.45] inside the disk.
    let h = 0.9 / 128.0;
    let c: Vec<f64> = (0..128).map(|i| -0.45 + (i as f64 + 0.5) * h).collect();
    let hits = c.iter().flat_map(|a| c.iter().map(move |b| a * a + b * b)).filter(|r2| *r2 <= delta * delta).count();
    assert_abs_diff_eq!(got, hits as f64 * h * h * height, epsilon = 1e-12);
}

#[test]
fn union_volume_is_additive_and_subadditive() {
    let phase = rest(3).unwrap();
    let delta = 0.05;
    let far = |xs: &[[f64; 2]]| {
        let mut fam = TubeFamily::new(&phase, delta, "far");
        for v in xs {
            fam.push_full(CurveParam::new(vec![0.0, 0.0], v.to_vec())).unwrap();
        }
        fam
    };
    let a = union_volume(&far(&[[-0.2, 0.0]]), 128).unwrap();
    let b = union_volume(&far(&[[0.2, 0.0]]), 128).unwrap();
    let ab = union_volume(&far(&[[-0.2, 0.0], [0.2, 0.0]]), 128).unwrap();
    assert_abs_diff_eq!(ab, a + b, epsilon = 1e-12);
    let c = union_volume(&far(&[[0.23, 0.0]]), 128).unwrap();
    let bc = union_volume(&far(&[[0.2, 0.0], [0.23, 0.0]]), 128).unwrap();
    assert!(bc < b + c - 1e-4 && bc >= b.max(c));
    let dup = union_volume(&with_duplicate(&far(&[[0.2, 0.0]]), 0), 128).unwrap();
    assert_eq!(dup, b);
}

#[test]
fn coarse_grid_is_rejected() {
    let phase = rest(3).unwrap();
    let mut fam = TubeFamily::new(&phase, 0.001, "thin");
    fam.push_full(CurveParam::new(vec![0.0, 0.0], vec![0.0, 0.0])).unwrap();
    assert!(matches!(union_volume(&fam, 64), Err(LabError::Resolution { .. })));
}

#[test]
fn jsonl_round_trip_skips_comments() {
    let phase = tan(3).unwrap();
    let fam = make_sticky_family(&phase, 0.125, FamilyMode::Cantor, 3).unwrap();
    let mut buf = b"# header\n\n".to_vec();
    fam.write_jsonl(&mut buf).unwrap();
    let back = TubeFamily::read_jsonl(&phase, buf.as_slice(), "back").unwrap();
    assert_eq!(back.len(), fam.len());
    for ((a, sa), (b, sb)) in fam.members.iter().zip(&back.members) {
        assert_eq!(a.param, b.param);
        assert_eq!(sa.t_intervals, sb.t_intervals);
    }
    assert!(TubeFamily::read_jsonl(&phase, "{not json}\n".as_bytes(), "bad").is_err());
}

#[test]
fn grid_family_meets_the_hypotheses() {
    let phase = rest(3).unwrap();
    let fam = make_sticky_family(&phase, 2f64.powi(-4), FamilyMode::Grid, 1).unwrap();
    // Grid neighbors at distance δ count as parallel, so the bound must allow 2.
    let r = sk_experiment(&fam, 0.25, &default_scale_ladder(fam.delta), 64).unwrap();
    assert!(r.scales.iter().all(|s| s.parallel <= 2));
    assert!(r.a_pass && r.b_pass && r.c_pass, "{r:?}");
    assert!(r.union_volume > 0.0 && r.union_volume <= r.shading_sum + 1e-12);
    assert_abs_diff_eq!(r.eps_hat, r.union_volume.ln() / fam.delta.ln(), epsilon = 1e-15);
}

#[test]
fn duplicates_break_distinctness() {
    let phase = rest(3).unwrap();
    let fam = make_sticky_family(&phase, 2f64.powi(-4), FamilyMode::Grid, 1).unwrap();
    let dup = with_duplicate(&fam, 7);
    assert_eq!(distinctness_violations(&dup), vec![(7, fam.len())]);
    let r = sk_experiment(&dup, 0.2, &[fam.delta], 64).unwrap();
    assert!(!r.a_pass && r.a_violations == 1);
}

#[test]
fn parallel_pile_breaks_the_direction_bound() {
    let phase = rest(3).unwrap();
    let delta = 2f64.powi(-4);
    let fam = make_all_parallel_family(&phase, delta, 8).unwrap();
    assert_eq!(max_parallel_count(&fam), 8);
    let r = sk_experiment(&fam, 0.2, &[delta], 64).unwrap();
    assert!(r.a_pass);
    assert!(!r.b_pass, "{:?}", r.scales);
}

#[test]
fn rest_children_rescale_to_lines_with_exact_volume_factor() {
    let phase = rest(3).unwrap();
    let anchor = generic_anchor(&phase);
    let rho = 0.125;
    let delta = rho * rho;
    let parent = Tube::new(anchor.clone(), rho).unwrap();
    let kids = rescale_children(&phase, delta, &anchor, rho, 4, 2).unwrap();
    for (t, _) in &kids.members {
        assert!(curve_metric(&t.param, &anchor) + delta <= rho + 1e-12);
    }
    let r = rescale_within(&parent, &ABCData::rest(3), &kids, 128).unwrap();
    assert!(r.max_line_deviation < 1e-12, "{:e}", r.max_line_deviation);
    // Translation in x, identity in t, then x ↦ x/ρ.
    assert!((r.volume_factor - rho.powi(-2)).abs() < 0.05 * rho.powi(-2), "{}", r.volume_factor);
    assert!((r.jacobian_ratio - 1.0).abs() < 0.05);
    assert!((r.image_radius - delta / rho).abs() < 0.05 * delta / rho);
}

#[test]
fn tan_children_deviation_shrinks_with_rho() {
    let phase = tan(3).unwrap();
    let anchor = generic_anchor(&phase);
    let abc = ABCData::tan(3);
    let mut ratios = Vec::new();
    for rho in [0.125, 0.0625] {
        let parent = Tube::new(anchor.clone(), rho).unwrap();
        let kids = rescale_children(&phase, rho * rho, &anchor, rho, 6, 1).unwrap();
        let r = rescale_within(&parent, &abc, &kids, 64).unwrap();
        assert!((r.jacobian_ratio - 1.0).abs() < 0.15, "{}", r.jacobian_ratio);
        ratios.push(r.deviation_over_rho);
    }
    assert!(ratios.iter().all(|&x| x < 0.2), "{ratios:?}");
}

#[test]
fn children_outside_the_parent_are_rejected() {
    let phase = rest(3).unwrap();
    let parent = Tube::new(CurveParam::new(vec![0.0, 0.0], vec![0.0, 0.0]), 0.1).unwrap();
    let mut kids = TubeFamily::new(&phase, 0.01, "kids");
    kids.push_full(CurveParam::new(vec![0.2, 0.0], vec![0.0, 0.0])).unwrap();
    let err = rescale_within(&parent, &ABCData::rest(3), &kids, 32).unwrap_err();
    assert!(matches!(err, LabError::Containment { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bin_bound_dominates_exact_count(
        pts in prop::collection::vec(prop::collection::vec(-0.5f64..0.5, 2), 1..60),
        scale in 0.05f64..0.3,
    ) {
        prop_assert!(parallel_bin_bound(&pts, scale) >= max_parallel_count_at(&pts, scale));
    }
}
