//! Straightening a `ρ`-tube's children and blowing them up by
//! `h(x, t) = (ρ⁻¹x, t)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{unit_ball_volume, Tube, TubeFamily};
use crate::curve_tracer::{curve_metric, default_t_grid, linspace, solve_x, trace_curve, CurveParam};
use crate::error::{LabError, Result};
use crate::phase_core::{ABCData, PhaseSpec};
use crate::straightener::{
    build_straightening, param_at_distance, straightening_error, Straightening, StraighteningMap,
};

#[derive(Debug, Clone, Serialize)]
pub struct RescaleReport {
    pub rho: f64,
    pub delta: f64,
    /// Per child: `ρ⁻¹ max_t |F(ℓ) − line_{Ξ,V}|`.
    pub deviations: Vec<f64>,
    pub max_line_deviation: f64,
    pub deviation_over_rho: f64,
    /// `(ρ⁻¹Ξ, ρ⁻¹V)` of each child's target line after the blow-up.
    pub straight: Vec<CurveParam>,
    /// Rasterized volume of the first child's shaded tube.
    pub probe_volume: f64,
    /// Rasterized volume of its image under `h∘F`.
    pub image_volume: f64,
    pub volume_factor: f64,
    /// `ρ^{−(n−1)}` times the mean of `|det DF|` over the probe.
    pub expected_factor: f64,
    pub jacobian_ratio: f64,
    /// Radius of a round tube with the image's volume per unit height.
    pub image_radius: f64,
}

/// Cap on grid points per slice.
const SLICE_BUDGET: usize = 1 << 20;

fn slice_res(grid_res: usize, m: usize) -> usize {
    let cap = (SLICE_BUDGET as f64).powf(1.0 / m as f64).floor() as usize;
    grid_res.min(cap).max(2)
}

/// Grid points of the box `center ± half` (midpoint rule, `res` per axis)
/// that satisfy `inside`.
fn count_in_box(center: &[f64], half: &[f64], res: usize, inside: impl Fn(&[f64]) -> bool) -> f64 {
    let m = center.len();
    let h: Vec<f64> = half.iter().map(|w| 2.0 * w / res as f64).collect();
    let mut idx = vec![0usize; m];
    let mut p = vec![0.0; m];
    let mut hits = 0usize;
    loop {
        for i in 0..m {
            p[i] = center[i] - half[i] + (idx[i] as f64 + 0.5) * h[i];
        }
        if inside(&p) {
            hits += 1;
        }
        let mut i = 0;
        while i < m {
            idx[i] += 1;
            if idx[i] < res {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == m {
            break;
        }
    }
    hits as f64 * h.iter().product::<f64>()
}

fn c_tilde_slope(map: &StraighteningMap, t: f64) -> Result<f64> {
    const H: f64 = 1e-6;
    Ok((map.c_tilde(t + H)? - map.c_tilde(t - H)?) / (2.0 * H))
}

/// Applies `h∘F`, with `F` the straightening anchored at the parent, to the
/// children; measures their distance to straight lines and the volume
/// factor of the first child's shaded tube.
pub fn rescale_within(parent: &Tube, abc: &ABCData, children: &TubeFamily, grid_res: usize) -> Result<RescaleReport> {
    let rho = parent.delta;
    let delta = children.delta;
    let phase = &children.phase;
    if children.is_empty() {
        return Err(LabError::Config("no children to rescale".into()));
    }
    for (t, _) in &children.members {
        let d = curve_metric(&t.param, &parent.param);
        if d > rho * (1.0 + 1e-12) {
            return Err(LabError::Containment { distance: d, rho });
        }
    }
    let map = build_straightening(phase, abc, &parent.param.xi, &parent.param.v)?;
    let grid = default_t_grid(phase, 41);
    let mut deviations = Vec::with_capacity(children.len());
    let mut straight = Vec::with_capacity(children.len());
    for (t, _) in &children.members {
        let p = &t.param;
        deviations.push(straightening_error(&map, phase, &p.xi, &p.v, &grid)? / rho);
        let a: Vec<f64> = map.xi_map(&p.xi, &p.v).iter().map(|x| x / rho).collect();
        let b: Vec<f64> = map.v_map(&p.xi, &p.v).iter().map(|x| x / rho).collect();
        straight.push(CurveParam::new(a, b));
    }
    let max_line_deviation = deviations.iter().cloned().fold(0.0, f64::max);

    let n = phase.n();
    let m = n - 1;
    let res = slice_res(grid_res, m);
    let (probe, shading) = &children.members[0];
    let (ta, tb) = shading
        .span()
        .ok_or_else(|| LabError::Config("probe child has an empty shading".into()))?;
    let trace = trace_curve(phase, &probe.param, &linspace(ta, tb, 33))?;
    let center_at = |t: f64| solve_x(phase, &probe.param.xi, &probe.param.v, t, &trace.interpolate(t));

    let dt = (tb - ta) / grid_res as f64;
    let mut probe_volume = 0.0;
    let mut weighted = 0.0;
    for k in 0..grid_res {
        let t = ta + (k as f64 + 0.5) * dt;
        if !shading.contains(t) {
            continue;
        }
        let c = center_at(t)?;
        let area = count_in_box(&c, &vec![delta; m], res, |p| {
            p.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= delta * delta
        });
        probe_volume += area * dt;
        let jac = map.twist(t)?.determinant().abs() * c_tilde_slope(&map, t)?.abs();
        weighted += jac * area * dt;
    }
    let expected_factor = rho.powi(-(m as i32)) * weighted / probe_volume;

    let (sa, sb) = (map.c_tilde(ta)?, map.c_tilde(tb)?);
    let (slo, shi) = (sa.min(sb), sa.max(sb));
    let ds = (shi - slo) / grid_res as f64;
    let mut image_volume = 0.0;
    let mut image_len = 0.0;
    for k in 0..grid_res {
        let s = slo + (k as f64 + 0.5) * ds;
        let t = map.c_tilde_inverse(s)?;
        if !shading.contains(t) {
            continue;
        }
        let x0 = map.anchor_point(t)?;
        let j = map.twist(t)?;
        let jinv = j
            .clone()
            .try_inverse()
            .ok_or_else(|| LabError::InvalidAnchor("singular twist".into()))?;
        let c = center_at(t)?;
        let d = nalgebra::DVector::from_iterator(m, c.iter().zip(&x0).map(|(a, b)| a - b));
        let yc: Vec<f64> = (&j * d).iter().map(|v| v / rho).collect();
        let half: Vec<f64> = (0..m).map(|i| j.row(i).norm() * delta / rho).collect();
        let area = count_in_box(&yc, &half, res, |y| {
            let dy = nalgebra::DVector::from_iterator(m, y.iter().zip(&yc).map(|(a, b)| rho * (a - b)));
            (&jinv * dy).norm_squared() <= delta * delta
        });
        image_volume += area * ds;
        image_len += ds;
    }
    let volume_factor = image_volume / probe_volume;
    let image_radius = (image_volume / (image_len * unit_ball_volume(m))).powf(1.0 / m as f64);
    Ok(RescaleReport {
        rho,
        delta,
        max_line_deviation,
        deviation_over_rho: max_line_deviation / rho,
        deviations,
        straight,
        probe_volume,
        image_volume,
        volume_factor,
        expected_factor,
        jacobian_ratio: volume_factor / expected_factor,
        image_radius,
    })
}

/// `count` fully shaded `δ`-children whose parameters lie at Euclidean
/// distance `(ρ − δ)/√2` from `anchor`, so each child ball sits inside the
/// parent ball.
pub fn rescale_children(
    phase: &PhaseSpec,
    delta: f64,
    anchor: &CurveParam,
    rho: f64,
    count: usize,
    seed: u64,
) -> Result<TubeFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fam = TubeFamily::new(phase, delta, format!("children@{rho}"));
    let r = (rho - delta) / std::f64::consts::SQRT_2;
    for _ in 0..count {
        fam.push_full(param_at_distance(anchor, r, &mut rng))?;
    }
    Ok(fam)
}
