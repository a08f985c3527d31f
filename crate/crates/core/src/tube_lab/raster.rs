//! Voxel measure of the union of shaded tubes over `M₀`.

use rayon::prelude::*;

use super::TubeFamily;
use crate::curve_tracer::{linspace, trace_curve, CurveSample};
use crate::error::{LabError, Result};

/// Volume of the unit ball in `ℝᵏ`.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(k - 2) * 2.0 * std::f64::consts::PI / k as f64,
    }
}

/// `|Y(T)|` = shaded length × `|B^{n−1}_δ|`.
pub fn member_volume(family: &TubeFamily, index: usize) -> f64 {
    let n = family.phase.n();
    family.members[index].1.length() * unit_ball_volume(n - 1) * family.delta.powi(n as i32 - 1)
}

pub fn sum_member_volumes(family: &TubeFamily) -> f64 {
    (0..family.len()).map(|i| member_volume(family, i)).sum()
}

/// Number of heights at which every tube is traced before interpolation.
pub const TRACE_POINTS: usize = 65;

pub fn union_volume(family: &TubeFamily, grid_res: usize) -> Result<f64> {
    union_volume_with(family, grid_res, TRACE_POINTS)
}

/// Voxel count × voxel volume of `⋃ Y(T)` on a `grid_resⁿ` grid over `M₀`.
/// A voxel center `(x, t)` is in `Y(T)` when `t` is shaded and
/// `|x − X(ξ, v, t)| ≤ δ`, with `X` linearly interpolated from a trace at
/// `trace_points` heights.
pub fn union_volume_with(family: &TubeFamily, grid_res: usize, trace_points: usize) -> Result<f64> {
    let phase = &family.phase;
    let n = phase.n();
    let m = n - 1;
    let m0 = phase.m0();
    let widths = m0.widths();
    let voxel: Vec<f64> = widths.iter().map(|w| w / grid_res as f64).collect();
    let vmax = voxel[..m].iter().cloned().fold(0.0, f64::max);
    if grid_res < 2 || vmax > 2.0 * family.delta {
        return Err(LabError::Resolution {
            voxel: vmax,
            delta: family.delta,
        });
    }
    let (tlo, thi) = (m0.lo[m], m0.hi[m]);
    let tgrid = linspace(tlo, thi, trace_points.max(2));
    let traces: Vec<Option<CurveSample>> = family
        .members
        .par_iter()
        .map(|(tube, sh)| {
            if sh.is_empty() {
                Ok(None)
            } else {
                trace_curve(phase, &tube.param, &tgrid).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let delta = family.delta;
    let cells = grid_res.pow(m as u32);
    let words = cells.div_ceil(64);
    let total: usize = (0..grid_res)
        .into_par_iter()
        .map(|k| {
            let t = tlo + (k as f64 + 0.5) * voxel[m];
            let mut bits = vec![0u64; words];
            for ((_, sh), tr) in family.members.iter().zip(&traces) {
                let Some(tr) = tr else { continue };
                if !sh.contains(t) {
                    continue;
                }
                let c = tr.interpolate(t);
                mark_ball(&mut bits, &c, delta, &m0.lo[..m], &voxel[..m], grid_res);
            }
            bits.iter().map(|w| w.count_ones() as usize).sum::<usize>()
        })
        .sum();
    Ok(total as f64 * voxel.iter().product::<f64>())
}

fn mark_ball(bits: &mut [u64], c: &[f64], r: f64, lo: &[f64], h: &[f64], res: usize) {
    let m = c.len();
    let mut first = vec![0usize; m];
    let mut last = vec![0usize; m];
    for i in 0..m {
        let a = ((c[i] - r - lo[i]) / h[i] - 0.5).ceil();
        let b = ((c[i] + r - lo[i]) / h[i] - 0.5).floor();
        if b < 0.0 || a > (res - 1) as f64 || a > b {
            return;
        }
        first[i] = a.max(0.0) as usize;
        last[i] = b.min((res - 1) as f64) as usize;
    }
    let mut idx = first.clone();
    let r2 = r * r;
    loop {
        let mut d2 = 0.0;
        let mut flat = 0usize;
        for i in (0..m).rev() {
            let x = lo[i] + (idx[i] as f64 + 0.5) * h[i];
            d2 += (x - c[i]) * (x - c[i]);
            flat = flat * res + idx[i];
        }
        if d2 <= r2 {
            bits[flat / 64] |= 1 << (flat % 64);
        }
        let mut i = 0;
        while i < m {
            idx[i] += 1;
            if idx[i] <= last[i] {
                break;
            }
            idx[i] = first[i];
            i += 1;
        }
        if i == m {
            break;
        }
    }
}
