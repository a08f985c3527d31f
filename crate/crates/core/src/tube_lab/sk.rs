//! The hypotheses of the SK assertion on a concrete family.

use serde::Serialize;

use super::{
    cell_cover, cover, distinctness_violations, max_parallel_count_at, sum_member_volumes,
    union_volume, Cover, TubeFamily,
};
use crate::error::Result;

/// `ρ = δ, 2δ, 4δ, …` up to 1 (and 1 itself).
pub fn default_scale_ladder(delta: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = delta;
    while r < 1.0 - 1e-12 {
        out.push(r);
        r *= 2.0;
    }
    out.push(1.0);
    out
}

/// Hypothesis (b) at one scale.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleCheck {
    pub rho: f64,
    pub greedy_parents: usize,
    pub greedy_parallel: usize,
    pub lattice_parents: usize,
    pub lattice_parallel: usize,
    /// The smaller of the two parallel counts.
    pub parallel: usize,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkReport {
    pub label: String,
    pub delta: f64,
    pub eta: f64,
    pub members: usize,
    pub a_violations: usize,
    pub a_pass: bool,
    pub scales: Vec<ScaleCheck>,
    pub b_pass: bool,
    pub shading_sum: f64,
    pub c_bound: f64,
    pub c_pass: bool,
    pub union_volume: f64,
    /// `log|⋃Y| / log δ`.
    pub eps_hat: f64,
    pub grid_res: usize,
}

impl SkReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.a_pass && self.b_pass && self.c_pass
    }
}

fn parallel_of(c: &Cover) -> usize {
    let dirs: Vec<Vec<f64>> = c.parents.iter().map(|p| p.xi.clone()).collect();
    max_parallel_count_at(&dirs, c.rho)
}

/// Checks (a) pairwise essential distinctness, (b) at each `ρ` some cover
/// (greedy or lattice) with at most `δ^{−η}` pairwise essentially parallel
/// tubes, (c) `Σ|Y(T)| ≥ δ^η`; measures `|⋃Y|` and `ε̂`.
pub fn sk_experiment(family: &TubeFamily, eta: f64, scale_ladder: &[f64], grid_res: usize) -> Result<SkReport> {
    let delta = family.delta;
    let bound = delta.powf(-eta);
    let a_violations = distinctness_violations(family).len();
    let mut scales = Vec::with_capacity(scale_ladder.len());
    for &rho in scale_ladder {
        let g = cover(family, rho);
        let l = cell_cover(family, rho);
        let gp = parallel_of(&g);
        let lp = parallel_of(&l);
        let parallel = gp.min(lp);
        scales.push(ScaleCheck {
            rho,
            greedy_parents: g.len(),
            greedy_parallel: gp,
            lattice_parents: l.len(),
            lattice_parallel: lp,
            parallel,
            bound,
            pass: parallel as f64 <= bound,
        });
    }
    let shading_sum = sum_member_volumes(family);
    let c_bound = delta.powf(eta);
    let vol = union_volume(family, grid_res)?;
    Ok(SkReport {
        label: family.label.clone(),
        delta,
        eta,
        members: family.len(),
        a_violations,
        a_pass: a_violations == 0,
        b_pass: scales.iter().all(|s| s.pass),
        scales,
        shading_sum,
        c_bound,
        c_pass: shading_sum >= c_bound,
        union_volume: vol,
        eps_hat: vol.ln() / delta.ln(),
        grid_res,
    })
}
