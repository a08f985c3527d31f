//! Test families for the SK hypotheses.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TubeFamily;
use crate::curve_tracer::CurveParam;
use crate::error::{LabError, Result};
use crate::phase_core::PhaseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyMode {
    /// One tube per `δ`-grid direction.
    Grid,
    /// Two tubes per direction of a middle-halves Cantor product set.
    Cantor,
}

impl std::str::FromStr for FamilyMode {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(FamilyMode::Grid),
            "cantor" => Ok(FamilyMode::Cantor),
            other => Err(LabError::Config(format!("unknown family mode '{other}'"))),
        }
    }
}

/// `v(ξ) = ∇_ξφ(0_M, ξ) + M(ξ − ξ_c)` with `M` seeded, entries in
/// `[−0.05, 0.05]`. Every curve passes near the origin point and `v` is
/// Lipschitz in `ξ`.
struct AffineRule {
    m: DMatrix<f64>,
    center: Vec<f64>,
}

impl AffineRule {
    fn new(phase: &PhaseSpec, rng: &mut ChaCha8Rng) -> Self {
        let k = phase.n() - 1;
        AffineRule {
            m: DMatrix::from_fn(k, k, |_, _| rng.gen_range(-0.05..0.05)),
            center: phase.domain_sigma().center(),
        }
    }

    fn v(&self, phase: &PhaseSpec, xi: &[f64]) -> Vec<f64> {
        let n = phase.n();
        let o = phase.origin_m();
        let base = phase.grad_xi_unchecked(&o[..n - 1], o[n - 1], xi);
        let d = DVector::from_iterator(xi.len(), xi.iter().zip(&self.center).map(|(a, b)| a - b));
        let shift = &self.m * d;
        base.iter().zip(shift.iter()).map(|(a, b)| a + b).collect()
    }
}

/// Cartesian product of per-axis point lists.
fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &a in axis {
                let mut q: Vec<f64> = p.clone();
                q.push(a);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Centers of the level-`L` intervals of the middle-halves Cantor set on
/// `[lo, lo + w]`, where `L` is the deepest level with interval length `≥ δ`.
fn cantor_axis(lo: f64, w: f64, delta: f64) -> Vec<f64> {
    let mut level = 0;
    while w * 0.25f64.powi(level + 1) >= delta * (1.0 - 1e-12) {
        level += 1;
    }
    let mut starts = vec![0.0f64];
    let mut len = 1.0;
    for _ in 0..level {
        len *= 0.25;
        starts = starts.iter().flat_map(|&s| [s, s + 3.0 * len]).collect();
    }
    starts.iter().map(|s| lo + w * (s + 0.5 * len)).collect()
}

/// Fully shaded test family with directions in the phase's `Σ` box.
pub fn make_sticky_family(phase: &PhaseSpec, delta: f64, mode: FamilyMode, seed: u64) -> Result<TubeFamily> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(LabError::Config(format!("delta = {delta} not in (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = AffineRule::new(phase, &mut rng);
    let sigma = phase.domain_sigma();
    let widths = sigma.widths();
    let label = match mode {
        FamilyMode::Grid => "grid",
        FamilyMode::Cantor => "cantor",
    };
    let mut fam = TubeFamily::new(phase, delta, format!("{label}-{}", phase.label()));
    match mode {
        FamilyMode::Grid => {
            let axes: Vec<Vec<f64>> = widths
                .iter()
                .zip(&sigma.lo)
                .map(|(&w, &lo)| {
                    let k = (w / delta * (1.0 + 1e-12)).floor() as usize;
                    let pad = 0.5 * (w - k as f64 * delta);
                    (0..k).map(|i| lo + pad + (i as f64 + 0.5) * delta).collect()
                })
                .collect();
            for xi in product(&axes) {
                let v = rule.v(phase, &xi);
                fam.push_full(CurveParam::new(xi, v))?;
            }
        }
        FamilyMode::Cantor => {
            let axes: Vec<Vec<f64>> = widths
                .iter()
                .zip(&sigma.lo)
                .map(|(&w, &lo)| cantor_axis(lo, w, delta))
                .collect();
            for xi in product(&axes) {
                let v = rule.v(phase, &xi);
                let mut w = v.clone();
                let last = w.len() - 1;
                w[last] += delta;
                fam.push_full(CurveParam::new(xi.clone(), v))?;
                fam.push_full(CurveParam::new(xi, w))?;
            }
        }
    }
    Ok(fam)
}

/// `count` tubes sharing the central direction, with `v` spaced by `δ`.
pub fn make_all_parallel_family(phase: &PhaseSpec, delta: f64, count: usize) -> Result<TubeFamily> {
    let xi = phase.domain_sigma().center();
    let n = phase.n();
    let o = phase.origin_m();
    let v0 = phase.grad_xi_unchecked(&o[..n - 1], o[n - 1], &xi);
    let mut fam = TubeFamily::new(phase, delta, format!("parallel-{}", phase.label()));
    for k in 0..count {
        let mut v = v0.clone();
        v[0] += (k as f64 - 0.5 * (count as f64 - 1.0)) * delta;
        fam.push_full(CurveParam::new(xi.clone(), v))?;
    }
    Ok(fam)
}

/// Copy of `family` with member `index` appended a second time.
pub fn with_duplicate(family: &TubeFamily, index: usize) -> TubeFamily {
    let mut out = family.clone();
    out.members.push(family.members[index].clone());
    out.label = format!("{}+dup", family.label);
    out
}
