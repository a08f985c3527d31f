//! Finitary tube geometry: `(δ, φ)`-tubes with interval shadings,
//! essential distinctness and parallelism, multiscale covers, union volumes
//! and the rescaling experiment.

mod clique;
mod families;
mod raster;
mod rescale;
mod sk;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::curve_tracer::{curve_metric, CurveParam};
use crate::error::{LabError, Result};
use crate::linalg::dist;
use crate::phase_core::PhaseSpec;

pub use clique::{max_clique, BitGraph};
pub use families::{make_all_parallel_family, make_sticky_family, with_duplicate, FamilyMode};
pub use raster::{member_volume, sum_member_volumes, unit_ball_volume, union_volume, union_volume_with};
pub use rescale::{rescale_children, rescale_within, RescaleReport};
pub use sk::{default_scale_ladder, sk_experiment, ScaleCheck, SkReport};

/// Relative slack on the inclusive comparisons `≥ δ` and `≤ δ`.
const INCLUSIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub param: CurveParam,
    pub delta: f64,
}

impl Tube {
    pub fn new(param: CurveParam, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(LabError::Config(format!("tube radius {delta} not in (0, 1]")));
        }
        Ok(Tube { param, delta })
    }

    pub fn dir(&self) -> &[f64] {
        &self.param.xi
    }
}

/// Disjoint sorted closed `t`-intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shading {
    pub t_intervals: Vec<(f64, f64)>,
}

impl Shading {
    pub fn new(mut t_intervals: Vec<(f64, f64)>) -> Result<Self> {
        t_intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (a, b) in &t_intervals {
            if !(a < b) {
                return Err(LabError::Config(format!("empty shading interval [{a}, {b}]")));
            }
        }
        for w in t_intervals.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(LabError::Config("shading intervals overlap".into()));
            }
        }
        Ok(Shading { t_intervals })
    }

    pub fn empty() -> Self {
        Shading {
            t_intervals: Vec::new(),
        }
    }

    /// The whole `t`-range of `M₀`.
    pub fn full(phase: &PhaseSpec) -> Self {
        let m0 = phase.m0();
        let n = phase.n();
        Shading {
            t_intervals: vec![(m0.lo[n - 1], m0.hi[n - 1])],
        }
    }

    pub fn length(&self) -> f64 {
        self.t_intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_intervals.iter().any(|&(a, b)| a <= t && t <= b)
    }

    pub fn is_empty(&self) -> bool {
        self.t_intervals.is_empty()
    }

    /// Smallest and largest shaded height.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.t_intervals.first()?.0, self.t_intervals.last()?.1))
    }
}

#[derive(Debug, Clone)]
pub struct TubeFamily {
    pub phase: PhaseSpec,
    pub delta: f64,
    pub members: Vec<(Tube, Shading)>,
    pub label: String,
}

/// One line of a serialized family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeRecord {
    pub xi: Vec<f64>,
    pub v: Vec<f64>,
    pub delta: f64,
    pub shading: Vec<(f64, f64)>,
}

impl TubeFamily {
    pub fn new(phase: &PhaseSpec, delta: f64, label: impl Into<String>) -> Self {
        TubeFamily {
            phase: phase.clone(),
            delta,
            members: Vec::new(),
            label: label.into(),
        }
    }

    pub fn push(&mut self, tube: Tube, shading: Shading) -> Result<()> {
        if tube.delta != self.delta {
            return Err(LabError::MismatchedDelta(tube.delta, self.delta));
        }
        if tube.param.xi.len() != self.phase.n() - 1 {
            return Err(LabError::Config("tube parameter has the wrong dimension".into()));
        }
        self.members.push((tube, shading));
        Ok(())
    }

    /// Adds a fully shaded tube at `param`.
    pub fn push_full(&mut self, param: CurveParam) -> Result<()> {
        let tube = Tube::new(param, self.delta)?;
        let sh = Shading::full(&self.phase);
        self.push(tube, sh)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn params(&self) -> Vec<CurveParam> {
        self.members.iter().map(|(t, _)| t.param.clone()).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (t, s) in &self.members {
            let rec = TubeRecord {
                xi: t.param.xi.clone(),
                v: t.param.v.clone(),
                delta: t.delta,
                shading: s.t_intervals.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(phase: &PhaseSpec, r: R, label: &str) -> Result<Self> {
        let mut fam: Option<TubeFamily> = None;
        for (k, line) in r.lines().enumerate() {
            let line = line.map_err(|e| LabError::Config(e.to_string()))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: TubeRecord = serde_json::from_str(&line)
                .map_err(|e| LabError::Config(format!("line {}: {e}", k + 1)))?;
            let f = fam.get_or_insert_with(|| TubeFamily::new(phase, rec.delta, label));
            f.push(
                Tube::new(CurveParam::new(rec.xi, rec.v), rec.delta)?,
                Shading::new(rec.shading)?,
            )?;
        }
        fam.ok_or_else(|| LabError::Config("empty tube family".into()))
    }
}

fn same_delta(t1: &Tube, t2: &Tube) -> Result<()> {
    if t1.delta != t2.delta {
        return Err(LabError::MismatchedDelta(t1.delta, t2.delta));
    }
    Ok(())
}

/// `d(T₁*, T₂*) ≥ δ`.
pub fn essentially_distinct(t1: &Tube, t2: &Tube) -> Result<bool> {
    same_delta(t1, t2)?;
    Ok(curve_metric(&t1.param, &t2.param) >= t1.delta * (1.0 - INCLUSIVE_SLACK))
}

/// `|dir(T₁) − dir(T₂)| ≤ δ`.
pub fn essentially_parallel(t1: &Tube, t2: &Tube) -> Result<bool> {
    same_delta(t1, t2)?;
    Ok(parallel_at(t1.dir(), t2.dir(), t1.delta))
}

fn parallel_at(a: &[f64], b: &[f64], delta: f64) -> bool {
    dist(a, b) <= delta * (1.0 + INCLUSIVE_SLACK)
}

/// A cover of a `δ`-family by `ρ`-tubes.
#[derive(Debug, Clone)]
pub struct Cover {
    pub rho: f64,
    pub parents: Vec<CurveParam>,
    /// Parent index of every member of the covered family.
    pub assignment: Vec<usize>,
}

impl Cover {
    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Largest `d(child*, parent*) + δ − ρ` over the family; `≤ 0` means
    /// every child ball lies in its parent ball.
    pub fn containment_excess(&self, family: &TubeFamily) -> f64 {
        family
            .members
            .iter()
            .zip(&self.assignment)
            .map(|((t, _), &k)| curve_metric(&t.param, &self.parents[k]) + family.delta - self.rho)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The parents as a `ρ`-family; each parent's shading is the union of
    /// its children's shading spans.
    pub fn to_family(&self, family: &TubeFamily) -> Result<TubeFamily> {
        let mut spans: Vec<Option<(f64, f64)>> = vec![None; self.parents.len()];
        for ((_, sh), &k) in family.members.iter().zip(&self.assignment) {
            if let Some((a, b)) = sh.span() {
                let e = spans[k].get_or_insert((a, b));
                e.0 = e.0.min(a);
                e.1 = e.1.max(b);
            }
        }
        let mut out = TubeFamily::new(&family.phase, self.rho, format!("{}@{}", family.label, self.rho));
        for (p, span) in self.parents.iter().zip(spans) {
            let sh = match span {
                Some(s) => Shading::new(vec![s])?,
                None => Shading::empty(),
            };
            out.push(Tube::new(p.clone(), self.rho)?, sh)?;
        }
        Ok(out)
    }
}

fn covered_by(params: &[CurveParam], center: &CurveParam, delta: f64, rho: f64, taken: &[bool]) -> Vec<usize> {
    params
        .iter()
        .enumerate()
        .filter(|(j, p)| !taken[*j] && curve_metric(p, center) + delta <= rho * (1.0 + INCLUSIVE_SLACK))
        .map(|(j, _)| j)
        .collect()
}

fn mean_param(params: &[&CurveParam]) -> CurveParam {
    let k = params.len() as f64;
    let m = params[0].xi.len();
    let mut xi = vec![0.0; m];
    let mut v = vec![0.0; m];
    for p in params {
        for j in 0..m {
            xi[j] += p.xi[j] / k;
            v[j] += p.v[j] / k;
        }
    }
    CurveParam::new(xi, v)
}

/// Greedy cover: the first uncovered member seeds a `ρ`-ball, centered at
/// the seed or at the mean of the uncovered members within `ρ` of it,
/// whichever contains more uncovered child balls.
pub fn cover(family: &TubeFamily, rho: f64) -> Cover {
    let params = family.params();
    let delta = family.delta;
    let mut taken = vec![false; params.len()];
    let mut assignment = vec![usize::MAX; params.len()];
    let mut parents = Vec::new();
    for i in 0..params.len() {
        if taken[i] {
            continue;
        }
        let seed = params[i].clone();
        let mut best = covered_by(&params, &seed, delta, rho, &taken);
        let mut center = seed.clone();
        let near: Vec<&CurveParam> = params
            .iter()
            .enumerate()
            .filter(|(j, p)| !taken[*j] && curve_metric(p, &seed) <= rho)
            .map(|(_, p)| p)
            .collect();
        if near.len() > 1 {
            let c = mean_param(&near);
            let alt = covered_by(&params, &c, delta, rho, &taken);
            if alt.len() > best.len() && alt.contains(&i) {
                best = alt;
                center = c;
            }
        }
        let k = parents.len();
        for j in best {
            taken[j] = true;
            assignment[j] = k;
        }
        parents.push(center);
    }
    Cover {
        rho,
        parents,
        assignment,
    }
}

/// Lattice cover: directions are binned into cubes of side `kδ` with the
/// largest `k ≤ ρ/δ` for which every child ball fits in the ball around
/// (cube center, mean `v` of the cube). Children that still do not fit are
/// covered greedily.
pub fn cell_cover(family: &TubeFamily, rho: f64) -> Cover {
    let params = family.params();
    let delta = family.delta;
    if params.is_empty() {
        return Cover {
            rho,
            parents: Vec::new(),
            assignment: Vec::new(),
        };
    }
    let lo = family.phase.domain_sigma().lo.clone();
    let kmax = ((rho / delta) * (1.0 + INCLUSIVE_SLACK)).floor().max(1.0) as usize;
    let mut best: Option<Cover> = None;
    for k in (1..=kmax).rev() {
        let c = lattice_cover(&params, &lo, delta, rho, k as f64 * delta);
        let fits = c.1 == 0;
        let better = best.as_ref().map_or(true, |b| c.0.len() < b.len());
        if better {
            best = Some(c.0);
        }
        if fits {
            break;
        }
    }
    best.expect("at least one lattice size tried")
}

fn lattice_cover(params: &[CurveParam], lo: &[f64], delta: f64, rho: f64, side: f64) -> (Cover, usize) {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (j, p) in params.iter().enumerate() {
        let key: Vec<i64> = p
            .xi
            .iter()
            .zip(lo)
            .map(|(x, l)| ((x - l) / side).floor() as i64)
            .collect();
        cells.entry(key).or_default().push(j);
    }
    let mut parents = Vec::new();
    let mut assignment = vec![usize::MAX; params.len()];
    let mut taken = vec![false; params.len()];
    for (key, members) in &cells {
        let xi: Vec<f64> = key
            .iter()
            .zip(lo)
            .map(|(&c, l)| l + (c as f64 + 0.5) * side)
            .collect();
        let m = params[members[0]].v.len();
        let mut v = vec![0.0; m];
        for &j in members {
            for (a, b) in v.iter_mut().zip(&params[j].v) {
                *a += b / members.len() as f64;
            }
        }
        let center = CurveParam::new(xi, v);
        let k = parents.len();
        let mut used = false;
        for &j in members {
            if curve_metric(&params[j], &center) + delta <= rho * (1.0 + INCLUSIVE_SLACK) {
                taken[j] = true;
                assignment[j] = k;
                used = true;
            }
        }
        if used {
            parents.push(center);
        }
    }
    let misfits = taken.iter().filter(|t| !**t).count();
    for i in 0..params.len() {
        if taken[i] {
            continue;
        }
        let k = parents.len();
        for j in covered_by(params, &params[i], delta, rho, &taken) {
            taken[j] = true;
            assignment[j] = k;
        }
        parents.push(params[i].clone());
    }
    (
        Cover {
            rho,
            parents,
            assignment,
        },
        misfits,
    )
}

/// Below this size the parallel count is an exact clique number.
pub const EXACT_CLIQUE_LIMIT: usize = 8192;

/// Largest set of pairwise essentially parallel tubes (`|ξ − ξ′| ≤ scale`).
/// Exact for families up to [`EXACT_CLIQUE_LIMIT`]; above it, the count of
/// the fullest `scale`-cell together with its neighbors.
pub fn max_parallel_count_at(dirs: &[Vec<f64>], scale: f64) -> usize {
    if dirs.is_empty() {
        return 0;
    }
    if dirs.len() <= EXACT_CLIQUE_LIMIT {
        let g = BitGraph::from_relation(dirs.len(), |i, j| parallel_at(&dirs[i], &dirs[j], scale));
        max_clique(&g)
    } else {
        parallel_bin_bound(dirs, scale)
    }
}

pub fn max_parallel_count(family: &TubeFamily) -> usize {
    let dirs: Vec<Vec<f64>> = family.members.iter().map(|(t, _)| t.param.xi.clone()).collect();
    max_parallel_count_at(&dirs, family.delta)
}

/// Upper bound on the parallel clique number by direction binning.
pub fn parallel_bin_bound(dirs: &[Vec<f64>], scale: f64) -> usize {
    use std::collections::HashMap;
    let mut bins: HashMap<Vec<i64>, usize> = HashMap::new();
    for d in dirs {
        let key: Vec<i64> = d.iter().map(|x| (x / scale).floor() as i64).collect();
        *bins.entry(key).or_default() += 1;
    }
    let m = dirs.first().map_or(0, |d| d.len());
    let mut best = 0;
    for key in bins.keys() {
        let mut total = 0;
        let mut off = vec![-1i64; m];
        loop {
            let k: Vec<i64> = key.iter().zip(&off).map(|(a, b)| a + b).collect();
            total += bins.get(&k).copied().unwrap_or(0);
            let mut i = 0;
            while i < m {
                off[i] += 1;
                if off[i] <= 1 {
                    break;
                }
                off[i] = -1;
                i += 1;
            }
            if i == m {
                break;
            }
        }
        best = best.max(total);
    }
    best
}

/// Members pairwise more than `2(ρ − δ)` apart, greedily chosen. No single
/// `ρ`-ball holds two of their `δ`-balls, so this is a lower bound on the
/// size of any cover.
pub fn packing_lower_bound(family: &TubeFamily, rho: f64) -> usize {
    let sep = 2.0 * (rho - family.delta);
    let mut chosen: Vec<CurveParam> = Vec::new();
    for (t, _) in &family.members {
        if chosen.iter().all(|c| curve_metric(c, &t.param) > sep) {
            chosen.push(t.param.clone());
        }
    }
    chosen.len()
}

/// Pairs `(i, j)` with `i < j` that are not essentially distinct.
pub fn distinctness_violations(family: &TubeFamily) -> Vec<(usize, usize)> {
    use rayon::prelude::*;
    let params = family.params();
    let delta = family.delta;
    (0..params.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let params = &params;
            (i + 1..params.len())
                .filter(move |&j| curve_metric(&params[i], &params[j]) < delta * (1.0 - INCLUSIVE_SLACK))
                .map(move |j| (i, j))
        })
        .collect()
}
