//! Phase functions with exact jets and the pointwise condition checks.
//!
//! Jets live in a single Taylor space over the `2n − 1` variables
//! `(x_1, …, x_{n−1}, t, ξ_1, …, ξ_{n−1})`, in that order. The spatial
//! point `𝐱 = (x, t)` therefore occupies indices `0..n` and `ξ_j` sits at
//! index `n + j`.

mod abc;
mod builtins;
mod conditions;
mod sampling;
mod transform;
pub mod user;

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::taylor::{TaylorSpace, Tps};

pub use abc::ABCData;
pub use builtins::{bochner_riesz, by_name, rest, tan, worst};
pub use conditions::{
    bourgain_matrices, check_abc, check_bourgain, check_h1, check_h2, gauss_map, gauss_transport_defect, AbcReport,
    ConditionReport,
};
pub use sampling::{halton_points, sample_box, sample_domain, DomainPoint};
pub use transform::{random_near_identity, transform_phase, PolyMap};

/// Highest jet order the checks need.
pub const MAX_ORDER: usize = 4;

/// Index of the spatial coordinate `𝐱_i` (`i = n − 1` is `t`).
pub fn xvar(i: usize) -> usize {
    i
}

/// Index of `ξ_j` in a jet over dimension `n`.
pub fn xivar(n: usize, j: usize) -> usize {
    n + j
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTag {
    Rest,
    BochnerRiesz,
    Worst,
    Tan,
    Transformed,
    User,
}

/// A phase written once over Taylor series; the jets follow by evaluation.
pub trait PhaseFunction: Send + Sync {
    fn eval(&self, x: &[Tps], t: &Tps, xi: &[Tps]) -> Tps;
}

impl<F> PhaseFunction for F
where
    F: Fn(&[Tps], &Tps, &[Tps]) -> Tps + Send + Sync,
{
    fn eval(&self, x: &[Tps], t: &Tps, xi: &[Tps]) -> Tps {
        self(x, t, xi)
    }
}

pub type SampledPhase = dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Evaluator {
    Exact(Arc<dyn PhaseFunction>),
    /// Point values only; jets come from central differences with base step
    /// `step` (coarser for higher orders).
    FiniteDifference { f: Arc<SampledPhase>, step: f64 },
}

impl fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evaluator::Exact(_) => f.write_str("Exact"),
            Evaluator::FiniteDifference { step, .. } => write!(f, "FiniteDifference({step:e})"),
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b), "inverted box");
        BoxDomain { lo, hi }
    }

    pub fn centered(center: &[f64], half: &[f64]) -> Self {
        BoxDomain::new(
            center.iter().zip(half).map(|(c, h)| c - h).collect(),
            center.iter().zip(half).map(|(c, h)| c + h).collect(),
        )
    }

    pub fn cube(center: &[f64], half: f64) -> Self {
        BoxDomain::centered(center, &vec![half; center.len()])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        const SLACK: f64 = 1e-12;
        p.len() == self.lo.len()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| *x >= a - SLACK && *x <= b + SLACK)
    }

    /// Same center, every half-width multiplied by `factor`.
    pub fn shrunk(&self, factor: f64) -> Self {
        let c = self.center();
        let half: Vec<f64> = self.widths().iter().map(|w| 0.5 * w * factor).collect();
        BoxDomain::centered(&c, &half)
    }

    /// Shrinks about `about` (which must lie in the box).
    pub fn shrunk_about(&self, about: &[f64], factor: f64) -> Self {
        BoxDomain::new(
            self.lo.iter().zip(about).map(|(a, o)| o + factor * (a - o)).collect(),
            self.hi.iter().zip(about).map(|(b, o)| o + factor * (b - o)).collect(),
        )
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    /// Map from the unit cube.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(s, (a, b))| a + s * (b - a))
            .collect()
    }
}

/// A phase `φ(x, t, ξ)` with its domain metadata.
#[derive(Clone)]
pub struct PhaseSpec {
    n: usize,
    tag: PhaseTag,
    label: String,
    domain_m: BoxDomain,
    domain_sigma: BoxDomain,
    origin_m: Vec<f64>,
    origin_sigma: Vec<f64>,
    evaluator: Evaluator,
    v_box: Arc<OnceLock<BoxDomain>>,
}

impl fmt::Debug for PhaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseSpec")
            .field("n", &self.n)
            .field("tag", &self.tag)
            .field("label", &self.label)
            .field("domain_m", &self.domain_m)
            .field("domain_sigma", &self.domain_sigma)
            .field("evaluator", &self.evaluator)
            .finish()
    }
}

impl PhaseSpec {
    pub fn new(
        n: usize,
        tag: PhaseTag,
        label: impl Into<String>,
        domain_m: BoxDomain,
        domain_sigma: BoxDomain,
        origin_m: Vec<f64>,
        origin_sigma: Vec<f64>,
        evaluator: Evaluator,
    ) -> Result<Self> {
        if !(2..=6).contains(&n) {
            return Err(LabError::Config(format!("dimension {n} outside 2..=6")));
        }
        if domain_m.dim() != n || domain_sigma.dim() != n - 1 {
            return Err(LabError::Config("domain box dimensions do not match n".into()));
        }
        if !domain_m.contains(&origin_m) || !domain_sigma.contains(&origin_sigma) {
            return Err(LabError::Config("origin lies outside the domain".into()));
        }
        Ok(PhaseSpec {
            n,
            tag,
            label: label.into(),
            domain_m,
            domain_sigma,
            origin_m,
            origin_sigma,
            evaluator,
            v_box: Arc::new(OnceLock::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tag(&self) -> PhaseTag {
        self.tag
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_m(&self) -> &BoxDomain {
        &self.domain_m
    }

    pub fn domain_sigma(&self) -> &BoxDomain {
        &self.domain_sigma
    }

    /// The working ball `M₀`: the spatial box shrunk to 90%.
    pub fn m0(&self) -> BoxDomain {
        self.domain_m.shrunk_about(&self.origin_m, 0.9)
    }

    /// The working ball `Σ₀`.
    pub fn sigma0(&self) -> BoxDomain {
        self.domain_sigma.shrunk_about(&self.origin_sigma, 0.9)
    }

    pub fn origin_m(&self) -> &[f64] {
        &self.origin_m
    }

    pub fn origin_sigma(&self) -> &[f64] {
        &self.origin_sigma
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.evaluator, Evaluator::Exact(_))
    }

    /// Default Bourgain tolerance for this evaluator.
    pub fn default_tolerance(&self) -> f64 {
        if self.is_exact() {
            1e-6
        } else {
            1e-3
        }
    }

    /// The t-range of the spatial box.
    pub fn t_range(&self) -> (f64, f64) {
        (self.domain_m.lo[self.n - 1], self.domain_m.hi[self.n - 1])
    }

    /// Copy with new boxes (the origin must stay inside).
    pub fn with_domain(&self, domain_m: BoxDomain, domain_sigma: BoxDomain) -> Result<Self> {
        PhaseSpec::new(
            self.n,
            self.tag,
            self.label.clone(),
            domain_m,
            domain_sigma,
            self.origin_m.clone(),
            self.origin_sigma.clone(),
            self.evaluator.clone(),
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn in_domain(&self, x: &[f64], t: f64, xi: &[f64]) -> bool {
        let mut p = x.to_vec();
        p.push(t);
        x.len() == self.n - 1 && self.domain_m.contains(&p) && self.domain_sigma.contains(xi)
    }

    fn check_point(&self, x: &[f64], t: f64, xi: &[f64]) -> Result<()> {
        if x.len() != self.n - 1 || xi.len() != self.n - 1 {
            return Err(LabError::Domain(format!(
                "expected {} spatial and frequency coordinates",
                self.n - 1
            )));
        }
        if !self.in_domain(x, t, xi) {
            return Err(LabError::Domain(format!("x = {x:?}, t = {t}, ξ = {xi:?}")));
        }
        Ok(())
    }

    /// The Taylor space used for jets of this phase.
    pub fn space(&self, order: usize) -> &'static TaylorSpace {
        TaylorSpace::get(2 * self.n - 1, order)
    }

    /// Jet series at a point without the domain check (used inside solvers
    /// that may step slightly outside the box).
    pub fn series(&self, x: &[f64], t: f64, xi: &[f64], order: usize) -> Tps {
        let space = self.space(order);
        let mut p = Vec::with_capacity(2 * self.n - 1);
        p.extend_from_slice(x);
        p.push(t);
        p.extend_from_slice(xi);
        match &self.evaluator {
            Evaluator::Exact(f) => {
                let vars = Tps::variables(space, &p);
                let n = self.n;
                f.eval(&vars[..n - 1], &vars[n - 1], &vars[n..])
            }
            Evaluator::FiniteDifference { f, step } => {
                let n = self.n;
                let g = |q: &[f64]| f(&q[..n - 1], q[n - 1], &q[n..]);
                fd_series(space, &g, &p, *step)
            }
        }
    }

    /// Series in which `𝐱` and `ξ` are themselves supplied as series (used
    /// by composition and by the straightener's exact derivatives).
    pub fn compose_series(&self, x: &[Tps], t: &Tps, xi: &[Tps]) -> Tps {
        match &self.evaluator {
            Evaluator::Exact(f) => f.eval(x, t, xi),
            Evaluator::FiniteDifference { .. } => {
                // Expand around the constant terms and substitute.
                let space = t.space();
                let mut p: Vec<f64> = x.iter().map(|s| s.value()).collect();
                p.push(t.value());
                p.extend(xi.iter().map(|s| s.value()));
                let inner = self.series(&p[..self.n - 1], p[self.n - 1], &p[self.n..], space.order());
                let mut args: Vec<Tps> = x.to_vec();
                args.push(t.clone());
                args.extend_from_slice(xi);
                substitute(&inner, &args)
            }
        }
    }

    pub fn value(&self, x: &[f64], t: f64, xi: &[f64]) -> f64 {
        self.series(x, t, xi, 0).value()
    }

    /// `∇_ξφ` without the domain check.
    pub fn grad_xi_unchecked(&self, x: &[f64], t: f64, xi: &[f64]) -> Vec<f64> {
        let s = self.series(x, t, xi, 1);
        (0..self.n - 1)
            .map(|j| s.partial_by_vars(&[xivar(self.n, j)]))
            .collect()
    }

    /// Bounding box of `∇_ξφ(M₀ × Σ₀)`, shrunk to 90%. Computed once.
    pub fn v_box(&self) -> &BoxDomain {
        self.v_box.get_or_init(|| {
            let m0 = self.m0();
            let s0 = self.sigma0();
            let n = self.n;
            let pts = halton_points(2 * n - 1, 10_000, None);
            let mut lo = vec![f64::INFINITY; n - 1];
            let mut hi = vec![f64::NEG_INFINITY; n - 1];
            for u in pts {
                let xm = m0.from_unit(&u[..n]);
                let xs = s0.from_unit(&u[n..]);
                let v = self.grad_xi_unchecked(&xm[..n - 1], xm[n - 1], &xs);
                for j in 0..n - 1 {
                    lo[j] = lo[j].min(v[j]);
                    hi[j] = hi[j].max(v[j]);
                }
            }
            BoxDomain::new(lo, hi).shrunk(0.9)
        })
    }

    /// `0_𝒱 = ∇_ξφ(0_M, 0_Σ)`.
    pub fn origin_v(&self) -> Vec<f64> {
        let n = self.n;
        self.grad_xi_unchecked(&self.origin_m[..n - 1], self.origin_m[n - 1], &self.origin_sigma)
    }
}

/// Substitutes series `args` for the variables of a series expanded around
/// their constant terms.
fn substitute(inner: &Tps, args: &[Tps]) -> Tps {
    let space = inner.space();
    let out_space = args[0].space();
    let h: Vec<Tps> = args
        .iter()
        .map(|a| {
            let mut d = a.clone();
            d -= a.value();
            d
        })
        .collect();
    let mut acc = Tps::constant(out_space, 0.0);
    for k in 0..space.len() {
        let c = inner.coeffs()[k];
        if c == 0.0 {
            continue;
        }
        let mut term = Tps::constant(out_space, c);
        for (v, &e) in space.exponents(k).iter().enumerate() {
            if e > 0 {
                term = term * h[v].powi(e as u32);
            }
        }
        acc += term;
    }
    acc.truncated(inner.valid_order())
}

const FD_STENCILS: [&[(i32, f64)]; 5] = [
    &[(0, 1.0)],
    &[(-1, -0.5), (1, 0.5)],
    &[(-1, 1.0), (0, -2.0), (1, 1.0)],
    &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
];

/// Step multipliers per total derivative degree.
const FD_STEP_SCALE: [f64; 5] = [1.0, 1.0, 10.0, 50.0, 200.0];

fn fd_series(space: &'static TaylorSpace, f: &dyn Fn(&[f64]) -> f64, p: &[f64], step: f64) -> Tps {
    let mut coeffs = vec![0.0; space.len()];
    let mut q = p.to_vec();
    for (k, c) in coeffs.iter_mut().enumerate() {
        let e = space.exponents(k);
        let deg = space.degree_of(k);
        let h = step * FD_STEP_SCALE[deg];
        let active: Vec<(usize, usize)> = e
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(v, &m)| (v, m as usize))
            .collect();
        let mut idx = vec![0usize; active.len()];
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            q.copy_from_slice(p);
            for (a, &(v, m)) in active.iter().enumerate() {
                let (off, wt) = FD_STENCILS[m][idx[a]];
                w *= wt;
                q[v] += off as f64 * h;
            }
            acc += w * f(&q);
            let mut a = 0;
            while a < active.len() {
                idx[a] += 1;
                if idx[a] < FD_STENCILS[active[a].1].len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == active.len() {
                break;
            }
        }
        let fact: f64 = active.iter().map(|&(_, m)| crate::taylor::factorial(m)).product();
        *c = acc / h.powi(deg as i32) / fact;
    }
    Tps::from_coeffs(space, coeffs, space.order())
}

/// All mixed partials of `φ` up to a fixed order at one point.
#[derive(Debug, Clone)]
pub struct Jet {
    pub x: Vec<f64>,
    pub t: f64,
    pub xi: Vec<f64>,
    pub order: usize,
    n: usize,
    series: Tps,
}

impl Jet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn series(&self) -> &Tps {
        &self.series
    }

    pub fn value(&self) -> f64 {
        self.series.value()
    }

    /// Partial derivative along the listed variable indices (any order of
    /// the list gives the same value).
    pub fn partial(&self, vars: &[usize]) -> f64 {
        self.series.partial_by_vars(vars)
    }

    pub fn grad_xi(&self) -> Vec<f64> {
        (0..self.n - 1).map(|j| self.partial(&[xivar(self.n, j)])).collect()
    }

    /// `∇_𝐱φ` over all `n` spatial coordinates.
    pub fn grad_x(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.partial(&[xvar(i)])).collect()
    }

    pub fn hess_xi(&self) -> DMatrix<f64> {
        let m = self.n - 1;
        DMatrix::from_fn(m, m, |i, j| self.partial(&[xivar(self.n, i), xivar(self.n, j)]))
    }

    /// The `n × (n − 1)` matrix `∇_𝐱∇_ξφ`.
    pub fn mixed(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n - 1, |i, j| {
            self.partial(&[xvar(i), xivar(self.n, j)])
        })
    }
}

/// Jet of `φ` at `(x, t, ξ)`.
pub fn eval_jet(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64], order: usize) -> Result<Jet> {
    if order > MAX_ORDER {
        return Err(LabError::UnsupportedOrder(order));
    }
    phase.check_point(x, t, xi)?;
    Ok(Jet {
        x: x.to_vec(),
        t,
        xi: xi.to_vec(),
        order,
        n: phase.n,
        series: phase.series(x, t, xi, order),
    })
}
