//! Phases described in configuration files.
//!
//! ```toml
//! [phase]
//! n = 3
//! terms = [
//!   { coef = 1.0, x = [1, 0], xi = [1, 0] },
//!   { coef = 1.0, x = [0, 1], xi = [0, 1] },
//!   { coef = 0.5, t = 1, xi = [0, 2] },
//! ]
//! ```
//!
//! or a built-in with optional quadratic changes of variables:
//!
//! ```toml
//! [phase]
//! builtin = "tan"
//! n = 3
//! compose_x = { linear = [[1, 0, 0], [0, 1, 0.01], [0, 0, 1]] }
//! ```

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::builtins::by_name;
use super::{
    eval_jet, sample_domain, transform_phase, BoxDomain, Evaluator, PhaseSpec, PhaseTag, PolyMap,
};
use crate::error::{LabError, Result};
use crate::linalg::min_singular_value;
use crate::taylor::Tps;

/// One monomial `coef · x^x · t^t · ξ^xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    #[serde(default)]
    pub x: Vec<u8>,
    #[serde(default)]
    pub t: u8,
    #[serde(default)]
    pub xi: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Quadratic map; omitted parts default to the identity about `center`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
    #[serde(default)]
    pub linear: Option<Vec<Vec<f64>>>,
    /// `quadratic[k][i][j]` multiplies `h_i h_j` in output `k`.
    #[serde(default)]
    pub quadratic: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    #[serde(default)]
    pub builtin: Option<String>,
    pub n: usize,
    #[serde(default)]
    pub terms: Vec<Term>,
    #[serde(default)]
    pub domain_m: Option<BoxConfig>,
    #[serde(default)]
    pub domain_sigma: Option<BoxConfig>,
    #[serde(default)]
    pub origin_m: Option<Vec<f64>>,
    #[serde(default)]
    pub origin_sigma: Option<Vec<f64>>,
    #[serde(default)]
    pub compose_x: Option<MapConfig>,
    #[serde(default)]
    pub compose_xi: Option<MapConfig>,
    /// Reject phases whose curves are not graphs over `t` (default on).
    #[serde(default = "yes")]
    pub validate: bool,
}

fn yes() -> bool {
    true
}

impl PhaseConfig {
    pub fn builtin(name: &str, n: usize) -> Self {
        PhaseConfig {
            builtin: Some(name.to_string()),
            n,
            terms: Vec::new(),
            domain_m: None,
            domain_sigma: None,
            origin_m: None,
            origin_sigma: None,
            compose_x: None,
            compose_xi: None,
            validate: true,
        }
    }
}

fn build_map(cfg: &MapConfig, default_center: &[f64]) -> Result<PolyMap> {
    let d = default_center.len();
    let center = cfg.center.clone().unwrap_or_else(|| default_center.to_vec());
    let mut m = PolyMap::identity(&center);
    if let Some(o) = &cfg.offset {
        m.offset = o.clone();
    }
    if let Some(l) = &cfg.linear {
        if l.len() != d || l.iter().any(|r| r.len() != d) {
            return Err(LabError::Config(format!("linear part must be {d}x{d}")));
        }
        m.linear = DMatrix::from_fn(d, d, |i, j| l[i][j]);
    }
    if let Some(q) = &cfg.quadratic {
        if q.len() != d || q.iter().any(|m| m.len() != d || m.iter().any(|r| r.len() != d)) {
            return Err(LabError::Config(format!("quadratic part must be {d}x{d}x{d}")));
        }
        m.quadratic = q.iter().map(|qk| DMatrix::from_fn(d, d, |i, j| qk[i][j])).collect();
    }
    if m.center.len() != d || m.offset.len() != d {
        return Err(LabError::Config("map center/offset dimension mismatch".into()));
    }
    Ok(m)
}

fn polynomial_phase(cfg: &PhaseConfig) -> Result<PhaseSpec> {
    let n = cfg.n;
    if n < 2 {
        return Err(LabError::Config("n must be at least 2".into()));
    }
    let m = n - 1;
    for term in &cfg.terms {
        if term.x.len() > m || term.xi.len() > m {
            return Err(LabError::Config(format!("term exponents longer than {m}")));
        }
    }
    let terms = cfg.terms.clone();
    let f = move |x: &[Tps], t: &Tps, xi: &[Tps]| {
        let mut acc = t.zero_like();
        for term in &terms {
            let mut p = t.powi(term.t as u32) * term.coef;
            for (v, &e) in x.iter().zip(&term.x) {
                if e > 0 {
                    p = p * v.powi(e as u32);
                }
            }
            for (v, &e) in xi.iter().zip(&term.xi) {
                if e > 0 {
                    p = p * v.powi(e as u32);
                }
            }
            acc += p;
        }
        acc
    };
    let bx = |b: &Option<BoxConfig>, dim: usize| -> Result<BoxDomain> {
        match b {
            Some(b) if b.lo.len() == dim && b.hi.len() == dim => Ok(BoxDomain::new(b.lo.clone(), b.hi.clone())),
            Some(_) => Err(LabError::Config(format!("box must have dimension {dim}"))),
            None => Ok(BoxDomain::cube(&vec![0.0; dim], 0.5)),
        }
    };
    let dm = bx(&cfg.domain_m, n)?;
    let ds = bx(&cfg.domain_sigma, m)?;
    let om = cfg.origin_m.clone().unwrap_or_else(|| dm.center());
    let os = cfg.origin_sigma.clone().unwrap_or_else(|| ds.center());
    PhaseSpec::new(n, PhaseTag::User, "user", dm, ds, om, os, Evaluator::Exact(Arc::new(f)))
}

/// Checks (H1) and that the curves are graphs over `t` at sampled points.
pub fn validate_transversality(phase: &PhaseSpec, samples: usize) -> Result<()> {
    let n = phase.n();
    for p in sample_domain(phase, samples, 0) {
        let jet = eval_jet(phase, &p.x, p.t, &p.xi, 2)?;
        let k = jet.mixed();
        let sigma = min_singular_value(&k);
        let kx = k.rows(0, n - 1).into_owned();
        let d = kx.determinant();
        if sigma < 1e-8 || d.abs() < 1e-8 {
            return Err(LabError::Config(format!(
                "phase is not transverse to t-slices at x = {:?}, t = {}, ξ = {:?} (σ_min = {sigma:e}, det = {d:e})",
                p.x, p.t, p.xi
            )));
        }
    }
    Ok(())
}

pub fn load_phase(cfg: &PhaseConfig) -> Result<PhaseSpec> {
    let mut phase = match &cfg.builtin {
        Some(name) => {
            if !cfg.terms.is_empty() {
                return Err(LabError::Config("give either builtin or terms, not both".into()));
            }
            by_name(name, cfg.n)?
        }
        None => {
            if cfg.terms.is_empty() {
                return Err(LabError::Config("phase needs a builtin name or polynomial terms".into()));
            }
            polynomial_phase(cfg)?
        }
    };
    if cfg.builtin.is_some() && (cfg.domain_m.is_some() || cfg.domain_sigma.is_some()) {
        let dm = match &cfg.domain_m {
            Some(b) => BoxDomain::new(b.lo.clone(), b.hi.clone()),
            None => phase.domain_m().clone(),
        };
        let ds = match &cfg.domain_sigma {
            Some(b) => BoxDomain::new(b.lo.clone(), b.hi.clone()),
            None => phase.domain_sigma().clone(),
        };
        phase = phase.with_domain(dm, ds)?;
    }
    if cfg.compose_x.is_some() || cfg.compose_xi.is_some() {
        let n = phase.n();
        let gx = match &cfg.compose_x {
            Some(c) => build_map(c, phase.origin_m())?,
            None => PolyMap::identity(phase.origin_m()),
        };
        let gxi = match &cfg.compose_xi {
            Some(c) => build_map(c, phase.origin_sigma())?,
            None => PolyMap::identity(phase.origin_sigma()),
        };
        debug_assert_eq!(gx.dim(), n);
        phase = transform_phase(&phase, &gx, &gxi)?;
    }
    if cfg.validate {
        validate_transversality(&phase, 64)?;
    }
    Ok(phase)
}
