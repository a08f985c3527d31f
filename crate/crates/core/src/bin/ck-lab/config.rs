//! Run configuration: defaults, TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ck_lab::phase_core::user::PhaseConfig;
use ck_lab::tube_lab::FamilyMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub samples: usize,
    pub expect: Expect,
    /// Residual bound for `pass`; the phase default when absent.
    pub tol: Option<f64>,
    /// Residual floor for `fail`.
    pub fail_floor: f64,
    /// Keep only samples with `|t − t_origin| ≤ t_window`.
    pub t_window: Option<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            samples: 200,
            expect: Expect::Pass,
            tol: None,
            fail_floor: 0.1,
            t_window: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcConfig {
    pub samples: usize,
    pub tol: f64,
}

impl Default for AbcConfig {
    fn default() -> Self {
        AbcConfig { samples: 50, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub xi: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub points: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            xi: None,
            v: None,
            points: 41,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StraightenConfig {
    /// `generic`, `origin`/`0`, or an explicit `ξ…;v…` pair.
    pub anchor: String,
    pub naive_abc: bool,
    /// Use the closed-form map of the `worst` phase.
    pub explicit: bool,
    pub radii: Vec<f64>,
    pub samples: usize,
    pub band: [f64; 2],
}

impl Default for StraightenConfig {
    fn default() -> Self {
        StraightenConfig {
            anchor: "generic".into(),
            naive_abc: false,
            explicit: false,
            radii: ck_lab::fit::dyadic_ladder(3, 8),
            samples: 8,
            band: [1.8, 2.2],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TanRunConfig {
    pub n: usize,
    pub t0: f64,
    pub p: Vec<f64>,
    pub scaling_steps: usize,
    /// Extra seeded configurations checked for positivity.
    pub grid: usize,
    pub rel_tol: f64,
}

impl Default for TanRunConfig {
    fn default() -> Self {
        TanRunConfig {
            n: 3,
            t0: 1.05,
            p: vec![1e-3, 1e-3],
            scaling_steps: 6,
            grid: 0,
            rel_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TubesConfig {
    pub delta: f64,
    pub mode: FamilyMode,
    pub eta: f64,
    pub grid_res: usize,
    /// Read the family from this JSONL file instead of generating one.
    pub family: Option<PathBuf>,
    pub rho_ladder: Vec<f64>,
    pub children: usize,
    /// Probe δ as a power of ρ in the rescale check.
    pub child_power: f64,
    pub ratio_band: f64,
    pub volume_tol: f64,
}

impl Default for TubesConfig {
    fn default() -> Self {
        TubesConfig {
            delta: 2f64.powi(-6),
            mode: FamilyMode::Grid,
            eta: 0.2,
            grid_res: 128,
            family: None,
            rho_ladder: ck_lab::fit::dyadic_ladder(3, 5),
            children: 8,
            child_power: 2.0,
            ratio_band: 2.0,
            volume_tol: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub plot: bool,
    pub phase: PhaseConfig,
    pub check: CheckConfig,
    pub abc_verify: AbcConfig,
    pub trace: TraceConfig,
    pub straighten: StraightenConfig,
    pub tan: TanRunConfig,
    pub tubes: TubesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out: PathBuf::from("out"),
            plot: false,
            phase: PhaseConfig::builtin("tan", 3),
            check: CheckConfig::default(),
            abc_verify: AbcConfig::default(),
            trace: TraceConfig::default(),
            straighten: StraightenConfig::default(),
            tan: TanRunConfig::default(),
            tubes: TubesConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    /// `--phase` and `--n` replace the phase selector.
    pub fn select_phase(&mut self, name: Option<&str>, n: Option<usize>) {
        match (name, n) {
            (Some(name), n) => {
                let n = n.unwrap_or(if name == "worst" { 3 } else { self.phase.n });
                self.phase = PhaseConfig::builtin(name, n);
            }
            (None, Some(n)) => self.phase.n = n,
            (None, None) => {}
        }
    }
}

/// A number such as `0.25`, `1e-3` or `2^-6`.
pub fn parse_num(s: &str) -> anyhow::Result<f64> {
    let s = s.trim();
    if let Some((b, e)) = s.split_once('^') {
        let b: f64 = b.trim().parse().with_context(|| format!("bad base in '{s}'"))?;
        let e: f64 = e.trim().parse().with_context(|| format!("bad exponent in '{s}'"))?;
        return Ok(b.powf(e));
    }
    s.parse().with_context(|| format!("not a number: '{s}'"))
}

/// Comma-separated numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<f64>);

pub fn parse_list(s: &str) -> anyhow::Result<NumList> {
    if s.trim().is_empty() {
        bail!("empty list");
    }
    let out: Vec<f64> = s.split(',').map(parse_num).collect::<anyhow::Result<_>>()?;
    Ok(NumList(out))
}
