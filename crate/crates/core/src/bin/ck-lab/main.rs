//! `ck-lab`: batch driver for the laboratory.

mod commands;
mod config;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use ck_lab::LabError;

use config::{parse_list, parse_num, Expect, NumList, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "ck-lab", version, about = "Curved Kakeya numerical laboratory")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write SVG figures.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Default)]
struct PhaseArgs {
    /// Built-in phase: rest, bochner_riesz, tan, worst.
    #[arg(long)]
    phase: Option<String>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Rank, curvature and Bourgain checks on sampled points.
    Check {
        #[command(flatten)]
        phase: PhaseArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum)]
        expect: Option<Expect>,
        #[arg(long, value_parser = parse_num)]
        tol: Option<f64>,
        #[arg(long, value_parser = parse_num)]
        fail_floor: Option<f64>,
        #[arg(long, value_parser = parse_num)]
        t_window: Option<f64>,
    },
    /// Checks the (A, B, c) identity of a built-in phase.
    AbcVerify {
        #[command(flatten)]
        phase: PhaseArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_parser = parse_num)]
        tol: Option<f64>,
    },
    /// Traces one curve and checks the implicit derivative.
    Trace {
        #[command(flatten)]
        phase: PhaseArgs,
        #[arg(long, value_parser = parse_list)]
        xi: Option<NumList>,
        #[arg(long, value_parser = parse_list)]
        v: Option<NumList>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Builds a straightening and fits its error order.
    Straighten {
        #[command(flatten)]
        phase: PhaseArgs,
        /// generic, origin (or 0), or "xi1,xi2;v1,v2".
        #[arg(long)]
        anchor: Option<String>,
        #[arg(long)]
        naive_abc: bool,
        #[arg(long)]
        explicit: bool,
        #[arg(long, value_parser = parse_list)]
        radii: Option<NumList>,
        #[arg(long)]
        samples: Option<usize>,
        /// Accepted slope range "lo,hi".
        #[arg(long, value_parser = parse_list)]
        band: Option<NumList>,
    },
    /// Coniness determinant of the tan pencil.
    TanConiness {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_parser = parse_num)]
        t0: Option<f64>,
        #[arg(long, value_parser = parse_list)]
        p: Option<NumList>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Tube experiments.
    Tubes {
        #[command(subcommand)]
        cmd: TubesCmd,
    },
}

#[derive(Subcommand, Debug)]
enum TubesCmd {
    /// Hypotheses (a)-(c) and the union volume of a family.
    SkRun {
        #[command(flatten)]
        phase: PhaseArgs,
        #[arg(long, value_parser = parse_num)]
        delta: Option<f64>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, value_parser = parse_num)]
        eta: Option<f64>,
        #[arg(long)]
        grid_res: Option<usize>,
        /// JSONL family to load instead of generating one.
        #[arg(long)]
        family: Option<PathBuf>,
    },
    /// Straightens and blows up children of a parent tube.
    RescaleCheck {
        #[command(flatten)]
        phase: PhaseArgs,
        #[arg(long, value_parser = parse_list)]
        rho_ladder: Option<NumList>,
        #[arg(long)]
        children: Option<usize>,
        #[arg(long)]
        grid_res: Option<usize>,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

pub const EXIT_VERDICT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            msg: msg.into(),
        }
    }
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(_) => Failure::usage(e.to_string()),
            _ => Failure::runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::usage(format!("{e:#}"))
    }
}

fn apply_flags(cfg: &mut RunConfig, cli: &Cli) -> Result<&'static str, Failure> {
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.plot |= cli.plot;
    let name = match &cli.cmd {
        Cmd::Check {
            phase,
            samples,
            expect,
            tol,
            fail_floor,
            t_window,
        } => {
            cfg.select_phase(phase.phase.as_deref(), phase.n);
            let c = &mut cfg.check;
            set(&mut c.samples, *samples);
            set(&mut c.expect, *expect);
            if tol.is_some() {
                c.tol = *tol;
            }
            set(&mut c.fail_floor, *fail_floor);
            if t_window.is_some() {
                c.t_window = *t_window;
            }
            "check"
        }
        Cmd::AbcVerify { phase, samples, tol } => {
            cfg.select_phase(phase.phase.as_deref(), phase.n);
            set(&mut cfg.abc_verify.samples, *samples);
            set(&mut cfg.abc_verify.tol, *tol);
            "abc-verify"
        }
        Cmd::Trace { phase, xi, v, points } => {
            cfg.select_phase(phase.phase.as_deref(), phase.n);
            if xi.is_some() {
                cfg.trace.xi = xi.clone().map(|l| l.0);
            }
            if v.is_some() {
                cfg.trace.v = v.clone().map(|l| l.0);
            }
            set(&mut cfg.trace.points, *points);
            "trace"
        }
        Cmd::Straighten {
            phase,
            anchor,
            naive_abc,
            explicit,
            radii,
            samples,
            band,
        } => {
            cfg.select_phase(phase.phase.as_deref(), phase.n);
            let s = &mut cfg.straighten;
            set(&mut s.anchor, anchor.clone());
            s.naive_abc |= naive_abc;
            s.explicit |= explicit;
            set(&mut s.radii, radii.clone().map(|l| l.0));
            set(&mut s.samples, *samples);
            if let Some(NumList(b)) = band {
                if b.len() != 2 || b[0] > b[1] {
                    return Err(Failure::usage("--band needs two increasing numbers"));
                }
                s.band = [b[0], b[1]];
            }
            "straighten"
        }
        Cmd::TanConiness { n, t0, p, steps, grid } => {
            let t = &mut cfg.tan;
            set(&mut t.n, *n);
            set(&mut t.t0, *t0);
            set(&mut t.p, p.clone().map(|l| l.0));
            set(&mut t.scaling_steps, *steps);
            set(&mut t.grid, *grid);
            if n.is_some() && p.is_none() && t.p.len() + 1 != t.n {
                let mut q = vec![0.0; t.n - 1];
                q[t.n - 3] = 1e-3;
                q[t.n - 2] = 1e-3;
                t.p = q;
            }
            "tan-coniness"
        }
        Cmd::Tubes { cmd } => match cmd {
            TubesCmd::SkRun {
                phase,
                delta,
                mode,
                eta,
                grid_res,
                family,
            } => {
                cfg.select_phase(phase.phase.as_deref(), phase.n);
                let t = &mut cfg.tubes;
                set(&mut t.delta, *delta);
                if let Some(m) = mode {
                    t.mode = m.parse().map_err(|e: LabError| Failure::usage(e.to_string()))?;
                }
                set(&mut t.eta, *eta);
                set(&mut t.grid_res, *grid_res);
                if family.is_some() {
                    t.family = family.clone();
                }
                "tubes-sk-run"
            }
            TubesCmd::RescaleCheck {
                phase,
                rho_ladder,
                children,
                grid_res,
            } => {
                cfg.select_phase(phase.phase.as_deref(), phase.n);
                let t = &mut cfg.tubes;
                set(&mut t.rho_ladder, rho_ladder.clone().map(|l| l.0));
                set(&mut t.children, *children);
                set(&mut t.grid_res, *grid_res);
                "tubes-rescale-check"
            }
        },
    };
    Ok(name)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Exclusive claim on an output directory, released on drop.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".ck-lab.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Failure::runtime(format!(
                "{} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn log_line(out: &Path, line: &str) {
    if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(out.join("run.log")) {
        let _ = writeln!(f, "{:.3} {line}", unix_now());
    }
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(s) = std::env::var("CK_LAB_THREADS") {
        let n: usize = s
            .parse()
            .map_err(|_| Failure::usage(format!("CK_LAB_THREADS = '{s}' is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::runtime(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    init_threads()?;
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let name = apply_flags(&mut cfg, &cli)?;
    let _lock = DirLock::acquire(&cfg.out)?;
    let out = cfg.out.clone();
    log_line(&out, &format!("start {name}"));
    let started = Instant::now();
    let ctx = commands::Ctx::new(cfg)?;
    let result = match &cli.cmd {
        Cmd::Check { .. } => commands::check(&ctx),
        Cmd::AbcVerify { .. } => commands::abc_verify(&ctx),
        Cmd::Trace { .. } => commands::trace(&ctx),
        Cmd::Straighten { .. } => commands::straighten(&ctx),
        Cmd::TanConiness { .. } => commands::tan_coniness(&ctx),
        Cmd::Tubes { cmd: TubesCmd::SkRun { .. } } => commands::sk_run(&ctx),
        Cmd::Tubes {
            cmd: TubesCmd::RescaleCheck { .. },
        } => commands::rescale_check(&ctx),
    };
    let status = match &result {
        Ok(true) => "pass".to_string(),
        Ok(false) => "fail".to_string(),
        Err(f) => format!("error {}: {}", f.code, f.msg),
    };
    log_line(
        &out,
        &format!("end {name} {status} elapsed {:.3}s", started.elapsed().as_secs_f64()),
    );
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERDICT),
        Err(f) => {
            eprintln!("ck-lab: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
