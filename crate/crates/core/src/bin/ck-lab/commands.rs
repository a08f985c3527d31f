//! One function per subcommand. Each returns whether its verdict holds.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use ck_lab::curve_tracer::{
    check_implicit_derivative, default_t_grid, solve_x, trace_curve, CurveParam,
};
use ck_lab::fit::log_log_fit;
use ck_lab::phase_core::user::load_phase;
use ck_lab::phase_core::{check_abc, check_bourgain, sample_domain, ABCData, BoxDomain, PhaseSpec};
use ck_lab::report::{svg_loglog, svg_slice, to_json, write_csv, Series};
use ck_lab::straightener::{
    build_straightening_with, fit_map_error_order, generic_anchor, worst_explicit_map, BuildOptions,
};
use ck_lab::tan_example::{coniness_det, coniness_det_in, CurveModel, TanConfig};
use ck_lab::tube_lab::{
    default_scale_ladder, make_sticky_family, rescale_children, rescale_within, sk_experiment, Tube,
    TubeFamily,
};

use crate::config::{Expect, RunConfig};
use crate::Failure;

pub struct Ctx {
    pub cfg: RunConfig,
    pub config_json: String,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Result<Self, Failure> {
        let config_json = serde_json::to_string(&cfg).map_err(|e| Failure::runtime(e.to_string()))?;
        Ok(Ctx { cfg, config_json })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn phase(&self) -> Result<PhaseSpec, Failure> {
        Ok(load_phase(&self.cfg.phase)?)
    }

    /// `{"config": …, "result": …}`.
    fn write_json<T: Serialize>(&self, name: &str, result: &T) -> Result<(), Failure> {
        let doc = json!({ "config": &self.cfg, "result": result });
        fs::write(self.path(name), to_json(&doc).map_err(|e| Failure::runtime(e.to_string()))?)?;
        Ok(())
    }

    fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), Failure> {
        Ok(write_csv(&self.path(name), &self.config_json, rows)?)
    }

    fn write_svg(&self, name: &str, svg: &str) -> Result<(), Failure> {
        if !self.cfg.plot {
            return Ok(());
        }
        let comment = format!("<!-- config: {} -->\n", self.config_json.replace("--", "- -"));
        let body = svg.replacen('\n', &format!("\n{comment}"), 1);
        fs::write(self.path(name), body)?;
        Ok(())
    }
}

fn joined(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

/// Copy of `phase` whose `t` side keeps `M₀` within `window` of the origin.
fn narrow_t(phase: &PhaseSpec, window: f64) -> Result<PhaseSpec, Failure> {
    let n = phase.n();
    let d = phase.domain_m();
    let t0 = phase.origin_m()[n - 1];
    let half = window / 0.9;
    let mut lo = d.lo.clone();
    let mut hi = d.hi.clone();
    lo[n - 1] = lo[n - 1].max(t0 - half);
    hi[n - 1] = hi[n - 1].min(t0 + half);
    Ok(phase.with_domain(BoxDomain::new(lo, hi), phase.domain_sigma().clone())?)
}

#[derive(Serialize)]
struct CheckRow {
    index: usize,
    x: String,
    t: f64,
    xi: String,
    h1_sigma_min: f64,
    h2_det: f64,
    h2_posdef: bool,
    lambda_hat: f64,
    residual: f64,
    m1_norm: f64,
}

pub fn check(ctx: &Ctx) -> Result<bool, Failure> {
    let c = &ctx.cfg.check;
    if c.samples == 0 {
        return Err(Failure::usage("--samples must be positive"));
    }
    let mut phase = ctx.phase()?;
    if let Some(w) = c.t_window {
        phase = narrow_t(&phase, w)?;
    }
    let tol = c.tol.unwrap_or_else(|| phase.default_tolerance());
    let mut rows = Vec::with_capacity(c.samples);
    for (k, p) in sample_domain(&phase, c.samples, ctx.cfg.seed).iter().enumerate() {
        let r = check_bourgain(&phase, &p.x, p.t, &p.xi, tol)?;
        rows.push(CheckRow {
            index: k,
            x: joined(&p.x),
            t: p.t,
            xi: joined(&p.xi),
            h1_sigma_min: r.h1_sigma_min,
            h2_det: r.h2_det,
            h2_posdef: r.h2_posdef,
            lambda_hat: r.bourgain_lambda_hat,
            residual: r.bourgain_residual,
            m1_norm: r.m1_norm,
        });
    }
    let max_res = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let min_res = rows.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    let min_h1 = rows.iter().map(|r| r.h1_sigma_min).fold(f64::INFINITY, f64::min);
    let pass = match c.expect {
        Expect::Pass => max_res <= tol,
        Expect::Fail => min_res >= c.fail_floor,
    };
    ctx.write_csv("check.csv", &rows)?;
    ctx.write_json(
        "check.json",
        &json!({
            "phase": phase.label(),
            "samples": rows.len(),
            "tolerance": tol,
            "max_residual": max_res,
            "min_residual": min_res,
            "min_h1_sigma": min_h1,
            "expect": c.expect,
            "verdict": pass,
        }),
    )?;
    println!(
        "check {}: {} samples, residual in [{min_res:e}, {max_res:e}], expect {:?}: {}",
        phase.label(),
        rows.len(),
        c.expect,
        verdict(pass)
    );
    Ok(pass)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct AbcRow {
    index: usize,
    x: String,
    t: f64,
    xi: String,
    residual: f64,
    det_b: f64,
    g_dc: f64,
}

pub fn abc_verify(ctx: &Ctx) -> Result<bool, Failure> {
    let phase = ctx.phase()?;
    let abc = ABCData::for_phase(&phase)
        .ok_or_else(|| Failure::usage(format!("no (A, B, c) triple is known for {}", phase.label())))?;
    let a = &ctx.cfg.abc_verify;
    let mut rows = Vec::with_capacity(a.samples);
    for (k, p) in sample_domain(&phase, a.samples, ctx.cfg.seed).iter().enumerate() {
        let r = check_abc(&phase, &abc, &p.x, p.t, &p.xi)?;
        rows.push(AbcRow {
            index: k,
            x: joined(&p.x),
            t: p.t,
            xi: joined(&p.xi),
            residual: r.residual,
            det_b: r.det_b,
            g_dc: r.g_dc,
        });
    }
    let max_res = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let min_det = rows.iter().map(|r| r.det_b.abs()).fold(f64::INFINITY, f64::min);
    let positive = rows.iter().all(|r| r.g_dc > 0.0);
    let negative = rows.iter().all(|r| r.g_dc < 0.0);
    let pass = max_res <= a.tol && min_det > 0.0 && (positive || negative);
    ctx.write_csv("abc.csv", &rows)?;
    ctx.write_json(
        "abc.json",
        &json!({
            "phase": phase.label(),
            "triple": abc.label,
            "max_residual": max_res,
            "min_abs_det_b": min_det,
            "g_dc_fixed_sign": positive || negative,
            "verdict": pass,
        }),
    )?;
    println!("abc-verify {}: max residual {max_res:e}: {}", phase.label(), verdict(pass));
    Ok(pass)
}

pub fn trace(ctx: &Ctx) -> Result<bool, Failure> {
    let phase = ctx.phase()?;
    let t = &ctx.cfg.trace;
    let m = phase.n() - 1;
    let xi = t.xi.clone().unwrap_or_else(|| phase.origin_sigma().to_vec());
    let v = t.v.clone().unwrap_or_else(|| phase.origin_v());
    if xi.len() != m || v.len() != m {
        return Err(Failure::usage(format!("--xi and --v need {m} components")));
    }
    let param = CurveParam::new(xi.clone(), v.clone());
    let grid = default_t_grid(&phase, t.points.max(2));
    let sample = trace_curve(&phase, &param, &grid)?;
    let (ta, tb) = (grid[0], grid[grid.len() - 1]);
    let implicit = check_implicit_derivative(&phase, &xi, &v, 0.5 * (ta + tb))?;
    #[derive(Serialize)]
    struct Row {
        t: f64,
        x: String,
        newton_iters: usize,
    }
    let rows: Vec<Row> = sample
        .t_grid
        .iter()
        .zip(&sample.points)
        .zip(&sample.newton_iters)
        .map(|((&t, x), &k)| Row {
            t,
            x: joined(x),
            newton_iters: k,
        })
        .collect();
    ctx.write_csv("trace.csv", &rows)?;
    let pass = implicit <= 1e-6;
    ctx.write_json(
        "trace.json",
        &json!({ "phase": phase.label(), "param": param, "implicit_residual": implicit, "verdict": pass }),
    )?;
    println!("trace {}: {} points, implicit-derivative residual {implicit:e}", phase.label(), rows.len());
    Ok(pass)
}

fn parse_anchor(spec: &str, phase: &PhaseSpec) -> Result<CurveParam, Failure> {
    match spec.trim() {
        "generic" => Ok(generic_anchor(phase)),
        "origin" | "0" => Ok(CurveParam::new(phase.origin_sigma().to_vec(), phase.origin_v())),
        other => {
            let (a, b) = other
                .split_once(';')
                .ok_or_else(|| Failure::usage(format!("anchor '{other}' is not generic, origin or 'xi;v'")))?;
            let xi = crate::config::parse_list(a)?.0;
            let v = crate::config::parse_list(b)?.0;
            if xi.len() != phase.n() - 1 || v.len() != phase.n() - 1 {
                return Err(Failure::usage("anchor has the wrong dimension"));
            }
            Ok(CurveParam::new(xi, v))
        }
    }
}

pub fn straighten(ctx: &Ctx) -> Result<bool, Failure> {
    let phase = ctx.phase()?;
    let s = &ctx.cfg.straighten;
    let anchor = parse_anchor(&s.anchor, &phase)?;
    let seed = ctx.cfg.seed;
    let (label, report) = if s.explicit {
        if phase.label() != "worst" {
            return Err(Failure::usage("--explicit exists only for the worst phase"));
        }
        let map = worst_explicit_map();
        let r = fit_map_error_order(&map, &phase, &anchor, &s.radii, s.samples, seed)?;
        (map.label.clone(), r)
    } else {
        let (abc, opts) = if s.naive_abc {
            (
                ABCData::naive(phase.n()),
                BuildOptions {
                    verify_abc: false,
                    ..BuildOptions::default()
                },
            )
        } else {
            let abc = ABCData::for_phase(&phase).ok_or_else(|| {
                Failure::usage(format!("no (A, B, c) triple is known for {}; try --naive-abc", phase.label()))
            })?;
            (abc, BuildOptions::default())
        };
        let map = build_straightening_with(&phase, &abc, &anchor.xi, &anchor.v, opts)?;
        let r = fit_map_error_order(&map, &phase, &anchor, &s.radii, s.samples, seed)?;
        (abc.label.clone(), r)
    };
    let pass = report.exact || report.slope().is_some_and(|k| k >= s.band[0] && k <= s.band[1]);
    let summary = match report.slope() {
        Some(k) => format!("slope {k:.4}"),
        None => "exact".to_string(),
    };
    ctx.write_json(
        "straighten.json",
        &json!({ "phase": phase.label(), "map": label, "fit": &report, "band": s.band, "verdict": pass }),
    )?;
    if let Some(f) = report.fit {
        let pts: Vec<(f64, f64)> = report.radii.iter().cloned().zip(report.max_errors.iter().cloned()).collect();
        let guide: Vec<(f64, f64)> = report.radii.iter().map(|&r| (r, f.intercept.exp() * r * r)).collect();
        ctx.write_svg(
            "straighten.svg",
            &svg_loglog(
                &format!("straightening error, {}", phase.label()),
                "radius",
                "max error",
                &[
                    Series {
                        label: format!("measured, slope {:.3}", f.slope),
                        points: pts,
                    },
                    Series {
                        label: "slope 2".into(),
                        points: guide,
                    },
                ],
            ),
        )?;
    }
    println!("straighten {} ({label}): {summary}: {}", phase.label(), verdict(pass));
    Ok(pass)
}

pub fn tan_coniness(ctx: &Ctx) -> Result<bool, Failure> {
    let t = &ctx.cfg.tan;
    let cfg = TanConfig::new(t.n, t.t0, t.p.clone())?;
    let main = coniness_det(&cfg)?;
    let control = coniness_det_in(&cfg, CurveModel::Straight)?;
    let mut ps = Vec::new();
    let mut dets = Vec::new();
    let mut p = cfg.p.clone();
    for _ in 0..t.scaling_steps.max(2) {
        let c = cfg.with_p(p.clone())?;
        ps.push(c.p_last().abs());
        dets.push(coniness_det(&c)?.det.abs());
        p[cfg.n - 2] *= 0.5;
    }
    let scaling = log_log_fit(&ps, &dets);
    let mut grid = Vec::new();
    for c in ck_lab::tan_example::config_grid(t.n, t.grid, ctx.cfg.seed)? {
        grid.push(coniness_det(&c)?);
    }
    let grid_ok = grid.iter().all(|r| r.det > r.noise_floor);
    let pass = main.det > 0.0
        && main.rel_err <= t.rel_tol
        && (scaling.slope - 3.0).abs() <= 0.1
        && control.det.abs() <= 1e-14
        && grid_ok;
    ctx.write_json(
        "coniness.json",
        &json!({
            "report": &main,
            "straight_control_det": control.det,
            "scaling": { "p_last": &ps, "det": &dets, "fit": scaling },
            "grid": &grid,
            "verdict": pass,
        }),
    )?;
    ctx.write_svg(
        "coniness.svg",
        &svg_loglog(
            "tangent-frame determinant",
            "|p_last|",
            "det",
            &[Series {
                label: format!("slope {:.3}", scaling.slope),
                points: ps.iter().cloned().zip(dets.iter().cloned()).collect(),
            }],
        ),
    )?;
    println!(
        "tan-coniness n={} t0={}: det {:e}, leading {:e}, rel_err {:.3e}, exponent {:.4}: {}",
        t.n,
        t.t0,
        main.det,
        main.leading,
        main.rel_err,
        scaling.slope,
        verdict(pass)
    );
    Ok(pass)
}

fn write_family(ctx: &Ctx, fam: &TubeFamily) -> Result<(), Failure> {
    let mut w = BufWriter::new(fs::File::create(ctx.path("family.jsonl"))?);
    writeln!(w, "# config: {}", ctx.config_json)?;
    fam.write_jsonl(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn sk_run(ctx: &Ctx) -> Result<bool, Failure> {
    let phase = ctx.phase()?;
    let t = &ctx.cfg.tubes;
    let fam = match &t.family {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("family");
            TubeFamily::read_jsonl(&phase, BufReader::new(f), label)?
        }
        None => make_sticky_family(&phase, t.delta, t.mode, ctx.cfg.seed)?,
    };
    let report = sk_experiment(&fam, t.eta, &default_scale_ladder(fam.delta), t.grid_res)?;
    let pass = report.hypotheses_hold();
    write_family(ctx, &fam)?;
    ctx.write_json("sk.json", &report)?;
    if phase.n() == 3 {
        let tm = phase.origin_m()[2];
        let m0 = phase.m0();
        let mut centers = Vec::with_capacity(fam.len());
        for (tube, _) in &fam.members {
            let x = solve_x(&phase, &tube.param.xi, &tube.param.v, tm, &phase.origin_m()[..2])?;
            centers.push([x[0], x[1]]);
        }
        ctx.write_svg(
            "slice.svg",
            &svg_slice(
                &format!("{} at t = {tm}", fam.label),
                [m0.lo[0], m0.lo[1]],
                [m0.hi[0], m0.hi[1]],
                &centers,
                fam.delta,
            ),
        )?;
    }
    println!(
        "tubes sk-run {}: {} tubes, (a) {} (b) {} (c) {}, |union| {:.4e}, eps_hat {:.3}",
        report.label,
        report.members,
        verdict(report.a_pass),
        verdict(report.b_pass),
        verdict(report.c_pass),
        report.union_volume,
        report.eps_hat
    );
    Ok(pass)
}

pub fn rescale_check(ctx: &Ctx) -> Result<bool, Failure> {
    let phase = ctx.phase()?;
    let abc = ABCData::for_phase(&phase)
        .ok_or_else(|| Failure::usage(format!("no (A, B, c) triple is known for {}", phase.label())))?;
    let t = &ctx.cfg.tubes;
    if t.rho_ladder.is_empty() || t.children == 0 {
        return Err(Failure::usage("need a nonempty ρ ladder and at least one child"));
    }
    let anchor = generic_anchor(&phase);
    let mut reports = Vec::with_capacity(t.rho_ladder.len());
    for &rho in &t.rho_ladder {
        let delta = rho.powf(t.child_power);
        let children = rescale_children(&phase, delta, &anchor, rho, t.children, ctx.cfg.seed)?;
        let parent = Tube::new(anchor.clone(), rho)?;
        reports.push(rescale_within(&parent, &abc, &children, t.grid_res)?);
    }
    let ratios: Vec<f64> = reports.iter().map(|r| r.deviation_over_rho).collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let spread = hi / lo;
    let volume_ok = reports.iter().all(|r| (r.jacobian_ratio - 1.0).abs() <= t.volume_tol);
    let pass = spread <= t.ratio_band && volume_ok;
    ctx.write_json(
        "rescale.json",
        &json!({
            "phase": phase.label(),
            "anchor": anchor,
            "reports": &reports,
            "deviation_over_rho_spread": spread,
            "verdict": pass,
        }),
    )?;
    ctx.write_svg(
        "rescale.svg",
        &svg_loglog(
            "deviation after h∘F",
            "rho",
            "max deviation",
            &[Series {
                label: "children".into(),
                points: reports.iter().map(|r| (r.rho, r.max_line_deviation)).collect(),
            }],
        ),
    )?;
    for r in &reports {
        println!(
            "rho {:.4e}: deviation {:.3e}, deviation/rho {:.4}, volume factor / expected {:.4}",
            r.rho, r.max_line_deviation, r.deviation_over_rho, r.jacobian_ratio
        );
    }
    println!("tubes rescale-check {}: spread {spread:.3}: {}", phase.label(), verdict(pass));
    Ok(pass)
}
