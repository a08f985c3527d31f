//! The `tan` phase: its ODE construction, closed-form curves, the pencil of
//! curves through `ℓ₀,₀` and a point `𝐩`, and the tangent-frame determinant
//! that witnesses coniness.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve_tracer::CurveParam;
use crate::error::{LabError, Result};
use crate::fit::{log_log_fit, LineFit};
use crate::phase_core::{eval_jet, sample_domain, tan, xivar};
use crate::straightener::{fit_map_error_order, ExplicitStraightening, FitReport};
use crate::taylor::{TaylorSpace, Tps};

/// The point `𝐩 = (p, t₀)` and working radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanConfig {
    pub n: usize,
    pub t0: f64,
    pub p: Vec<f64>,
    pub eps0: f64,
}

impl TanConfig {
    pub fn new(n: usize, t0: f64, p: Vec<f64>) -> Result<Self> {
        let cfg = TanConfig { n, t0, p, eps0: 0.1 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(LabError::Config(format!("tan example needs n >= 3, got {}", self.n)));
        }
        if self.p.len() != self.n - 1 {
            return Err(LabError::Config(format!(
                "p must have {} components, got {}",
                self.n - 1,
                self.p.len()
            )));
        }
        if !(self.t0 > 1.0 && self.t0 - 1.0 <= 0.1 + 1e-12) {
            return Err(LabError::Config(format!("t0 = {} must lie in (1, 1.1]", self.t0)));
        }
        let norm = self.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(self.eps0 <= 0.1 && norm <= self.eps0) {
            return Err(LabError::Config(format!(
                "need |p| = {norm} <= eps0 = {} <= 0.1",
                self.eps0
            )));
        }
        Ok(())
    }

    /// `p_{n−1}`.
    pub fn p_last(&self) -> f64 {
        self.p[self.n - 2]
    }

    /// `p_{n−2}`.
    pub fn p_prev(&self) -> f64 {
        self.p[self.n - 3]
    }

    pub fn p_norm(&self) -> f64 {
        self.p.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same configuration with `p` replaced.
    pub fn with_p(&self, p: Vec<f64>) -> Result<Self> {
        let cfg = TanConfig { p, ..self.clone() };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Seeded configurations cycling through `t₀ ∈ {1.02, 1.05, 1.08}` and
/// `|p| ∈ {10⁻³, 10^{−2.5}, 10⁻²}`, with `p` in the `(x_{n−2}, x_{n−1})`
/// plane at an angle in `[π/8, 3π/8]`.
pub fn config_grid(n: usize, count: usize, seed: u64) -> Result<Vec<TanConfig>> {
    const T0: [f64; 3] = [1.02, 1.05, 1.08];
    const P: [f64; 3] = [1e-3, 0.003_162_277_660_168_379_5, 1e-2];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let t0 = T0[k % 3];
            let r = P[(k / 3) % 3];
            let th = rng.gen_range(PI / 8.0..3.0 * PI / 8.0);
            let mut p = vec![0.0; n - 1];
            p[n - 3] = r * th.cos();
            p[n - 2] = r * th.sin();
            TanConfig::new(n, t0, p)
        })
        .collect()
}

/// Max over samples of the ODE residuals `|∂_{ξ_j}f_j − t²|` (`j ≤ n−2`) and
/// `|∂_{ξ_{n−1}}f_{n−1} − f_{n−1}² − t²|`, with `f_j = ∂_{ξ_j}φ`.
pub fn verify_tan_ode(n: usize, sample_count: usize, seed: u64) -> Result<f64> {
    let phase = tan(n)?;
    let mut worst = 0.0f64;
    for q in sample_domain(&phase, sample_count, seed) {
        let jet = eval_jet(&phase, &q.x, q.t, &q.xi, 2)?;
        let t2 = q.t * q.t;
        for j in 0..n - 1 {
            let d = jet.partial(&[xivar(n, j), xivar(n, j)]);
            let r = if j + 2 < n {
                d - t2
            } else {
                let f = jet.partial(&[xivar(n, j)]);
                d - f * f - t2
            };
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// `f_{n−1} = t·tan(tξ_{n−1} + x_{n−1})`.
pub fn tan_f_last(x_last: f64, t: f64, xi_last: f64) -> f64 {
    t * (t * xi_last + x_last).tan()
}

/// `ℓ_{ξ,v}(t) = (v′ − t²ξ′, tan⁻¹(v_{n−1}/t) − tξ_{n−1}, t)`.
pub fn tan_curve(xi: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    let m = xi.len();
    let mut out: Vec<f64> = (0..m - 1).map(|j| v[j] - t * t * xi[j]).collect();
    out.push((v[m - 1] / t).atan() - t * xi[m - 1]);
    out.push(t);
    out
}

/// `(v′ − tξ′, t·v_{n−1} − v_{n−1}³/3 − t²ξ_{n−1}, t)`.
pub fn simplified_curve(xi: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    let m = xi.len();
    let w = v[m - 1];
    let mut out: Vec<f64> = (0..m - 1).map(|j| v[j] - t * xi[j]).collect();
    out.push(t * w - w * w * w / 3.0 - t * t * xi[m - 1]);
    out.push(t);
    out
}

/// The cubic model of [`tan_curve`] pushed through `G(𝐱) = (x′, t³x_{n−1}, t²)`.
pub fn cubic_model_image(xi: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    let m = xi.len();
    let w = v[m - 1];
    let mut out: Vec<f64> = (0..m - 1).map(|j| v[j] - t * t * xi[j]).collect();
    let x = w / t - w * w * w / (3.0 * t * t * t) - t * xi[m - 1];
    out.push(t * t * t * x);
    out.push(t * t);
    out
}

/// `G(𝐱) = (x′, t³x_{n−1}, t²)`.
pub fn cubic_change(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let t = p[n - 1];
    let mut out = p.to_vec();
    out[n - 2] *= t * t * t;
    out[n - 1] = t * t;
    out
}

/// Which family the pencil is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveModel {
    /// [`simplified_curve`].
    Simplified,
    /// Straight lines `(v − tξ, t)`.
    Straight,
}

impl CurveModel {
    pub fn point(self, xi: &[f64], v: &[f64], t: f64) -> Vec<f64> {
        match self {
            CurveModel::Simplified => simplified_curve(xi, v, t),
            CurveModel::Straight => {
                let mut out: Vec<f64> = v.iter().zip(xi).map(|(a, b)| a - t * b).collect();
                out.push(t);
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilSolution {
    pub s: f64,
    pub xi: Vec<f64>,
    pub vv: Vec<f64>,
    /// Max residuals of the four defining equations: `v′ − sξ′`,
    /// `v′ − t₀ξ′ − p′`, the last coordinate at `s`, and at `t₀`.
    pub residuals: [f64; 4],
    /// Distance from the chosen cubic root to the nearest other real root.
    pub separation: f64,
}

impl PencilSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

/// Real roots of `w³ + pw + q`.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    if p == 0.0 {
        return vec![(-q).cbrt()];
    }
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    if disc > 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let th = arg.acos() / 3.0;
        (0..3).map(|k| m * (th - 2.0 * PI * k as f64 / 3.0).cos()).collect()
    } else {
        let r = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        vec![(-q / 2.0 + r).cbrt() + (-q / 2.0 - r).cbrt()]
    }
}

/// Coefficients `(a, b, c)` of `aw³ + bw + c` for the last coordinate.
fn cubic_coeffs(t0: f64, s: f64, p_last: f64) -> (f64, f64, f64) {
    let r = t0 / s;
    ((r * r - 1.0) / 3.0, -t0 * (r - 1.0), -p_last)
}

fn leading_w(cfg: &TanConfig, s: f64) -> f64 {
    -s * cfg.p_last() / (cfg.t0 * (cfg.t0 - s))
}

fn solve_last(cfg: &TanConfig, s: f64) -> Result<(f64, f64)> {
    let (a, b, c) = cubic_coeffs(cfg.t0, s, cfg.p_last());
    let guess = leading_w(cfg, s);
    let roots = depressed_cubic_roots(b / a, c / a);
    if roots.len() < 3 && c != 0.0 {
        // The small branch has merged with another root.
        return Err(LabError::AmbiguousRoot(s));
    }
    let k = roots
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1 - guess).abs().total_cmp(&(y.1 - guess).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut w = roots[k];
    for _ in 0..4 {
        let f = a * w * w * w + b * w + c;
        let d = 3.0 * a * w * w + b;
        if d == 0.0 {
            break;
        }
        w -= f / d;
    }
    let separation = roots
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, r)| (r - w).abs())
        .fold(f64::INFINITY, f64::min);
    if separation < 1e-12 * w.abs().max(1.0) {
        return Err(LabError::AmbiguousRoot(s));
    }
    Ok((w, separation))
}

/// `(ξ(s), v(s))` of the curve in `model` through `(0, s)` and `(p, t₀)`.
pub fn pencil_params_in(cfg: &TanConfig, model: CurveModel, s: f64) -> Result<PencilSolution> {
    cfg.validate()?;
    let t0 = cfg.t0;
    if (t0 - s).abs() < 1e-12 {
        return Err(LabError::Pole(s));
    }
    let m = cfg.n - 1;
    let mut xi: Vec<f64> = cfg.p.iter().map(|p| -p / (t0 - s)).collect();
    let mut vv: Vec<f64> = xi.iter().map(|x| s * x).collect();
    let mut separation = f64::INFINITY;
    if model == CurveModel::Simplified {
        let (w, sep) = solve_last(cfg, s)?;
        separation = sep;
        vv[m - 1] = w;
        xi[m - 1] = w / s - w * w * w / (3.0 * s * s);
    }
    let at_s = model.point(&xi, &vv, s);
    let at_t0 = model.point(&xi, &vv, t0);
    let max_abs = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |a, b| a.max(b.abs()));
    let residuals = [
        max_abs(&mut at_s[..m - 1].iter().cloned()),
        max_abs(&mut at_t0[..m - 1].iter().zip(&cfg.p).map(|(a, b)| a - b)),
        at_s[m - 1].abs(),
        (at_t0[m - 1] - cfg.p[m - 1]).abs(),
    ];
    Ok(PencilSolution {
        s,
        xi,
        vv,
        residuals,
        separation,
    })
}

pub fn pencil_params(cfg: &TanConfig, s: f64) -> Result<PencilSolution> {
    pencil_params_in(cfg, CurveModel::Simplified, s)
}

/// `s`-grid used for the pencil checks.
pub fn pencil_s_grid(count: usize) -> Vec<f64> {
    crate::curve_tracer::linspace(0.97, 1.0, count)
}

/// `γ(s) = d/dt ℓ_{ξ(s),v(s)}(t₀)`.
fn gamma_of(model: CurveModel, t0: f64, xi: &[f64], v: &[f64]) -> Vec<f64> {
    let m = xi.len();
    let mut g: Vec<f64> = xi.iter().map(|x| -x).collect();
    if model == CurveModel::Simplified {
        g[m - 1] = v[m - 1] - 2.0 * t0 * xi[m - 1];
    }
    g.push(1.0);
    g
}

/// `(γ, γ̇, γ̈)` at `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentFrame {
    pub gamma: Vec<f64>,
    pub gamma_dot: Vec<f64>,
    pub gamma_ddot: Vec<f64>,
}

/// Default step for the finite-difference frame.
pub const FRAME_STEP: f64 = 1e-4;

/// Frame with `γ̇`, `γ̈` from five-point central differences in `s`.
pub fn tangent_frame_in(cfg: &TanConfig, model: CurveModel, s: f64, h_s: f64) -> Result<TangentFrame> {
    let g = |s: f64| -> Result<Vec<f64>> {
        let sol = pencil_params_in(cfg, model, s)?;
        Ok(gamma_of(model, cfg.t0, &sol.xi, &sol.vv))
    };
    let gm2 = g(s - 2.0 * h_s)?;
    let gm1 = g(s - h_s)?;
    let g0 = g(s)?;
    let gp1 = g(s + h_s)?;
    let gp2 = g(s + 2.0 * h_s)?;
    let n = g0.len();
    let gamma_dot = (0..n)
        .map(|i| (gm2[i] - 8.0 * gm1[i] + 8.0 * gp1[i] - gp2[i]) / (12.0 * h_s))
        .collect();
    let gamma_ddot = (0..n)
        .map(|i| {
            (-gm2[i] + 16.0 * gm1[i] - 30.0 * g0[i] + 16.0 * gp1[i] - gp2[i]) / (12.0 * h_s * h_s)
        })
        .collect();
    Ok(TangentFrame {
        gamma: g0,
        gamma_dot,
        gamma_ddot,
    })
}

pub fn tangent_frame(cfg: &TanConfig, s: f64, h_s: f64) -> Result<TangentFrame> {
    tangent_frame_in(cfg, CurveModel::Simplified, s, h_s)
}

/// Frame with `γ̇`, `γ̈` read off a second-order jet in `s`. The cubic root is
/// continued as a series by Newton's method.
pub fn tangent_frame_exact(cfg: &TanConfig, model: CurveModel, s: f64) -> Result<TangentFrame> {
    let sol = pencil_params_in(cfg, model, s)?;
    let space = TaylorSpace::get(1, 2);
    let sv = Tps::variable(space, 0, s);
    let m = cfg.n - 1;
    let t0 = cfg.t0;
    let inv = (t0 - &sv).recip();
    let mut xi: Vec<Tps> = cfg.p.iter().map(|&p| &inv * (-p)).collect();
    if model == CurveModel::Simplified {
        let sinv = sv.recip();
        let r = &sinv * t0;
        let a = (&r * &r - 1.0) * (1.0 / 3.0);
        let b = (r - 1.0) * (-t0);
        let mut w = Tps::constant(space, sol.vv[m - 1]);
        for _ in 0..4 {
            let w2 = &w * &w;
            let f = &a * &w2 * &w + &b * &w - cfg.p_last();
            let d = &a * &w2 * 3.0 + &b;
            w = &w - f * d.recip();
        }
        let w3 = &w * &w * &w;
        xi[m - 1] = &w * &sinv - w3 * (&sinv * &sinv) * (1.0 / 3.0);
        let mut g: Vec<Tps> = xi.iter().map(|x| -x).collect();
        g[m - 1] = &w - &xi[m - 1] * (2.0 * t0);
        return Ok(frame_from_series(&g));
    }
    let g: Vec<Tps> = xi.iter().map(|x| -x).collect();
    Ok(frame_from_series(&g))
}

fn frame_from_series(g: &[Tps]) -> TangentFrame {
    let mut gamma: Vec<f64> = g.iter().map(|x| x.value()).collect();
    let mut gamma_dot: Vec<f64> = g.iter().map(|x| x.partial(&[1])).collect();
    let mut gamma_ddot: Vec<f64> = g.iter().map(|x| x.partial(&[2])).collect();
    gamma.push(1.0);
    gamma_dot.push(0.0);
    gamma_ddot.push(0.0);
    TangentFrame {
        gamma,
        gamma_dot,
        gamma_ddot,
    }
}

impl TangentFrame {
    /// Determinant of the frame restricted to `(x_{n−2}, x_{n−1}, t)`.
    pub fn active_det(&self) -> f64 {
        let n = self.gamma.len();
        let cols = [&self.gamma, &self.gamma_dot, &self.gamma_ddot];
        Matrix3::from_fn(|i, j| cols[j][n - 3 + i]).determinant()
    }

    /// `ε·|γ||γ̇||γ̈|`, the rounding scale of [`active_det`](Self::active_det).
    pub fn rounding_scale(&self) -> f64 {
        let n = self.gamma.len();
        let nrm = |v: &[f64]| v[n - 3..].iter().map(|x| x * x).sum::<f64>().sqrt();
        f64::EPSILON * nrm(&self.gamma) * nrm(&self.gamma_dot) * nrm(&self.gamma_ddot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConinessReport {
    pub config: TanConfig,
    pub det: f64,
    /// `2|p_{n−1}|³|p_{n−2}|/(3t₀²(t₀−1)⁶)`.
    pub leading: f64,
    pub rel_err: f64,
    /// Determinant of the `p = 0` frame plus the rounding scale of this one.
    pub noise_floor: f64,
    pub frame: TangentFrame,
}

pub fn leading_det(cfg: &TanConfig) -> f64 {
    let t0 = cfg.t0;
    2.0 * cfg.p_last().abs().powi(3) * cfg.p_prev().abs()
        / (3.0 * t0 * t0 * (t0 - 1.0).powi(6))
}

fn check_active(cfg: &TanConfig) -> Result<()> {
    if cfg.p[..cfg.n - 3].iter().any(|&v| v != 0.0) {
        return Err(LabError::Config(
            "p must vanish outside its last two components".into(),
        ));
    }
    Ok(())
}

/// Tangent-frame determinant at `s = 1` in `model`, against the leading term.
pub fn coniness_det_in(cfg: &TanConfig, model: CurveModel) -> Result<ConinessReport> {
    check_active(cfg)?;
    if cfg.p_last() == 0.0 || cfg.p_prev() == 0.0 {
        return Err(LabError::Config("p_{n-2} and p_{n-1} must be nonzero".into()));
    }
    let frame = tangent_frame_exact(cfg, model, 1.0)?;
    let det = frame.active_det();
    let zero = tangent_frame_exact(&cfg.with_p(vec![0.0; cfg.n - 1])?, model, 1.0)?;
    let noise_floor = zero.active_det().abs() + frame.rounding_scale();
    let leading = leading_det(cfg);
    Ok(ConinessReport {
        config: cfg.clone(),
        det,
        leading,
        rel_err: (det - leading).abs() / leading,
        noise_floor,
        frame,
    })
}

pub fn coniness_det(cfg: &TanConfig) -> Result<ConinessReport> {
    coniness_det_in(cfg, CurveModel::Simplified)
}

/// Fitted exponent of `det` in `p_{n−1}` over `steps` successive halvings.
pub fn p_last_scaling(cfg: &TanConfig, steps: usize) -> Result<LineFit> {
    let mut ps = Vec::with_capacity(steps);
    let mut dets = Vec::with_capacity(steps);
    let mut p = cfg.p.clone();
    for _ in 0..steps {
        let c = cfg.with_p(p.clone())?;
        ps.push(c.p_last().abs());
        dets.push(coniness_det(&c)?.det.abs());
        p[cfg.n - 2] *= 0.5;
    }
    Ok(log_log_fit(&ps, &dets))
}

/// The illustration map `F₃∘F₂∘F₁` with `F₁` the slice shift by
/// `tan⁻¹(v₀,_{n−1}/t)`, `F₂` the shear by `(t² + v₀,_{n−1}²)/t` and
/// `F₃(𝐱) = (x, t²)`; `Ξ(ξ) = ξ`, `V = (v′, v_{n−1} − v₀,_{n−1} − v₀,_{n−1}²ξ_{n−1})`.
pub fn illustration_map(v0_last: f64) -> ExplicitStraightening {
    let c = v0_last;
    ExplicitStraightening {
        label: "tan_illustration".into(),
        f: Arc::new(move |x: &[f64], t: f64| {
            let m = x.len();
            let mut y = x.to_vec();
            y[m - 1] = (t * t + c * c) / t * (x[m - 1] - (c / t).atan());
            (y, t * t)
        }),
        xi: Arc::new(|xi: &[f64], _v: &[f64]| xi.to_vec()),
        v: Arc::new(move |xi: &[f64], v: &[f64]| {
            let m = v.len();
            let mut out = v.to_vec();
            out[m - 1] = v[m - 1] - c - c * c * xi[m - 1];
            out
        }),
    }
}

/// Error-order fit of the illustration map around `(ξ₀, v₀)`.
pub fn illustrate_straightening(
    n: usize,
    xi0: &[f64],
    v0: &[f64],
    radii: &[f64],
    samples_per_radius: usize,
    seed: u64,
) -> Result<FitReport> {
    let phase = tan(n)?;
    let map = illustration_map(v0[n - 2]);
    let center = CurveParam::new(xi0.to_vec(), v0.to_vec());
    fit_map_error_order(&map, &phase, &center, radii, samples_per_radius, seed)
}

/// `F_built − F_illustration` is the affine-in-`s` shift
/// `(−v₀′ + sξ₀′, (s + v₀,_{n−1}²)ξ₀,_{n−1})`.
pub fn illustration_offset(xi0: &[f64], v0: &[f64], s: f64) -> Vec<f64> {
    let m = xi0.len();
    let mut out: Vec<f64> = (0..m - 1).map(|j| -v0[j] + s * xi0[j]).collect();
    out.push((s + v0[m - 1] * v0[m - 1]) * xi0[m - 1]);
    out
}
