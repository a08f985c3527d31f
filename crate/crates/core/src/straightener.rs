//! Straightening maps `(F, Ξ, V)` built from `(A, B, c)` data, their
//! quadratic error, and the reverse extraction of `(A, B, c)` from map jets.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::curve_tracer::{
    default_t_grid, linspace, solve_x, spatial_jacobian, trace_curve, CurveParam, CurveSample,
};
use crate::error::{LabError, Result};
use crate::fit::{log_log_fit, LineFit};
use crate::linalg::{dist, frobenius};
use crate::phase_core::{check_abc, eval_jet, PhaseSpec};

pub use crate::phase_core::ABCData;

/// A map `F` on space together with the parameter maps `Ξ`, `V`. Curves
/// should land near `{(V − sΞ, s)}`.
pub trait Straightening: Send + Sync {
    /// `F(x, t) = (y, s)`.
    fn apply(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, f64)>;
    /// `Ξ`; it may depend on `v`, which only happens for maps that are not
    /// diffeomorphisms in `ξ` alone.
    fn xi_map(&self, xi: &[f64], v: &[f64]) -> Vec<f64>;
    fn v_map(&self, xi: &[f64], v: &[f64]) -> Vec<f64>;

    /// `V − sΞ`, the slice of the target line at height `s`.
    fn line_point(&self, xi: &[f64], v: &[f64], s: f64) -> Vec<f64> {
        let a = self.xi_map(xi, v);
        self.v_map(xi, v)
            .iter()
            .zip(&a)
            .map(|(p, q)| p - s * q)
            .collect()
    }

    /// Spatial Jacobian of `F` by central differences.
    fn jacobian(&self, x: &[f64], t: f64) -> Result<DMatrix<f64>> {
        const H: f64 = 1e-6;
        let n = x.len() + 1;
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut p: Vec<f64> = x.to_vec();
            p.push(t);
            let mut q = p.clone();
            p[i] += H;
            q[i] -= H;
            let (yp, sp) = self.apply(&p[..n - 1], p[n - 1])?;
            let (yq, sq) = self.apply(&q[..n - 1], q[n - 1])?;
            for k in 0..n - 1 {
                jac[(k, i)] = (yp[k] - yq[k]) / (2.0 * H);
            }
            jac[(n - 1, i)] = (sp - sq) / (2.0 * H);
        }
        Ok(jac)
    }
}

/// Straightening given by closures.
#[derive(Clone)]
pub struct ExplicitStraightening {
    pub label: String,
    #[allow(clippy::type_complexity)]
    pub f: Arc<dyn Fn(&[f64], f64) -> (Vec<f64>, f64) + Send + Sync>,
    pub xi: Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
    pub v: Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for ExplicitStraightening {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExplicitStraightening").field("label", &self.label).finish()
    }
}

impl Straightening for ExplicitStraightening {
    fn apply(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
        Ok((self.f)(x, t))
    }
    fn xi_map(&self, xi: &[f64], v: &[f64]) -> Vec<f64> {
        (self.xi)(xi, v)
    }
    fn v_map(&self, xi: &[f64], v: &[f64]) -> Vec<f64> {
        (self.v)(xi, v)
    }
}

/// `F(𝐱) = (x₁, x₂ − t x₁, t)`, `Ξ = (ξ₂, ξ₁ + v₁)`, `V = v` for the worst
/// phase. The curves go exactly to lines, but `Ξ` depends on `v`.
pub fn worst_explicit_map() -> ExplicitStraightening {
    ExplicitStraightening {
        label: "worst_explicit".into(),
        f: Arc::new(|x: &[f64], t: f64| (vec![x[0], x[1] - t * x[0]], t)),
        xi: Arc::new(|xi: &[f64], v: &[f64]| vec![xi[1], xi[0] + v[0]]),
        v: Arc::new(|_xi: &[f64], v: &[f64]| v.to_vec()),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Verify the `(A, B, c)` identity along the anchor curve.
    pub verify_abc: bool,
    pub abc_tol: f64,
    /// Grid used for the monotonicity check of `c̃` and the anchor cache.
    pub grid: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            verify_abc: true,
            abc_tol: 1e-6,
            grid: 200,
        }
    }
}

/// The map of the forward construction anchored at `(ξ₀, v₀)`:
/// `F(x, t) = (∇_vX₀(t)⁻¹(x − X₀(t)), c̃(t))`, `Ξ(ξ) = B₀(ξ − ξ₀)`,
/// `V(ξ, v) = (v − v₀) − A₀(ξ − ξ₀)`.
#[derive(Clone)]
pub struct StraighteningMap {
    phase: PhaseSpec,
    abc: ABCData,
    pub xi0: Vec<f64>,
    pub v0: Vec<f64>,
    pub a0: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    anchor: CurveSample,
    c_grid: Vec<f64>,
    increasing: bool,
}

impl fmt::Debug for StraighteningMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StraighteningMap")
            .field("phase", &self.phase.label())
            .field("abc", &self.abc.label)
            .field("xi0", &self.xi0)
            .field("v0", &self.v0)
            .finish()
    }
}

pub fn build_straightening(
    phase: &PhaseSpec,
    abc: &ABCData,
    xi0: &[f64],
    v0: &[f64],
) -> Result<StraighteningMap> {
    build_straightening_with(phase, abc, xi0, v0, BuildOptions::default())
}

pub fn build_straightening_with(
    phase: &PhaseSpec,
    abc: &ABCData,
    xi0: &[f64],
    v0: &[f64],
    opts: BuildOptions,
) -> Result<StraighteningMap> {
    let grid = default_t_grid(phase, opts.grid.max(2));
    let param = CurveParam::new(xi0.to_vec(), v0.to_vec());
    let anchor = trace_curve(phase, &param, &grid)
        .map_err(|e| LabError::InvalidAnchor(format!("anchor curve not traceable: {e}")))?;
    let a0 = abc.a(v0, xi0);
    let b0 = abc.b(v0, xi0);
    let det_b = b0.determinant();
    if det_b.abs() < 1e-6 {
        return Err(LabError::InvalidAnchor(format!("|det B| = {:e} below 1e-6", det_b.abs())));
    }
    if opts.verify_abc {
        let step = (grid.len() / 20).max(1);
        for i in (0..grid.len()).step_by(step) {
            let r = check_abc(phase, abc, &anchor.points[i], grid[i], xi0)?.residual;
            if r > opts.abc_tol {
                return Err(LabError::InconsistentData(r));
            }
        }
    }
    let c_grid: Vec<f64> = anchor
        .points
        .iter()
        .zip(&grid)
        .map(|(x, &t)| abc.c(x, t, xi0))
        .collect();
    let increasing = c_grid[c_grid.len() - 1] > c_grid[0];
    let monotone = c_grid
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    if !monotone {
        return Err(LabError::InvalidAnchor("c̃ is not strictly monotone".into()));
    }
    Ok(StraighteningMap {
        phase: phase.clone(),
        abc: abc.clone(),
        xi0: xi0.to_vec(),
        v0: v0.to_vec(),
        a0,
        b0,
        anchor,
        c_grid,
        increasing,
    })
}

impl StraighteningMap {
    pub fn phase(&self) -> &PhaseSpec {
        &self.phase
    }

    pub fn anchor_sample(&self) -> &CurveSample {
        &self.anchor
    }

    /// `X(ξ₀, v₀, t)`.
    pub fn anchor_point(&self, t: f64) -> Result<Vec<f64>> {
        let guess = self.anchor.interpolate(t);
        solve_x(&self.phase, &self.xi0, &self.v0, t, &guess)
    }

    /// `c̃(t) = c(X(ξ₀, v₀, t), t, ξ₀)`.
    pub fn c_tilde(&self, t: f64) -> Result<f64> {
        let x = self.anchor_point(t)?;
        Ok(self.abc.c(&x, t, &self.xi0))
    }

    /// `∇_vX(ξ₀, v₀, t)⁻¹`.
    pub fn twist(&self, t: f64) -> Result<DMatrix<f64>> {
        let x = self.anchor_point(t)?;
        Ok(spatial_jacobian(&self.phase, &x, t, &self.xi0))
    }

    /// Values of `c̃` on the cached grid.
    pub fn c_tilde_grid(&self) -> (&[f64], &[f64]) {
        (&self.anchor.t_grid, &self.c_grid)
    }

    /// `t` with `c̃(t) = s` (bisection on the monotone grid, then Newton
    /// polish).
    pub fn c_tilde_inverse(&self, s: f64) -> Result<f64> {
        let g = &self.anchor.t_grid;
        let c = &self.c_grid;
        let key = |v: f64| if self.increasing { v } else { -v };
        let k = c.partition_point(|&v| key(v) <= key(s));
        let i = k.clamp(1, c.len() - 1) - 1;
        let (mut lo, mut hi) = (g[i], g[i + 1]);
        let (flo, fhi) = (key(c[i]) - key(s), key(c[i + 1]) - key(s));
        if flo > 0.0 || fhi < 0.0 {
            // Outside the cached range: extrapolate linearly.
            let w = (s - c[i]) / (c[i + 1] - c[i]);
            return Ok(lo + w * (hi - lo));
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if key(self.c_tilde(mid)?) < key(s) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `F⁻¹(y, s)`.
    pub fn inverse(&self, y: &[f64], s: f64) -> Result<(Vec<f64>, f64)> {
        let t = self.c_tilde_inverse(s)?;
        let x0 = self.anchor_point(t)?;
        let j = spatial_jacobian(&self.phase, &x0, t, &self.xi0);
        let d = j
            .lu()
            .solve(&DVector::from_column_slice(y))
            .ok_or_else(|| LabError::InvalidAnchor("singular twist".into()))?;
        Ok((x0.iter().zip(d.iter()).map(|(a, b)| a + b).collect(), t))
    }
}

impl Straightening for StraighteningMap {
    fn apply(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
        let x0 = self.anchor_point(t)?;
        let j = spatial_jacobian(&self.phase, &x0, t, &self.xi0);
        let d = DVector::from_iterator(x.len(), x.iter().zip(&x0).map(|(a, b)| a - b));
        let y = j * d;
        Ok((y.iter().cloned().collect(), self.abc.c(&x0, t, &self.xi0)))
    }

    fn xi_map(&self, xi: &[f64], _v: &[f64]) -> Vec<f64> {
        let d = DVector::from_iterator(xi.len(), xi.iter().zip(&self.xi0).map(|(a, b)| a - b));
        (&self.b0 * d).iter().cloned().collect()
    }

    fn v_map(&self, xi: &[f64], v: &[f64]) -> Vec<f64> {
        let d = DVector::from_iterator(xi.len(), xi.iter().zip(&self.xi0).map(|(a, b)| a - b));
        let ad = &self.a0 * d;
        v.iter()
            .zip(&self.v0)
            .zip(ad.iter())
            .map(|((v, v0), a)| v - v0 - a)
            .collect()
    }
}

/// `max_t |y − (V − sΞ)|` over the traced curve `ℓ_{ξ,v}`.
pub fn straightening_error(
    map: &dyn Straightening,
    phase: &PhaseSpec,
    xi: &[f64],
    v: &[f64],
    t_grid: &[f64],
) -> Result<f64> {
    let curve = trace_curve(phase, &CurveParam::new(xi.to_vec(), v.to_vec()), t_grid)?;
    let mut worst = 0.0f64;
    for (x, &t) in curve.points.iter().zip(&curve.t_grid) {
        let (y, s) = map.apply(x, t)?;
        worst = worst.max(dist(&y, &map.line_point(xi, v, s)));
    }
    Ok(worst)
}

/// Error levels below this count as exact straightening.
pub const EXACT_THRESHOLD: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub anchor: CurveParam,
    pub radii: Vec<f64>,
    pub max_errors: Vec<f64>,
    /// `None` when every error is below the exact threshold.
    pub fit: Option<LineFit>,
    pub exact: bool,
}

impl FitReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// Random parameter at distance exactly `r` from `center` in `ℝ^{2(n−1)}`.
pub fn param_at_distance(center: &CurveParam, r: f64, rng: &mut ChaCha8Rng) -> CurveParam {
    let c = center.stacked();
    let dir: Vec<f64> = (0..c.len()).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    CurveParam::from_stacked(
        &c.iter().zip(&dir).map(|(a, d)| a + r * d / norm).collect::<Vec<f64>>(),
    )
}

/// Log–log fit of the worst straightening error against the parameter
/// radius for an arbitrary map.
pub fn fit_map_error_order(
    map: &dyn Straightening,
    phase: &PhaseSpec,
    center: &CurveParam,
    radii: &[f64],
    samples_per_radius: usize,
    seed: u64,
) -> Result<FitReport> {
    let grid = default_t_grid(phase, 41);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_errors = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut worst = 0.0f64;
        for _ in 0..samples_per_radius {
            let p = param_at_distance(center, r, &mut rng);
            worst = worst.max(straightening_error(map, phase, &p.xi, &p.v, &grid)?);
        }
        max_errors.push(worst);
    }
    let exact = max_errors.iter().all(|&e| e < EXACT_THRESHOLD);
    let fit = if exact {
        None
    } else {
        let floor: Vec<f64> = max_errors.iter().map(|e| e.max(1e-300)).collect();
        Some(log_log_fit(radii, &floor))
    };
    Ok(FitReport {
        anchor: center.clone(),
        radii: radii.to_vec(),
        max_errors,
        fit,
        exact,
    })
}

/// Builds the map at `(ξ₀, v₀)` from `abc` and fits its error order.
pub fn fit_error_order(
    phase: &PhaseSpec,
    abc: &ABCData,
    xi0: &[f64],
    v0: &[f64],
    radii: &[f64],
    samples_per_radius: usize,
    seed: u64,
) -> Result<FitReport> {
    let map = build_straightening(phase, abc, xi0, v0)?;
    let center = CurveParam::new(xi0.to_vec(), v0.to_vec());
    fit_map_error_order(&map, phase, &center, radii, samples_per_radius, seed)
}

/// First-order data of a straightening at its anchor.
#[derive(Debug, Clone, Serialize)]
pub struct MapJets {
    /// `∇_ξV(ξ₀, v₀)`.
    pub v_xi: Vec<Vec<f64>>,
    /// `∇_vV(ξ₀, v₀)`.
    pub v_v: Vec<Vec<f64>>,
    /// `∇_ξΞ(ξ₀)`.
    pub xi_xi: Vec<Vec<f64>>,
    /// `(t, h(X(ξ₀, v₀, t), t))` along the anchor curve.
    pub h0: Vec<(f64, f64)>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), r.first().map_or(0, |x| x.len()), |i, j| r[i][j])
}

/// Jets of `(F, Ξ, V)` at the anchor by central differences, with `h₀`
/// sampled at `t_samples`.
pub fn map_jets(
    map: &dyn Straightening,
    phase: &PhaseSpec,
    xi0: &[f64],
    v0: &[f64],
    t_samples: &[f64],
) -> Result<MapJets> {
    const H: f64 = 1e-6;
    let m = xi0.len();
    let mut v_xi = DMatrix::zeros(m, m);
    let mut v_v = DMatrix::zeros(m, m);
    let mut xi_xi = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut p = xi0.to_vec();
        let mut q = xi0.to_vec();
        p[j] += H;
        q[j] -= H;
        let (vp, vq) = (map.v_map(&p, v0), map.v_map(&q, v0));
        let (xp, xq) = (map.xi_map(&p, v0), map.xi_map(&q, v0));
        let mut a = v0.to_vec();
        let mut b = v0.to_vec();
        a[j] += H;
        b[j] -= H;
        let (wa, wb) = (map.v_map(xi0, &a), map.v_map(xi0, &b));
        for i in 0..m {
            v_xi[(i, j)] = (vp[i] - vq[i]) / (2.0 * H);
            xi_xi[(i, j)] = (xp[i] - xq[i]) / (2.0 * H);
            v_v[(i, j)] = (wa[i] - wb[i]) / (2.0 * H);
        }
    }
    let guess = phase.origin_m()[..m].to_vec();
    let mut h0 = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let x = solve_x(phase, xi0, v0, t, &guess)?;
        h0.push((t, map.apply(&x, t)?.1));
    }
    Ok(MapJets {
        v_xi: to_rows(&v_xi),
        v_v: to_rows(&v_v),
        xi_xi: to_rows(&xi_xi),
        h0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractedAbc {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    /// `(t, c)` samples of `c` along the anchor curve.
    pub c: Vec<(f64, f64)>,
    /// `max_t ‖∇²_ξφ(X₀(t), t, ξ₀) − A − c(t) B‖_F`.
    pub identity_residual: f64,
}

impl ExtractedAbc {
    pub fn a_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.a)
    }
    pub fn b_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.b)
    }
}

/// `A = −(∇_vV)⁻¹∇_ξV`, `B = (∇_vV)⁻¹∇_ξΞ`, `c = h` along the anchor.
pub fn extract_abc_from_map(
    phase: &PhaseSpec,
    jets: &MapJets,
    xi0: &[f64],
    v0: &[f64],
) -> Result<ExtractedAbc> {
    let v1 = from_rows(&jets.v_v);
    let v1_inv = v1
        .clone()
        .try_inverse()
        .filter(|_| v1.determinant().abs() > 1e-12)
        .ok_or_else(|| LabError::Extraction("∇_vV is singular".into()))?;
    let a = -(&v1_inv * from_rows(&jets.v_xi));
    let b = &v1_inv * from_rows(&jets.xi_xi);
    let guess = phase.origin_m()[..xi0.len()].to_vec();
    let mut residual = 0.0f64;
    for &(t, c) in &jets.h0 {
        let x = solve_x(phase, xi0, v0, t, &guess)?;
        let h = eval_jet(phase, &x, t, xi0, 2)?.hess_xi();
        residual = residual.max(frobenius(&(h - &a - &b * c)));
    }
    Ok(ExtractedAbc {
        a: to_rows(&a),
        b: to_rows(&b),
        c: jets.h0.clone(),
        identity_residual: residual,
    })
}

/// Default heights at which `h₀` is sampled for extraction.
pub fn extraction_heights(phase: &PhaseSpec, count: usize) -> Vec<f64> {
    let m0 = phase.m0();
    let n = phase.n();
    linspace(m0.lo[n - 1], m0.hi[n - 1], count)
}

/// A fixed off-center anchor: `ξ₀ = (0.05, −0.04, 0.032, …)`,
/// `v₀ = 0_𝒱 + (0.06, 0.10, 0.14, …)`. At the phase origin the built-in
/// phases are odd, which makes the quadratic error term vanish there.
pub fn generic_anchor(phase: &PhaseSpec) -> CurveParam {
    let m = phase.n() - 1;
    let o = phase.origin_sigma();
    let ov = phase.origin_v();
    let xi = (0..m).map(|j| o[j] + 0.05 * (-0.8f64).powi(j as i32)).collect();
    let v = (0..m).map(|j| ov[j] + 0.06 + 0.04 * j as f64).collect();
    CurveParam::new(xi, v)
}
