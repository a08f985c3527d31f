//! Level curves `ℓ_{ξ,v} = {∇_ξφ = v}` as graphs over `t`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{condition_number, dist, norm};
use crate::phase_core::{eval_jet, xivar, xvar, PhaseSpec};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITERS: usize = 50;
pub const MAX_CONDITION: f64 = 1e8;

/// The pair `(ξ, v)` naming a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveParam {
    pub xi: Vec<f64>,
    pub v: Vec<f64>,
}

impl CurveParam {
    pub fn new(xi: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(xi.len(), v.len());
        CurveParam { xi, v }
    }

    /// The `2(n − 1)` coordinates `(ξ, v)` stacked.
    pub fn stacked(&self) -> Vec<f64> {
        self.xi.iter().chain(&self.v).cloned().collect()
    }

    pub fn from_stacked(p: &[f64]) -> Self {
        let m = p.len() / 2;
        CurveParam::new(p[..m].to_vec(), p[m..].to_vec())
    }

    pub fn in_boxes(&self, phase: &PhaseSpec) -> bool {
        phase.domain_sigma().contains(&self.xi) && phase.v_box().contains(&self.v)
    }
}

/// `|ξ − ξ′| + |v − v′|`.
pub fn curve_metric(p1: &CurveParam, p2: &CurveParam) -> f64 {
    dist(&p1.xi, &p2.xi) + dist(&p1.v, &p2.v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub t_grid: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub newton_iters: Vec<usize>,
}

impl CurveSample {
    /// Linear interpolation in `t` (clamped to the grid).
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let g = &self.t_grid;
        let k = g.len();
        if k == 1 || t <= g[0] {
            return self.points[0].clone();
        }
        if t >= g[k - 1] {
            return self.points[k - 1].clone();
        }
        let i = g.partition_point(|&s| s <= t).saturating_sub(1).min(k - 2);
        let w = (t - g[i]) / (g[i + 1] - g[i]);
        self.points[i]
            .iter()
            .zip(&self.points[i + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

/// `∇_ξφ(x, t, ξ)`.
pub fn v_of(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64]) -> Result<Vec<f64>> {
    Ok(eval_jet(phase, x, t, xi, 1)?.grad_xi())
}

/// Residual `∇_ξφ − v` and the Jacobian `(∂_{ξ_j}∂_{x_i}φ)_{ji}`.
fn newton_system(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64], v: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = phase.n();
    let m = n - 1;
    let s = phase.series(x, t, xi, 2);
    let f = DVector::from_fn(m, |j, _| s.partial_by_vars(&[xivar(n, j)]) - v[j]);
    let jac = DMatrix::from_fn(m, m, |j, i| s.partial_by_vars(&[xivar(n, j), xvar(i)]));
    (f, jac)
}

fn residual(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64], v: &[f64]) -> f64 {
    let g = phase.grad_xi_unchecked(x, t, xi);
    g.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Newton solve of `∇_ξφ(x, t, ξ) = v`; returns `x` and the iteration count.
pub fn solve_x_counted(
    phase: &PhaseSpec,
    xi: &[f64],
    v: &[f64],
    t: f64,
    guess: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let mut x = guess.to_vec();
    for iter in 0..=NEWTON_MAX_ITERS {
        let (f, jac) = newton_system(phase, &x, t, xi, v);
        let r = f.norm();
        if !r.is_finite() {
            break;
        }
        if r <= NEWTON_TOL {
            return Ok((x, iter));
        }
        if iter == NEWTON_MAX_ITERS {
            break;
        }
        let cond = condition_number(&jac);
        if cond > MAX_CONDITION {
            return Err(LabError::IllConditioned(cond));
        }
        let step = jac.lu().solve(&f).ok_or(LabError::IllConditioned(f64::INFINITY))?;
        let mut lambda = 1.0;
        let mut next: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a - d).collect();
        for _ in 0..30 {
            let rn = residual(phase, &next, t, xi, v);
            if rn.is_finite() && rn < r {
                break;
            }
            lambda *= 0.5;
            next = x.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
        }
        x = next;
    }
    Err(LabError::Trace {
        t,
        reason: format!("Newton did not converge in {NEWTON_MAX_ITERS} iterations"),
    })
}

/// The point `X(ξ, v, t)` of the curve at height `t`.
pub fn solve_x(phase: &PhaseSpec, xi: &[f64], v: &[f64], t: f64, guess: &[f64]) -> Result<Vec<f64>> {
    solve_x_counted(phase, xi, v, t, guess).map(|(x, _)| x)
}

fn attach_t(e: LabError, t: f64) -> LabError {
    match e {
        LabError::Trace { .. } => e,
        other => LabError::Trace {
            t,
            reason: other.to_string(),
        },
    }
}

/// Traces the curve over `t_grid`, starting at the grid point nearest the
/// origin's height and continuing outward.
pub fn trace_curve(phase: &PhaseSpec, param: &CurveParam, t_grid: &[f64]) -> Result<CurveSample> {
    assert!(!t_grid.is_empty(), "empty t grid");
    let n = phase.n();
    let t0 = phase.origin_m()[n - 1];
    let start = t_grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t0).abs().total_cmp(&(b.1 - t0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let k = t_grid.len();
    let mut points = vec![Vec::new(); k];
    let mut iters = vec![0; k];
    let origin_x = phase.origin_m()[..n - 1].to_vec();
    let (x, it) = solve_x_counted(phase, &param.xi, &param.v, t_grid[start], &origin_x)
        .map_err(|e| attach_t(e, t_grid[start]))?;
    points[start] = x;
    iters[start] = it;
    for i in start + 1..k {
        let (x, it) = solve_x_counted(phase, &param.xi, &param.v, t_grid[i], &points[i - 1])
            .map_err(|e| attach_t(e, t_grid[i]))?;
        points[i] = x;
        iters[i] = it;
    }
    for i in (0..start).rev() {
        let (x, it) = solve_x_counted(phase, &param.xi, &param.v, t_grid[i], &points[i + 1])
            .map_err(|e| attach_t(e, t_grid[i]))?;
        points[i] = x;
        iters[i] = it;
    }
    Ok(CurveSample {
        t_grid: t_grid.to_vec(),
        points,
        newton_iters: iters,
    })
}

/// Uniform grid over the t-range of `M₀`.
pub fn default_t_grid(phase: &PhaseSpec, count: usize) -> Vec<f64> {
    let m0 = phase.m0();
    let n = phase.n();
    linspace(m0.lo[n - 1], m0.hi[n - 1], count)
}

pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..count)
        .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
        .collect()
}

/// `(∂_{ξ_j}∂_{x_i}φ)_{ji}`, whose inverse is `∇_vX`.
pub fn spatial_jacobian(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64]) -> DMatrix<f64> {
    newton_system(phase, x, t, xi, &vec![0.0; x.len()]).1
}

/// Unit-height tangent `(dX/dt, 1)` of the curve through `(x, t)` with
/// direction `ξ`.
pub fn tangent(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64]) -> Result<Vec<f64>> {
    let n = phase.n();
    let jet = eval_jet(phase, x, t, xi, 2)?;
    let kx = DMatrix::from_fn(n - 1, n - 1, |j, i| jet.partial(&[xivar(n, j), xvar(i)]));
    let dt = DVector::from_fn(n - 1, |j, _| jet.partial(&[xivar(n, j), xvar(n - 1)]));
    let sol = kx.lu().solve(&dt).ok_or(LabError::IllConditioned(f64::INFINITY))?;
    let mut out: Vec<f64> = sol.iter().map(|s| -s).collect();
    out.push(1.0);
    Ok(out)
}

/// `‖∇_ξX + ∇_vX·∇²_ξφ(X, t, ξ)‖_F` with the derivatives of `X` taken by
/// central differences on the solver.
pub fn check_implicit_derivative(phase: &PhaseSpec, xi: &[f64], v: &[f64], t: f64) -> Result<f64> {
    const H: f64 = 1e-5;
    let n = phase.n();
    let m = n - 1;
    let guess = phase.origin_m()[..m].to_vec();
    let x0 = solve_x(phase, xi, v, t, &guess).map_err(|e| attach_t(e, t))?;
    let mut dxi = DMatrix::zeros(m, m);
    let mut dv = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut xp = xi.to_vec();
        let mut xm = xi.to_vec();
        xp[j] += H;
        xm[j] -= H;
        let a = solve_x(phase, &xp, v, t, &x0).map_err(|e| attach_t(e, t))?;
        let b = solve_x(phase, &xm, v, t, &x0).map_err(|e| attach_t(e, t))?;
        let mut vp = v.to_vec();
        let mut vm = v.to_vec();
        vp[j] += H;
        vm[j] -= H;
        let c = solve_x(phase, xi, &vp, t, &x0).map_err(|e| attach_t(e, t))?;
        let d = solve_x(phase, xi, &vm, t, &x0).map_err(|e| attach_t(e, t))?;
        for i in 0..m {
            dxi[(i, j)] = (a[i] - b[i]) / (2.0 * H);
            dv[(i, j)] = (c[i] - d[i]) / (2.0 * H);
        }
    }
    let hess = eval_jet(phase, &x0, t, xi, 2)?.hess_xi();
    Ok(crate::linalg::frobenius(&(dxi + dv * hess)))
}

/// Angle in radians between two vectors.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    let c: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() / (norm(a) * norm(b));
    c.clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_linear_between_nodes() {
        let s = CurveSample {
            t_grid: vec![0.0, 1.0, 2.0],
            points: vec![vec![0.0], vec![2.0], vec![3.0]],
            newton_iters: vec![0; 3],
        };
        assert_eq!(s.interpolate(0.5), vec![1.0]);
        assert_eq!(s.interpolate(1.5), vec![2.5]);
        assert_eq!(s.interpolate(-1.0), vec![0.0]);
        assert_eq!(s.interpolate(9.0), vec![3.0]);
    }

    #[test]
    fn metric_adds_the_two_distances() {
        let p = CurveParam::new(vec![0.0, 0.0], vec![0.0, 0.0]);
        let q = CurveParam::new(vec![0.3, 0.4], vec![0.0, 1.0]);
        assert!((curve_metric(&p, &q) - 1.5).abs() < 1e-15);
    }
}
