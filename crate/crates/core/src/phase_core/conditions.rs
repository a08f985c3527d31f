//! (H1), (H2), Bourgain's condition and the `(A, B, c)` identity.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{eval_jet, xivar, xvar, ABCData, PhaseSpec};
use crate::error::{LabError, Result};
use crate::linalg::{frobenius, is_positive_definite, max_asymmetry, min_singular_value, proportionality};
use crate::taylor::{det, Tps};

/// Below this norm the Gauss map is treated as zero.
pub const GAUSS_EPS: f64 = 1e-12;

/// Series of `∂_{𝐱_i}∂_{ξ_j}φ`, an `n × (n − 1)` array.
pub(crate) fn mixed_series(s: &Tps, n: usize) -> Vec<Vec<Tps>> {
    (0..n)
        .map(|i| {
            let di = s.derivative(xvar(i));
            (0..n - 1).map(|j| di.derivative(xivar(n, j))).collect()
        })
        .collect()
}

/// Generalized cross product of the columns of `k`: `G·w = det[k | w]`.
pub(crate) fn gauss_series(k: &[Vec<Tps>]) -> Vec<Tps> {
    let n = k.len();
    (0..n)
        .map(|i| {
            let minor: Vec<Vec<Tps>> = k
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != i)
                .map(|(_, row)| row.clone())
                .collect();
            let d = det(&minor);
            if (i + n - 1) % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect()
}

/// `(G·∇_𝐱) f`.
pub(crate) fn along_g(g: &[Tps], f: &Tps) -> Tps {
    let mut acc = &g[0] * f.derivative(xvar(0));
    for (i, gi) in g.iter().enumerate().skip(1) {
        acc += gi * f.derivative(xvar(i));
    }
    acc
}

pub(crate) fn hess_xi_series(s: &Tps, n: usize) -> Vec<Vec<Tps>> {
    let m = n - 1;
    let d: Vec<Tps> = (0..m).map(|j| s.derivative(xivar(n, j))).collect();
    let mut h: Vec<Vec<Tps>> = vec![Vec::with_capacity(m); m];
    for i in 0..m {
        for j in 0..m {
            if j < i {
                let v: Tps = h[j][i].clone();
                h[i].push(v);
            } else {
                h[i].push(d[i].derivative(xivar(n, j)));
            }
        }
    }
    h
}

fn values(m: &[Vec<Tps>]) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j].value())
}

fn apply_matrix(g: &[Tps], m: &[Vec<Tps>]) -> Vec<Vec<Tps>> {
    let k = m.len();
    let mut out: Vec<Vec<Tps>> = vec![Vec::with_capacity(k); k];
    for i in 0..k {
        for j in 0..k {
            if j < i {
                let v = out[j][i].clone();
                out[i].push(v);
            } else {
                out[i].push(along_g(g, &m[i][j]));
            }
        }
    }
    out
}

/// The Gauss map `G(𝐱, ξ) ∈ ℝⁿ`.
pub fn gauss_map(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64]) -> Result<Vec<f64>> {
    let jet = eval_jet(phase, x, t, xi, 2)?;
    let k = mixed_series(jet.series(), phase.n());
    let g: Vec<f64> = gauss_series(&k).iter().map(|s| s.value()).collect();
    let norm = crate::linalg::norm(&g);
    if norm < GAUSS_EPS {
        return Err(LabError::Degenerate(norm));
    }
    Ok(g)
}

/// Smallest singular value of `∇_𝐱∇_ξφ`.
pub fn check_h1(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64]) -> Result<f64> {
    let jet = eval_jet(phase, x, t, xi, 2)?;
    Ok(min_singular_value(&jet.mixed()))
}

/// Determinant and positive-definiteness of `(G·∇_𝐱)∇²_ξφ`.
pub fn check_h2(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64]) -> Result<(f64, bool)> {
    let jet = eval_jet(phase, x, t, xi, 3)?;
    let n = phase.n();
    let g = gauss_series(&mixed_series(jet.series(), n));
    let m1 = values(&apply_matrix(&g, &hess_xi_series(jet.series(), n)));
    Ok((m1.determinant(), is_positive_definite(&m1)))
}

/// `‖(G·∇_𝐱)∇_ξφ‖`, which vanishes identically for any phase.
pub fn gauss_transport_defect(phase: &PhaseSpec, x: &[f64], t: f64, xi: &[f64]) -> Result<f64> {
    let jet = eval_jet(phase, x, t, xi, 2)?;
    let n = phase.n();
    let s = jet.series();
    let g = gauss_series(&mixed_series(s, n));
    let d: Vec<f64> = (0..n - 1)
        .map(|j| along_g(&g, &s.derivative(xivar(n, j))).value())
        .collect();
    Ok(crate::linalg::norm(&d))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub x: Vec<f64>,
    pub t: f64,
    pub xi: Vec<f64>,
    pub h1_sigma_min: f64,
    pub h2_det: f64,
    pub h2_posdef: bool,
    pub bourgain_lambda_hat: f64,
    pub bourgain_residual: f64,
    pub m1_norm: f64,
    pub m2_norm: f64,
    pub holds: bool,
}

/// Full pointwise report; the condition holds when the residual is at most
/// `tol`.
pub fn check_bourgain(
    phase: &PhaseSpec,
    x: &[f64],
    t: f64,
    xi: &[f64],
    tol: f64,
) -> Result<ConditionReport> {
    let jet = eval_jet(phase, x, t, xi, 4)?;
    let n = phase.n();
    let s = jet.series();
    let k = mixed_series(s, n);
    let g = gauss_series(&k);
    let m1s = apply_matrix(&g, &hess_xi_series(s, n));
    let m2s = apply_matrix(&g, &m1s);
    let m1 = values(&m1s);
    let m2 = values(&m2s);
    let (lambda, residual) =
        proportionality(&m1, &m2).ok_or_else(|| LabError::SingularH2(frobenius(&m1)))?;
    Ok(ConditionReport {
        x: x.to_vec(),
        t,
        xi: xi.to_vec(),
        h1_sigma_min: min_singular_value(&values(&k)),
        h2_det: m1.determinant(),
        h2_posdef: is_positive_definite(&m1),
        bourgain_lambda_hat: lambda,
        bourgain_residual: residual,
        m1_norm: frobenius(&m1),
        m2_norm: frobenius(&m2),
        holds: residual <= tol,
    })
}

/// The first two matrices `M₁ = (G·∇)∇²_ξφ`, `M₂ = (G·∇)²∇²_ξφ`.
pub fn bourgain_matrices(
    phase: &PhaseSpec,
    x: &[f64],
    t: f64,
    xi: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let jet = eval_jet(phase, x, t, xi, 4)?;
    let n = phase.n();
    let s = jet.series();
    let g = gauss_series(&mixed_series(s, n));
    let m1s = apply_matrix(&g, &hess_xi_series(s, n));
    let m2s = apply_matrix(&g, &m1s);
    Ok((values(&m1s), values(&m2s)))
}

#[derive(Debug, Clone, Serialize)]
pub struct AbcReport {
    /// `‖∇²_ξφ − A − cB‖ / (1 + ‖∇²_ξφ‖)`.
    pub residual: f64,
    pub det_b: f64,
    /// `(G·∇_𝐱)c`.
    pub g_dc: f64,
    pub asymmetry: f64,
}

pub fn check_abc(phase: &PhaseSpec, abc: &ABCData, x: &[f64], t: f64, xi: &[f64]) -> Result<AbcReport> {
    let jet = eval_jet(phase, x, t, xi, 2)?;
    let n = phase.n();
    let v = jet.grad_xi();
    let h = jet.hess_xi();
    let a = abc.a(&v, xi);
    let b = abc.b(&v, xi);
    let g = gauss_series(&mixed_series(jet.series(), n));
    let space = phase.space(1);
    let mut p = x.to_vec();
    p.push(t);
    p.extend_from_slice(xi);
    let vars = Tps::variables(space, &p);
    let cs = (abc.c)(&vars[..n - 1], &vars[n - 1], &vars[n..]);
    let c = cs.value();
    let g_dc: f64 = (0..n).map(|i| g[i].value() * cs.partial_by_vars(&[xvar(i)])).sum();
    let residual = frobenius(&(&h - &a - &b * c)) / (1.0 + frobenius(&h));
    Ok(AbcReport {
        residual,
        det_b: b.determinant(),
        g_dc,
        asymmetry: max_asymmetry(&a).max(max_asymmetry(&b)),
    })
}
