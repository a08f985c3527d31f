//! Separate changes of variables in `𝐱` and `ξ`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{halton_points, BoxDomain, Evaluator, PhaseSpec, PhaseTag};
use crate::error::{LabError, Result};
use crate::taylor::Tps;

/// Quadratic polynomial map `u ↦ offset + L(u − c) + [(u − c)ᵀQ_k(u − c)]_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap {
    pub center: Vec<f64>,
    pub offset: Vec<f64>,
    pub linear: DMatrix<f64>,
    pub quadratic: Vec<DMatrix<f64>>,
}

impl PolyMap {
    pub fn identity(center: &[f64]) -> Self {
        let d = center.len();
        PolyMap {
            center: center.to_vec(),
            offset: center.to_vec(),
            linear: DMatrix::identity(d, d),
            quadratic: vec![DMatrix::zeros(d, d); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let h: Vec<f64> = u.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        (0..d)
            .map(|k| {
                let mut y = self.offset[k];
                for i in 0..d {
                    y += self.linear[(k, i)] * h[i];
                    for j in 0..d {
                        y += self.quadratic[k][(i, j)] * h[i] * h[j];
                    }
                }
                y
            })
            .collect()
    }

    pub fn apply_series(&self, u: &[Tps]) -> Vec<Tps> {
        let d = self.dim();
        let h: Vec<Tps> = u.iter().zip(&self.center).map(|(a, &c)| a - c).collect();
        (0..d)
            .map(|k| {
                let mut y = u[0].zero_like() + self.offset[k];
                for i in 0..d {
                    y += &h[i] * self.linear[(k, i)];
                    for j in 0..d {
                        let q = self.quadratic[k][(i, j)];
                        if q != 0.0 {
                            y += &h[i] * &h[j] * q;
                        }
                    }
                }
                y
            })
            .collect()
    }

    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let h: Vec<f64> = u.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        DMatrix::from_fn(d, d, |k, i| {
            let mut v = self.linear[(k, i)];
            for j in 0..d {
                v += (self.quadratic[k][(i, j)] + self.quadratic[k][(j, i)]) * h[j];
            }
            v
        })
    }
}

/// Degree-two perturbation of the identity fixing `center`; every
/// perturbation coefficient lies in `[−scale, scale]`.
pub fn random_near_identity(center: &[f64], scale: f64, seed: u64) -> PolyMap {
    let d = center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = PolyMap::identity(center);
    for k in 0..d {
        for i in 0..d {
            m.linear[(k, i)] += rng.gen_range(-scale..=scale);
        }
    }
    for q in &mut m.quadratic {
        for i in 0..d {
            for j in i..d {
                q[(i, j)] = rng.gen_range(-scale..=scale);
            }
        }
    }
    m
}

fn fit_box(
    map: &PolyMap,
    target: &BoxDomain,
    template: &BoxDomain,
    label: &str,
) -> Result<BoxDomain> {
    let half: Vec<f64> = template.widths().iter().map(|w| 0.5 * w).collect();
    let probes = halton_points(map.dim(), 256, Some(0));
    let mut factor = 0.8;
    for _ in 0..40 {
        let scaled: Vec<f64> = half.iter().map(|h| h * factor).collect();
        let cand = BoxDomain::centered(&map.center, &scaled);
        let corners = (0..1usize << map.dim()).map(|mask| {
            (0..map.dim())
                .map(|i| if mask >> i & 1 == 1 { cand.hi[i] } else { cand.lo[i] })
                .collect::<Vec<f64>>()
        });
        let pts: Vec<Vec<f64>> = corners.chain(probes.iter().map(|u| cand.from_unit(u))).collect();
        let mut inside = true;
        for p in &pts {
            let det = map.jacobian(p).determinant();
            if det.abs() < 1e-6 {
                return Err(LabError::NotDiffeomorphism(det));
            }
            if !target.contains(&map.apply(p)) {
                inside = false;
                break;
            }
        }
        if inside {
            return Ok(cand);
        }
        factor *= 0.9;
    }
    Err(LabError::Config(format!(
        "no {label} box maps into the original domain"
    )))
}

/// `φ̃(𝐱, ξ) = φ(G(𝐱), H(ξ))` on boxes around the preimages of the origin.
pub fn transform_phase(phase: &PhaseSpec, gx: &PolyMap, gxi: &PolyMap) -> Result<PhaseSpec> {
    let n = phase.n();
    if gx.dim() != n || gxi.dim() != n - 1 {
        return Err(LabError::Config("diffeomorphism dimensions do not match the phase".into()));
    }
    let dm = fit_box(gx, phase.domain_m(), phase.domain_m(), "spatial")?;
    let ds = fit_box(gxi, phase.domain_sigma(), phase.domain_sigma(), "frequency")?;
    let evaluator = match phase.evaluator() {
        Evaluator::Exact(_) => {
            let inner = phase.clone();
            let (gx, gxi) = (gx.clone(), gxi.clone());
            Evaluator::Exact(Arc::new(move |x: &[Tps], t: &Tps, xi: &[Tps]| {
                let mut p = x.to_vec();
                p.push(t.clone());
                let y = gx.apply_series(&p);
                let eta = gxi.apply_series(xi);
                inner.compose_series(&y[..n - 1], &y[n - 1], &eta)
            }))
        }
        Evaluator::FiniteDifference { step, .. } => {
            let inner = phase.clone();
            let (gx, gxi) = (gx.clone(), gxi.clone());
            Evaluator::FiniteDifference {
                f: Arc::new(move |x: &[f64], t: f64, xi: &[f64]| {
                    let mut p = x.to_vec();
                    p.push(t);
                    let y = gx.apply(&p);
                    inner.value(&y[..n - 1], y[n - 1], &gxi.apply(xi))
                }),
                step: *step,
            }
        }
    };
    PhaseSpec::new(
        n,
        PhaseTag::Transformed,
        format!("transformed({})", phase.label()),
        dm,
        ds,
        gx.center.clone(),
        gxi.center.clone(),
        evaluator,
    )
}
