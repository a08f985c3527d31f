use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BoxDomain, PhaseSpec};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPoint {
    pub x: Vec<f64>,
    pub t: f64,
    pub xi: Vec<f64>,
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton points `1..=count` in the unit cube, optionally shifted by a seeded
/// random rotation (mod 1).
pub fn halton_points(dim: usize, count: usize, seed: Option<u64>) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton dimension {dim} too large");
    let shift: Vec<f64> = match seed {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..dim).map(|_| rng.gen::<f64>()).collect()
        }
        None => vec![0.0; dim],
    };
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

pub fn sample_box(b: &BoxDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    halton_points(b.dim(), count, Some(seed))
        .iter()
        .map(|u| b.from_unit(u))
        .collect()
}

/// Low-discrepancy points in `M₀ × Σ₀`; the first one is the origin.
pub fn sample_domain(phase: &PhaseSpec, count: usize, seed: u64) -> Vec<DomainPoint> {
    let n = phase.n();
    let m0 = phase.m0();
    let s0 = phase.sigma0();
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let om = phase.origin_m();
    out.push(DomainPoint {
        x: om[..n - 1].to_vec(),
        t: om[n - 1],
        xi: phase.origin_sigma().to_vec(),
    });
    for u in halton_points(2 * n - 1, count - 1, Some(seed)) {
        let pm = m0.from_unit(&u[..n]);
        out.push(DomainPoint {
            x: pm[..n - 1].to_vec(),
            t: pm[n - 1],
            xi: s0.from_unit(&u[n..]),
        });
    }
    out
}
