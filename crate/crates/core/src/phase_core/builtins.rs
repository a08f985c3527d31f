//! The closed-form phases.

use std::sync::Arc;

use super::{BoxDomain, Evaluator, PhaseSpec, PhaseTag};
use crate::error::{LabError, Result};
use crate::taylor::Tps;

fn dot(a: &[Tps], b: &[Tps]) -> Tps {
    let mut acc = a[0].zero_like();
    for (p, q) in a.iter().zip(b) {
        acc += p * q;
    }
    acc
}

fn norm2(a: &[Tps]) -> Tps {
    dot(a, a)
}

fn check_n(n: usize, min: usize, max: usize, name: &str) -> Result<()> {
    if n < min || n > max {
        return Err(LabError::Config(format!(
            "{name} phase needs {min} <= n <= {max}, got {n}"
        )));
    }
    Ok(())
}

/// `φ = x·ξ + ½ t |ξ|²`, the restriction (paraboloid) phase.
pub fn rest(n: usize) -> Result<PhaseSpec> {
    check_n(n, 2, 6, "rest")?;
    let f = |x: &[Tps], t: &Tps, xi: &[Tps]| dot(x, xi) + t * norm2(xi) * 0.5;
    PhaseSpec::new(
        n,
        PhaseTag::Rest,
        format!("rest{n}"),
        BoxDomain::cube(&vec![0.0; n], 0.5),
        BoxDomain::cube(&vec![0.0; n - 1], 0.5),
        vec![0.0; n],
        vec![0.0; n - 1],
        Evaluator::Exact(Arc::new(f)),
    )
}

/// `φ = x₁ξ₁ + x₂ξ₂ + tξ₁ξ₂ + ½t²ξ₂²` in three dimensions.
pub fn worst() -> Result<PhaseSpec> {
    let f = |x: &[Tps], t: &Tps, xi: &[Tps]| {
        dot(x, xi) + t * &xi[0] * &xi[1] + t * t * &xi[1] * &xi[1] * 0.5
    };
    PhaseSpec::new(
        3,
        PhaseTag::Worst,
        "worst",
        BoxDomain::cube(&[0.0; 3], 0.5),
        BoxDomain::cube(&[0.0; 2], 0.5),
        vec![0.0; 3],
        vec![0.0; 2],
        Evaluator::Exact(Arc::new(f)),
    )
}

/// `φ = t⁻¹ √(1 + |x − tξ|²)` around `𝐱 = (0, 1)`.
pub fn bochner_riesz(n: usize) -> Result<PhaseSpec> {
    check_n(n, 3, 6, "bochner_riesz")?;
    let f = |x: &[Tps], t: &Tps, xi: &[Tps]| {
        let d: Vec<Tps> = x.iter().zip(xi).map(|(a, b)| a - t * b).collect();
        (norm2(&d) + 1.0).sqrt() * t.recip()
    };
    let mut om = vec![0.0; n];
    om[n - 1] = 1.0;
    let mut half = vec![0.25; n];
    half[n - 1] = 0.1;
    PhaseSpec::new(
        n,
        PhaseTag::BochnerRiesz,
        format!("bochner_riesz{n}"),
        BoxDomain::centered(&om, &half),
        BoxDomain::cube(&vec![0.0; n - 1], 0.25),
        om,
        vec![0.0; n - 1],
        Evaluator::Exact(Arc::new(f)),
    )
}

/// `φ = x′·ξ′ + ½t²|ξ′|² + ln sec(tξ_{n−1} + x_{n−1})` around `𝐱 = (0, 1)`.
pub fn tan(n: usize) -> Result<PhaseSpec> {
    check_n(n, 3, 6, "tan")?;
    let f = |x: &[Tps], t: &Tps, xi: &[Tps]| {
        let m = x.len();
        let head = if m > 1 {
            dot(&x[..m - 1], &xi[..m - 1]) + t * t * norm2(&xi[..m - 1]) * 0.5
        } else {
            t.zero_like()
        };
        let arg = t * &xi[m - 1] + &x[m - 1];
        head - arg.cos().ln()
    };
    let mut om = vec![0.0; n];
    om[n - 1] = 1.0;
    let mut half = vec![0.25; n];
    half[n - 1] = 0.1;
    PhaseSpec::new(
        n,
        PhaseTag::Tan,
        format!("tan{n}"),
        BoxDomain::centered(&om, &half),
        BoxDomain::cube(&vec![0.0; n - 1], 0.25),
        om,
        vec![0.0; n - 1],
        Evaluator::Exact(Arc::new(f)),
    )
}

/// Built-in phase by name.
pub fn by_name(name: &str, n: usize) -> Result<PhaseSpec> {
    match name {
        "rest" => rest(n),
        "bochner_riesz" | "br" => bochner_riesz(n),
        "tan" => tan(n),
        "worst" => {
            if n != 3 {
                return Err(LabError::Config("worst phase exists only for n = 3".into()));
            }
            worst()
        }
        other => Err(LabError::Config(format!("unknown phase '{other}'"))),
    }
}
