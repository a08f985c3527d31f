//! The `(A, B, c)` triples of the mild reformulation.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{PhaseSpec, PhaseTag};
use crate::taylor::{TaylorSpace, Tps};

pub type MatrixField = dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync;
pub type SeriesField = dyn Fn(&[Tps], &Tps, &[Tps]) -> Tps + Send + Sync;

/// `∇²_ξφ = A(∇_ξφ, ξ) + c(𝐱, ξ) B(∇_ξφ, ξ)`.
///
/// `A` and `B` take `(v, ξ)`; `c` is written over Taylor series so its
/// derivative along the Gauss map is exact.
#[derive(Clone)]
pub struct ABCData {
    pub label: String,
    pub a: Arc<MatrixField>,
    pub b: Arc<MatrixField>,
    pub c: Arc<SeriesField>,
}

impl fmt::Debug for ABCData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ABCData").field("label", &self.label).finish()
    }
}

impl ABCData {
    pub fn new(
        label: impl Into<String>,
        a: impl Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        b: impl Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        c: impl Fn(&[Tps], &Tps, &[Tps]) -> Tps + Send + Sync + 'static,
    ) -> Self {
        ABCData {
            label: label.into(),
            a: Arc::new(a),
            b: Arc::new(b),
            c: Arc::new(c),
        }
    }

    pub fn a(&self, v: &[f64], xi: &[f64]) -> DMatrix<f64> {
        (self.a)(v, xi)
    }

    pub fn b(&self, v: &[f64], xi: &[f64]) -> DMatrix<f64> {
        (self.b)(v, xi)
    }

    pub fn c(&self, x: &[f64], t: f64, xi: &[f64]) -> f64 {
        let m = x.len();
        let space = TaylorSpace::get(2 * m + 1, 0);
        let xs: Vec<Tps> = x.iter().map(|&a| Tps::constant(space, a)).collect();
        let ts = Tps::constant(space, t);
        let xis: Vec<Tps> = xi.iter().map(|&a| Tps::constant(space, a)).collect();
        (self.c)(&xs, &ts, &xis).value()
    }

    /// `A = 0`, `B = I`, `c = t`.
    pub fn rest(n: usize) -> Self {
        let m = n - 1;
        ABCData::new(
            "rest",
            move |_, _| DMatrix::zeros(m, m),
            move |_, _| DMatrix::identity(m, m),
            |_, t, _| t.clone(),
        )
    }

    /// `A = 0`, `B = I − vvᵀ`, `c = t / √(1 + |x − tξ|²)`.
    pub fn bochner_riesz(n: usize) -> Self {
        let m = n - 1;
        ABCData::new(
            "bochner_riesz",
            move |_, _| DMatrix::zeros(m, m),
            move |v, _| {
                DMatrix::from_fn(m, m, |i, j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    id - v[i] * v[j]
                })
            },
            |x, t, xi| {
                let mut r2 = Tps::constant(t.space(), 1.0);
                for (a, b) in x.iter().zip(xi) {
                    let d = a - t * b;
                    r2 += &d * &d;
                }
                t * r2.sqrt().recip()
            },
        )
    }

    /// `A = diag(0, …, 0, v_{n−1}²)`, `B = I`, `c = t²`.
    pub fn tan(n: usize) -> Self {
        let m = n - 1;
        ABCData::new(
            "tan",
            move |v, _| {
                let mut a = DMatrix::zeros(m, m);
                a[(m - 1, m - 1)] = v[m - 1] * v[m - 1];
                a
            },
            move |_, _| DMatrix::identity(m, m),
            |_, t, _| t * t,
        )
    }

    /// The known triple of an untransformed built-in phase.
    pub fn for_phase(phase: &PhaseSpec) -> Option<Self> {
        let n = phase.n();
        match phase.tag() {
            PhaseTag::Rest => Some(ABCData::rest(n)),
            PhaseTag::BochnerRiesz => Some(ABCData::bochner_riesz(n)),
            PhaseTag::Tan => Some(ABCData::tan(n)),
            _ => None,
        }
    }

    /// The triple of the flat phase, used as a deliberately wrong guess.
    pub fn naive(n: usize) -> Self {
        let mut d = ABCData::rest(n);
        d.label = "naive".into();
        d
    }
}
