//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Tps`] holds the Taylor coefficients of a smooth function around a
//! point, in all variables of a [`TaylorSpace`], up to a fixed total degree.
//! Arithmetic and elementary functions propagate the coefficients exactly
//! (forward-mode differentiation of every order at once), so phase
//! derivatives up to order four carry no truncation error.
//!
//! Each value also tracks the degree up to which its coefficients are
//! trustworthy. Differentiation lowers it by one and products take the
//! minimum, which is what lets the condition checks apply a vector field
//! twice to a fourth-order jet and still read off exact constant terms.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

/// Monomial bookkeeping for `nvars` variables up to total degree `order`.
pub struct TaylorSpace {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degree: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)` with `x^i * x^j = x^k`, sorted by `deg(k)`.
    products: Vec<(u32, u32, u32)>,
    /// `products[..prod_end[d]]` are the triples with `deg(k) <= d`.
    prod_end: Vec<usize>,
    /// Per variable: `(src, dst, exponent)` for `d/dx_v x^src = e * x^dst`.
    derivs: Vec<Vec<(u32, u32, f64)>>,
    /// `monos_end[d]` is the number of monomials of degree `<= d`.
    monos_end: Vec<usize>,
}

impl fmt::Debug for TaylorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaylorSpace")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .field("len", &self.exps.len())
            .finish()
    }
}

fn enumerate_degree(nvars: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    // Lexicographically descending exponent vectors of a fixed degree.
    fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left as u8;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e as u8;
            rec(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    if nvars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return;
    }
    let mut cur = vec![0u8; nvars];
    rec(0, degree, &mut cur, out);
}

impl TaylorSpace {
    fn build(nvars: usize, order: usize) -> Self {
        let mut exps = Vec::new();
        let mut monos_end = Vec::with_capacity(order + 1);
        for d in 0..=order {
            enumerate_degree(nvars, d, &mut exps);
            monos_end.push(exps.len());
        }
        let degree: Vec<usize> = exps
            .iter()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .collect();
        let lookup: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();

        let mut products = Vec::new();
        let mut prod_end = Vec::with_capacity(order + 1);
        let mut divisor = vec![0u8; nvars];
        for d in 0..=order {
            let start = if d == 0 { 0 } else { monos_end[d - 1] };
            for k in start..monos_end[d] {
                // Enumerate every exponent vector `i <= k` componentwise.
                let ek = &exps[k];
                divisor.iter_mut().for_each(|x| *x = 0);
                loop {
                    let rest: Vec<u8> = ek.iter().zip(&divisor).map(|(a, b)| a - b).collect();
                    let i = lookup[&divisor];
                    let j = lookup[&rest];
                    products.push((i as u32, j as u32, k as u32));
                    // Odometer increment bounded by ek.
                    let mut pos = 0;
                    loop {
                        if pos == nvars {
                            break;
                        }
                        if divisor[pos] < ek[pos] {
                            divisor[pos] += 1;
                            break;
                        }
                        divisor[pos] = 0;
                        pos += 1;
                    }
                    if pos == nvars {
                        break;
                    }
                }
            }
            prod_end.push(products.len());
        }

        let mut derivs = vec![Vec::new(); nvars];
        for (k, ek) in exps.iter().enumerate() {
            for v in 0..nvars {
                if ek[v] > 0 {
                    let mut lower = ek.clone();
                    lower[v] -= 1;
                    derivs[v].push((k as u32, lookup[&lower] as u32, ek[v] as f64));
                }
            }
        }

        TaylorSpace {
            nvars,
            order,
            exps,
            degree,
            lookup,
            products,
            prod_end,
            derivs,
            monos_end,
        }
    }

    /// Shared space for the given shape. Spaces are built once and live for
    /// the rest of the process.
    pub fn get(nvars: usize, order: usize) -> &'static TaylorSpace {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static TaylorSpace>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
        guard
            .entry((nvars, order))
            .or_insert_with(|| Box::leak(Box::new(TaylorSpace::build(nvars, order))))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored monomials.
    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self, idx: usize) -> &[u8] {
        &self.exps[idx]
    }

    pub fn degree_of(&self, idx: usize) -> usize {
        self.degree[idx]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.lookup.get(exps).copied()
    }
}

/// A truncated Taylor series. See the module docs.
#[derive(Clone)]
pub struct Tps {
    space: &'static TaylorSpace,
    coeffs: Vec<f64>,
    valid: usize,
}

impl fmt::Debug for Tps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tps")
            .field("value", &self.value())
            .field("valid", &self.valid)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Tps {
    pub fn constant(space: &'static TaylorSpace, value: f64) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Tps {
            space,
            coeffs,
            valid: space.order,
        }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(space: &'static TaylorSpace, var: usize, value: f64) -> Self {
        assert!(var < space.nvars, "variable index out of range");
        let mut t = Tps::constant(space, value);
        if space.order >= 1 {
            let mut e = vec![0u8; space.nvars];
            e[var] = 1;
            t.coeffs[space.lookup[&e]] = 1.0;
        }
        t
    }

    /// All variables of `space` expanded around `point`.
    pub fn variables(space: &'static TaylorSpace, point: &[f64]) -> Vec<Tps> {
        assert_eq!(point.len(), space.nvars);
        point
            .iter()
            .enumerate()
            .map(|(i, &p)| Tps::variable(space, i, p))
            .collect()
    }

    /// Builds a series from raw coefficients (indexed like the space).
    pub fn from_coeffs(space: &'static TaylorSpace, coeffs: Vec<f64>, valid: usize) -> Self {
        assert_eq!(coeffs.len(), space.len());
        Tps {
            space,
            coeffs,
            valid: valid.min(space.order),
        }
    }

    pub fn space(&self) -> &'static TaylorSpace {
        self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Highest degree whose coefficients are exact.
    pub fn valid_order(&self) -> usize {
        self.valid
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, exps: &[u8]) -> f64 {
        self.space
            .index_of(exps)
            .map(|i| self.coeffs[i])
            .unwrap_or(0.0)
    }

    /// Partial derivative `d^|e| f / dx^e` at the expansion point.
    pub fn partial(&self, exps: &[u8]) -> f64 {
        let deg: usize = exps.iter().map(|&e| e as usize).sum();
        assert!(deg <= self.valid, "partial of degree {deg} beyond valid order {}", self.valid);
        let fact: f64 = exps.iter().map(|&e| factorial(e as usize)).product();
        self.coeff(exps) * fact
    }

    /// Partial derivative named by a list of variable indices (repeats allowed).
    pub fn partial_by_vars(&self, vars: &[usize]) -> f64 {
        let mut e = vec![0u8; self.space.nvars];
        for &v in vars {
            e[v] += 1;
        }
        self.partial(&e)
    }

    /// `d/dx_var` of the series; the valid order drops by one.
    pub fn derivative(&self, var: usize) -> Tps {
        assert!(self.valid >= 1, "cannot differentiate a series of valid order 0");
        let mut out = vec![0.0; self.space.len()];
        for &(src, dst, e) in &self.space.derivs[var] {
            out[dst as usize] += e * self.coeffs[src as usize];
        }
        let valid = self.valid - 1;
        zero_above(self.space, &mut out, valid);
        Tps {
            space: self.space,
            coeffs: out,
            valid,
        }
    }

    /// Same series with the valid order capped at `order`.
    pub fn truncated(mut self, order: usize) -> Tps {
        self.valid = self.valid.min(order);
        zero_above(self.space, &mut self.coeffs, self.valid);
        self
    }

    fn like(&self, value: f64) -> Tps {
        let mut t = Tps::constant(self.space, value);
        t.valid = self.valid;
        t
    }

    pub fn zero_like(&self) -> Tps {
        self.like(0.0)
    }

    /// `f(self)` where `coeffs[k] = f^{(k)}(a0) / k!` at `a0 = self.value()`.
    pub fn compose(&self, coeffs: &[f64]) -> Tps {
        let m = self.valid.min(coeffs.len().saturating_sub(1));
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = self.like(coeffs[m]);
        for k in (0..m).rev() {
            acc = &acc * &h;
            acc.coeffs[0] += coeffs[k];
        }
        acc.valid = self.valid;
        acc
    }

    pub fn recip(&self) -> Tps {
        let a0 = self.value();
        let c: Vec<f64> = (0..=self.valid)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                s / a0.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&c)
    }

    pub fn exp(&self) -> Tps {
        let e = self.value().exp();
        let c: Vec<f64> = (0..=self.valid).map(|k| e / factorial(k)).collect();
        self.compose(&c)
    }

    pub fn ln(&self) -> Tps {
        let a0 = self.value();
        let c: Vec<f64> = (0..=self.valid)
            .map(|k| {
                if k == 0 {
                    a0.ln()
                } else {
                    let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                    s / (k as f64 * a0.powi(k as i32))
                }
            })
            .collect();
        self.compose(&c)
    }

    /// `self^p` for real `p`; requires a positive constant term unless `p`
    /// is a nonnegative integer.
    pub fn powf(&self, p: f64) -> Tps {
        let a0 = self.value();
        let mut c = Vec::with_capacity(self.valid + 1);
        let mut binom = 1.0;
        for k in 0..=self.valid {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            c.push(binom * a0.powf(p - k as f64));
        }
        self.compose(&c)
    }

    pub fn sqrt(&self) -> Tps {
        self.powf(0.5)
    }

    pub fn sin(&self) -> Tps {
        let (s, c0) = self.value().sin_cos();
        let cyc = [s, c0, -s, -c0];
        let c: Vec<f64> = (0..=self.valid).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&c)
    }

    pub fn cos(&self) -> Tps {
        let (s, c0) = self.value().sin_cos();
        let cyc = [c0, -s, -c0, s];
        let c: Vec<f64> = (0..=self.valid).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&c)
    }

    pub fn tan(&self) -> Tps {
        &self.sin() * &self.cos().recip()
    }

    pub fn powi(&self, k: u32) -> Tps {
        let mut acc = self.like(1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Evaluate the truncated polynomial at a displacement `dx` from the
    /// expansion point.
    pub fn eval_at(&self, dx: &[f64]) -> f64 {
        assert_eq!(dx.len(), self.space.nvars);
        let end = self.space.monos_end[self.valid];
        (0..end)
            .map(|k| {
                let e = &self.space.exps[k];
                self.coeffs[k]
                    * e.iter()
                        .zip(dx)
                        .map(|(&p, &d)| d.powi(p as i32))
                        .product::<f64>()
            })
            .sum()
    }
}

fn zero_above(space: &TaylorSpace, coeffs: &mut [f64], valid: usize) {
    let end = space.monos_end[valid];
    coeffs[end..].iter_mut().for_each(|c| *c = 0.0);
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn mul_into(a: &Tps, b: &Tps) -> Tps {
    debug_assert!(std::ptr::eq(a.space, b.space), "mixing Taylor spaces");
    let valid = a.valid.min(b.valid);
    let space = a.space;
    let mut out = vec![0.0; space.len()];
    let end = space.prod_end[valid];
    for &(i, j, k) in &space.products[..end] {
        let ai = a.coeffs[i as usize];
        if ai != 0.0 {
            out[k as usize] += ai * b.coeffs[j as usize];
        }
    }
    Tps {
        space,
        coeffs: out,
        valid,
    }
}

fn add_into(a: &Tps, b: &Tps, sign: f64) -> Tps {
    debug_assert!(std::ptr::eq(a.space, b.space), "mixing Taylor spaces");
    let valid = a.valid.min(b.valid);
    let mut coeffs: Vec<f64> = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| x + sign * y)
        .collect();
    zero_above(a.space, &mut coeffs, valid);
    Tps {
        space: a.space,
        coeffs,
        valid,
    }
}

macro_rules! tps_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Tps> for &Tps {
            type Output = Tps;
            fn $m(self, rhs: &Tps) -> Tps {
                $body(self, rhs)
            }
        }
        impl $tr<Tps> for &Tps {
            type Output = Tps;
            fn $m(self, rhs: Tps) -> Tps {
                $body(self, &rhs)
            }
        }
        impl $tr<&Tps> for Tps {
            type Output = Tps;
            fn $m(self, rhs: &Tps) -> Tps {
                $body(&self, rhs)
            }
        }
        impl $tr<Tps> for Tps {
            type Output = Tps;
            fn $m(self, rhs: Tps) -> Tps {
                $body(&self, &rhs)
            }
        }
    };
}

tps_binop!(Add, add, |a: &Tps, b: &Tps| add_into(a, b, 1.0));
tps_binop!(Sub, sub, |a: &Tps, b: &Tps| add_into(a, b, -1.0));
tps_binop!(Mul, mul, mul_into);

macro_rules! tps_scalar_ops {
    ($($t:ty),*) => {$(
        impl Add<f64> for $t {
            type Output = Tps;
            fn add(self, rhs: f64) -> Tps {
                let mut out = self.clone();
                out.coeffs[0] += rhs;
                out
            }
        }
        impl Sub<f64> for $t {
            type Output = Tps;
            fn sub(self, rhs: f64) -> Tps {
                let mut out = self.clone();
                out.coeffs[0] -= rhs;
                out
            }
        }
        impl Mul<f64> for $t {
            type Output = Tps;
            fn mul(self, rhs: f64) -> Tps {
                let mut out = self.clone();
                out.coeffs.iter_mut().for_each(|c| *c *= rhs);
                out
            }
        }
        impl Add<$t> for f64 {
            type Output = Tps;
            fn add(self, rhs: $t) -> Tps {
                rhs + self
            }
        }
        impl Sub<$t> for f64 {
            type Output = Tps;
            fn sub(self, rhs: $t) -> Tps {
                let mut out = -rhs;
                out.coeffs[0] += self;
                out
            }
        }
        impl Mul<$t> for f64 {
            type Output = Tps;
            fn mul(self, rhs: $t) -> Tps {
                rhs * self
            }
        }
    )*};
}

tps_scalar_ops!(Tps, &Tps);

impl Neg for &Tps {
    type Output = Tps;
    fn neg(self) -> Tps {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c = -*c);
        out
    }
}

impl Neg for Tps {
    type Output = Tps;
    fn neg(self) -> Tps {
        -&self
    }
}

impl AddAssign<&Tps> for Tps {
    fn add_assign(&mut self, rhs: &Tps) {
        *self = add_into(self, rhs, 1.0);
    }
}

impl AddAssign<Tps> for Tps {
    fn add_assign(&mut self, rhs: Tps) {
        *self = add_into(self, &rhs, 1.0);
    }
}

impl SubAssign<&Tps> for Tps {
    fn sub_assign(&mut self, rhs: &Tps) {
        *self = add_into(self, rhs, -1.0);
    }
}

impl SubAssign<Tps> for Tps {
    fn sub_assign(&mut self, rhs: Tps) {
        *self = add_into(self, &rhs, -1.0);
    }
}

impl MulAssign<&Tps> for Tps {
    fn mul_assign(&mut self, rhs: &Tps) {
        *self = mul_into(self, rhs);
    }
}

impl AddAssign<f64> for Tps {
    fn add_assign(&mut self, rhs: f64) {
        self.coeffs[0] += rhs;
    }
}

impl SubAssign<f64> for Tps {
    fn sub_assign(&mut self, rhs: f64) {
        self.coeffs[0] -= rhs;
    }
}

impl MulAssign<f64> for Tps {
    fn mul_assign(&mut self, rhs: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
    }
}

/// Determinant of a square matrix of series by cofactor expansion along
/// the first row.
pub fn det(m: &[Vec<Tps>]) -> Tps {
    let n = m.len();
    assert!(n > 0 && m.iter().all(|r| r.len() == n));
    if n == 1 {
        return m[0][0].clone();
    }
    if n == 2 {
        return &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0];
    }
    let mut acc = m[0][0].zero_like();
    for j in 0..n {
        let minor: Vec<Vec<Tps>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, v)| v.clone())
                    .collect()
            })
            .collect();
        let term = &m[0][j] * det(&minor);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn monomial_counts() {
        let s = TaylorSpace::get(5, 4);
        assert_eq!(s.len(), 126);
        let s = TaylorSpace::get(7, 4);
        assert_eq!(s.len(), 330);
        assert_eq!(TaylorSpace::get(1, 2).len(), 3);
    }

    #[test]
    fn product_rule_on_univariate_polynomial() {
        let s = TaylorSpace::get(1, 4);
        let x = Tps::variable(s, 0, 2.0);
        // x^3 around 2: 8 + 12h + 6h^2 + h^3
        let y = x.powi(3);
        assert_relative_eq!(y.coeff(&[0]), 8.0);
        assert_relative_eq!(y.coeff(&[1]), 12.0);
        assert_relative_eq!(y.coeff(&[2]), 6.0);
        assert_relative_eq!(y.coeff(&[3]), 1.0);
        assert_relative_eq!(y.coeff(&[4]), 0.0);
        assert_relative_eq!(y.partial(&[2]), 12.0);
    }

    #[test]
    fn mixed_partials_of_exp_product() {
        let s = TaylorSpace::get(2, 4);
        let v = Tps::variables(s, &[0.3, -0.2]);
        let f = (&v[0] * &v[1]).exp();
        // d^2/dx dy e^{xy} = (1 + xy) e^{xy}
        let (x, y) = (0.3f64, -0.2f64);
        assert_relative_eq!(f.partial(&[1, 1]), (1.0 + x * y) * (x * y).exp(), epsilon = 1e-14);
        // d^4/dx^2 dy^2 e^{xy} = (2 + 4xy + x^2y^2) e^{xy}
        let want = (2.0 + 4.0 * x * y + x * x * y * y) * (x * y).exp();
        assert_relative_eq!(f.partial(&[2, 2]), want, epsilon = 1e-13);
    }

    #[test]
    fn tan_derivatives_match_closed_form() {
        let s = TaylorSpace::get(1, 4);
        let a = 0.4f64;
        let t = Tps::variable(s, 0, a).tan();
        let sec2 = 1.0 / a.cos().powi(2);
        let tn = a.tan();
        assert_relative_eq!(t.partial(&[1]), sec2, epsilon = 1e-14);
        assert_relative_eq!(t.partial(&[2]), 2.0 * sec2 * tn, epsilon = 1e-13);
        assert_relative_eq!(t.partial(&[3]), 2.0 * sec2 * (sec2 + 2.0 * tn * tn), epsilon = 1e-12);
    }

    #[test]
    fn ln_sqrt_recip_consistency() {
        let s = TaylorSpace::get(3, 4);
        let v = Tps::variables(s, &[1.2, 0.7, -0.4]);
        let u = &v[0] * &v[0] + &v[1] * &v[2] + 2.0;
        let lhs = u.sqrt() * u.sqrt();
        let rhs = u.recip().recip();
        let l = u.ln().exp();
        for k in 0..s.len() {
            assert!((lhs.coeffs()[k] - u.coeffs()[k]).abs() < 1e-12);
            assert!((rhs.coeffs()[k] - u.coeffs()[k]).abs() < 1e-12);
            assert!((l.coeffs()[k] - u.coeffs()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_lowers_valid_order() {
        let s = TaylorSpace::get(2, 3);
        let v = Tps::variables(s, &[0.1, 0.2]);
        let f = (&v[0] * &v[1]).sin();
        let d = f.derivative(0);
        assert_eq!(d.valid_order(), 2);
        // d/dx sin(xy) = y cos(xy); its y-derivative is cos - xy sin
        let (x, y) = (0.1f64, 0.2f64);
        assert_relative_eq!(d.value(), y * (x * y).cos(), epsilon = 1e-15);
        assert_relative_eq!(
            d.partial(&[0, 1]),
            (x * y).cos() - x * y * (x * y).sin(),
            epsilon = 1e-14
        );
        let dd = d.derivative(1).derivative(1);
        assert_eq!(dd.valid_order(), 0);
    }

    #[test]
    fn determinant_of_series_matrix() {
        let s = TaylorSpace::get(1, 2);
        let x = Tps::variable(s, 0, 0.5);
        let one = Tps::constant(s, 1.0);
        let m = vec![
            vec![x.clone(), one.clone(), one.clone()],
            vec![one.clone(), x.clone(), one.clone()],
            vec![one.clone(), one.clone(), x.clone()],
        ];
        // det = x^3 - 3x + 2
        let d = det(&m);
        let a = 0.5f64;
        assert_relative_eq!(d.value(), a.powi(3) - 3.0 * a + 2.0, epsilon = 1e-15);
        assert_relative_eq!(d.partial(&[1]), 3.0 * a * a - 3.0, epsilon = 1e-15);
        assert_relative_eq!(d.partial(&[2]), 6.0 * a, epsilon = 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn taylor_polynomial_reproduces_nearby_values(
            a in -0.5f64..0.5, b in -0.5f64..0.5, dx in -1e-2f64..1e-2, dy in -1e-2f64..1e-2
        ) {
            let s = TaylorSpace::get(2, 4);
            let v = Tps::variables(s, &[a, b]);
            let f = |x: &Tps, y: &Tps| (x * y + 1.5).ln() + (x - y).cos();
            let series = f(&v[0], &v[1]);
            let exact = ((a + dx) * (b + dy) + 1.5).ln() + ((a + dx) - (b + dy)).cos();
            let approx = series.eval_at(&[dx, dy]);
            // Remainder is fifth order in the displacement.
            proptest::prop_assert!((exact - approx).abs() < 1e-9);
        }
    }
}
