//! Polynomials and linear differential operators with polynomial coefficients.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

/// Univariate polynomial, coefficients in ascending degree.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly1 {
    coeffs: Vec<f64>,
}

impl Poly1 {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly1 { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly1 { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly1::new(vec![c])
    }

    /// `c * x^k`
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = c;
        Poly1::new(v)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(&c) if c == 0.0) {
            self.coeffs.pop();
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly1 {
        if self.coeffs.len() <= 1 {
            return Poly1::zero();
        }
        Poly1::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly1 {
        Poly1::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `p(x - a)`
    pub fn shift(&self, a: f64) -> Poly1 {
        let lin = Poly1::new(vec![-a, 1.0]);
        let mut out = Poly1::zero();
        for &c in self.coeffs.iter().rev() {
            out = &(&out * &lin) + &Poly1::constant(c);
        }
        out
    }

    /// True when all odd coefficients vanish.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0)
    }

    /// Lift into a multivariate polynomial in variable `dim` of `dims`.
    pub fn lift(&self, dims: usize, dim: usize) -> MultiPoly {
        let mut out = MultiPoly::zero(dims);
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let mut e = vec![0u32; dims];
                e[dim] = k as u32;
                out.add_term(e, c);
            }
        }
        out
    }
}

impl Add for &Poly1 {
    type Output = Poly1;
    fn add(self, rhs: &Poly1) -> Poly1 {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly1::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly1 {
    type Output = Poly1;
    fn sub(self, rhs: &Poly1) -> Poly1 {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly1::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Poly1 {
    type Output = Poly1;
    fn mul(self, rhs: &Poly1) -> Poly1 {
        if self.is_zero() || rhs.is_zero() {
            return Poly1::zero();
        }
        let mut v = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly1::new(v)
    }
}

/// Multivariate polynomial stored as exponent vector -> coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    dims: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl MultiPoly {
    pub fn zero(dims: usize) -> Self {
        MultiPoly {
            dims,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dims: usize, c: f64) -> Self {
        let mut p = MultiPoly::zero(dims);
        p.add_term(vec![0; dims], c);
        p
    }

    /// The coordinate function `x_dim`.
    pub fn var(dims: usize, dim: usize) -> Self {
        let mut e = vec![0; dims];
        e[dim] = 1;
        let mut p = MultiPoly::zero(dims);
        p.add_term(e, 1.0);
        p
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        debug_assert_eq!(exps.len(), self.dims);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn scale(&self, s: f64) -> MultiPoly {
        let mut out = MultiPoly::zero(self.dims);
        if s != 0.0 {
            for (e, &c) in &self.terms {
                out.add_term(e.clone(), c * s);
            }
        }
        out
    }

    pub fn derivative(&self, dim: usize) -> MultiPoly {
        let mut out = MultiPoly::zero(self.dims);
        for (e, &c) in &self.terms {
            if e[dim] > 0 {
                let mut f = e.clone();
                f[dim] -= 1;
                out.add_term(f, c * e[dim] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn max_degree(&self, dim: usize) -> u32 {
        self.terms.keys().map(|e| e[dim]).max().unwrap_or(0)
    }
}

impl Add for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.add_term(e.clone(), c);
        }
        out
    }
}

impl Sub for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        self + &rhs.scale(-1.0)
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        self.scale(-1.0)
    }
}

impl Mul for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = MultiPoly::zero(self.dims);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &rhs.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

/// Linear differential operator `sum_a p_a(x) d^a` with polynomial coefficients.
///
/// Terms are kept in normal order: the coefficient acts after the derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOp {
    dims: usize,
    terms: BTreeMap<Vec<u32>, MultiPoly>,
}

impl DiffOp {
    pub fn zero(dims: usize) -> Self {
        DiffOp {
            dims,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(dims: usize) -> Self {
        DiffOp::mul(MultiPoly::constant(dims, 1.0))
    }

    /// Multiplication by a polynomial.
    pub fn mul(p: MultiPoly) -> Self {
        let dims = p.dims();
        let mut op = DiffOp::zero(dims);
        op.add_term(vec![0; dims], p);
        op
    }

    /// Partial derivative `d / dx_dim`.
    pub fn d(dims: usize, dim: usize) -> Self {
        let mut e = vec![0; dims];
        e[dim] = 1;
        let mut op = DiffOp::zero(dims);
        op.add_term(e, MultiPoly::constant(dims, 1.0));
        op
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &MultiPoly)> {
        self.terms.iter().map(|(e, p)| (e.as_slice(), p))
    }

    pub fn add_term(&mut self, derivs: Vec<u32>, coeff: MultiPoly) {
        if coeff.is_zero() {
            return;
        }
        let sum = match self.terms.remove(&derivs) {
            Some(old) => &old + &coeff,
            None => coeff,
        };
        if !sum.is_zero() {
            self.terms.insert(derivs, sum);
        }
    }

    pub fn scale(&self, s: f64) -> DiffOp {
        let mut out = DiffOp::zero(self.dims);
        for (e, p) in &self.terms {
            out.add_term(e.clone(), p.scale(s));
        }
        out
    }

    /// Composition `self ∘ rhs`, normal-ordered with the Leibniz rule.
    pub fn compose(&self, rhs: &DiffOp) -> DiffOp {
        let mut out = DiffOp::zero(self.dims);
        for (alpha, a) in &self.terms {
            for (gamma, b) in &rhs.terms {
                // a d^alpha (b d^gamma) = a sum_nu C(alpha,nu) (d^nu b) d^(alpha-nu+gamma)
                for nu in sub_multi_indices(alpha) {
                    let mut db = b.clone();
                    let mut binom = 1.0;
                    for (k, (&n, &al)) in nu.iter().zip(alpha.iter()).enumerate() {
                        for _ in 0..n {
                            db = db.derivative(k);
                        }
                        binom *= binomial(al, n);
                    }
                    if db.is_zero() {
                        continue;
                    }
                    let order: Vec<u32> = alpha
                        .iter()
                        .zip(&nu)
                        .zip(gamma)
                        .map(|((&al, &n), &g)| al - n + g)
                        .collect();
                    out.add_term(order, (a * &db).scale(binom));
                }
            }
        }
        out
    }

    /// Conjugate by `e^{w}` where `grad_half[k] = d_k w`: returns `e^{w} A e^{-w}`.
    ///
    /// Each `d_k` becomes `d_k - grad_half[k]`.
    pub fn conjugate(&self, grad_half: &[MultiPoly]) -> DiffOp {
        assert_eq!(grad_half.len(), self.dims);
        let shifted: Vec<DiffOp> = (0..self.dims)
            .map(|k| &DiffOp::d(self.dims, k) - &DiffOp::mul(grad_half[k].clone()))
            .collect();
        let mut out = DiffOp::zero(self.dims);
        for (alpha, a) in &self.terms {
            let mut term = DiffOp::mul(a.clone());
            for (k, &n) in alpha.iter().enumerate() {
                for _ in 0..n {
                    term = term.compose(&shifted[k]);
                }
            }
            out = &out + &term;
        }
        out
    }

    /// Apply to a polynomial.
    pub fn apply(&self, f: &MultiPoly) -> MultiPoly {
        let mut out = MultiPoly::zero(self.dims);
        for (alpha, a) in &self.terms {
            let mut g = f.clone();
            for (k, &n) in alpha.iter().enumerate() {
                for _ in 0..n {
                    g = g.derivative(k);
                }
            }
            out = &out + &(a * &g);
        }
        out
    }
}

impl Add for &DiffOp {
    type Output = DiffOp;
    fn add(self, rhs: &DiffOp) -> DiffOp {
        let mut out = self.clone();
        for (e, p) in &rhs.terms {
            out.add_term(e.clone(), p.clone());
        }
        out
    }
}

impl Sub for &DiffOp {
    type Output = DiffOp;
    fn sub(self, rhs: &DiffOp) -> DiffOp {
        self + &rhs.scale(-1.0)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn sub_multi_indices(alpha: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &a in alpha {
        let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
        for prefix in &out {
            for n in 0..=a {
                let mut p = prefix.clone();
                p.push(n);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly1_arithmetic() {
        let p = Poly1::new(vec![1.0, -2.0, 0.5]);
        let q = Poly1::new(vec![0.0, 1.0]);
        assert_eq!((&p * &q).coeffs(), &[0.0, 1.0, -2.0, 0.5]);
        assert_eq!(p.derivative().coeffs(), &[-2.0, 1.0]);
        assert!((p.shift(1.0).eval(3.0) - p.eval(2.0)).abs() < 1e-14);
        assert!(Poly1::new(vec![0.0, 0.0, 1.0, 0.0, 2.0]).is_even());
    }

    #[test]
    fn commutator_of_d_and_x() {
        let x = DiffOp::mul(MultiPoly::var(1, 0));
        let d = DiffOp::d(1, 0);
        let comm = &d.compose(&x) - &x.compose(&d);
        assert_eq!(comm, DiffOp::identity(1));
    }

    #[test]
    fn conjugation_matches_direct_application() {
        // e^{w} d^2 e^{-w} applied to f, with w = x^2/2 and f = x^3
        let w_grad = vec![MultiPoly::var(1, 0)];
        let op = DiffOp::d(1, 0).compose(&DiffOp::d(1, 0)).conjugate(&w_grad);
        let f = Poly1::monomial(1.0, 3).lift(1, 0);
        // (d - x)^2 x^3 = 6x - 3x^2*x - x*(3x^2) + x^2*x^3 - x^3 ... expand directly:
        // (d - x)(3x^2 - x^4) = 6x - 4x^3 - 3x^3 + x^5
        let expected = Poly1::new(vec![0.0, 6.0, 0.0, -7.0, 0.0, 1.0]).lift(1, 0);
        assert_eq!(op.apply(&f), expected);
    }
}
