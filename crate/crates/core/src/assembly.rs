//! Galerkin matrices of polynomial-coefficient differential operators.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::HermiteBasis;
use crate::error::{Error, Result};
use crate::poly::{DiffOp, MultiPoly, Poly1};
use crate::sparse::OperatorMatrix;

/// Matrix of `x` on span{H_0..H_d} (argument `x / sigma`), size `d + 1`.
/// Truncation drops the `H_{d+1}` component.
pub fn position_matrix_1d(d: usize, sigma: f64) -> DMatrix<f64> {
    let n = d + 1;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        if j + 1 < n {
            m[(j + 1, j)] = sigma * ((j + 1) as f64).sqrt();
        }
        if j > 0 {
            m[(j - 1, j)] = sigma * (j as f64).sqrt();
        }
    }
    m
}

/// Matrix of `d/dx` on span{H_0..H_d}; exact since the space is invariant.
pub fn derivative_matrix_1d(d: usize, sigma: f64) -> DMatrix<f64> {
    let n = d + 1;
    let mut m = DMatrix::zeros(n, n);
    for j in 1..n {
        m[(j - 1, j)] = (j as f64).sqrt() / sigma;
    }
    m
}

/// Exact Galerkin matrix of multiplication by `x^e` on span{H_0..H_d}:
/// the product is formed in degree `d + e` and then truncated.
pub fn monomial_matrix_1d(e: usize, d: usize, sigma: f64) -> DMatrix<f64> {
    let ext = position_matrix_1d(d + e, sigma);
    let n = d + 1;
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut v = nalgebra::DVector::zeros(d + e + 1);
        v[j] = 1.0;
        for _ in 0..e {
            v = &ext * &v;
        }
        for i in 0..n {
            out[(i, j)] = v[i];
        }
    }
    out
}

/// Exact Galerkin matrix of multiplication by a polynomial.
pub fn multiplication_matrix_1d(p: &Poly1, d: usize, sigma: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d + 1, d + 1);
    for (k, &c) in p.coeffs().iter().enumerate() {
        if c != 0.0 {
            out += monomial_matrix_1d(k, d, sigma) * c;
        }
    }
    out
}

/// `exp(W/2) A exp(-W/2)` for the separable basis exponent `W`.
pub fn conjugate_by_weight(op: &DiffOp, basis: &HermiteBasis) -> Result<DiffOp> {
    let dims = basis.dims();
    if op.dims() != dims {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} dims, basis has {dims}",
            op.dims()
        )));
    }
    let grad: Vec<MultiPoly> = basis
        .weight()
        .iter()
        .enumerate()
        .map(|(k, w)| w.derivative().scale(0.5).lift(dims, k))
        .collect();
    Ok(op.conjugate(&grad))
}

/// Galerkin matrix `M[a, b] = <A phi_b, phi_a>` in the basis inner product.
pub fn galerkin_matrix(op: &DiffOp, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    let conj = conjugate_by_weight(op, basis)?;
    polynomial_galerkin_matrix(&conj, basis)
}

/// Matrix of an operator acting on polynomials, `M[a, b] = <A H_b, H_a>_g`.
pub fn polynomial_galerkin_matrix(op: &DiffOp, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    let dims = basis.dims();
    if op.dims() != dims {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} dims, basis has {dims}",
            op.dims()
        )));
    }
    let set = basis.index_set();
    let bounds: Vec<usize> = (0..dims).map(|k| set.max_degree(k)).collect();

    // flattened terms: coefficient, derivative orders, exponents
    let mut terms: Vec<(f64, Vec<usize>, Vec<usize>)> = Vec::new();
    for (derivs, poly) in op.terms() {
        for (exps, c) in poly.terms() {
            terms.push((
                c,
                derivs.iter().map(|&a| a as usize).collect(),
                exps.iter().map(|&e| e as usize).collect(),
            ));
        }
    }

    // per-axis factor matrices X^e D^a
    let mut factors: Vec<HashMap<(usize, usize), DMatrix<f64>>> = vec![HashMap::new(); dims];
    for (_, a, e) in &terms {
        for k in 0..dims {
            factors[k].entry((e[k], a[k])).or_insert_with(|| {
                let x = monomial_matrix_1d(e[k], bounds[k], basis.sigma()[k]);
                let mut dm = DMatrix::identity(bounds[k] + 1, bounds[k] + 1);
                let d1 = derivative_matrix_1d(bounds[k], basis.sigma()[k]);
                for _ in 0..a[k] {
                    dm = &d1 * dm;
                }
                x * dm
            });
        }
    }

    // dense lookup over the bounding box
    let strides: Vec<usize> = {
        let mut s = vec![1usize; dims];
        for k in (0..dims.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * (bounds[k + 1] + 1);
        }
        s
    };
    let box_size = strides[0] * (bounds[0] + 1);
    let mut lookup = vec![usize::MAX; box_size];
    for (i, alpha) in set.indices().iter().enumerate() {
        let key: usize = alpha.iter().zip(&strides).map(|(a, s)| a * s).sum();
        lookup[key] = i;
    }

    let n = set.len();
    let columns: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let beta = &set.indices()[j];
            let mut acc: HashMap<usize, f64> = HashMap::new();
            let mut lo = vec![0usize; dims];
            let mut hi = vec![0usize; dims];
            let mut cur = vec![0usize; dims];
            'term: for (c, a, e) in &terms {
                for k in 0..dims {
                    if beta[k] < a[k] {
                        continue 'term;
                    }
                    let centre = beta[k] - a[k];
                    lo[k] = centre.saturating_sub(e[k]);
                    hi[k] = (centre + e[k]).min(bounds[k]);
                }
                let mats: Vec<&DMatrix<f64>> =
                    (0..dims).map(|k| &factors[k][&(e[k], a[k])]).collect();
                cur.copy_from_slice(&lo);
                let mut done = false;
                while !done {
                    let mut v = *c;
                    for k in 0..dims {
                        v *= mats[k][(cur[k], beta[k])];
                        if v == 0.0 {
                            break;
                        }
                    }
                    if v != 0.0 {
                        let key: usize = cur.iter().zip(&strides).map(|(a, s)| a * s).sum();
                        let row = lookup[key];
                        if row != usize::MAX {
                            *acc.entry(row).or_insert(0.0) += v;
                        }
                    }
                    let mut k = dims;
                    loop {
                        if k == 0 {
                            done = true;
                            break;
                        }
                        k -= 1;
                        if cur[k] < hi[k] {
                            cur[k] += 1;
                            break;
                        }
                        cur[k] = lo[k];
                    }
                }
            }
            let mut col: Vec<(usize, usize, f64)> =
                acc.into_iter().map(|(r, v)| (r, j, v)).collect();
            col.sort_by_key(|t| t.0);
            col
        })
        .collect();
    let trip: Vec<(usize, usize, f64)> = columns.into_iter().flatten().collect();
    let m = OperatorMatrix::from_triplets(n, trip);
    if !m.is_finite() {
        return Err(Error::NonFinite { t: 0.0 });
    }
    Ok(m)
}
