//! Orthonormal probabilists' Hermite polynomials, Gauss-Hermite quadrature and
//! multi-index sets.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Values `H_0(y) ..= H_n(y)` of the orthonormal Hermite polynomials
/// (unit norm under the standard Gaussian).
pub fn hermite_values(n: usize, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    hermite_values_into(y, 1.0, &mut out);
    out
}

/// Fill `out[k] = h0 * H_k(y)`; starting from a prefactor keeps products with
/// small weights representable.
pub fn hermite_values_into(y: f64, h0: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = h0;
    if out.len() > 1 {
        out[1] = y * h0;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (y * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
    }
}

/// `H_n(x / sigma)`.
pub fn eval_hermite(n: usize, x: f64, sigma: f64) -> f64 {
    hermite_values(n, x / sigma)[n]
}

/// Gauss-Hermite rule for the Gaussian `N(0, sigma^2)`; weights sum to one.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Rule with `d_hat + 1` nodes, exact for polynomials of degree `2 d_hat + 1`.
pub fn gauss_hermite_rule(d_hat: usize, sigma: f64) -> Result<GaussRule> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let n = d_hat + 1;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64).sqrt();
        jac[(k, k - 1)] = off;
        jac[(k - 1, k)] = off;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut buf = vec![0.0; n + 1];
    let mut weights = Vec::with_capacity(n);
    for (i, y) in nodes.iter_mut().enumerate() {
        // Newton on H_n, with H_n' = sqrt(n) H_{n-1}
        let mut converged = false;
        for _ in 0..60 {
            hermite_values_into(*y, 1.0, &mut buf);
            let dp = (n as f64).sqrt() * buf[n - 1];
            if dp == 0.0 {
                break;
            }
            let step = buf[n] / dp;
            *y -= step;
            if step.abs() <= 4.0 * f64::EPSILON * (1.0 + y.abs()) {
                converged = true;
                break;
            }
        }
        if !converged || !y.is_finite() {
            return Err(Error::QuadratureNonConvergence { index: i });
        }
        hermite_values_into(*y, 1.0, &mut buf);
        let s: f64 = buf[..n].iter().map(|h| h * h).sum();
        weights.push(1.0 / s);
    }
    // symmetrize to remove eigen-solver asymmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let y = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -y;
        nodes[j] = y;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(GaussRule {
        nodes: nodes.iter().map(|y| y * sigma).collect(),
        weights,
    })
}

/// Shape of a multi-index set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IndexShape {
    /// `|alpha| <= d`
    Triangle,
    /// `max alpha_k <= d`
    Square,
    /// `alpha_k <= d_k`
    Rectangle,
}

/// Finite set of multi-indices in graded order.
///
/// Within a total degree, indices are ordered by decreasing first coordinate,
/// then decreasing second, and so on.
#[derive(Clone, Debug)]
pub struct IndexSet {
    shape: IndexShape,
    bounds: Vec<usize>,
    indices: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl IndexSet {
    /// `bounds` holds one entry per dimension; for triangle and square sets all
    /// entries must be equal.
    pub fn new(shape: IndexShape, bounds: &[usize]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(invalid("index set needs at least one dimension"));
        }
        if shape != IndexShape::Rectangle && bounds.iter().any(|&b| b != bounds[0]) {
            return Err(invalid(format!(
                "{shape:?} index set needs a single degree, got {bounds:?}"
            )));
        }
        let dims = bounds.len();
        let d = bounds[0];
        let mut indices = Vec::new();
        let mut cur = vec![0usize; dims];
        loop {
            let keep = match shape {
                IndexShape::Triangle => cur.iter().sum::<usize>() <= d,
                _ => true,
            };
            if keep {
                indices.push(cur.clone());
            }
            // odometer over the bounding box
            let mut k = 0;
            loop {
                if k == dims {
                    break;
                }
                if cur[k] < bounds[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = 0;
                k += 1;
            }
            if k == dims {
                break;
            }
        }
        indices.sort_by(|a, b| {
            let sa: usize = a.iter().sum();
            let sb: usize = b.iter().sum();
            sa.cmp(&sb).then_with(|| b.cmp(a))
        });
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(IndexSet {
            shape,
            bounds: bounds.to_vec(),
            indices,
            lookup,
        })
    }

    pub fn triangle(dims: usize, d: usize) -> Result<Self> {
        IndexSet::new(IndexShape::Triangle, &vec![d; dims])
    }

    pub fn square(dims: usize, d: usize) -> Result<Self> {
        IndexSet::new(IndexShape::Square, &vec![d; dims])
    }

    pub fn rectangle(bounds: &[usize]) -> Result<Self> {
        IndexSet::new(IndexShape::Rectangle, bounds)
    }

    pub fn shape(&self) -> IndexShape {
        self.shape
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn position(&self, alpha: &[usize]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// Largest degree appearing in dimension `k`.
    pub fn max_degree(&self, k: usize) -> usize {
        self.bounds[k]
    }

    /// Largest total degree.
    pub fn total_degree(&self) -> usize {
        match self.shape {
            IndexShape::Triangle => self.bounds[0],
            _ => self.bounds.iter().sum(),
        }
    }

    /// Orderings worth trying when minimising matrix bandwidth: the graded
    /// order plus lexicographic orders with each dimension innermost.
    pub fn candidate_orderings(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut out = vec![(0..n).collect::<Vec<_>>()];
        for inner in 0..self.dims() {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.sort_by(|&a, &b| {
                let (ia, ib) = (&self.indices[a], &self.indices[b]);
                let key = |v: &Vec<usize>| {
                    let mut k: Vec<usize> =
                        (0..v.len()).filter(|&j| j != inner).map(|j| v[j]).collect();
                    k.push(v[inner]);
                    k
                };
                key(ia).cmp(&key(ib))
            });
            out.push(perm);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let r = gauss_hermite_rule(1, 1.0).unwrap();
        assert!((r.nodes[0] + 1.0).abs() < 1e-15 && (r.nodes[1] - 1.0).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn graded_order_example() {
        let s = IndexSet::triangle(2, 2).unwrap();
        let want: Vec<Vec<usize>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(s.indices(), &want[..]);
    }
}
