//! Weighted Hermite bases and spectral fields.
//!
//! Basis functions are `phi_alpha(x) = prod_k exp(-W_k(x_k)/2) H_{alpha_k}(x_k / sigma_k)`
//! with a separable polynomial exponent `W`. They are orthonormal in
//! `L^2(exp(W) g_sigma)` where `g_sigma` is the centred Gaussian density with
//! standard deviations `sigma`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::hermite::{gauss_hermite_rule, hermite_values_into, IndexSet};
use crate::poly::Poly1;

/// `x^2 / (2 sigma^2)`
pub fn gaussian_exponent(sigma: f64) -> Poly1 {
    Poly1::monomial(0.5 / (sigma * sigma), 2)
}

/// Uniform trapezoid grid on one axis.
#[derive(Clone, Debug)]
pub(crate) struct LineGrid {
    pub x: Vec<f64>,
    pub h: f64,
}

/// Truncated weighted Hermite basis.
#[derive(Clone, Debug)]
pub struct HermiteBasis {
    index_set: IndexSet,
    sigma: Vec<f64>,
    weight: Vec<Poly1>,
    quad_degree: Vec<usize>,
    mass_fn: Vec<Vec<f64>>,
    moment_fn: Vec<Vec<f64>>,
}

impl HermiteBasis {
    /// `weight[k]` is the full exponent `W_k`; it must have even degree and a
    /// positive leading coefficient so that the basis functions decay.
    pub fn new(index_set: IndexSet, sigma: Vec<f64>, weight: Vec<Poly1>) -> Result<Self> {
        let dims = index_set.dims();
        if sigma.len() != dims || weight.len() != dims {
            return Err(Error::DimensionMismatch(format!(
                "index set has {dims} dims, got {} sigmas and {} weights",
                sigma.len(),
                weight.len()
            )));
        }
        for (k, (&s, w)) in sigma.iter().zip(&weight).enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(invalid(format!("sigma[{k}] must be positive, got {s}")));
            }
            let deg = w.degree();
            if deg == 0 || deg % 2 == 1 || w.coeff(deg) <= 0.0 {
                return Err(invalid(format!(
                    "weight exponent in dim {k} must grow at infinity, got {:?}",
                    w.coeffs()
                )));
            }
        }
        let quad_degree = (0..dims)
            .map(|k| index_set.max_degree(k) + weight[k].degree() + 2)
            .collect();
        let mut mass_fn = Vec::with_capacity(dims);
        let mut moment_fn = Vec::with_capacity(dims);
        for k in 0..dims {
            let (q0, q1) = basis_moments(index_set.max_degree(k), sigma[k], &weight[k]);
            mass_fn.push(q0);
            moment_fn.push(q1);
        }
        Ok(HermiteBasis {
            index_set,
            sigma,
            weight,
            quad_degree,
            mass_fn,
            moment_fn,
        })
    }

    /// Hermite functions plus an extra factor: `W_k = U_k + x^2 / (2 sigma_k^2)`.
    pub fn with_extra_weight(
        index_set: IndexSet,
        sigma: Vec<f64>,
        extra: Vec<Poly1>,
    ) -> Result<Self> {
        if extra.len() != sigma.len() {
            return Err(Error::DimensionMismatch(
                "one extra weight per dimension".into(),
            ));
        }
        let weight = extra
            .iter()
            .zip(&sigma)
            .map(|(u, &s)| u + &gaussian_exponent(s))
            .collect();
        HermiteBasis::new(index_set, sigma, weight)
    }

    /// Plain Hermite functions (`U = 0`).
    pub fn hermite_functions(index_set: IndexSet, sigma: Vec<f64>) -> Result<Self> {
        let extra = vec![Poly1::zero(); sigma.len()];
        HermiteBasis::with_extra_weight(index_set, sigma, extra)
    }

    pub fn with_quad_degree(mut self, quad_degree: Vec<usize>) -> Result<Self> {
        if quad_degree.len() != self.dims() {
            return Err(Error::DimensionMismatch(
                "one quadrature degree per dimension".into(),
            ));
        }
        self.quad_degree = quad_degree;
        Ok(self)
    }

    pub fn dims(&self) -> usize {
        self.index_set.dims()
    }

    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn weight(&self) -> &[Poly1] {
        &self.weight
    }

    pub fn quad_degree(&self) -> &[usize] {
        &self.quad_degree
    }

    /// `integral phi_alpha dx` for each basis function.
    pub fn mass_functional(&self) -> Vec<f64> {
        self.separable_functional(None)
    }

    /// `integral x_dim phi_alpha dx` for each basis function.
    pub fn moment_functional(&self, dim: usize) -> Vec<f64> {
        self.separable_functional(Some(dim))
    }

    fn separable_functional(&self, moment_dim: Option<usize>) -> Vec<f64> {
        self.index_set
            .indices()
            .iter()
            .map(|alpha| {
                alpha
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| {
                        if moment_dim == Some(k) {
                            self.moment_fn[k][a]
                        } else {
                            self.mass_fn[k][a]
                        }
                    })
                    .product()
            })
            .collect()
    }

    /// 1D basis on dimension `dim` holding all degrees up to its maximum.
    pub fn axis_basis(&self, dim: usize) -> Result<HermiteBasis> {
        let set = IndexSet::rectangle(&[self.index_set.max_degree(dim)])?;
        HermiteBasis::new(set, vec![self.sigma[dim]], vec![self.weight[dim].clone()])?
            .with_quad_degree(vec![self.quad_degree[dim]])
    }

    /// Values `phi_i(x)` for `i = 0..=max_degree(dim)` along one axis.
    pub fn axis_values(&self, dim: usize, x: f64, out: &mut [f64]) {
        let h0 = (-0.5 * self.weight[dim].eval(x)).exp();
        hermite_values_into(x / self.sigma[dim], h0, out);
    }
}

/// Coefficient vector on a shared basis.
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub basis: Arc<HermiteBasis>,
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(basis: Arc<HermiteBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} functions, got {} coefficients",
                basis.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { basis, coeffs })
    }

    pub fn zeros(basis: Arc<HermiteBasis>) -> Self {
        let n = basis.len();
        SpectralField {
            basis,
            coeffs: vec![0.0; n],
        }
    }

    /// Unit coefficient on basis function `k`.
    pub fn unit(basis: Arc<HermiteBasis>, k: usize) -> Self {
        let mut f = SpectralField::zeros(basis);
        f.coeffs[k] = 1.0;
        f
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let b = &self.basis;
        let tables: Vec<Vec<f64>> = (0..b.dims())
            .map(|k| {
                let mut t = vec![0.0; b.index_set.max_degree(k) + 1];
                b.axis_values(k, x[k], &mut t);
                t
            })
            .collect();
        b.index_set
            .indices()
            .iter()
            .zip(&self.coeffs)
            .map(|(alpha, &c)| {
                c * alpha
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| tables[k][a])
                    .product::<f64>()
            })
            .sum()
    }

    /// Values on the tensor grid spanned by `axes`, last axis fastest.
    pub fn evaluate_grid(&self, axes: &[Vec<f64>]) -> Result<Vec<f64>> {
        let b = &self.basis;
        if axes.len() != b.dims() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} dims, got {} axes",
                b.dims(),
                axes.len()
            )));
        }
        let tables: Vec<Vec<Vec<f64>>> = axes
            .iter()
            .enumerate()
            .map(|(k, ax)| {
                ax.iter()
                    .map(|&x| {
                        let mut t = vec![0.0; b.index_set.max_degree(k) + 1];
                        b.axis_values(k, x, &mut t);
                        t
                    })
                    .collect()
            })
            .collect();
        let total: usize = axes.iter().map(|a| a.len()).product();
        let mut out = vec![0.0; total];
        let mut pos = vec![0usize; axes.len()];
        for v in out.iter_mut() {
            *v = b
                .index_set
                .indices()
                .iter()
                .zip(&self.coeffs)
                .map(|(alpha, &c)| {
                    c * alpha
                        .iter()
                        .enumerate()
                        .map(|(k, &a)| tables[k][pos[k]][a])
                        .product::<f64>()
                })
                .sum();
            for k in (0..axes.len()).rev() {
                pos[k] += 1;
                if pos[k] < axes[k].len() {
                    break;
                }
                pos[k] = 0;
            }
        }
        Ok(out)
    }

    pub fn mass(&self) -> f64 {
        dot(&self.basis.mass_functional(), &self.coeffs)
    }

    /// `integral x_dim rho / integral rho`.
    pub fn moment(&self, dim: usize) -> Result<f64> {
        let mass = self.mass();
        if !(mass.abs() >= 1e-12) {
            return Err(Error::DegenerateMass { mass });
        }
        Ok(dot(&self.basis.moment_functional(dim), &self.coeffs) / mass)
    }

    /// First moment in the first coordinate.
    pub fn first_moment(&self) -> Result<f64> {
        self.moment(0)
    }

    /// Marginal on dimension `dim`, as a field on the axis basis.
    pub fn marginal(&self, dim: usize) -> Result<SpectralField> {
        let axis = Arc::new(self.basis.axis_basis(dim)?);
        let mut coeffs = vec![0.0; axis.len()];
        let b = &self.basis;
        for (alpha, &c) in b.index_set.indices().iter().zip(&self.coeffs) {
            let w: f64 = alpha
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != dim)
                .map(|(k, &a)| b.mass_fn[k][a])
                .product();
            coeffs[alpha[dim]] += c * w;
        }
        SpectralField::new(axis, coeffs)
    }

    /// Rescale so that the mass equals one.
    pub fn normalize(&mut self) -> Result<()> {
        let mass = self.mass();
        if !(mass.abs() >= 1e-12) || !mass.is_finite() {
            return Err(Error::DegenerateMass { mass });
        }
        for c in &mut self.coeffs {
            *c /= mass;
        }
        Ok(())
    }

    /// Coefficient norm, which equals the `L^2(exp(W) g_sigma)` norm of the field.
    pub fn norm(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs).sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gauss-Hermite transform `c_alpha = <f, phi_alpha>` in `L^2(exp(W) g_sigma)`,
/// using `quad_degree + 1` nodes per dimension.
pub fn hermite_transform(
    f: &dyn Fn(&[f64]) -> f64,
    basis: &Arc<HermiteBasis>,
) -> Result<SpectralField> {
    let dims = basis.dims();
    let rules = (0..dims)
        .map(|k| gauss_hermite_rule(basis.quad_degree[k], basis.sigma[k]))
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<usize> = rules.iter().map(|r| r.nodes.len()).collect();
    // per-axis tables of w_j * exp(W(x_j)/2) H_i(x_j / sigma), split so that
    // the product with f stays finite
    let tables: Vec<Vec<(f64, f64, Vec<f64>)>> = rules
        .iter()
        .enumerate()
        .map(|(k, r)| {
            r.nodes
                .iter()
                .zip(&r.weights)
                .map(|(&x, &w)| {
                    let mut h = vec![0.0; basis.index_set.max_degree(k) + 1];
                    hermite_values_into(x / basis.sigma[k], 1.0, &mut h);
                    (x, w * (0.5 * basis.weight[k].eval(x)).exp(), h)
                })
                .collect()
        })
        .collect();
    let mut coeffs = vec![0.0; basis.len()];
    let mut pos = vec![0usize; dims];
    let mut point = vec![0.0; dims];
    let total: usize = sizes.iter().product();
    for _ in 0..total {
        let mut scale = 1.0;
        for k in 0..dims {
            point[k] = tables[k][pos[k]].0;
            scale *= tables[k][pos[k]].1;
        }
        let fv = f(&point);
        if fv != 0.0 {
            let v = fv * scale;
            for (alpha, c) in basis.index_set.indices().iter().zip(coeffs.iter_mut()) {
                let mut p = v;
                for (k, &a) in alpha.iter().enumerate() {
                    p *= tables[k][pos[k]].2[a];
                }
                *c += p;
            }
        }
        for k in (0..dims).rev() {
            pos[k] += 1;
            if pos[k] < sizes[k] {
                break;
            }
            pos[k] = 0;
        }
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { t: 0.0 });
    }
    SpectralField::new(basis.clone(), coeffs)
}

/// Projection of a separable function `prod_k f_k(x_k)`, with each 1D inner
/// product computed on a fine trapezoid grid. Suited to smooth data that is
/// not a low-degree polynomial times the weight.
pub fn project_separable(
    factors: &[&dyn Fn(f64) -> f64],
    basis: &Arc<HermiteBasis>,
) -> Result<SpectralField> {
    if factors.len() != basis.dims() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} dims, got {} factors",
            basis.dims(),
            factors.len()
        )));
    }
    let per_axis: Vec<Vec<f64>> = factors
        .iter()
        .enumerate()
        .map(|(k, f)| {
            project_1d(
                *f,
                basis.index_set.max_degree(k),
                basis.sigma[k],
                &basis.weight[k],
            )
        })
        .collect::<Result<_>>()?;
    let coeffs = basis
        .index_set
        .indices()
        .iter()
        .map(|alpha| {
            alpha
                .iter()
                .enumerate()
                .map(|(k, &a)| per_axis[k][a])
                .product()
        })
        .collect();
    SpectralField::new(basis.clone(), coeffs)
}

fn project_1d(f: &dyn Fn(f64) -> f64, n: usize, sigma: f64, weight: &Poly1) -> Result<Vec<f64>> {
    let vq = gaussian_exponent(sigma);
    let norm = (2.0 * PI).sqrt() * sigma;
    let log_env = |x: f64| {
        let fx = f(x).abs();
        if fx == 0.0 {
            return f64::NEG_INFINITY;
        }
        fx.ln() + 0.5 * weight.eval(x) - vq.eval(x) + log_hermite_bound(n, x / sigma)
    };
    let h = step_size(n, sigma, weight);
    let grid = fine_grid(&log_env, sigma, h);
    let mut out = vec![0.0; n + 1];
    let mut buf = vec![0.0; n + 1];
    for &x in &grid.x {
        let fx = f(x);
        if fx == 0.0 {
            continue;
        }
        let h0 = fx * (0.5 * weight.eval(x) - vq.eval(x)).exp() / norm;
        hermite_values_into(x / sigma, h0, &mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += grid.h * b;
        }
    }
    if out.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { t: 0.0 });
    }
    Ok(out)
}

fn basis_moments(n: usize, sigma: f64, weight: &Poly1) -> (Vec<f64>, Vec<f64>) {
    let log_env =
        |x: f64| -0.5 * weight.eval(x) + log_hermite_bound(n, x / sigma) + (1.0 + x.abs()).ln();
    let h = step_size(n, sigma, weight);
    let grid = fine_grid(&log_env, sigma, h);
    let mut q0 = vec![0.0; n + 1];
    let mut q1 = vec![0.0; n + 1];
    let mut buf = vec![0.0; n + 1];
    for &x in &grid.x {
        hermite_values_into(x / sigma, (-0.5 * weight.eval(x)).exp(), &mut buf);
        for i in 0..=n {
            q0[i] += grid.h * buf[i];
            q1[i] += grid.h * x * buf[i];
        }
    }
    (q0, q1)
}

/// Crude bound `ln max_i |H_i(y)|`, enough to size integration ranges.
fn log_hermite_bound(n: usize, y: f64) -> f64 {
    let mut buf = vec![0.0; n + 1];
    hermite_values_into(y, 1.0, &mut buf);
    buf.iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300)
        .ln()
}

fn step_size(n: usize, sigma: f64, weight: &Poly1) -> f64 {
    let h_herm = sigma / (8.0 * (2.0 * n as f64 + 2.0).sqrt());
    // resolve the weight where it is still non-negligible
    let w2 = weight.derivative().derivative();
    let mut curv: f64 = 0.0;
    let mut x: f64 = 0.0;
    while weight.eval(x) - weight.eval(0.0) < 80.0 && x < 1e3 * sigma {
        curv = curv.max(w2.eval(x).abs()).max(w2.eval(-x).abs());
        x += 0.05 * sigma;
    }
    let h_w = if curv > 0.0 {
        0.1 / curv.sqrt()
    } else {
        h_herm
    };
    h_herm.min(h_w)
}

/// Uniform grid covering the region where `exp(log_env)` is within 1e-20 of
/// its maximum.
pub(crate) fn fine_grid(log_env: &dyn Fn(f64) -> f64, scale: f64, h: f64) -> LineGrid {
    let coarse = 0.25 * scale;
    let cutoff = 46.0;
    let mut samples: Vec<(f64, f64)> = vec![(0.0, log_env(0.0))];
    for dir in [-1.0, 1.0] {
        let mut best = log_env(0.0);
        let mut x = 0.0;
        loop {
            x += dir * coarse;
            let v = log_env(x);
            samples.push((x, v));
            best = best.max(v);
            if (v < best - cutoff - 4.0) || x.abs() > 1e3 * scale {
                break;
            }
        }
    }
    let peak = samples
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let live: Vec<f64> = samples
        .iter()
        .filter(|s| s.1 >= peak - cutoff)
        .map(|s| s.0)
        .collect();
    let lo = live.iter().copied().fold(f64::INFINITY, f64::min) - 2.0 * coarse;
    let hi = live.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0 * coarse;
    let n = ((hi - lo) / h).ceil().max(2.0) as usize;
    let step = (hi - lo) / n as f64;
    LineGrid {
        x: (0..=n).map(|i| lo + i as f64 * step).collect(),
        h: step,
    }
}
