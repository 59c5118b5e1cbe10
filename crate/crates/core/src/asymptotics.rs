//! Small-correlation-time quantities: noise constants, the OU correction to
//! the stationary density, and the corrective drift / effective diffusion of
//! the discretised noise generator.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::assembly::{galerkin_matrix, position_matrix_1d};
use crate::basis::{dot, HermiteBasis, SpectralField};
use crate::error::{invalid, Error, Result};
use crate::hermite::IndexSet;
use crate::operators::{ColoredModel, NoiseCorrection, NoiseModel};
use crate::poly::{DiffOp, Poly1};
use crate::quad::boltzmann_integral;

/// Degree used for noise-generator solves unless stated otherwise.
pub const NOISE_DEGREE: usize = 60;
/// Scaling used for noise-generator solves unless stated otherwise.
pub const NOISE_SIGMA: f64 = 0.4;

/// Tilted bistable potential before centring: `s^4/4 - s^2/2 + s`.
pub fn tilted_bistable() -> Poly1 {
    Poly1::new(vec![0.0, 1.0, -0.5, 0.0, 0.25])
}

/// Shift `alpha` such that `V0(eta - alpha)` has mean zero under
/// `exp(-V0(eta - alpha))`, i.e. minus the mean of `exp(-V0)`.
pub fn alpha_shift(v0: &Poly1) -> f64 {
    let (z, _) = boltzmann_integral(v0, &|_| 1.0);
    let (m1, _) = boltzmann_integral(v0, &|s| s);
    -m1 / z
}

/// Shift of the non-symmetric noise potential.
pub fn compute_alpha_shift() -> f64 {
    static ALPHA: OnceLock<f64> = OnceLock::new();
    *ALPHA.get_or_init(|| alpha_shift(&tilted_bistable()))
}

/// `V0(eta - alpha)`: the centred non-symmetric noise potential.
pub fn nonsymmetric_noise_potential() -> Result<Poly1> {
    let alpha = compute_alpha_shift();
    if !alpha.is_finite() {
        return Err(Error::NonConvergence("centring shift is not finite".into()));
    }
    Ok(tilted_bistable().shift(alpha))
}

/// Moments of the stationary noise law `exp(-V_eta) / Z`.
#[derive(Clone, Debug)]
pub struct NoiseStationary {
    pub potential: Poly1,
    pub log_z: f64,
    pub mean: f64,
    pub variance: f64,
}

impl NoiseStationary {
    pub fn new(potential: &Poly1) -> Self {
        let (z, e_min) = boltzmann_integral(potential, &|_| 1.0);
        let (m1, _) = boltzmann_integral(potential, &|s| s);
        let mean = m1 / z;
        let (m2, _) = boltzmann_integral(potential, &|s| (s - mean) * (s - mean));
        NoiseStationary {
            potential: potential.clone(),
            log_z: z.ln() - e_min,
            mean,
            variance: m2 / z,
        }
    }

    pub fn density(&self, eta: f64) -> f64 {
        (-self.potential.eval(eta) - self.log_z).exp()
    }
}

/// Spectral data of the Galerkin noise generator in the basis
/// `exp(-V_eta/2) exp(-eta^2 / (4 sigma^2)) P(d)`, where it is symmetric.
#[derive(Clone, Debug)]
pub struct NoiseSpectrum {
    pub basis: Arc<HermiteBasis>,
    /// Symmetrised generator matrix.
    pub generator: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Index of the eigenvalue closest to zero (the top one).
    pub top: usize,
    position: DMatrix<f64>,
}

/// Forward operator of the overdamped noise, `d(V_eta' .) + d^2`.
fn noise_diffop(potential: &Poly1) -> DiffOp {
    let d = DiffOp::d(1, 0);
    &d.compose(&DiffOp::mul(potential.derivative().lift(1, 0))) + &d.compose(&d)
}

impl NoiseSpectrum {
    pub fn new(potential: &Poly1, d: usize, sigma: f64) -> Result<Self> {
        let set = IndexSet::rectangle(&[d])?;
        let basis = HermiteBasis::with_extra_weight(set, vec![sigma], vec![potential.clone()])?;
        Self::on_basis(potential, Arc::new(basis))
    }

    /// Use an existing 1D basis; its exponent must be `V_eta + eta^2/(2 sigma^2)`.
    pub fn on_basis(potential: &Poly1, basis: Arc<HermiteBasis>) -> Result<Self> {
        if basis.dims() != 1 {
            return Err(invalid("noise generator basis must be one-dimensional"));
        }
        let m = galerkin_matrix(&noise_diffop(potential), &basis)?.to_dense();
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-8 * m.amax().max(1.0) {
            return Err(Error::Unsupported(format!(
                "noise generator is not symmetric in this basis (asymmetry {asym:.2e}); \
                 the exponent must be the noise potential plus the Gaussian factor"
            )));
        }
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let top = eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let mut eigenvectors = eig.eigenvectors;
        // sign: positive projection of exp(V_eta/2) phi_0 on the Gaussian factor
        if eigenvectors[(0, top)] < 0.0 {
            let mut col = eigenvectors.column_mut(top);
            col *= -1.0;
        }
        let n = basis.index_set().max_degree(0);
        let position = position_matrix_1d(n, basis.sigma()[0]);
        Ok(NoiseSpectrum {
            basis,
            generator: sym,
            eigenvalues,
            eigenvectors,
            top,
            position,
        })
    }

    /// `lambda_{0,d}`, the eigenvalue closest to zero (non-positive).
    pub fn lambda0(&self) -> f64 {
        self.eigenvalues[self.top]
    }

    /// Coefficients of the normalised stationary mode `phi_{0,d}`.
    pub fn phi0(&self) -> Vec<f64> {
        self.eigenvectors.column(self.top).iter().copied().collect()
    }

    /// First moment of the discrete stationary law,
    /// `integral eta phi0^2 exp(V_eta) / integral phi0^2 exp(V_eta)`.
    pub fn discrete_mean(&self) -> f64 {
        let c = self.phi0();
        let xc: Vec<f64> = (&self.position * nalgebra::DVector::from_vec(c.clone()))
            .iter()
            .copied()
            .collect();
        dot(&c, &xc) / dot(&c, &c)
    }

    /// Solve `-(L0 - lambda0) u = b` on the complement of `phi0`.
    /// The `phi0` component of `b` is discarded.
    pub fn resolvent(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let l0 = self.lambda0();
        let mut u = vec![0.0; n];
        for k in 0..n {
            if k == self.top {
                continue;
            }
            let v = self.eigenvectors.column(k);
            let proj: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            let scale = proj / (l0 - self.eigenvalues[k]);
            for (ui, vi) in u.iter_mut().zip(v.iter()) {
                *ui += scale * vi;
            }
        }
        u
    }

    /// `(eta - mean) phi0` in coefficients, with the discrete mean.
    fn centred_eta_phi0(&self) -> (Vec<f64>, Vec<f64>) {
        let c = self.phi0();
        let mu = self.discrete_mean();
        let xc = &self.position * nalgebra::DVector::from_vec(c.clone());
        let b: Vec<f64> = xc.iter().zip(&c).map(|(x, ci)| x - mu * ci).collect();
        (c, b)
    }

    /// Integrated autocorrelation of the noise, `<eta, (-L0)^{-1} eta>`.
    pub fn green_kubo(&self) -> f64 {
        let (c, b) = self.centred_eta_phi0();
        let u = self.resolvent(&b);
        dot(&b, &u) / dot(&c, &c)
    }
}

/// Solution `u = phi rho_eta` of the Poisson problem `-L0 phi = eta - E[eta]`
/// in forward (density) form; `integral eta u` is the integrated
/// autocorrelation of the noise.
pub fn solve_noise_poisson(potential: &Poly1, d: usize, sigma: f64) -> Result<SpectralField> {
    let spec = NoiseSpectrum::new(potential, d, sigma)?;
    let (c, b) = spec.centred_eta_phi0();
    let q0 = spec.basis.mass_functional();
    let mass = dot(&q0, &c);
    if !(mass.abs() > 1e-12) {
        return Err(Error::DegenerateMass { mass });
    }
    let u: Vec<f64> = spec.resolvent(&b).into_iter().map(|v| v / mass).collect();
    SpectralField::new(spec.basis.clone(), u)
}

/// `integral_0^inf K(t) dt` for an overdamped noise in `potential`.
pub fn green_kubo_integral(potential: &Poly1) -> Result<f64> {
    Ok(NoiseSpectrum::new(potential, NOISE_DEGREE, NOISE_SIGMA)?.green_kubo())
}

/// `zeta = (2 integral K)^{-1/2}`.
pub fn compute_zeta(model: ColoredModel) -> Result<f64> {
    match model {
        ColoredModel::OU | ColoredModel::H => Ok(FRAC_1_SQRT_2),
        ColoredModel::B | ColoredModel::NS => {
            let potential = model.noise()?.noise_potential().unwrap();
            let k = green_kubo_integral(&potential)?;
            if !(k > 0.0) {
                return Err(Error::NonConvergence(format!(
                    "integrated autocorrelation {k} is not positive"
                )));
            }
            Ok((2.0 * k).powf(-0.5))
        }
    }
}

/// Cached `compute_zeta`.
pub fn zeta_for(model: ColoredModel) -> Result<f64> {
    static CACHE: [OnceLock<f64>; 4] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let slot = &CACHE[model as usize];
    if let Some(z) = slot.get() {
        return Ok(*z);
    }
    let z = compute_zeta(model)?;
    Ok(*slot.get_or_init(|| z))
}

/// `mu_d = -sqrt(2/beta) zeta integral eta phi0^2 exp(V_eta)` with `phi0`
/// normalised.
pub fn corrective_drift(
    potential: &Poly1,
    d: usize,
    sigma: f64,
    beta: f64,
    zeta: f64,
) -> Result<f64> {
    let spec = NoiseSpectrum::new(potential, d, sigma)?;
    Ok(-(2.0 / beta).sqrt() * zeta * spec.discrete_mean())
}

/// Effective diffusion of the discrete small-epsilon limit,
/// `A_d = <R^{-1} b phi0, b phi0> / <phi0, phi0>` with
/// `b = mu_d + sqrt(2/beta) zeta eta` and `R = -(L0 - lambda0)` on the
/// complement of `phi0`.
pub fn effective_diffusion(
    potential: &Poly1,
    d: usize,
    sigma: f64,
    beta: f64,
    zeta: f64,
    mu_d: f64,
) -> Result<f64> {
    let spec = NoiseSpectrum::new(potential, d, sigma)?;
    let c = spec.phi0();
    let xc = &spec.position * nalgebra::DVector::from_vec(c.clone());
    let k = (2.0 / beta).sqrt() * zeta;
    let b: Vec<f64> = xc.iter().zip(&c).map(|(x, ci)| mu_d * ci + k * x).collect();
    let u = spec.resolvent(&b);
    Ok(dot(&b, &u) / dot(&c, &c))
}

/// Corrective drift and generator shift for the noise axis of a colored basis.
pub fn noise_correction(
    noise: &NoiseModel,
    beta: f64,
    zeta: f64,
    eta_basis: Arc<HermiteBasis>,
) -> Result<NoiseCorrection> {
    let potential = match noise {
        NoiseModel::NonGaussian { potential } => potential,
        _ => return Err(invalid("corrective drift applies to non-Gaussian noise")),
    };
    let spec = NoiseSpectrum::on_basis(potential, eta_basis)?;
    Ok(NoiseCorrection {
        mu: -(2.0 / beta).sqrt() * zeta * spec.discrete_mean(),
        lambda0: spec.lambda0(),
    })
}

/// Quadrature data of the first OU correction at one `(m, beta, theta)`.
#[derive(Clone, Copy, Debug)]
pub struct OuExpansion {
    /// `ln Z` with `Z = integral exp(-beta V_eff)`
    pub log_z: f64,
    /// `R_0`, white-noise first moment
    pub r0: f64,
    /// `R_2`, first moment of the correction
    pub r2: f64,
    /// `C_OU`
    pub c_ou: f64,
}

type CacheKey = (Vec<u64>, u64, u64, u64);

fn expansion_cache() -> &'static RwLock<HashMap<CacheKey, OuExpansion>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, OuExpansion>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

impl OuExpansion {
    pub fn new(potential: &Poly1, m: f64, beta: f64, theta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() || !m.is_finite() {
            return Err(invalid(format!(
                "need finite beta > 0 and m, got beta={beta}, m={m}"
            )));
        }
        let key = (
            potential.coeffs().iter().map(|c| c.to_bits()).collect(),
            m.to_bits(),
            beta.to_bits(),
            theta.to_bits(),
        );
        if let Some(e) = expansion_cache().read().unwrap().get(&key) {
            return Ok(*e);
        }
        let veff = potential + &Poly1::monomial(0.5 * theta, 2).shift(m);
        let d1 = veff.derivative();
        let d2 = d1.derivative();
        let energy = veff.scale(beta);
        let q = |x: f64| {
            let v1 = d1.eval(x);
            -0.5 * beta * v1 * v1 + d2.eval(x)
        };
        let (z, e_min) = boltzmann_integral(&energy, &|_| 1.0);
        let (ix, _) = boltzmann_integral(&energy, &|x| x);
        let (iq, _) = boltzmann_integral(&energy, &q);
        let (ixq, _) = boltzmann_integral(&energy, &|x| x * q(x));
        let vals = [z, ix, iq, ixq];
        if vals.iter().any(|v| !v.is_finite()) || !(z > 0.0) {
            return Err(Error::NonConvergence(
                "quadrature of the stationary density failed".into(),
            ));
        }
        let r0 = ix / z;
        let c_ou = -iq / z;
        let e = OuExpansion {
            log_z: z.ln() - e_min,
            r0,
            r2: ixq / z + c_ou * r0,
            c_ou,
        };
        expansion_cache().write().unwrap().insert(key, e);
        Ok(e)
    }
}

/// `rho_inf (1 + eps^2 (C_OU - beta/2 V_eff'^2 + V_eff''))` at `x`.
pub fn ou_corrected_density(
    potential: &Poly1,
    x: f64,
    m: f64,
    beta: f64,
    theta: f64,
    epsilon: f64,
) -> Result<f64> {
    let e = OuExpansion::new(potential, m, beta, theta)?;
    let veff = potential + &Poly1::monomial(0.5 * theta, 2).shift(m);
    let v1 = veff.derivative().eval(x);
    let v2 = veff.derivative().derivative().eval(x);
    let rho = (-beta * veff.eval(x) - e.log_z).exp();
    Ok(rho * (1.0 + epsilon * epsilon * (e.c_ou - 0.5 * beta * v1 * v1 + v2)))
}

/// `R_0 + eps^2 R_2` for OU noise.
pub fn approx_r(
    potential: &Poly1,
    m: f64,
    beta: f64,
    theta: f64,
    epsilon: f64,
    model: ColoredModel,
) -> Result<f64> {
    if model != ColoredModel::OU {
        return Err(Error::Unsupported(format!(
            "explicit correction is available for OU noise only, not {model}"
        )));
    }
    let e = OuExpansion::new(potential, m, beta, theta)?;
    Ok(e.r0 + epsilon * epsilon * e.r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_green_kubo_is_one() {
        // exact when the basis scale matches the OU law
        let k = NoiseSpectrum::new(&Poly1::new(vec![0.0, 0.0, 0.5]), 10, 1.0).unwrap().green_kubo();
        assert!((k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_potential_needs_no_shift() {
        let b = Poly1::new(vec![0.0, 0.0, -0.5, 0.0, 0.25]);
        assert!(alpha_shift(&b).abs() < 1e-14);
    }
}
