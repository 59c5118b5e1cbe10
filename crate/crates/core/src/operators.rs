//! Problem specifications and their Fokker-Planck operators.

use std::fmt;
use std::str::FromStr;

use crate::assembly::galerkin_matrix;
use crate::basis::HermiteBasis;
use crate::error::{invalid, Error, Result};
use crate::poly::{DiffOp, MultiPoly, Poly1};
use crate::sparse::OperatorMatrix;

/// Bistable potential `x^4/4 - x^2/2`.
pub fn bistable_potential() -> Poly1 {
    Poly1::new(vec![0.0, 0.0, -0.5, 0.0, 0.25])
}

/// Quadratic potential `x^2/2`.
pub fn quadratic_potential() -> Poly1 {
    Poly1::new(vec![0.0, 0.0, 0.5])
}

/// Noise driving the particle.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    White,
    /// `d eta = -eta / eps^2 dt + sqrt(2) / eps dW`
    OrnsteinUhlenbeck,
    /// Second-order (harmonic) Gaussian noise with unit damping.
    Harmonic,
    /// `d eta = -V_eta'(eta) / eps^2 dt + sqrt(2) / eps dW`
    NonGaussian {
        potential: Poly1,
    },
}

impl NoiseModel {
    pub fn is_white(&self) -> bool {
        matches!(self, NoiseModel::White)
    }

    /// Number of noise coordinates.
    pub fn noise_dims(&self) -> usize {
        match self {
            NoiseModel::White => 0,
            NoiseModel::Harmonic => 2,
            _ => 1,
        }
    }

    /// Confining potential of the first noise coordinate.
    pub fn noise_potential(&self) -> Option<Poly1> {
        match self {
            NoiseModel::White => None,
            NoiseModel::OrnsteinUhlenbeck | NoiseModel::Harmonic => Some(quadratic_potential()),
            NoiseModel::NonGaussian { potential } => Some(potential.clone()),
        }
    }
}

/// Named noise models used across the library and CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColoredModel {
    /// Ornstein-Uhlenbeck
    OU,
    /// harmonic
    H,
    /// symmetric bistable non-Gaussian
    B,
    /// non-symmetric, shifted to mean zero
    NS,
}

impl ColoredModel {
    pub const ALL: [ColoredModel; 4] = [
        ColoredModel::OU,
        ColoredModel::H,
        ColoredModel::B,
        ColoredModel::NS,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ColoredModel::OU => "OU",
            ColoredModel::H => "H",
            ColoredModel::B => "B",
            ColoredModel::NS => "NS",
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, ColoredModel::OU | ColoredModel::H)
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        Ok(match self {
            ColoredModel::OU => NoiseModel::OrnsteinUhlenbeck,
            ColoredModel::H => NoiseModel::Harmonic,
            ColoredModel::B => NoiseModel::NonGaussian {
                potential: bistable_potential(),
            },
            ColoredModel::NS => NoiseModel::NonGaussian {
                potential: crate::asymptotics::nonsymmetric_noise_potential()?,
            },
        })
    }
}

impl fmt::Display for ColoredModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ColoredModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OU" => Ok(ColoredModel::OU),
            "H" | "HARMONIC" => Ok(ColoredModel::H),
            "B" | "BISTABLE" => Ok(ColoredModel::B),
            "NS" | "NONSYMMETRIC" => Ok(ColoredModel::NS),
            other => Err(invalid(format!(
                "unknown noise model '{other}' (expected OU, H, B or NS)"
            ))),
        }
    }
}

/// Corrective drift and generator shift for non-symmetric noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseCorrection {
    /// `mu_d`: enters as `-(mu_d / eps) d_x`
    pub mu: f64,
    /// `lambda_{0,d} <= 0`: the generator is shifted by `-lambda_{0,d}`
    pub lambda0: f64,
}

/// Physical parameters of one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub potential: Poly1,
    pub theta: f64,
    pub beta: f64,
    /// Correlation time; `None` for white noise.
    pub epsilon: Option<f64>,
    pub noise: NoiseModel,
    /// Noise scaling so that `zeta^2 * 2 * integral K = 1`.
    pub zeta: f64,
    /// Add the corrective drift and generator shift computed from the noise
    /// axis of the basis (non-Gaussian noise only).
    pub corrective_drift: bool,
}

impl ProblemSpec {
    pub fn white(potential: Poly1, theta: f64, beta: f64) -> Result<Self> {
        let s = ProblemSpec {
            potential,
            theta,
            beta,
            epsilon: None,
            noise: NoiseModel::White,
            zeta: 1.0,
            corrective_drift: false,
        };
        s.validate()?;
        Ok(s)
    }

    /// Colored-noise problem for a named model, with the noise scaling
    /// computed for that model and the corrective drift for non-symmetric noise.
    pub fn colored(
        model: ColoredModel,
        potential: Poly1,
        theta: f64,
        beta: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let noise = model.noise()?;
        let zeta = crate::asymptotics::zeta_for(model)?;
        let s = ProblemSpec {
            potential,
            theta,
            beta,
            epsilon: Some(epsilon),
            noise,
            zeta,
            corrective_drift: model == ColoredModel::NS,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(invalid(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !(self.theta >= 0.0) || !self.theta.is_finite() {
            return Err(invalid(format!(
                "theta must be non-negative, got {}",
                self.theta
            )));
        }
        let deg = self.potential.degree();
        if deg < 2 || deg % 2 == 1 || self.potential.coeff(deg) <= 0.0 {
            return Err(invalid(
                "potential must be a confining polynomial of even degree",
            ));
        }
        match (&self.noise, self.epsilon) {
            (NoiseModel::White, Some(_)) => Err(invalid("white noise takes no correlation time")),
            (NoiseModel::White, None) => Ok(()),
            (_, None) => Err(invalid("colored noise needs a correlation time epsilon")),
            (_, Some(e)) if !(e > 0.0) || !e.is_finite() => {
                Err(invalid(format!("epsilon must be positive, got {e}")))
            }
            (NoiseModel::NonGaussian { potential }, _) => {
                let d = potential.degree();
                if d < 2 || d % 2 == 1 || potential.coeff(d) <= 0.0 {
                    Err(invalid("noise potential must be confining"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Total number of coordinates (particle plus noise).
    pub fn dims(&self) -> usize {
        1 + self.noise.noise_dims()
    }

    /// Effective potential `V + theta (x - m)^2 / 2`.
    pub fn effective_potential(&self, m: f64) -> Poly1 {
        &self.potential + &Poly1::monomial(0.5 * self.theta, 2).shift(m)
    }

    /// Amplitude of the `eta d_x` coupling, `zeta sqrt(2 / beta)`.
    pub fn coupling(&self) -> f64 {
        self.zeta * (2.0 / self.beta).sqrt()
    }
}

/// Forward operator `d_x((V' + theta (x - m)) rho) + beta^{-1} d_x^2 rho`.
pub fn white_fp_diffop(spec: &ProblemSpec, m: f64) -> DiffOp {
    let drift = spec.effective_potential(m).derivative().lift(1, 0);
    let d = DiffOp::d(1, 0);
    &d.compose(&DiffOp::mul(drift)) + &d.compose(&d).scale(1.0 / spec.beta)
}

/// Symmetric operator `beta^{-1} d^2 + V''/2 - beta V'^2 / 4` for the potential `v`.
pub fn schrodinger_diffop(v: &Poly1, beta: f64) -> DiffOp {
    let v1 = v.derivative();
    let pot = &v1.derivative().scale(0.5) - &(&v1 * &v1).scale(0.25 * beta);
    let d = DiffOp::d(1, 0);
    &d.compose(&d).scale(1.0 / beta) + &DiffOp::mul(pot.lift(1, 0))
}

/// Pieces of the colored-noise operator,
/// `L = slow + coupling / eps + noise / eps^2`.
#[derive(Clone, Debug)]
pub struct ColoredParts<T> {
    pub slow: T,
    pub coupling: T,
    pub noise: T,
}

impl ColoredParts<OperatorMatrix> {
    pub fn combine(&self, epsilon: f64) -> OperatorMatrix {
        self.slow.axpby(1.0, &self.coupling, 1.0 / epsilon).axpby(
            1.0,
            &self.noise,
            1.0 / (epsilon * epsilon),
        )
    }
}

/// Differential operators of the colored-noise problem at frozen mean `m`.
pub fn colored_diffops(
    spec: &ProblemSpec,
    m: f64,
    correction: Option<NoiseCorrection>,
) -> Result<ColoredParts<DiffOp>> {
    spec.validate()?;
    if spec.noise.is_white() {
        return Err(invalid("colored operator needs a colored noise model"));
    }
    let dims = spec.dims();
    let dx = DiffOp::d(dims, 0);
    let deta = DiffOp::d(dims, 1);
    let eta = MultiPoly::var(dims, 1);
    let slow = dx.compose(&DiffOp::mul(
        spec.effective_potential(m).derivative().lift(dims, 0),
    ));
    let mut coupling = dx
        .compose(&DiffOp::mul(eta.clone()))
        .scale(-spec.coupling());
    let noise = match &spec.noise {
        NoiseModel::OrnsteinUhlenbeck => &deta.compose(&DiffOp::mul(eta)) + &deta.compose(&deta),
        NoiseModel::NonGaussian { potential } => {
            &deta.compose(&DiffOp::mul(potential.derivative().lift(dims, 1))) + &deta.compose(&deta)
        }
        NoiseModel::Harmonic => {
            let dl = DiffOp::d(dims, 2);
            let lam = MultiPoly::var(dims, 2);
            let damp = &dl.compose(&DiffOp::mul(lam.clone())) + &dl.compose(&dl);
            let rot = &DiffOp::mul(eta).compose(&dl) - &DiffOp::mul(lam).compose(&deta);
            &damp + &rot
        }
        NoiseModel::White => unreachable!(),
    };
    let noise = match correction {
        Some(c) => {
            coupling = &coupling - &dx.scale(c.mu);
            &noise - &DiffOp::identity(dims).scale(c.lambda0)
        }
        None => noise,
    };
    Ok(ColoredParts {
        slow,
        coupling,
        noise,
    })
}

/// Galerkin matrices of the colored-noise operator pieces.
pub fn colored_operator_parts(
    spec: &ProblemSpec,
    m: f64,
    basis: &HermiteBasis,
) -> Result<ColoredParts<OperatorMatrix>> {
    if basis.dims() != spec.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} noise needs a {}-dimensional basis, got {}",
            spec.noise,
            spec.dims(),
            basis.dims()
        )));
    }
    let correction = if spec.corrective_drift {
        Some(crate::asymptotics::noise_correction(
            &spec.noise,
            spec.beta,
            spec.zeta,
            std::sync::Arc::new(basis.axis_basis(1)?),
        )?)
    } else {
        None
    };
    let ops = colored_diffops(spec, m, correction)?;
    Ok(ColoredParts {
        slow: galerkin_matrix(&ops.slow, basis)?,
        coupling: galerkin_matrix(&ops.coupling, basis)?,
        noise: galerkin_matrix(&ops.noise, basis)?,
    })
}

/// Galerkin matrix of the full colored-noise operator at frozen mean `m`.
pub fn colored_operator(
    spec: &ProblemSpec,
    m: f64,
    basis: &HermiteBasis,
) -> Result<OperatorMatrix> {
    let eps = spec
        .epsilon
        .ok_or_else(|| invalid("colored operator needs epsilon"))?;
    Ok(colored_operator_parts(spec, m, basis)?.combine(eps))
}

/// Galerkin matrix of the white-noise operator at frozen mean `m`.
pub fn white_operator(spec: &ProblemSpec, m: f64, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    spec.validate()?;
    if !spec.noise.is_white() || basis.dims() != 1 {
        return Err(invalid("white operator needs white noise and a 1D basis"));
    }
    galerkin_matrix(&white_fp_diffop(spec, m), basis)
}

/// Galerkin matrix of the symmetric operator for the potential of `spec`;
/// symmetric when the basis consists of Hermite functions.
pub fn schrodinger_operator(spec: &ProblemSpec, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    if basis.dims() != 1 {
        return Err(invalid("symmetric operator is one-dimensional"));
    }
    galerkin_matrix(&schrodinger_diffop(&spec.potential, spec.beta), basis)
}

/// Operator of the mean-field equation, affine in the mean:
/// `M(m) = base - m * theta * d_x`.
#[derive(Clone, Debug)]
pub struct McKeanOperator {
    pub base: OperatorMatrix,
    pub dx: OperatorMatrix,
    pub theta: f64,
}

impl McKeanOperator {
    pub fn new(spec: &ProblemSpec, basis: &HermiteBasis) -> Result<Self> {
        let base = if spec.noise.is_white() {
            white_operator(spec, 0.0, basis)?
        } else {
            colored_operator(spec, 0.0, basis)?
        };
        let dx = galerkin_matrix(&DiffOp::d(basis.dims(), 0), basis)?;
        Ok(McKeanOperator {
            base,
            dx,
            theta: spec.theta,
        })
    }

    pub fn at(&self, m: f64) -> OperatorMatrix {
        self.base.axpby(1.0, &self.dx, -m * self.theta)
    }

    /// `M(m) c` without forming the matrix.
    pub fn apply(&self, m: f64, c: &[f64], out: &mut [f64]) {
        self.base.matvec(c, out);
        if m != 0.0 && self.theta != 0.0 {
            let d = self.dx.apply(c);
            let s = m * self.theta;
            for (o, v) in out.iter_mut().zip(d) {
                *o -= s * v;
            }
        }
    }

    pub fn size(&self) -> usize {
        self.base.size()
    }
}

/// Exponents for the colored-noise basis: particle weight `u_x` plus the
/// stationary noise weight, each with the Gaussian factor of its `sigma`.
pub fn colored_weights(spec: &ProblemSpec, u_x: &Poly1, sigma: &[f64]) -> Result<Vec<Poly1>> {
    let vq = |s: f64| crate::basis::gaussian_exponent(s);
    if sigma.len() != spec.dims() {
        return Err(Error::DimensionMismatch(format!(
            "need {} sigmas",
            spec.dims()
        )));
    }
    let mut w = vec![u_x + &vq(sigma[0])];
    match &spec.noise {
        NoiseModel::White => return Err(invalid("colored weights need colored noise")),
        NoiseModel::Harmonic => {
            w.push(&quadratic_potential() + &vq(sigma[1]));
            w.push(&quadratic_potential() + &vq(sigma[2]));
        }
        other => {
            w.push(&other.noise_potential().unwrap() + &vq(sigma[1]));
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_models() {
        assert_eq!("ns".parse::<ColoredModel>().unwrap(), ColoredModel::NS);
        assert!("xyz".parse::<ColoredModel>().is_err());
    }

    #[test]
    fn white_spec_rejects_epsilon() {
        let mut s = ProblemSpec::white(bistable_potential(), 1.0, 2.0).unwrap();
        s.epsilon = Some(0.1);
        assert!(s.validate().is_err());
    }
}
