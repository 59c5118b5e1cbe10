//! Self-consistency maps, their fixed points, and continuation in `beta`.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use crate::asymptotics::{approx_r, OuExpansion};
use crate::basis::{gaussian_exponent, project_separable, HermiteBasis};
use crate::error::{invalid, Error, Result};
use crate::hermite::{IndexSet, IndexShape};
use crate::operators::{colored_weights, ColoredModel, McKeanOperator, NoiseModel, ProblemSpec};
use crate::poly::Poly1;
use crate::solver::{steady_state_linear, steady_state_mckean, Scheme, SolverConfig};

/// `integral x rho_inf(x; m, beta, theta) dx` for white noise.
pub fn white_r(potential: &Poly1, m: f64, beta: f64, theta: f64) -> Result<f64> {
    Ok(OuExpansion::new(potential, m, beta, theta)?.r0)
}

/// Free energy along the one-parameter family of white-noise stationary
/// densities: `-ln Z / beta - theta/2 (R - m)^2`.
pub fn free_energy(potential: &Poly1, m: f64, beta: f64, theta: f64) -> Result<f64> {
    let e = OuExpansion::new(potential, m, beta, theta)?;
    Ok(-e.log_z / beta - 0.5 * theta * (e.r0 - m).powi(2))
}

/// How a self-consistency map is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    WhiteExact,
    AsymptoticOU,
    SpectralLinear,
    SpectralMcKean,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::WhiteExact => "white-exact",
            Backend::AsymptoticOU => "asymptotic-ou",
            Backend::SpectralLinear => "spectral-linear",
            Backend::SpectralMcKean => "spectral-mckean",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white-exact" => Ok(Backend::WhiteExact),
            "asymptotic-ou" => Ok(Backend::AsymptoticOU),
            "spectral-linear" | "spectral" => Ok(Backend::SpectralLinear),
            "spectral-mckean" => Ok(Backend::SpectralMcKean),
            _ => Err(invalid(format!("unknown backend '{s}'"))),
        }
    }
}

/// Extra exponent on the particle coordinate of a spectral basis.
#[derive(Clone, Debug, PartialEq)]
pub enum XWeight {
    Zero,
    /// `beta V`, rescaled with `beta` at each evaluation.
    BetaV,
    /// Total exponent `2 beta V`: the basis is `exp(-beta V)` times Hermite
    /// polynomials, so the white-noise density is the first basis function.
    Boltzmann,
    Fixed(Poly1),
}

/// Discretisation used by the spectral backends.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSetup {
    pub shape: IndexShape,
    /// One degree per dimension (or a single degree for triangle/square).
    pub degrees: Vec<usize>,
    pub sigma: Vec<f64>,
    pub x_weight: XWeight,
    /// Quadrature sizes; the basis default when `None`.
    pub quad_degree: Option<Vec<usize>>,
}

impl SpectralSetup {
    /// Basis for `spec`, with the default noise weights.
    pub fn basis(&self, spec: &ProblemSpec) -> Result<HermiteBasis> {
        let dims = spec.dims();
        let degrees = if self.degrees.len() == 1 {
            vec![self.degrees[0]; dims]
        } else {
            self.degrees.clone()
        };
        let sigma = if self.sigma.len() == 1 {
            vec![self.sigma[0]; dims]
        } else {
            self.sigma.clone()
        };
        if degrees.len() != dims || sigma.len() != dims {
            return Err(Error::DimensionMismatch(format!(
                "{dims}-dimensional problem needs {dims} degrees and sigmas, got {} and {}",
                degrees.len(),
                sigma.len()
            )));
        }
        let set = IndexSet::new(self.shape, &degrees)?;
        let u_x = match &self.x_weight {
            XWeight::Zero => Poly1::zero(),
            XWeight::BetaV => spec.potential.scale(spec.beta),
            XWeight::Boltzmann => {
                &spec.potential.scale(2.0 * spec.beta) - &gaussian_exponent(sigma[0])
            }
            XWeight::Fixed(p) => p.clone(),
        };
        let basis = if spec.noise.is_white() {
            HermiteBasis::with_extra_weight(set, sigma, vec![u_x])?
        } else {
            HermiteBasis::new(set, sigma.clone(), colored_weights(spec, &u_x, &sigma)?)?
        };
        match &self.quad_degree {
            Some(q) => basis.with_quad_degree(q.clone()),
            None => Ok(basis),
        }
    }
}

struct OperatorCache {
    beta_bits: u64,
    basis: Arc<HermiteBasis>,
    op: Arc<McKeanOperator>,
}

/// `m -> R(m, beta)` for one backend.
pub struct SelfConsistencyMap {
    backend: Backend,
    spec: ProblemSpec,
    model: Option<ColoredModel>,
    setup: Option<SpectralSetup>,
    solver: SolverConfig,
    cache: Mutex<Vec<OperatorCache>>,
}

const CACHE_SLOTS: usize = 4;

impl SelfConsistencyMap {
    /// Exact white-noise map by quadrature.
    pub fn white_exact(potential: Poly1, theta: f64) -> Result<Self> {
        let spec = ProblemSpec::white(potential, theta, 1.0)?;
        Ok(Self::build(Backend::WhiteExact, spec, None, None))
    }

    /// Small-epsilon expansion for OU noise.
    pub fn asymptotic_ou(potential: Poly1, theta: f64, epsilon: f64) -> Result<Self> {
        let spec = ProblemSpec::colored(ColoredModel::OU, potential, theta, 1.0, epsilon)?;
        Ok(Self::build(
            Backend::AsymptoticOU,
            spec,
            Some(ColoredModel::OU),
            None,
        ))
    }

    /// First moment of the steady state of the frozen-mean linear operator.
    /// The `beta` of `spec` is replaced at each evaluation.
    pub fn spectral(
        spec: ProblemSpec,
        model: Option<ColoredModel>,
        setup: SpectralSetup,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(Self::build(
            Backend::SpectralLinear,
            spec,
            model,
            Some(setup),
        ))
    }

    /// Fixed points found by marching the mean-field equation in time.
    pub fn spectral_mckean(
        spec: ProblemSpec,
        model: Option<ColoredModel>,
        setup: SpectralSetup,
        solver: SolverConfig,
    ) -> Result<Self> {
        spec.validate()?;
        let mut m = Self::build(Backend::SpectralMcKean, spec, model, Some(setup));
        m.solver = solver;
        Ok(m)
    }

    fn build(
        backend: Backend,
        spec: ProblemSpec,
        model: Option<ColoredModel>,
        setup: Option<SpectralSetup>,
    ) -> Self {
        SelfConsistencyMap {
            backend,
            spec,
            model,
            setup,
            solver: SolverConfig {
                scheme: Scheme::SemiImplicit,
                dt: 1.0,
                t_final: 2000.0,
                steady_tol: 1e-9,
                ..Default::default()
            },
            cache: Mutex::new(Vec::new()),
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn model(&self) -> Option<ColoredModel> {
        self.model
    }

    pub fn theta(&self) -> f64 {
        self.spec.theta
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.spec.epsilon
    }

    /// True when `R(-m) = -R(m)` is expected.
    pub fn is_odd(&self) -> bool {
        let noise_even = match &self.spec.noise {
            NoiseModel::NonGaussian { potential } => potential.is_even(),
            _ => true,
        };
        self.spec.potential.is_even() && noise_even
    }

    fn spec_at(&self, beta: f64) -> ProblemSpec {
        let mut s = self.spec.clone();
        s.beta = beta;
        s
    }

    fn operator(&self, beta: f64) -> Result<(Arc<HermiteBasis>, Arc<McKeanOperator>)> {
        if let Some(c) = self
            .cache
            .lock()
            .unwrap()
            .iter()
            .find(|c| c.beta_bits == beta.to_bits())
        {
            return Ok((c.basis.clone(), c.op.clone()));
        }
        let spec = self.spec_at(beta);
        let setup = self
            .setup
            .as_ref()
            .ok_or_else(|| invalid("spectral backend needs a setup"))?;
        let basis = Arc::new(setup.basis(&spec)?);
        let op = Arc::new(McKeanOperator::new(&spec, &basis)?);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() == CACHE_SLOTS {
            cache.remove(0);
        }
        cache.push(OperatorCache {
            beta_bits: beta.to_bits(),
            basis: basis.clone(),
            op: op.clone(),
        });
        Ok((basis, op))
    }

    /// `R(m, beta)`.
    pub fn evaluate(&self, m: f64, beta: f64) -> Result<f64> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid(format!("beta must be positive, got {beta}")));
        }
        match self.backend {
            Backend::WhiteExact => white_r(&self.spec.potential, m, beta, self.spec.theta),
            Backend::AsymptoticOU => approx_r(
                &self.spec.potential,
                m,
                beta,
                self.spec.theta,
                self.spec.epsilon.unwrap_or(0.0),
                ColoredModel::OU,
            ),
            Backend::SpectralLinear => {
                // always a cold start, so R depends on (m, beta) alone and not
                // on the order of evaluation
                let (basis, op) = self.operator(beta)?;
                steady_state_linear(&op.at(m), &basis, None)?.field.first_moment()
            }
            Backend::SpectralMcKean => Err(Error::Unsupported(
                "the time-marching backend yields fixed points, not map values; use mckean_fixed_point".into(),
            )),
        }
    }

    /// `R(m, beta) - m`
    pub fn residual(&self, m: f64, beta: f64) -> Result<f64> {
        Ok(self.evaluate(m, beta)? - m)
    }

    /// Steady mean reached by marching the mean-field equation from a
    /// Gaussian start `N(m0, var0)` in `x` and the stationary noise law.
    pub fn mckean_fixed_point(&self, beta: f64, m0: f64, var0: f64) -> Result<f64> {
        let spec = self.spec_at(beta);
        let setup = self
            .setup
            .as_ref()
            .ok_or_else(|| invalid("spectral backend needs a setup"))?;
        let basis = Arc::new(setup.basis(&spec)?);
        let op = McKeanOperator::new(&spec, &basis)?;
        let rho0 = initial_condition(&spec, &basis, m0, var0)?;
        let traj = steady_state_mckean(&op, &rho0, &self.solver)?;
        traj.field.first_moment()
    }
}

/// Product of a Gaussian in `x` and the stationary noise law, projected on
/// `basis` and normalised to unit mass. When the basis weight grows too fast
/// for the Gaussian to be square integrable, the `x` factor is multiplied by
/// `exp(-U/2)` with `U` the extra exponent of the basis.
pub fn initial_condition(
    spec: &ProblemSpec,
    basis: &Arc<HermiteBasis>,
    mean: f64,
    var: f64,
) -> Result<crate::basis::SpectralField> {
    if !(var > 0.0) {
        return Err(invalid(format!(
            "initial variance must be positive, got {var}"
        )));
    }
    // a Gaussian lies in the weighted space only if the extra exponent U grows
    // slower than x^2 / var; otherwise the start is tempered by exp(-U/2)
    let u = &basis.weight()[0] - &gaussian_exponent(basis.sigma()[0]);
    let deg = u.degree();
    let temper = !u.is_zero() && (deg > 2 || (deg == 2 && u.coeff(2) >= 1.0 / var));
    let gx = move |x: f64| {
        let t = if temper {
            (-0.5 * u.eval(x)).exp()
        } else {
            1.0
        };
        t * (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    let g1 = |y: f64| (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut field = match &spec.noise {
        NoiseModel::White => project_separable(&[&gx], basis)?,
        NoiseModel::OrnsteinUhlenbeck => project_separable(&[&gx, &g1], basis)?,
        NoiseModel::Harmonic => project_separable(&[&gx, &g1, &g1], basis)?,
        NoiseModel::NonGaussian { potential } => {
            let st = crate::asymptotics::NoiseStationary::new(potential);
            let ge = move |y: f64| st.density(y);
            project_separable(&[&gx, &ge], basis)?
        }
    };
    field.normalize()?;
    Ok(field)
}

/// `colored_R`: first moment of the steady state of the frozen-mean operator.
pub fn colored_r(m: f64, spec: &ProblemSpec, basis: &Arc<HermiteBasis>) -> Result<f64> {
    let op = crate::operators::colored_operator(spec, m, basis)?;
    steady_state_linear(&op, basis, None)?.field.first_moment()
}

/// Fixed points of `R(., beta)` in `[lo, hi]` from a sign scan on `n_grid`
/// points refined by bisection.
pub fn find_fixed_points(
    map: &SelfConsistencyMap,
    beta: f64,
    lo: f64,
    hi: f64,
    n_grid: usize,
) -> Result<Vec<f64>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || n_grid < 2 {
        return Err(invalid(format!(
            "bad search interval [{lo}, {hi}] with {n_grid} points"
        )));
    }
    let xs: Vec<f64> = (0..n_grid)
        .map(|i| lo + (hi - lo) * i as f64 / (n_grid - 1) as f64)
        .collect();
    let fs = xs
        .iter()
        .map(|&m| map.residual(m, beta))
        .collect::<Result<Vec<_>>>()?;
    let mut roots = Vec::new();
    for i in 0..n_grid {
        if fs[i] == 0.0 {
            roots.push(xs[i]);
        }
        if i + 1 < n_grid && fs[i] * fs[i + 1] < 0.0 {
            let (mut a, mut b, mut fa) = (xs[i], xs[i + 1], fs[i]);
            while b - a > 1e-8 {
                let c = 0.5 * (a + b);
                let fc = map.residual(c, beta)?;
                if fc == 0.0 {
                    a = c;
                    b = c;
                    break;
                }
                if fa * fc < 0.0 {
                    b = c;
                } else {
                    a = c;
                    fa = fc;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    let mut merged: Vec<f64> = Vec::new();
    for r in roots {
        match merged.last() {
            Some(&l) if (r - l).abs() < 1e-6 => {}
            _ => merged.push(r),
        }
    }
    Ok(merged)
}

/// Linear stability of a fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn name(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stability {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stable" => Ok(Stability::Stable),
            "unstable" => Ok(Stability::Unstable),
            "marginal" => Ok(Stability::Marginal),
            _ => Err(invalid(format!("unknown stability '{s}'"))),
        }
    }
}

/// Slope of `R - m` at `m` by centred differences with step `1e-4`.
pub fn residual_slope(map: &SelfConsistencyMap, m: f64, beta: f64) -> Result<f64> {
    let h = 1e-4;
    Ok((map.residual(m + h, beta)? - map.residual(m - h, beta)?) / (2.0 * h))
}

/// Unstable when the slope of `R - m` is positive.
pub fn classify_stability(map: &SelfConsistencyMap, m: f64, beta: f64) -> Result<Stability> {
    let s = residual_slope(map, m, beta)?;
    Ok(if s.abs() < 1e-6 {
        Stability::Marginal
    } else if s > 0.0 {
        Stability::Unstable
    } else {
        Stability::Stable
    })
}

/// Step control for [`continue_branch`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationOptions {
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Corrector tolerance on `|R - m|`.
    pub tol: f64,
    pub max_points: usize,
    /// Step for the centred differences of the Jacobian.
    pub fd_step: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            h0: 0.05,
            h_min: 1e-4,
            h_max: 0.25,
            tol: 1e-9,
            max_points: 2000,
            fd_step: 1e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchPoint {
    pub beta: f64,
    pub m: f64,
    pub stability: Stability,
    /// `|R - m|` after correction
    pub residual: f64,
    /// Arclength step that led here (zero for the start).
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct BifurcationBranch {
    pub points: Vec<BranchPoint>,
    pub backend: Backend,
    /// Pitchfork locations found along the trivial branch.
    pub bifurcations: Vec<f64>,
    /// Why the branch ended early, if it did.
    pub truncated: Option<String>,
}

fn jacobian(map: &SelfConsistencyMap, beta: f64, m: f64, h: f64) -> Result<(f64, f64)> {
    let hb = h * beta.abs().max(1.0);
    let fb = (map.residual(m, beta + hb)? - map.residual(m, beta - hb)?) / (2.0 * hb);
    let fm = (map.residual(m + h, beta)? - map.residual(m - h, beta)?) / (2.0 * h);
    Ok((fb, fm))
}

/// Pseudo-arclength continuation of `R(m, beta) = m` in `(beta, m)` from a
/// converged start, towards `beta_end`.
pub fn continue_branch(
    map: &SelfConsistencyMap,
    start: (f64, f64),
    beta_end: f64,
    opts: &ContinuationOptions,
) -> Result<BifurcationBranch> {
    let (beta0, m0) = start;
    let r0 = map.residual(m0, beta0)?;
    if r0.abs() > 1e3 * opts.tol.max(1e-9) {
        return Err(invalid(format!(
            "start ({beta0}, {m0}) is not a fixed point (residual {r0:.2e})"
        )));
    }
    let dir = if beta_end >= beta0 { 1.0 } else { -1.0 };
    let (lo, hi) = if dir > 0.0 {
        (beta0, beta_end)
    } else {
        (beta_end, beta0)
    };
    let mut points = vec![BranchPoint {
        beta: beta0,
        m: m0,
        stability: classify_stability(map, m0, beta0)?,
        residual: r0.abs(),
        step: 0.0,
    }];
    let mut bifurcations = Vec::new();
    let mut truncated = None;
    let mut u = (beta0, m0);
    let mut h = opts.h0;
    let (fb, fm) = jacobian(map, u.0, u.1, opts.fd_step)?;
    let mut tangent = normalized((fm, -fb)).unwrap_or((1.0, 0.0));
    if tangent.0 * dir < 0.0 {
        tangent = (-tangent.0, -tangent.1);
    }
    let mut prev_slope = fm;
    while points.len() < opts.max_points {
        let pred = (u.0 + h * tangent.0, u.1 + h * tangent.1);
        match correct(map, pred, opts) {
            Ok((v, iters, res)) => {
                if v.0 < lo - 1e-12 || v.0 > hi + 1e-12 {
                    if h > opts.h_min && ((v.0 - u.0).abs() > 1e-12) {
                        // shorten the final step to land on the range end
                        let frac = ((if dir > 0.0 { hi } else { lo }) - u.0) / (v.0 - u.0);
                        if frac > 1e-6 && frac < 1.0 {
                            h *= frac;
                            continue;
                        }
                    }
                    break;
                }
                let (fb, fm) = jacobian(map, v.0, v.1, opts.fd_step)?;
                let new_t = normalized((fm, -fb)).unwrap_or(tangent);
                let new_t = if new_t.0 * tangent.0 + new_t.1 * tangent.1 < 0.0 {
                    (-new_t.0, -new_t.1)
                } else {
                    new_t
                };
                // pitchfork on the trivial branch: slope of R - m crosses zero
                if v.1.abs() < 1e-7 && u.1.abs() < 1e-7 && prev_slope * fm < 0.0 {
                    if let Ok(b) = refine_pitchfork(map, u.0.min(v.0), u.0.max(v.0)) {
                        bifurcations.push(b);
                    }
                }
                prev_slope = fm;
                let stability = classify_stability(map, v.1, v.0)?;
                let step = ((v.0 - u.0).powi(2) + (v.1 - u.1).powi(2)).sqrt();
                points.push(BranchPoint {
                    beta: v.0,
                    m: v.1,
                    stability,
                    residual: res,
                    step,
                });
                u = v;
                tangent = new_t;
                if iters <= 3 {
                    h = (2.0 * h).min(opts.h_max);
                }
                if (u.0 - if dir > 0.0 { hi } else { lo }).abs() < 1e-10 {
                    break;
                }
            }
            Err(e) => {
                h *= 0.5;
                if h < opts.h_min {
                    truncated = Some(format!("corrector failed at beta = {:.6}: {e}", u.0));
                    break;
                }
            }
        }
    }
    Ok(BifurcationBranch {
        points,
        backend: map.backend(),
        bifurcations,
        truncated,
    })
}

fn normalized(v: (f64, f64)) -> Option<(f64, f64)> {
    let n = (v.0 * v.0 + v.1 * v.1).sqrt();
    if n > 1e-12 && n.is_finite() {
        Some((v.0 / n, v.1 / n))
    } else {
        None
    }
}

/// Moore-Penrose corrector: `u <- u - J^+ F(u)` with damping.
fn correct(
    map: &SelfConsistencyMap,
    mut u: (f64, f64),
    opts: &ContinuationOptions,
) -> Result<((f64, f64), usize, f64)> {
    let mut f = map.residual(u.1, u.0)?;
    for it in 1..=12 {
        if f.abs() < opts.tol {
            return Ok((u, it - 1, f.abs()));
        }
        let (fb, fm) = jacobian(map, u.0, u.1, opts.fd_step)?;
        let jj = fb * fb + fm * fm;
        if !(jj > 1e-24) {
            return Err(Error::NonConvergence(
                "singular Jacobian in corrector".into(),
            ));
        }
        let delta = (fb * f / jj, fm * f / jj);
        let mut lambda = 1.0;
        loop {
            let cand = (u.0 - lambda * delta.0, u.1 - lambda * delta.1);
            if cand.0 > 0.0 {
                if let Ok(fc) = map.residual(cand.1, cand.0) {
                    if fc.abs() < f.abs() || lambda < 1.0 / 32.0 {
                        u = cand;
                        f = fc;
                        break;
                    }
                }
            }
            lambda *= 0.5;
            if lambda < 1.0 / 64.0 {
                return Err(Error::NonConvergence("damped corrector stalled".into()));
            }
        }
    }
    if f.abs() < opts.tol {
        Ok((u, 12, f.abs()))
    } else {
        Err(Error::NonConvergence(format!(
            "corrector residual {:.2e} after 12 iterations",
            f.abs()
        )))
    }
}

/// `beta` in `[a, b]` where the slope of `R` at `m = 0` equals one, refined
/// until `|dR/dm - 1| < 1e-4`.
pub fn refine_pitchfork(map: &SelfConsistencyMap, a: f64, b: f64) -> Result<f64> {
    let g = |beta: f64| residual_slope(map, 0.0, beta);
    let (mut a, mut b) = (a, b);
    let (mut ga, gb) = (g(a)?, g(b)?);
    if ga * gb > 0.0 {
        return Err(Error::NonConvergence(format!(
            "no slope sign change on [{a}, {b}]"
        )));
    }
    for _ in 0..100 {
        let c = 0.5 * (a + b);
        let gc = g(c)?;
        if gc.abs() < 1e-4 && b - a < 1e-6 {
            return Ok(c);
        }
        if ga * gc <= 0.0 {
            b = c;
        } else {
            a = c;
            ga = gc;
        }
    }
    Ok(0.5 * (a + b))
}

/// Critical `beta` at which `m = 0` loses stability, found by following the
/// trivial branch over `[beta_lo, beta_hi]`.
pub fn critical_beta(map: &SelfConsistencyMap, beta_lo: f64, beta_hi: f64) -> Result<Option<f64>> {
    let opts = ContinuationOptions {
        h0: 0.05,
        h_max: 0.1,
        ..Default::default()
    };
    let branch = continue_branch(map, (beta_lo, 0.0), beta_hi, &opts)?;
    Ok(branch.bifurcations.first().copied())
}

/// Correlation times at which the OU expansion puts the pitchfork at `beta_c`:
/// real non-negative roots of `R0'(0) + eps^2 R2'(0) = 1`.
pub fn critical_epsilon(potential: &Poly1, beta_c: f64, theta: f64) -> Result<Vec<f64>> {
    let h = 1e-4;
    let ep = OuExpansion::new(potential, h, beta_c, theta)?;
    let em = OuExpansion::new(potential, -h, beta_c, theta)?;
    let a = (ep.r0 - em.r0) / (2.0 * h);
    let b = (ep.r2 - em.r2) / (2.0 * h);
    // the differences are accurate to about h^2, so a slope this close to one
    // is the white-noise critical point itself
    if (a - 1.0).abs() < 1e-7 {
        return Ok(vec![0.0]);
    }
    if b == 0.0 {
        return Ok(Vec::new());
    }
    let e2 = (1.0 - a) / b;
    if e2 < 0.0 {
        Ok(Vec::new())
    } else {
        Ok(vec![e2.sqrt()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::bistable_potential;

    #[test]
    fn white_map_is_odd() {
        let v = bistable_potential();
        let r = white_r(&v, 0.3, 4.0, 1.0).unwrap();
        let s = white_r(&v, -0.3, 4.0, 1.0).unwrap();
        assert!((r + s).abs() < 1e-12);
    }
}
