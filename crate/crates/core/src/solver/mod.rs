//! Steady states and time integration of the Galerkin systems.

pub mod rk45;

use std::sync::Arc;

use crate::basis::{dot, HermiteBasis, SpectralField};
use crate::error::{invalid, Error, Result};
use crate::operators::McKeanOperator;
use crate::sparse::{BandedLu, OperatorMatrix};

pub use rk45::{Control, Rk45Options};

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Rk45,
    SemiImplicit,
}

/// Settings shared by the time-dependent solvers.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Step of the semi-implicit scheme.
    pub dt: f64,
    pub atol: f64,
    pub rtol: f64,
    pub t_final: f64,
    /// Stop once the mass-normalised state changes slower than this rate;
    /// zero disables the check.
    pub steady_tol: f64,
    /// Rescale to unit mass after each semi-implicit step.
    pub renormalize: bool,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scheme: Scheme::Rk45,
            dt: 1.0,
            atol: 1e-10,
            rtol: 1e-8,
            t_final: 50.0,
            steady_tol: 0.0,
            renormalize: true,
            max_steps: 10_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scheme == Scheme::SemiImplicit && !(self.dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(invalid(format!(
                "t_final must be non-negative, got {}",
                self.t_final
            )));
        }
        if !(self.atol > 0.0) || !(self.rtol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Time span over which RK45 runs measure the steady-state rate.
const STEADY_SPAN: f64 = 0.5;

/// Normalised null vector of a linear operator.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub field: SpectralField,
    /// `||M c|| / ||c||`
    pub residual: f64,
    pub iterations: usize,
}

/// Eigenvector for the eigenvalue of `op` closest to zero, by inverse
/// iteration, normalised to unit mass.
pub fn steady_state_linear(
    op: &OperatorMatrix,
    basis: &Arc<HermiteBasis>,
    guess: Option<&[f64]>,
) -> Result<SteadyState> {
    let n = basis.len();
    if op.size() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator size {} vs basis {n}",
            op.size()
        )));
    }
    let orders = basis.index_set().candidate_orderings();
    let scale = op.max_abs().max(1e-300);
    let mut shift = 0.0;
    let lu = loop {
        let a = if shift == 0.0 {
            op.clone()
        } else {
            op.add_diagonal(-shift)
        };
        match BandedLu::with_orderings(&a, &orders) {
            Ok(lu) => break lu,
            Err(Error::Singular { .. }) if shift < 1e-6 * scale => {
                shift = if shift == 0.0 {
                    1e-13 * scale
                } else {
                    shift * 100.0
                };
            }
            Err(e) => return Err(e),
        }
    };
    let q0 = basis.mass_functional();
    let mut x: Vec<f64> = match guess {
        Some(g) if g.len() == n && g.iter().any(|v| *v != 0.0) => g.to_vec(),
        _ => q0.clone(),
    };
    normalize2(&mut x);
    let mut iterations = 0;
    for it in 1..=100 {
        iterations = it;
        let mut y = lu.solve(&x);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: 0.0 });
        }
        normalize2(&mut y);
        if dot(&y, &x) < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        let diff = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        x = y;
        if diff < 1e-14 {
            break;
        }
    }
    let residual = norm2(&op.apply(&x));
    let mut field = SpectralField::new(basis.clone(), x)?;
    field.normalize()?;
    Ok(SteadyState {
        field,
        residual,
        iterations,
    })
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn normalize2(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Output of a time-dependent solve.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub field: SpectralField,
    /// Sample times (including the start) and the first moment there.
    pub times: Vec<f64>,
    pub moments: Vec<f64>,
    pub t_end: f64,
    pub steps: usize,
    /// True when the run stopped on the steady-state criterion.
    pub steady: bool,
}

/// Observer called at each sample time with the coefficient vector.
pub type Observer<'a> = &'a mut dyn FnMut(f64, &[f64]);

/// Integrate `dc/dt = M c` with RK45, sampling at `samples`.
pub fn integrate_linear(
    op: &OperatorMatrix,
    rho0: &SpectralField,
    cfg: &SolverConfig,
    samples: &[f64],
    observer: Option<Observer>,
) -> Result<Trajectory> {
    let mk = McKeanOperator {
        base: op.clone(),
        dx: OperatorMatrix::from_triplets(op.size(), Vec::new()),
        theta: 0.0,
    };
    integrate_mckean(&mk, rho0, cfg, samples, observer)
}

/// Integrate the mean-field system `dc/dt = M(m(c)) c`.
pub fn integrate_mckean(
    op: &McKeanOperator,
    rho0: &SpectralField,
    cfg: &SolverConfig,
    samples: &[f64],
    observer: Option<Observer>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let basis = rho0.basis.clone();
    if op.size() != basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "operator size {} vs basis {}",
            op.size(),
            basis.len()
        )));
    }
    match cfg.scheme {
        Scheme::Rk45 => integrate_rk45(op, rho0, cfg, samples, observer),
        Scheme::SemiImplicit => integrate_semi_implicit(op, rho0, cfg, samples, observer),
    }
}

struct Moments {
    q0: Vec<f64>,
    q1: Vec<f64>,
}

impl Moments {
    fn new(basis: &HermiteBasis) -> Self {
        Moments {
            q0: basis.mass_functional(),
            q1: basis.moment_functional(0),
        }
    }

    fn mass(&self, c: &[f64]) -> f64 {
        dot(&self.q0, c)
    }

    fn mean(&self, c: &[f64]) -> Result<f64> {
        let mass = self.mass(c);
        if !(mass.abs() >= 1e-12) {
            return Err(Error::DegenerateMass { mass });
        }
        Ok(dot(&self.q1, c) / mass)
    }

    /// Rate of change of the mass-normalised state.
    fn normalized_rate(&self, old: &[f64], new: &[f64], dt: f64) -> f64 {
        let (mo, mn) = (self.mass(old), self.mass(new));
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in old.iter().zip(new) {
            num += (b / mn - a / mo).powi(2);
            den += (b / mn).powi(2);
        }
        (num / den.max(1e-300)).sqrt() / dt
    }
}

fn integrate_rk45(
    op: &McKeanOperator,
    rho0: &SpectralField,
    cfg: &SolverConfig,
    samples: &[f64],
    mut observer: Option<Observer>,
) -> Result<Trajectory> {
    let mom = Moments::new(&rho0.basis);
    let theta = op.theta;
    let mut rhs = |_t: f64, c: &[f64], out: &mut [f64]| -> Result<()> {
        let m = if theta != 0.0 { mom.mean(c)? } else { 0.0 };
        op.apply(m, c, out);
        Ok(())
    };
    let mut y = rho0.coeffs.clone();
    let mut times = vec![0.0];
    let mut moments = vec![mom.mean(&y)?];
    if let Some(obs) = observer.as_mut() {
        obs(0.0, &y);
    }
    let mut prev = y.clone();
    let mut prev_t = 0.0;
    let mut steady = false;
    let mut moment_err: Option<Error> = None;
    let opts = Rk45Options {
        atol: cfg.atol,
        rtol: cfg.rtol,
        max_steps: cfg.max_steps,
        h0: None,
    };
    let samples: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s <= cfg.t_final)
        .collect();
    let (t_end, steps) = rk45::integrate(
        &mut rhs,
        0.0,
        &mut y,
        cfg.t_final,
        &samples,
        &opts,
        &mut |t, c, at| {
            if at {
                match mom.mean(c) {
                    Ok(m) => {
                        times.push(t);
                        moments.push(m);
                    }
                    Err(e) => {
                        moment_err = Some(e);
                        return Control::Stop;
                    }
                }
                if let Some(obs) = observer.as_mut() {
                    obs(t, c);
                }
            }
            // the rate is measured over a span long enough to average out
            // step-to-step integration noise
            if cfg.steady_tol > 0.0 && t - prev_t >= STEADY_SPAN.min(cfg.t_final) {
                let rate = mom.normalized_rate(&prev, c, t - prev_t);
                prev.copy_from_slice(c);
                prev_t = t;
                if rate < cfg.steady_tol {
                    steady = true;
                    return Control::Stop;
                }
            }
            Control::Continue
        },
    )?;
    if let Some(e) = moment_err {
        return Err(e);
    }
    if times.last() != Some(&t_end) {
        times.push(t_end);
        moments.push(mom.mean(&y)?);
    }
    Ok(Trajectory {
        field: SpectralField::new(rho0.basis.clone(), y)?,
        times,
        moments,
        t_end,
        steps,
        steady,
    })
}

/// One step `(I - dt M(m)) c_new = c` of the semi-implicit scheme, with the
/// mean frozen at its value for `c`. Returns the new coefficients and mean.
pub fn semi_implicit_step(
    op: &McKeanOperator,
    basis: &HermiteBasis,
    c: &[f64],
    dt: f64,
    renormalize: bool,
) -> Result<(Vec<f64>, f64)> {
    let mom = Moments::new(basis);
    let m = mom.mean(c)?;
    let a = op.at(m).scale(-dt).add_diagonal(1.0);
    let lu = BandedLu::with_orderings(&a, &basis.index_set().candidate_orderings())?;
    let mut next = lu.solve(c);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: 0.0 });
    }
    if renormalize {
        let mass = mom.mass(&next);
        if !(mass.abs() >= 1e-12) {
            return Err(Error::DegenerateMass { mass });
        }
        next.iter_mut().for_each(|v| *v /= mass);
    }
    let m_new = mom.mean(&next)?;
    Ok((next, m_new))
}

fn integrate_semi_implicit(
    op: &McKeanOperator,
    rho0: &SpectralField,
    cfg: &SolverConfig,
    samples: &[f64],
    mut observer: Option<Observer>,
) -> Result<Trajectory> {
    let basis = rho0.basis.clone();
    let mom = Moments::new(&basis);
    let orders = basis.index_set().candidate_orderings();
    let mut c = rho0.coeffs.clone();
    let mut m = mom.mean(&c)?;
    let mut times = vec![0.0];
    let mut moments = vec![m];
    if let Some(obs) = observer.as_mut() {
        obs(0.0, &c);
    }
    let n_steps = ((cfg.t_final / cfg.dt) - 1e-9).ceil().max(0.0) as usize;
    let mut t = 0.0;
    let mut steady = false;
    let mut steps = 0;
    // oscillation monitor: consecutive sign flips of the mean increment
    let mut last_dm = 0.0;
    let mut flips = 0usize;
    let mut flip_amp = f64::INFINITY;
    let mut next_sample = samples.iter().position(|&s| s > 0.0);
    for _ in 0..n_steps.min(cfg.max_steps) {
        let dt = cfg.dt.min(cfg.t_final - t);
        let a = op.at(m).scale(-dt).add_diagonal(1.0);
        let lu = BandedLu::with_orderings(&a, &orders)?;
        let mut next = lu.solve(&c);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        if cfg.renormalize {
            let mass = mom.mass(&next);
            if !(mass.abs() >= 1e-12) {
                return Err(Error::DegenerateMass { mass });
            }
            next.iter_mut().for_each(|v| *v /= mass);
        }
        let m_new = mom.mean(&next)?;
        t += dt;
        steps += 1;
        let rate = mom.normalized_rate(&c, &next, dt);
        let dm = m_new - m;
        if dm * last_dm < 0.0 {
            flips += 1;
            if flips == 1 {
                flip_amp = dm.abs();
            }
            if flips >= 200 && dm.abs() >= flip_amp && dm.abs() > 1e-10 {
                return Err(Error::Oscillation(format!(
                    "mean alternates for {flips} steps with amplitude {:.3e} at t = {t}",
                    dm.abs()
                )));
            }
        } else {
            flips = 0;
        }
        last_dm = dm;
        c = next;
        m = m_new;
        while let Some(i) = next_sample {
            if samples[i] <= t + 1e-12 * t.max(1.0) {
                times.push(t);
                moments.push(m);
                if let Some(obs) = observer.as_mut() {
                    obs(t, &c);
                }
                next_sample = if i + 1 < samples.len() {
                    Some(i + 1)
                } else {
                    None
                };
            } else {
                break;
            }
        }
        if cfg.steady_tol > 0.0 && rate < cfg.steady_tol && (dm / dt).abs() < cfg.steady_tol {
            steady = true;
            break;
        }
    }
    if times.last() != Some(&t) {
        times.push(t);
        moments.push(m);
    }
    Ok(Trajectory {
        field: SpectralField::new(basis, c)?,
        times,
        moments,
        t_end: t,
        steps,
        steady,
    })
}

/// March the mean-field system to a steady state. Returns the trajectory,
/// whose `steady` flag reports whether the criterion was met.
pub fn steady_state_mckean(
    op: &McKeanOperator,
    rho0: &SpectralField,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let mut cfg = cfg.clone();
    if cfg.steady_tol <= 0.0 {
        cfg.steady_tol = 1e-9;
    }
    let traj = integrate_mckean(op, rho0, &cfg, &[], None)?;
    if !traj.steady {
        return Err(Error::NonConvergence(format!(
            "no steady state by t = {} (tolerance {:e})",
            cfg.t_final, cfg.steady_tol
        )));
    }
    Ok(traj)
}
