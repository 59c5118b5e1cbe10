//! Euler-Maruyama simulation of the interacting particle system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::operators::{NoiseModel, ProblemSpec};
use crate::poly::Poly1;
use crate::quad::BoltzmannWindow;

#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    pub n_particles: usize,
    /// Time step; `min(1e-3, eps^2 / 4)` when `None`.
    pub dt: Option<f64>,
    /// Burn-in time `T`.
    pub burn_in: f64,
    /// Averaging window `Delta T`.
    pub window: f64,
    pub seed: u64,
    pub init_mean: f64,
    pub init_var: f64,
    pub batches: usize,
    /// Record the empirical mean every this many steps.
    pub trajectory_stride: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_particles: 2000,
            dt: None,
            burn_in: 50.0,
            window: 50.0,
            seed: 0,
            init_mean: 0.1,
            init_var: 0.1,
            batches: 20,
            trajectory_stride: None,
        }
    }
}

impl McConfig {
    /// Step actually used for `spec`.
    pub fn step(&self, spec: &ProblemSpec) -> f64 {
        self.dt.unwrap_or_else(|| match spec.epsilon {
            Some(e) => (0.25 * e * e).min(1e-3),
            None => 1e-3,
        })
    }

    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("need at least one particle"));
        }
        let dt = self.step(spec);
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        if let Some(e) = spec.epsilon {
            if dt > 0.5 * e * e {
                return Err(invalid(format!(
                    "time step {dt} exceeds eps^2 / 2 = {}",
                    0.5 * e * e
                )));
            }
        }
        if !(self.burn_in >= 0.0) || !(self.window > 0.0) {
            return Err(invalid(
                "burn-in must be non-negative and the window positive",
            ));
        }
        if self.batches < 2 {
            return Err(invalid("need at least two batches"));
        }
        if (self.window / dt).round() < self.batches as f64 {
            return Err(invalid("averaging window shorter than one step per batch"));
        }
        if !(self.init_var >= 0.0) {
            return Err(invalid("initial variance must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub m_hat: f64,
    pub std_error: f64,
    /// `(t, empirical mean)` samples when requested.
    pub trajectory: Vec<(f64, f64)>,
    /// Time average of the particle second moment about `m_hat`.
    pub variance: f64,
    /// Time average of the noise variable's second moment.
    pub noise_variance: f64,
}

#[derive(Clone)]
struct Particle {
    x: f64,
    eta: f64,
    lambda: f64,
    rng: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seed of sweep point `index`, independent of sweep order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const CHUNK: usize = 256;

/// Sum with a fixed pairwise tree over chunks of `CHUNK`, so the result does
/// not depend on how the work is split across threads.
fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= CHUNK {
        return values.iter().sum();
    }
    let mid = values.len().div_ceil(2 * CHUNK) * CHUNK;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn sample_noise_potential(
    potential: &Poly1,
    window: &BoltzmannWindow,
    rng: &mut ChaCha8Rng,
) -> f64 {
    loop {
        let y = window.lo + (window.hi - window.lo) * rng.random::<f64>();
        if rng.random::<f64>() < (window.e_min - potential.eval(y)).exp() {
            return y;
        }
    }
}

/// Time-averaged empirical mean of the particle system over `[T, T + dT]`.
pub fn simulate(spec: &ProblemSpec, cfg: &McConfig) -> Result<McEstimate> {
    // an infinite beta (no thermal noise) is allowed here
    let mut check = spec.clone();
    if check.beta == f64::INFINITY {
        check.beta = 1.0;
    }
    check.validate()?;
    cfg.validate(spec)?;
    let dt = cfg.step(spec);
    let n = cfg.n_particles;
    let noise = spec.noise.clone();
    let eps = spec.epsilon.unwrap_or(1.0);
    let drift = spec.potential.derivative();
    // colored runs are driven by the noise variable alone
    let amp_x = if noise.is_white() {
        (2.0 * dt / spec.beta).sqrt()
    } else {
        0.0
    };
    let coupling = spec.coupling() / eps;
    let inv_e2 = 1.0 / (eps * eps);
    let amp_noise = (2.0 * dt).sqrt() / eps;
    let (noise_drift, window) = match &noise {
        NoiseModel::NonGaussian { potential } => (
            potential.derivative(),
            Some(BoltzmannWindow::new(potential)),
        ),
        _ => (Poly1::zero(), None),
    };

    let sd0 = cfg.init_var.sqrt();
    let mut particles: Vec<Particle> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, i as u64);
            let x = cfg.init_mean + sd0 * rng.sample::<f64, _>(StandardNormal);
            let (eta, lambda) = match (&noise, &window) {
                (NoiseModel::White, _) => (0.0, 0.0),
                (NoiseModel::OrnsteinUhlenbeck, _) => (rng.sample(StandardNormal), 0.0),
                (NoiseModel::Harmonic, _) => {
                    (rng.sample(StandardNormal), rng.sample(StandardNormal))
                }
                (NoiseModel::NonGaussian { potential }, Some(w)) => {
                    (sample_noise_potential(potential, w, &mut rng), 0.0)
                }
                (NoiseModel::NonGaussian { .. }, None) => unreachable!(),
            };
            Particle {
                x,
                eta,
                lambda,
                rng,
            }
        })
        .collect();

    let burn_steps = (cfg.burn_in / dt).round() as usize;
    let window_steps = (cfg.window / dt).round() as usize;
    let total = burn_steps + window_steps;
    let batch_len = window_steps / cfg.batches;
    let mut xs = vec![0.0; n];
    let mean = |ps: &[Particle], xs: &mut [f64]| {
        xs.par_iter_mut()
            .zip(ps.par_iter())
            .for_each(|(v, p)| *v = p.x);
        pairwise_sum(xs) / n as f64
    };
    let mut m = mean(&particles, &mut xs);
    let mut batch_sums = vec![0.0; cfg.batches];
    let mut second = 0.0;
    let mut noise_second = 0.0;
    let mut trajectory = Vec::new();
    if cfg.trajectory_stride.is_some() {
        trajectory.push((0.0, m));
    }
    let theta = spec.theta;
    for step in 0..total {
        particles.par_chunks_mut(CHUNK).for_each(|chunk| {
            for p in chunk {
                let mut dx = -(drift.eval(p.x) + theta * (p.x - m)) * dt;
                if amp_x > 0.0 {
                    dx += amp_x * p.rng.sample::<f64, _>(StandardNormal);
                }
                match &noise {
                    NoiseModel::White => {}
                    NoiseModel::OrnsteinUhlenbeck => {
                        dx += coupling * p.eta * dt;
                        p.eta += -inv_e2 * p.eta * dt
                            + amp_noise * p.rng.sample::<f64, _>(StandardNormal);
                    }
                    NoiseModel::Harmonic => {
                        dx += coupling * p.eta * dt;
                        let (eta, lambda) = (p.eta, p.lambda);
                        p.eta += inv_e2 * lambda * dt;
                        p.lambda += -inv_e2 * (lambda + eta) * dt
                            + amp_noise * p.rng.sample::<f64, _>(StandardNormal);
                    }
                    NoiseModel::NonGaussian { .. } => {
                        dx += coupling * p.eta * dt;
                        p.eta += -inv_e2 * noise_drift.eval(p.eta) * dt
                            + amp_noise * p.rng.sample::<f64, _>(StandardNormal);
                    }
                }
                p.x += dx;
            }
        });
        m = mean(&particles, &mut xs);
        let t = (step + 1) as f64 * dt;
        if !m.is_finite() {
            return Err(Error::NonFinite { t });
        }
        if let Some(stride) = cfg.trajectory_stride {
            if stride > 0 && (step + 1) % stride == 0 {
                trajectory.push((t, m));
            }
        }
        if step >= burn_steps {
            let k = ((step - burn_steps) / batch_len.max(1)).min(cfg.batches - 1);
            batch_sums[k] += m;
            xs.par_iter_mut()
                .zip(particles.par_iter())
                .for_each(|(v, p)| *v = p.x * p.x);
            second += pairwise_sum(&xs) / n as f64;
            xs.par_iter_mut()
                .zip(particles.par_iter())
                .for_each(|(v, p)| *v = p.eta * p.eta);
            noise_second += pairwise_sum(&xs) / n as f64;
        }
    }
    let counts: Vec<usize> = (0..cfg.batches)
        .map(|k| {
            if k + 1 < cfg.batches {
                batch_len
            } else {
                window_steps - batch_len * (cfg.batches - 1)
            }
        })
        .collect();
    let means: Vec<f64> = batch_sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let m_hat = batch_sums.iter().sum::<f64>() / window_steps as f64;
    let b = cfg.batches as f64;
    let var_b = means.iter().map(|v| (v - m_hat).powi(2)).sum::<f64>() / (b - 1.0);
    Ok(McEstimate {
        m_hat,
        std_error: (var_b / b).sqrt(),
        trajectory,
        variance: second / window_steps as f64 - m_hat * m_hat,
        noise_variance: noise_second / window_steps as f64,
    })
}

/// Independent runs for each `beta`, seeded from `(cfg.seed, index)`.
/// Failures are reported per point.
pub fn sweep_beta(
    spec: &ProblemSpec,
    betas: &[f64],
    cfg: &McConfig,
) -> Result<Vec<(f64, Result<McEstimate>)>> {
    if betas.is_empty() {
        return Err(invalid("beta list is empty"));
    }
    Ok(betas
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| {
            let mut s = spec.clone();
            s.beta = beta;
            let c = McConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            (beta, simulate(&s, &c))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_plain_sum() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
