//! Dormand-Prince 5(4) with local error control.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct Rk45Options {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    /// First step; chosen automatically when `None`.
    pub h0: Option<f64>,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Rk45Options {
            atol: 1e-10,
            rtol: 1e-8,
            max_steps: 10_000_000,
            h0: None,
        }
    }
}

/// What the step observer asks the integrator to do next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t_end`, calling `observer` after
/// every accepted step and exactly at each time in `samples`.
/// Returns the final time reached and the number of accepted steps.
pub fn integrate(
    f: &mut dyn FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    t0: f64,
    y: &mut [f64],
    t_end: f64,
    samples: &[f64],
    opts: &Rk45Options,
    observer: &mut dyn FnMut(f64, &[f64], bool) -> Control,
) -> Result<(f64, usize)> {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = t0;
    f(t, y, &mut k[0])?;
    let mut h = match opts.h0 {
        Some(h) => h,
        None => initial_step(f, t, y, &k[0], opts)?,
    }
    .min(t_end - t0);
    let mut next_sample = samples
        .iter()
        .position(|&s| s > t0 + 1e-14 * t0.abs().max(1.0));
    if samples
        .iter()
        .any(|&s| (s - t0).abs() <= 1e-14 * t0.abs().max(1.0))
        && observer(t0, y, true) == Control::Stop
    {
        return Ok((t0, 0));
    }
    let mut steps = 0;
    let mut rejected_last = false;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(Error::NonConvergence(format!(
                "RK45 exceeded {} steps",
                opts.max_steps
            )));
        }
        let mut target = t_end;
        if let Some(i) = next_sample {
            target = target.min(samples[i]);
        }
        let hit = t + h >= target;
        if hit {
            h = target - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1e-300) {
            return Err(Error::StepUnderflow { t });
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                tmp[i] = y[i] + h * acc;
            }
            f(t + C[s] * h, &tmp, &mut k[s])?;
        }
        // the last stage evaluated the 5th-order solution
        ynew.copy_from_slice(&tmp);
        let mut err2 = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            let r = h * e / sc;
            err2 += r * r;
        }
        let err = (err2 / n.max(1) as f64).sqrt();
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            if h < 1e-12 * t.abs().max(1.0) {
                return Err(Error::NonFinite { t });
            }
            h *= 0.2;
            rejected_last = true;
            continue;
        }
        if err <= 1.0 {
            t = if hit { target } else { t + h };
            y.copy_from_slice(&ynew);
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            steps += 1;
            let at_sample = hit && next_sample.is_some_and(|i| samples[i] == target);
            if at_sample {
                let i = next_sample.unwrap();
                next_sample = if i + 1 < samples.len() {
                    Some(i + 1)
                } else {
                    None
                };
            }
            if observer(t, y, at_sample) == Control::Stop {
                return Ok((t, steps));
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h *= fac;
            rejected_last = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            rejected_last = true;
        }
    }
    Ok((t, steps))
}

fn initial_step(
    f: &mut dyn FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    t: f64,
    y: &[f64],
    f0: &[f64],
    opts: &Rk45Options,
) -> Result<f64> {
    let n = y.len().max(1) as f64;
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let norm =
        |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}
