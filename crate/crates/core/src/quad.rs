//! Adaptive Gauss-Kronrod quadrature and Boltzmann-weighted integrals.

use std::collections::BinaryHeap;

use crate::poly::Poly1;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive 15-point Gauss-Kronrod on `[a, b]` to absolute tolerance `abs_tol`
/// or relative tolerance `rel_tol`, whichever is looser.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a,
        b,
        val: v,
        err: e,
    });
    let mut total = v;
    let mut err = e;
    for _ in 0..5000 {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Piece {
            a: p.a,
            b: m,
            val: v1,
            err: e1,
        });
        heap.push(Piece {
            a: m,
            b: p.b,
            val: v2,
            err: e2,
        });
    }
    // re-sum to shed accumulated rounding from the running updates
    let mut pieces: Vec<Piece> = heap.into_vec();
    pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
    pieces.iter().map(|p| p.val).sum()
}

/// Integration window for `exp(-(E - E_min))` with a confining polynomial `E`.
#[derive(Clone, Copy, Debug)]
pub struct BoltzmannWindow {
    pub lo: f64,
    pub hi: f64,
    pub argmin: f64,
    pub e_min: f64,
}

impl BoltzmannWindow {
    pub fn new(energy: &Poly1) -> Self {
        let mut r: f64 = 1.0;
        let e0 = energy.eval(0.0);
        while r < 1e6 && (energy.eval(r) - e0 < 200.0 || energy.eval(-r) - e0 < 200.0) {
            r *= 1.5;
        }
        let n = 4000;
        let mut e_min = f64::INFINITY;
        let mut argmin = 0.0;
        let xs: Vec<f64> = (0..=n)
            .map(|i| -r + 2.0 * r * i as f64 / n as f64)
            .collect();
        for &x in &xs {
            let e = energy.eval(x);
            if e < e_min {
                e_min = e;
                argmin = x;
            }
        }
        // polish the minimum with Newton on E'
        let d1 = energy.derivative();
        let d2 = d1.derivative();
        for _ in 0..50 {
            let h = d2.eval(argmin);
            if h <= 0.0 {
                break;
            }
            let step = d1.eval(argmin) / h;
            argmin -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        e_min = e_min.min(energy.eval(argmin));
        let cut = 80.0;
        let live: Vec<f64> = xs
            .iter()
            .copied()
            .filter(|&x| energy.eval(x) - e_min <= cut)
            .collect();
        let dx = 2.0 * r / n as f64;
        BoltzmannWindow {
            lo: live.first().copied().unwrap_or(-r) - 2.0 * dx,
            hi: live.last().copied().unwrap_or(r) + 2.0 * dx,
            argmin,
            e_min,
        }
    }
}

/// `integral f(x) exp(-(E(x) - E_min)) dx` and `E_min`.
pub fn boltzmann_integral(energy: &Poly1, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let w = BoltzmannWindow::new(energy);
    let g = |x: f64| f(x) * (-(energy.eval(x) - w.e_min)).exp();
    let mid = w.argmin.clamp(w.lo, w.hi);
    let v = integrate(&g, w.lo, mid, 1e-15, 1e-13) + integrate(&g, mid, w.hi, 1e-15, 1e-13);
    (v, w.e_min)
}

/// Mean of `f` under the density proportional to `exp(-E)`.
pub fn boltzmann_mean(energy: &Poly1, f: &dyn Fn(f64) -> f64) -> f64 {
    let (z, _) = boltzmann_integral(energy, &|_| 1.0);
    let (v, _) = boltzmann_integral(energy, f);
    v / z
}

/// `ln integral exp(-E) dx`
pub fn log_partition(energy: &Poly1) -> f64 {
    let (z, e_min) = boltzmann_integral(energy, &|_| 1.0);
    z.ln() - e_min
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_partition() {
        let e = Poly1::new(vec![0.0, 0.0, 0.5]);
        let lz = log_partition(&e);
        assert!((lz - (2.0 * std::f64::consts::PI).sqrt().ln()).abs() < 1e-13);
        assert!((boltzmann_mean(&e, &|x| x * x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integral() {
        let v = integrate(&|x: f64| x.cos(), 0.0, 10.0, 1e-14, 1e-14);
        assert!((v - 10f64.sin()).abs() < 1e-13);
    }
}
