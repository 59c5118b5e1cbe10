use hermite_fp::bifurcation::{
    classify_stability, colored_r, continue_branch, critical_beta, critical_epsilon,
    find_fixed_points, free_energy, refine_pitchfork, residual_slope, white_r, ContinuationOptions,
    SelfConsistencyMap, SpectralSetup, Stability, XWeight,
};
use hermite_fp::operators::bistable_potential;
use hermite_fp::quad::integrate;
use hermite_fp::solver::{Scheme, SolverConfig};
use hermite_fp::{ColoredModel, IndexShape, ProblemSpec};
use std::sync::Arc;

fn white() -> SelfConsistencyMap {
    SelfConsistencyMap::white_exact(bistable_potential(), 1.0).unwrap()
}

/// White critical beta from beta * theta * Var = 1 at m = 0, by bisection
/// on plain adaptive quadrature.
fn white_critical_beta() -> f64 {
    let v = bistable_potential();
    let g = |beta: f64| {
        let w = |x: f64| (-beta * (v.eval(x) + 0.5 * x * x)).exp();
        let z = integrate(&w, -8.0, 8.0, 1e-15, 1e-14);
        let x2 = integrate(&|x| x * x * w(x), -8.0, 8.0, 1e-15, 1e-14);
        beta * x2 / z - 1.0
    };
    let (mut a, mut b) = (1.0, 4.0);
    for _ in 0..80 {
        let c = 0.5 * (a + b);
        if g(a) * g(c) <= 0.0 {
            b = c;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[test]
fn white_map_basics() {
    let v = bistable_potential();
    assert!(white_r(&v, 0.0, 3.0, 1.0).unwrap().abs() < 1e-14);
    let map = white();
    assert!(residual_slope(&map, 0.0, 5.0).unwrap() > 0.0);
    let r = white_r(&v, 0.5, 3.0, 50.0).unwrap();
    assert!((r - 0.5).abs() < 1e-2, "{r}");
}

#[test]
fn free_energy_shape() {
    let v = bistable_potential();
    for m in [0.1, 0.5, 1.3] {
        let a = free_energy(&v, m, 5.0, 1.0).unwrap();
        let b = free_energy(&v, -m, 5.0, 1.0).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
    let grid: Vec<f64> = (0..201).map(|i| -1.0 + 0.01 * i as f64).collect();
    let f: Vec<f64> = grid
        .iter()
        .map(|&m| free_energy(&v, m, 5.0, 1.0).unwrap())
        .collect();
    assert!(f[100] > f[99] && f[100] > f[101]);
    // dF/dm has the sign of m - R(m)
    for w in grid.windows(2).step_by(7) {
        let mid = 0.5 * (w[0] + w[1]);
        let df =
            free_energy(&v, w[1], 5.0, 1.0).unwrap() - free_energy(&v, w[0], 5.0, 1.0).unwrap();
        let res = white_r(&v, mid, 5.0, 1.0).unwrap() - mid;
        if res.abs() > 1e-3 {
            assert_eq!(df.signum(), -res.signum(), "m = {mid}");
        }
    }
}

#[test]
fn fixed_points_of_the_white_map() {
    let map = white();
    let hot = find_fixed_points(&map, 1.0, -2.0, 2.0, 101).unwrap();
    assert_eq!(hot.len(), 1);
    assert!(hot[0].abs() < 1e-8);
    let cold = find_fixed_points(&map, 5.0, -2.0, 2.0, 101).unwrap();
    assert_eq!(cold.len(), 3, "{cold:?}");
    assert!((cold[0] + cold[2]).abs() < 1e-7 && cold[1].abs() < 1e-8);
    assert_eq!(
        classify_stability(&map, 0.0, 5.0).unwrap(),
        Stability::Unstable
    );
    assert_eq!(
        classify_stability(&map, 0.0, 1.0).unwrap(),
        Stability::Stable
    );
    assert_eq!(
        classify_stability(&map, cold[2], 5.0).unwrap(),
        Stability::Stable
    );
    assert!(find_fixed_points(&map, 1.0, 2.0, -2.0, 101).is_err());
}

fn setup(model: ColoredModel) -> SpectralSetup {
    let (degrees, sigma) = match model {
        ColoredModel::H => (vec![24, 6, 6], vec![0.3, 1.0, 1.0]),
        _ => (vec![30, 12], vec![0.3, 1.0]),
    };
    SpectralSetup {
        shape: IndexShape::Rectangle,
        degrees,
        sigma,
        x_weight: XWeight::BetaV,
        quad_degree: None,
    }
}

fn spectral(model: ColoredModel, eps: f64) -> SelfConsistencyMap {
    let spec = ProblemSpec::colored(model, bistable_potential(), 1.0, 2.0, eps).unwrap();
    SelfConsistencyMap::spectral(spec, Some(model), setup(model)).unwrap()
}

#[test]
fn every_backend_is_odd() {
    let mut maps = vec![
        white(),
        SelfConsistencyMap::asymptotic_ou(bistable_potential(), 1.0, 0.2).unwrap(),
    ];
    for model in [ColoredModel::OU, ColoredModel::H, ColoredModel::B] {
        maps.push(spectral(model, 0.2));
    }
    for map in &maps {
        assert!(map.is_odd());
        for m in [0.0, 0.3, 0.8] {
            let a = map.evaluate(m, 3.0).unwrap();
            let b = map.evaluate(-m, 3.0).unwrap();
            assert!((a + b).abs() < 1e-8, "{:?} m {m}: {a} {b}", map.backend());
        }
    }
    assert!(!spectral(ColoredModel::NS, 0.2).is_odd());
}

#[test]
fn spectral_map_tracks_the_expansion() {
    let spec =
        ProblemSpec::colored(ColoredModel::OU, bistable_potential(), 1.0, 10.0, 0.1).unwrap();
    let s = SpectralSetup {
        degrees: vec![40, 16],
        ..setup(ColoredModel::OU)
    };
    let map =
        SelfConsistencyMap::spectral(spec.clone(), Some(ColoredModel::OU), s.clone()).unwrap();
    let asy = SelfConsistencyMap::asymptotic_ou(bistable_potential(), 1.0, 0.1).unwrap();
    for m in [0.2, 0.6, 1.0] {
        let a = map.evaluate(m, 10.0).unwrap();
        let b = asy.evaluate(m, 10.0).unwrap();
        assert!((a - b).abs() < 2e-3, "m {m}: {a} {b}");
    }
    let basis = Arc::new(s.basis(&spec).unwrap());
    let direct = colored_r(0.6, &spec, &basis).unwrap();
    assert!((direct - map.evaluate(0.6, 10.0).unwrap()).abs() < 1e-10);
}

#[test]
fn branch_points_reverify() {
    let map = white();
    let start = find_fixed_points(&map, 4.0, 0.1, 2.0, 51).unwrap()[0];
    let branch = continue_branch(&map, (4.0, start), 1.0, &ContinuationOptions::default()).unwrap();
    assert!(branch.points.len() > 5);
    for p in &branch.points {
        assert!((map.evaluate(p.m, p.beta).unwrap() - p.m).abs() < 1e-6);
    }
    let last = branch.points.last().unwrap();
    assert!((last.beta - 1.0).abs() < 1e-9 || branch.truncated.is_some());
}

#[test]
fn pitchfork_of_the_white_map() {
    let map = white();
    let exact = white_critical_beta();
    let found = critical_beta(&map, 1.0, 3.0).unwrap().unwrap();
    assert!((found - exact).abs() < 1e-3, "{found} vs {exact}");
    let refined = refine_pitchfork(&map, 1.5, 3.0).unwrap();
    assert!((residual_slope(&map, 0.0, refined).unwrap()).abs() < 1e-4);
}

#[test]
fn critical_correlation_time() {
    let v = bistable_potential();
    let bc = white_critical_beta();
    assert!(critical_epsilon(&v, bc + 0.2, 1.0).unwrap().is_empty());
    let at = critical_epsilon(&v, bc, 1.0).unwrap();
    assert_eq!(at, vec![0.0]);
    let grid = [bc - 0.4, bc - 0.3, bc - 0.2, bc - 0.1];
    let eps: Vec<f64> = grid
        .iter()
        .map(|&b| critical_epsilon(&v, b, 1.0).unwrap()[0])
        .collect();
    assert!(eps.windows(2).all(|w| w[1] < w[0]), "{eps:?}");
    // the expansion's own pitchfork at that epsilon lands on beta_c
    for (&b, &e) in grid.iter().zip(&eps) {
        let asy = SelfConsistencyMap::asymptotic_ou(v.clone(), 1.0, e).unwrap();
        let found = critical_beta(&asy, 1.0, 3.0).unwrap().unwrap();
        assert!((found - b).abs() < 0.02 * b, "{found} vs {b}");
    }
}

#[test]
fn critical_temperature_moves_down_with_correlation_time() {
    for model in [ColoredModel::OU, ColoredModel::H, ColoredModel::B] {
        let lo = refine_pitchfork(&spectral(model, 0.1), 1.2, 2.8).unwrap();
        let hi = refine_pitchfork(&spectral(model, 0.3), 1.2, 2.8).unwrap();
        assert!(hi < lo, "{model}: {hi} vs {lo}");
    }
}

#[test]
fn time_marching_backend() {
    let spec = ProblemSpec::white(bistable_potential(), 1.0, 3.0).unwrap();
    let s = SpectralSetup {
        shape: IndexShape::Triangle,
        degrees: vec![40],
        sigma: vec![0.3],
        x_weight: XWeight::BetaV,
        quad_degree: None,
    };
    let solver = SolverConfig {
        scheme: Scheme::SemiImplicit,
        dt: 1.0,
        t_final: 2000.0,
        steady_tol: 1e-9,
        ..Default::default()
    };
    let map = SelfConsistencyMap::spectral_mckean(spec, None, s, solver).unwrap();
    assert!(matches!(
        map.evaluate(0.1, 3.0),
        Err(hermite_fp::Error::Unsupported(_))
    ));
    let m = map.mckean_fixed_point(3.0, 0.1, 1.0).unwrap();
    let exact = find_fixed_points(&white(), 3.0, 0.1, 2.0, 51).unwrap()[0];
    assert!((m - exact).abs() < 1e-4, "{m} vs {exact}");
}
