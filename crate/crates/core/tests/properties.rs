use std::sync::Arc;

use hermite_fp::basis::gaussian_exponent;
use hermite_fp::bifurcation::{initial_condition, SelfConsistencyMap, SpectralSetup, XWeight};
use hermite_fp::hermite::hermite_values;
use hermite_fp::mc::{simulate, McConfig};
use hermite_fp::operators::{bistable_potential, schrodinger_operator, McKeanOperator};
use hermite_fp::solver::{integrate_mckean, Scheme, SolverConfig};
use hermite_fp::{
    gauss_hermite_rule, hermite_transform, ColoredModel, HermiteBasis, IndexSet, IndexShape, Poly1,
};
use hermite_fp::{ProblemSpec, SpectralField};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn recursion_matches_the_three_term_identity(y in -6.0f64..6.0, n in 2usize..40) {
        let h = hermite_values(n, y);
        for k in 1..n {
            let kf = k as f64;
            let lhs = y * h[k];
            let rhs = (kf + 1.0).sqrt() * h[k + 1] + kf.sqrt() * h[k - 1];
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn gauss_rule_integrates_orthonormally(d in 1usize..30, sigma in 0.2f64..3.0) {
        let rule = gauss_hermite_rule(d, sigma).unwrap();
        let vals: Vec<Vec<f64>> = rule.nodes.iter().map(|x| hermite_values(d, x / sigma)).collect();
        for i in 0..=d {
            for j in 0..=i {
                let s: f64 = vals.iter().zip(&rule.weights).map(|(h, w)| w * h[i] * h[j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((s - want).abs() < 1e-12, "<H{i}, H{j}> = {s}");
            }
        }
    }

    #[test]
    fn gauss_rule_is_exact_to_its_degree(d in 1usize..20, sigma in 0.3f64..2.0) {
        let rule = gauss_hermite_rule(d, sigma).unwrap();
        let deg = 2 * d + 1;
        // moments of N(0, sigma^2): (k - 1)!! sigma^k for even k
        let mut exact = 1.0;
        for k in (0..=deg).step_by(2) {
            if k > 0 {
                exact *= (k - 1) as f64 * sigma * sigma;
            }
            let q: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
            prop_assert!((q - exact).abs() <= 1e-10 * exact, "moment {k}: {q} vs {exact}");
            let odd: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k as i32 + 1)).sum();
            prop_assert!(odd.abs() <= 1e-10 * exact.max(1.0) * (1.0 + sigma).powi(k as i32 + 1));
        }
    }

    #[test]
    fn transform_inverts_evaluation(coeffs in prop::collection::vec(-1.0f64..1.0, 11), sigma in 0.4f64..2.0) {
        let b = Arc::new(HermiteBasis::hermite_functions(IndexSet::triangle(1, 10).unwrap(), vec![sigma]).unwrap());
        let f = SpectralField::new(b.clone(), coeffs.clone()).unwrap();
        let g = hermite_transform(&|x: &[f64]| f.evaluate(x), &b).unwrap();
        for (a, c) in g.coeffs.iter().zip(&coeffs) {
            prop_assert!((a - c).abs() < 1e-11, "{a} vs {c}");
        }
    }

    #[test]
    fn schrodinger_form_is_nonpositive(
        seed_vec in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 31), 200),
        beta in 0.3f64..5.0,
        theta in 0.0f64..2.0,
    ) {
        let spec = ProblemSpec::white(bistable_potential(), theta, beta).unwrap();
        let b = HermiteBasis::hermite_functions(IndexSet::triangle(1, 30).unwrap(), vec![0.6]).unwrap();
        let s = schrodinger_operator(&spec, &b).unwrap();
        let scale = s.max_abs();
        for v in &seed_vec {
            let q: f64 = s.apply(v).iter().zip(v).map(|(a, b)| a * b).sum();
            prop_assert!(q <= 1e-10 * scale, "v^T S v = {q}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn explicit_march_conserves_mass(beta in 0.5f64..4.0, theta in 0.0f64..2.0, mean in -0.5f64..0.5) {
        let spec = ProblemSpec::white(bistable_potential(), theta, beta).unwrap();
        let sigma = 0.8;
        let b = Arc::new(
            HermiteBasis::with_extra_weight(IndexSet::triangle(1, 30).unwrap(), vec![sigma], vec![gaussian_exponent(sigma)])
                .unwrap(),
        );
        let op = McKeanOperator::new(&spec, &b).unwrap();
        let rho0 = initial_condition(&spec, &b, mean, 0.5).unwrap();
        let cfg = SolverConfig {
            scheme: Scheme::Rk45,
            atol: 1e-10,
            rtol: 1e-8,
            t_final: 1.0,
            renormalize: false,
            ..SolverConfig::default()
        };
        let q0 = b.mass_functional();
        let mut worst: f64 = 0.0;
        let mut obs = |_t: f64, c: &[f64]| {
            let m: f64 = q0.iter().zip(c).map(|(a, b)| a * b).sum();
            worst = worst.max((m - 1.0).abs());
        };
        let tr = integrate_mckean(&op, &rho0, &cfg, &[0.25, 0.5, 0.75, 1.0], Some(&mut obs)).unwrap();
        worst = worst.max((tr.field.mass() - 1.0).abs());
        prop_assert!(worst < 10.0 * cfg.rtol, "mass drift {worst}");
    }

    #[test]
    fn every_symmetric_backend_is_odd(m in 0.0f64..1.5, beta in 0.5f64..6.0, eps in 0.05f64..0.4) {
        let white = SelfConsistencyMap::white_exact(bistable_potential(), 1.0).unwrap();
        let asy = SelfConsistencyMap::asymptotic_ou(bistable_potential(), 1.0, eps).unwrap();
        let spec = ProblemSpec::colored(ColoredModel::B, bistable_potential(), 1.0, beta, eps).unwrap();
        let setup = SpectralSetup {
            shape: IndexShape::Rectangle,
            degrees: vec![20, 8],
            sigma: vec![0.3, 1.0],
            x_weight: XWeight::BetaV,
            quad_degree: None,
        };
        let spectral = SelfConsistencyMap::spectral(spec, Some(ColoredModel::B), setup).unwrap();
        for map in [&white, &asy, &spectral] {
            let a = map.evaluate(m, beta).unwrap();
            let b = map.evaluate(-m, beta).unwrap();
            prop_assert!((a + b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn seeded_particles_repeat(seed in any::<u64>(), beta in 1.0f64..6.0) {
        let spec = ProblemSpec::colored(ColoredModel::OU, Poly1::new(vec![0.0, 0.0, -0.5, 0.0, 0.25]), 1.0, beta, 0.2)
            .unwrap();
        let cfg = McConfig { n_particles: 64, burn_in: 0.5, window: 0.5, seed, ..McConfig::default() };
        let a = simulate(&spec, &cfg).unwrap();
        let b = simulate(&spec, &cfg).unwrap();
        prop_assert_eq!(a.m_hat.to_bits(), b.m_hat.to_bits());
        prop_assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}
