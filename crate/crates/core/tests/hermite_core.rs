use std::sync::Arc;

use hermite_fp::{
    eval_hermite, gauss_hermite_rule, hermite_transform, HermiteBasis, IndexSet, IndexShape, Poly1,
    SpectralField,
};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn hermite_values_small_cases() {
    assert_eq!(eval_hermite(0, 0.7, 1.0), 1.0);
    assert!(close(eval_hermite(2, 1.0, 1.0), 0.0, 1e-15));
    // recursion from H0 = 1, H1 = x, compared with (x^3 - 3x) / sqrt(6)
    let h3 = (8.0 - 6.0) / 6f64.sqrt();
    assert!(close(eval_hermite(3, 2.0, 1.0), h3, 1e-14));
    assert!(close(eval_hermite(3, 2.0, 1.0), 2.0 / 6f64.sqrt(), 1e-14));
    assert!(close(eval_hermite(3, 4.0, 2.0), h3, 1e-14));
}

#[test]
fn two_node_rule() {
    let r = gauss_hermite_rule(1, 1.0).unwrap();
    assert!(close(r.nodes[0], -1.0, 1e-14) && close(r.nodes[1], 1.0, 1e-14));
    assert!(close(r.weights[0], 0.5, 1e-14) && close(r.weights[1], 0.5, 1e-14));
}

#[test]
fn rule_second_moment() {
    for d_hat in 1..12 {
        for (sigma, want) in [(1.0, 1.0), (2.0, 4.0)] {
            let r = gauss_hermite_rule(d_hat, sigma).unwrap();
            let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
            assert!(close(m2, want, 1e-12), "d_hat {d_hat} sigma {sigma}: {m2}");
        }
    }
    assert!(gauss_hermite_rule(3, 0.0).is_err());
}

#[test]
fn index_set_sizes() {
    let t = IndexSet::new(IndexShape::Triangle, &[2, 2]).unwrap();
    assert_eq!(t.len(), 6);
    for a in [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]] {
        assert!(t.position(&a).is_some(), "{a:?}");
    }
    assert_eq!(IndexSet::square(2, 1).unwrap().len(), 4);
    assert_eq!(IndexSet::rectangle(&[2, 1]).unwrap().len(), 6);
    assert_eq!(IndexSet::triangle(3, 4).unwrap().len(), 35);
}

fn hermite_functions(d: usize, sigma: f64) -> Arc<HermiteBasis> {
    Arc::new(
        HermiteBasis::hermite_functions(IndexSet::triangle(1, d).unwrap(), vec![sigma]).unwrap(),
    )
}

#[test]
fn transform_of_basis_function_is_unit_vector() {
    let b = hermite_functions(6, 0.8);
    let w = b.weight()[0].clone();
    let f = move |x: &[f64]| (-0.5 * w.eval(x[0])).exp() * eval_hermite(2, x[0], 0.8);
    let c = hermite_transform(&f, &b).unwrap();
    for (k, v) in c.coeffs.iter().enumerate() {
        let want = if k == 2 { 1.0 } else { 0.0 };
        assert!(close(*v, want, 1e-13), "coefficient {k} = {v}");
    }
}

#[test]
fn transform_of_polynomial_with_flat_weight() {
    // W = x^2 / 2 with sigma = 1: the basis weight cancels against the
    // Gaussian so coefficients are plain Hermite coefficients of f exp(-W/2)
    let b = hermite_functions(5, 1.0);
    let f = |x: &[f64]| x[0] * (-0.25 * x[0] * x[0]).exp();
    let c = hermite_transform(&f, &b).unwrap();
    assert!(close(c.coeffs[1], 1.0, 1e-13));
    for k in [0, 2, 3, 4, 5] {
        assert!(close(c.coeffs[k], 0.0, 1e-13));
    }
}

#[test]
fn transform_round_trip_on_nodes() {
    let b = hermite_functions(6, 1.3);
    let w = b.weight()[0].clone();
    let wf = w.clone();
    let f = move |x: &[f64]| x[0].powi(3) * (-0.5 * wf.eval(x[0])).exp();
    let c = hermite_transform(&f, &b).unwrap();
    let rule = gauss_hermite_rule(b.quad_degree()[0], 1.3).unwrap();
    for &x in &rule.nodes {
        let want = x.powi(3) * (-0.5 * w.eval(x)).exp();
        assert!(close(c.evaluate(&[x]), want, 1e-12 * (1.0 + want.abs())));
    }
}

#[test]
fn evaluate_unit_fields() {
    let b = hermite_functions(3, 1.0);
    let e0 = SpectralField::unit(b.clone(), 0);
    assert!(close(e0.evaluate(&[0.0]), 1.0, 1e-15));
    // H1(1) = 1 times the Gaussian factor exp(-1/4) of the basis
    let sigma = 1.7;
    let b = hermite_functions(3, sigma);
    let e1 = SpectralField::unit(b, 1);
    assert!(close(e1.evaluate(&[sigma]), (-0.25f64).exp(), 1e-14));
}

#[test]
fn evaluation_is_linear() {
    let b = Arc::new(
        HermiteBasis::with_extra_weight(
            IndexSet::triangle(2, 5).unwrap(),
            vec![0.6, 0.9],
            vec![Poly1::monomial(0.1, 4), Poly1::zero()],
        )
        .unwrap(),
    );
    let n = b.len();
    let f = SpectralField::new(b.clone(), (0..n).map(|i| (i as f64).sin()).collect()).unwrap();
    let g =
        SpectralField::new(b.clone(), (0..n).map(|i| (i as f64 * 0.37).cos()).collect()).unwrap();
    let (a, c) = (1.5, -0.25);
    let h = SpectralField::new(
        b,
        f.coeffs
            .iter()
            .zip(&g.coeffs)
            .map(|(x, y)| a * x + c * y)
            .collect(),
    )
    .unwrap();
    for p in [[0.1, -0.3], [1.2, 0.4], [-0.8, 2.0]] {
        let lhs = h.evaluate(&p);
        let rhs = a * f.evaluate(&p) + c * g.evaluate(&p);
        assert!(close(lhs, rhs, 1e-13));
    }
}

#[test]
fn grid_evaluation_matches_pointwise() {
    let b = Arc::new(
        HermiteBasis::hermite_functions(IndexSet::rectangle(&[4, 3]).unwrap(), vec![0.7, 1.1])
            .unwrap(),
    );
    let f = SpectralField::new(
        b.clone(),
        (0..b.len()).map(|i| 1.0 / (1.0 + i as f64)).collect(),
    )
    .unwrap();
    let xs = vec![-1.0, 0.0, 0.5];
    let ys = vec![-0.3, 0.9];
    let grid = f.evaluate_grid(&[xs.clone(), ys.clone()]).unwrap();
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            assert!(close(grid[i * ys.len() + j], f.evaluate(&[*x, *y]), 1e-14));
        }
    }
}

#[test]
fn mismatched_field_is_rejected() {
    let b = hermite_functions(3, 1.0);
    assert!(SpectralField::new(b, vec![1.0; 3]).is_err());
}
