use std::sync::Arc;

use hermite_fp::assembly::{
    derivative_matrix_1d, galerkin_matrix, polynomial_galerkin_matrix, position_matrix_1d,
};
use hermite_fp::basis::gaussian_exponent;
use hermite_fp::operators::{
    bistable_potential, colored_operator, colored_operator_parts, colored_weights,
    quadratic_potential, schrodinger_operator, white_operator, McKeanOperator,
};
use hermite_fp::{
    hermite_transform, ColoredModel, DiffOp, HermiteBasis, IndexSet, MultiPoly, OperatorMatrix,
    Poly1, ProblemSpec,
};
use nalgebra::SymmetricEigen;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn only_entries(m: &OperatorMatrix, want: &[(usize, usize, f64)]) {
    let n = m.size();
    for i in 0..n {
        for j in 0..n {
            let w = want
                .iter()
                .find(|(a, b, _)| (*a, *b) == (i, j))
                .map_or(0.0, |t| t.2);
            assert!(
                close(m.get(i, j), w, 1e-13),
                "entry ({i},{j}) = {} expected {w}",
                m.get(i, j)
            );
        }
    }
}

fn poly_basis(d: usize, sigma: f64) -> HermiteBasis {
    HermiteBasis::hermite_functions(IndexSet::triangle(1, d).unwrap(), vec![sigma]).unwrap()
}

#[test]
fn position_matrices() {
    let x = position_matrix_1d(1, 1.0);
    assert_eq!(x[(0, 1)], 1.0);
    assert_eq!(x[(1, 0)], 1.0);
    assert_eq!(x[(0, 0)], 0.0);
    assert!(close(
        position_matrix_1d(2, 1.0)[(2, 1)],
        2f64.sqrt(),
        1e-15
    ));
    assert!(close(position_matrix_1d(2, 3.0)[(1, 0)], 3.0, 1e-15));
}

#[test]
fn derivative_matrices() {
    let d1 = polynomial_galerkin_matrix(&DiffOp::d(1, 0), &poly_basis(2, 1.0)).unwrap();
    only_entries(&d1, &[(0, 1, 1.0), (1, 2, 2f64.sqrt())]);
    let dd = DiffOp::d(1, 0).compose(&DiffOp::d(1, 0));
    let d2 = polynomial_galerkin_matrix(&dd, &poly_basis(2, 1.0)).unwrap();
    only_entries(&d2, &[(0, 2, 2f64.sqrt())]);
    assert!(close(derivative_matrix_1d(2, 2.0)[(0, 1)], 0.5, 1e-15));
    let d_half = polynomial_galerkin_matrix(&DiffOp::d(1, 0), &poly_basis(2, 2.0)).unwrap();
    assert!(close(d_half.get(0, 1), 0.5, 1e-15));
}

#[test]
fn polynomial_differential_operators() {
    let x = MultiPoly::var(1, 0);
    let x_dx = DiffOp::mul(x.clone()).compose(&DiffOp::d(1, 0));
    let m = polynomial_galerkin_matrix(&x_dx, &poly_basis(2, 1.0)).unwrap();
    only_entries(&m, &[(1, 1, 1.0), (2, 2, 2.0), (0, 2, 2f64.sqrt())]);

    // (x - d) d has the Hermite polynomials as eigenfunctions
    let number = (&DiffOp::mul(x) - &DiffOp::d(1, 0)).compose(&DiffOp::d(1, 0));
    let m = polynomial_galerkin_matrix(&number, &poly_basis(5, 1.0)).unwrap();
    let e3: Vec<f64> = (0..6).map(|i| if i == 3 { 1.0 } else { 0.0 }).collect();
    let y = m.apply(&e3);
    for (i, v) in y.iter().enumerate() {
        assert!(close(*v, if i == 3 { 3.0 } else { 0.0 }, 1e-13));
    }

    let id = polynomial_galerkin_matrix(&DiffOp::identity(1), &poly_basis(4, 0.6)).unwrap();
    only_entries(&id, &(0..5).map(|i| (i, i, 1.0)).collect::<Vec<_>>());
}

#[test]
fn schrodinger_kernel_and_symmetry() {
    let spec = ProblemSpec::white(quadratic_potential(), 0.0, 1.0).unwrap();
    let b = Arc::new(poly_basis(30, 1.0));
    let m = schrodinger_operator(&spec, &b).unwrap();
    let g = hermite_transform(&|x: &[f64]| (-0.25 * x[0] * x[0]).exp(), &b).unwrap();
    let r = m.apply(&g.coeffs);
    assert!(r.iter().all(|v| v.abs() < 1e-10), "{:?}", &r[..4]);

    let spec = ProblemSpec::white(bistable_potential(), 1.0, 3.0).unwrap();
    let b = poly_basis(25, 0.7);
    let m = schrodinger_operator(&spec, &b).unwrap();
    let t = m.transpose();
    let diff = m.axpby(1.0, &t, -1.0).max_abs();
    assert!(diff < 1e-10, "{diff}");
}

#[test]
fn schrodinger_spectrum_of_quadratic_potential() {
    for beta in [0.5, 2.0] {
        let spec = ProblemSpec::white(quadratic_potential(), 0.0, beta).unwrap();
        let sigma = (0.5 / beta).sqrt().sqrt() * 1.0;
        let b = poly_basis(40, sigma.max(0.3));
        let m = schrodinger_operator(&spec, &b).unwrap().to_dense();
        let sym = (&m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (k, v) in ev.iter().take(5).enumerate() {
            assert!(
                close(*v, -(k as f64), 1e-6),
                "beta {beta} eigenvalue {k} = {v}"
            );
        }
    }
}

#[test]
fn mckean_operator_is_affine_in_the_mean() {
    let spec = ProblemSpec::white(bistable_potential(), 0.8, 2.0).unwrap();
    let b = HermiteBasis::with_extra_weight(
        IndexSet::triangle(1, 20).unwrap(),
        vec![0.5],
        vec![bistable_potential().scale(2.0)],
    )
    .unwrap();
    let (m1, m2) = (0.3, -0.4);
    let a = white_operator(&spec, m1, &b).unwrap();
    let c = white_operator(&spec, m2, &b).unwrap();
    let d = galerkin_matrix(&DiffOp::d(1, 0), &b).unwrap();
    let lhs = a.axpby(1.0, &c, -1.0);
    let rhs = d.scale((m2 - m1) * spec.theta);
    assert!(lhs.axpby(1.0, &rhs, -1.0).max_abs() < 1e-10);

    let mk = McKeanOperator::new(&spec, &b).unwrap();
    assert!(mk.at(m1).axpby(1.0, &a, -1.0).max_abs() < 1e-10);
}

#[test]
fn white_operator_conserves_mass() {
    // constants lie in the test space when W = 2 x^2 / (2 sigma^2)
    let spec = ProblemSpec::white(bistable_potential(), 1.0, 3.0).unwrap();
    let sigma = 0.8;
    let b = HermiteBasis::with_extra_weight(
        IndexSet::triangle(1, 30).unwrap(),
        vec![sigma],
        vec![gaussian_exponent(sigma)],
    )
    .unwrap();
    let q0 = b.mass_functional();
    let m = white_operator(&spec, 0.2, &b).unwrap();
    let row = m.vecmat(&q0);
    let scale = m.max_abs();
    assert!(
        row.iter().all(|v| v.abs() < 1e-10 * scale),
        "{:?}",
        &row[..4]
    );
}

#[test]
fn white_operator_at_zero_coupling_matches_schrodinger_path() {
    // with W = beta V the white operator is conjugate to the symmetric one
    let beta = 1.5;
    let spec = ProblemSpec::white(bistable_potential(), 0.0, beta).unwrap();
    let sigma = 0.6;
    let plain = poly_basis(20, sigma);
    let weighted = HermiteBasis::with_extra_weight(
        IndexSet::triangle(1, 20).unwrap(),
        vec![sigma],
        vec![bistable_potential().scale(beta)],
    )
    .unwrap();
    let s = schrodinger_operator(&spec, &plain).unwrap();
    let w = white_operator(&spec, 0.0, &weighted).unwrap();
    // in the weighted basis exp(beta V / 2) cancels so both are the same
    // polynomial operator scaled by 1 / beta in the second-order part
    let diff = s.axpby(1.0, &w, -1.0).max_abs();
    assert!(diff < 1e-10 * s.max_abs(), "{diff}");
}

fn ou_basis(spec: &ProblemSpec, d: usize) -> HermiteBasis {
    let sig = vec![0.7, 0.7];
    let w = colored_weights(spec, &Poly1::zero(), &sig).unwrap();
    HermiteBasis::new(IndexSet::triangle(2, d).unwrap(), sig, w).unwrap()
}

#[test]
fn ou_noise_block_annihilates_stationary_law() {
    let spec =
        ProblemSpec::colored(ColoredModel::OU, quadratic_potential(), 0.0, 1.0, 0.3).unwrap();
    // sigma_eta = 1 makes exp(-eta^2 / 2) the first basis factor exactly
    let sig = vec![0.7, 1.0];
    let w = colored_weights(&spec, &Poly1::zero(), &sig).unwrap();
    let b =
        Arc::new(HermiteBasis::new(IndexSet::triangle(2, 12).unwrap(), sig, w.clone()).unwrap());
    let parts = colored_operator_parts(&spec, 0.0, &b).unwrap();
    let wx = w[0].clone();
    let f = hermite_transform(
        &|x: &[f64]| (1.0 + x[0] * x[0]) * (-0.5 * wx.eval(x[0]) - 0.5 * x[1] * x[1]).exp(),
        &b,
    )
    .unwrap();
    assert!(f.norm() > 0.1);
    let r = parts.noise.apply(&f.coeffs);
    assert!(r.iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn epsilon_scaling_of_blocks() {
    let spec = ProblemSpec::colored(ColoredModel::OU, bistable_potential(), 1.0, 2.0, 0.2).unwrap();
    let b = ou_basis(&spec, 10);
    let parts = colored_operator_parts(&spec, 0.1, &b).unwrap();
    let full1 = colored_operator(&spec, 0.1, &b).unwrap();
    let mut spec2 = spec.clone();
    spec2.epsilon = Some(0.4);
    let full2 = colored_operator(&spec2, 0.1, &b).unwrap();
    // L(eps) - L(2 eps) = coupling (1/eps - 1/(2 eps)) + noise (1/eps^2 - 1/(4 eps^2))
    let want = parts
        .coupling
        .scale(0.5 / 0.2)
        .axpby(1.0, &parts.noise, 0.75 / 0.04);
    let got = full1.axpby(1.0, &full2, -1.0);
    assert!(got.axpby(1.0, &want, -1.0).max_abs() < 1e-9 * want.max_abs());
    for (i, j, v) in parts.noise.triplets() {
        assert!(close(parts.noise.scale(0.25).get(i, j), 0.25 * v, 1e-14));
    }
}

#[test]
fn dimension_mismatch_is_reported() {
    let spec = ProblemSpec::colored(ColoredModel::H, quadratic_potential(), 0.0, 1.0, 0.5).unwrap();
    let b = poly_basis(5, 1.0);
    assert!(matches!(
        colored_operator(&spec, 0.0, &b),
        Err(hermite_fp::Error::DimensionMismatch(_))
    ));
}
