use heatctl_core::elliptic::HelmholtzSolver;
use heatctl_core::synthesis::{closed_truncated, controllability_det, place_poles, vandermonde_det, verify_hurwitz};
use heatctl_core::{assemble_laplacian, inner_product_omega, BoundaryField, BoundaryScheme, Complex, Grid, ScalarField};
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::new(1.0, 0.8, 9, 7).unwrap()
}

fn field(vals: &[f64]) -> ScalarField {
    ScalarField::from_values(grid(), vals.to_vec()).unwrap()
}

fn distinct(v: &[f64], gap: f64) -> bool {
    v.iter().enumerate().all(|(i, a)| v[i + 1..].iter().all(|b| (a - b).abs() > gap))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_weight_symmetric(f in prop::collection::vec(-1.0..1.0f64, 48), g in prop::collection::vec(-1.0..1.0f64, 48)) {
        let op = assemble_laplacian(&grid(), BoundaryScheme::GhostPoint);
        let (f, g) = (field(&f), field(&g));
        let a = inner_product_omega(&op.apply(&f).unwrap(), &g).unwrap();
        let b = inner_product_omega(&f, &op.apply(&g).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn neumann_solve_is_linear(g1 in prop::collection::vec(-1.0..1.0f64, 13), g2 in prop::collection::vec(-1.0..1.0f64, 13), c in -3.0..3.0f64) {
        let op = assemble_laplacian(&grid(), BoundaryScheme::GhostPoint);
        let s = HelmholtzSolver::new(&op, -9.0, &[]).unwrap();
        let a = BoundaryField::from_values(grid(), g1).unwrap();
        let b = BoundaryField::from_values(grid(), g2).unwrap();
        let mut combo = a.clone();
        combo.axpy(c, &b).unwrap();
        let mut expected = s.solve_neumann(&a).unwrap();
        expected.axpy(c, &s.solve_neumann(&b).unwrap()).unwrap();
        let mut diff = s.solve_neumann(&combo).unwrap();
        diff.axpy(-1.0, &expected).unwrap();
        prop_assert!(diff.norm() <= 1e-12 * (1.0 + expected.norm()));
    }

    #[test]
    fn kalman_determinant_magnitude(
        lam in prop::collection::vec(-10.0..10.0f64, 1..=6),
        b in prop::collection::vec(prop_oneof![-2.0..-0.1f64, 0.1..2.0f64], 6),
    ) {
        prop_assume!(distinct(&lam, 0.05));
        let b = &b[..lam.len()];
        let direct = controllability_det(&lam, b);
        let closed = vandermonde_det(&lam, b);
        prop_assert!((direct.abs() - closed.abs()).abs() <= 1e-10 * closed.abs());
    }

    #[test]
    fn placement_hits_targets(
        lam in prop::collection::vec(-5.0..5.0f64, 1..=6),
        f in prop::collection::vec(prop_oneof![-2.0..-0.2f64, 0.2..2.0f64], 6),
    ) {
        prop_assume!(distinct(&lam, 0.3));
        let n = lam.len();
        let f = &f[..n];
        let targets: Vec<Complex<f64>> = (0..n).map(|k| Complex::new(-1.0 - k as f64, 0.0)).collect();
        let l = place_poles(&lam, f, &targets).unwrap();
        let cert = verify_hurwitz(&closed_truncated(&lam, f, &l), 0.0);
        // Small-dimension placement is well scaled here; the eigenvalues of the
        // companion-like closed matrix are sensitive, so compare loosely.
        for (e, t) in cert.eigenvalues.iter().zip(targets.iter()) {
            prop_assert!((e - t).norm() < 1e-6 * (1.0 + t.norm()), "{e} vs {t}");
        }
    }
}
