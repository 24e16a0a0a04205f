use heatctl_core::grid::Grid;
use heatctl_core::spectral::{analytic_spectrum, compute_eigenpairs};
use heatctl_core::{assemble_laplacian, inner_product_omega, BoundaryScheme};

fn numeric(n: usize, m: usize) -> Vec<f64> {
    let g = Grid::new(1.0, 1.0, n, n).unwrap();
    let op = assemble_laplacian(&g, BoundaryScheme::GhostPoint);
    compute_eigenpairs(&op, m).unwrap().iter().map(|p| p.lambda).collect()
}

#[test]
fn ghost_point_spectrum_converges_to_continuum() {
    let exact: Vec<f64> = analytic_spectrum(1.0, 1.0, 5).iter().map(|e| e.0).collect();
    let coarse = numeric(21, 5);
    let fine = numeric(41, 5);
    for k in 0..5 {
        let e21 = (coarse[k] - exact[k]).abs() / exact[k].abs();
        let e41 = (fine[k] - exact[k]).abs() / exact[k].abs();
        assert!(e41 < e21, "mode {k}: {e21} -> {e41}");
        assert!(e41 < 0.02, "mode {k}: {e41}");
    }
}

#[test]
fn one_sided_first_eigenvalue() {
    let g = Grid::new(1.0, 1.0, 21, 21).unwrap();
    let op = assemble_laplacian(&g, BoundaryScheme::OneSided);
    let l1 = compute_eigenpairs(&op, 2).unwrap()[0].lambda;
    assert!((l1 + 4.6947).abs() < 1e-3, "{l1}");
}

#[test]
fn eigenfields_are_orthonormal() {
    // b = 1/√2 gives a simple spectrum.
    let g = Grid::new(1.0, std::f64::consts::FRAC_1_SQRT_2, 25, 19).unwrap();
    let op = assemble_laplacian(&g, BoundaryScheme::GhostPoint);
    let pairs = compute_eigenpairs(&op, 6).unwrap();
    for (i, a) in pairs.iter().enumerate() {
        for (j, b) in pairs.iter().enumerate() {
            let gram = inner_product_omega(&a.phi, &b.phi).unwrap();
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((gram - expected).abs() < 1e-8, "({i},{j}) = {gram}");
        }
    }
}

#[test]
fn sign_convention() {
    let g = Grid::new(1.0, 1.0, 15, 15).unwrap();
    let op = assemble_laplacian(&g, BoundaryScheme::GhostPoint);
    for p in compute_eigenpairs(&op, 4).unwrap() {
        let big = p.phi.values().iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(big > 0.0);
    }
}
