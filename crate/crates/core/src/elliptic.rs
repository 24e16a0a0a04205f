//! Shifted elliptic solves `(Δ_h − θ) u = rhs` with mixed boundary data.
//!
//! One factorization per shift serves both the inhomogeneous-Neumann problems
//! (`Δζ = θζ`, `∂ζ/∂ν = g`) and the source problems (`Δξ = θξ + f`,
//! `∂ξ/∂ν = 0`); boundary data only changes the right side.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{check_grid, weighted_dot, BoundaryField, ScalarField};
use crate::laplacian::LinearOperator;
use crate::spectral::TruncationBasis;
use crate::sparse::BandedLu;

/// Default resonance margin, relative to the spectral scale.
pub const RESONANCE_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct HelmholtzSolver {
    op: LinearOperator,
    theta: f64,
    lu: BandedLu,
    margin: f64,
}

/// Factorizes `Δ_h − θ` after checking `θ` against the computed spectrum.
pub fn make_solver(op: &LinearOperator, theta: f64, basis: &TruncationBasis) -> Result<HelmholtzSolver> {
    HelmholtzSolver::new(op, theta, &basis.spectrum())
}

impl HelmholtzSolver {
    pub fn new(op: &LinearOperator, theta: f64, spectrum: &[f64]) -> Result<Self> {
        Self::with_margin(op, theta, spectrum, RESONANCE_MARGIN)
    }

    /// `margin` is relative to `max(1, max_j |λ_j|)`.
    pub fn with_margin(op: &LinearOperator, theta: f64, spectrum: &[f64], margin: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidParameter { name: "theta", reason: alloc::format!("{theta}") });
        }
        let scale = spectrum.iter().fold(1.0f64, |s, l| s.max(l.abs()));
        let abs_margin = margin * scale;
        if let Some((index, &eigenvalue)) = spectrum
            .iter()
            .enumerate()
            .filter(|(_, l)| (theta - **l).abs() <= abs_margin)
            .min_by(|a, b| (theta - a.1).abs().total_cmp(&(theta - b.1).abs()))
        {
            return Err(Error::Resonance { shift: theta, index: index + 1, eigenvalue });
        }
        let lu = BandedLu::factor(op.matrix(), -theta)?;
        Ok(HelmholtzSolver { op: op.clone(), theta, lu, margin: abs_margin })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    /// Absolute resonance margin in force.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// `(Δ_h − θ) x` on raw free-node vectors.
    pub fn apply_shifted(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.op.matrix().mul_vec(x, &mut y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi -= self.theta * xi;
        }
        y
    }

    /// Solves `(Δ_h − θ) x = rhs` with one step of iterative refinement.
    pub fn solve_vector(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.lu.solve_in_place(&mut x);
        let r: Vec<f64> = rhs.iter().zip(self.apply_shifted(&x)).map(|(b, ax)| b - ax).collect();
        let mut dx = r;
        self.lu.solve_in_place(&mut dx);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x
    }

    /// `‖(Δ_h − θ) x − rhs‖ / ‖rhs‖` in the trapezoid norm (zero for a zero `rhs`).
    pub fn relative_residual(&self, x: &ScalarField, rhs: &ScalarField) -> f64 {
        let w = self.op.grid().free_weights();
        let ax = self.apply_shifted(x.values());
        let r: Vec<f64> = ax.iter().zip(rhs.values()).map(|(a, b)| a - b).collect();
        let denom = libm::sqrt(weighted_dot(rhs.values(), rhs.values(), &w));
        let num = libm::sqrt(weighted_dot(&r, &r, &w));
        if denom == 0.0 {
            num
        } else {
            num / denom
        }
    }

    /// `Δζ = θζ` in Ω, `ζ = 0` on Γ₀, `∂ζ/∂ν = g` on Γ₁.
    pub fn solve_neumann(&self, g: &BoundaryField) -> Result<ScalarField> {
        let mut rhs = self.op.neumann_load(g)?;
        rhs.scale(-1.0);
        self.solve_source(&rhs)
    }

    /// `Δξ = θξ + f` in Ω, `ξ = 0` on Γ₀, `∂ξ/∂ν = 0` on Γ₁.
    pub fn solve_source(&self, f: &ScalarField) -> Result<ScalarField> {
        check_grid(self.op.grid(), f.grid())?;
        let x = self.solve_vector(f.values());
        ScalarField::from_values(*self.op.grid(), x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product_gamma1, boundary_trace, inner_product_omega, Grid};
    use crate::laplacian::{assemble_laplacian, BoundaryScheme};
    use crate::spectral::compute_eigenpairs;

    fn setup() -> (LinearOperator, Vec<crate::spectral::EigenPair>) {
        let g = Grid::new(1.0, 1.0, 15, 15).unwrap();
        let op = assemble_laplacian(&g, BoundaryScheme::GhostPoint);
        let pairs = compute_eigenpairs(&op, 4).unwrap();
        (op, pairs)
    }

    #[test]
    fn resonance_is_rejected() {
        let (op, pairs) = setup();
        let spectrum: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        let err = HelmholtzSolver::new(&op, spectrum[0], &spectrum).unwrap_err();
        assert!(matches!(err, Error::Resonance { index: 1, .. }));
        assert!(HelmholtzSolver::new(&op, -9.0, &spectrum).is_ok());
        assert!(HelmholtzSolver::new(&op, 0.0, &spectrum).is_ok());
    }

    #[test]
    fn zero_data_gives_zero() {
        let (op, pairs) = setup();
        let spectrum: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        let s = HelmholtzSolver::new(&op, -9.0, &spectrum).unwrap();
        let g = *op.grid();
        assert!(s.solve_neumann(&BoundaryField::zeros(g)).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(s.solve_source(&ScalarField::zeros(g)).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eigenfunction_source() {
        let (op, pairs) = setup();
        let spectrum: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        let gamma = -9.0;
        let s = HelmholtzSolver::new(&op, gamma, &spectrum).unwrap();
        for p in &pairs {
            let xi = s.solve_source(&p.phi).unwrap();
            let scale = 1.0 / (p.lambda - gamma);
            for (a, b) in xi.values().iter().zip(p.phi.values()) {
                assert!((a - scale * b).abs() < 1e-8 * scale.abs());
            }
        }
    }

    #[test]
    fn neumann_map_identity() {
        let (op, pairs) = setup();
        let spectrum: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        let s = HelmholtzSolver::new(&op, 0.0, &spectrum).unwrap();
        let p = BoundaryField::from_fn(*op.grid(), |x, y| libm::sin(x) * libm::sin(y));
        let psi = s.solve_neumann(&p).unwrap();
        for pair in &pairs {
            let lhs = inner_product_omega(&psi, &pair.phi).unwrap();
            let rhs = inner_product_gamma1(&p, &boundary_trace(&pair.phi)).unwrap() / (0.0 - pair.lambda);
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1e-3));
        }
        let mut load = op.neumann_load(&p).unwrap();
        load.scale(-1.0);
        assert!(s.relative_residual(&psi, &load) < 1e-10);
    }
}
