//! Dense semi-discrete generators of the coupled systems and their
//! decoupling transforms. Meant for small grids (a few hundred unknowns):
//! certificates, oracles, and spectral-abscissa checks.
//!
//! State ordering is `(w on free nodes, v on Γ₁ nodes)`.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::grid::{BoundaryField, ScalarField};
use crate::laplacian::LinearOperator;
use crate::synthesis::{complex_spectrum, ControllerSynthesis, ObserverSynthesis};

/// A two-block square matrix `[[A11, A12], [A21, A22]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub matrix: DMatrix<f64>,
    /// Size of the first block.
    pub split: usize,
}

impl BlockMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn block(&self, r: usize, c: usize) -> DMatrix<f64> {
        let (n1, n2) = (self.split, self.dim() - self.split);
        let (r0, rn) = if r == 0 { (0, n1) } else { (n1, n2) };
        let (c0, cn) = if c == 0 { (0, n1) } else { (n1, n2) };
        self.matrix.view((r0, c0), (rn, cn)).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// `T · self · T⁻¹`.
    pub fn conjugate(&self, t: &DMatrix<f64>, t_inv: &DMatrix<f64>) -> BlockMatrix {
        BlockMatrix { matrix: t * &self.matrix * t_inv, split: self.split }
    }

    pub fn spectral_abscissa(&self) -> f64 {
        spectral_abscissa(&self.matrix)
    }
}

/// Largest real part of the spectrum (NaN if the eigensolve fails).
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    complex_spectrum(m).map_or(f64::NAN, |e| e.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Columns `load(e_k)` for the Γ₁ unit vectors.
pub fn load_matrix(op: &LinearOperator) -> Result<DMatrix<f64>> {
    let g = *op.grid();
    let (n, m) = (g.free_count(), g.gamma1_count());
    let mut b = DMatrix::zeros(n, m);
    for k in 0..m {
        let mut e = BoundaryField::zeros(g);
        e.values_mut()[k] = 1.0;
        b.set_column(k, &nalgebra::DVector::from_column_slice(op.neumann_load(&e)?.values()));
    }
    Ok(b)
}

/// Selection of the Γ₁ nodes among the free nodes.
pub fn trace_matrix(op: &LinearOperator) -> DMatrix<f64> {
    let g = op.grid();
    let mut t = DMatrix::zeros(g.gamma1_count(), g.free_count());
    for k in 0..g.gamma1_count() {
        let (i, j) = g.gamma1_node(k);
        t[(k, g.free_index(i, j).expect("Γ₁ nodes are free"))] = 1.0;
    }
    t
}

fn shifted_dense(op: &LinearOperator, shift: f64) -> DMatrix<f64> {
    let mut l = op.matrix().to_dense();
    for d in 0..l.nrows() {
        l[(d, d)] += shift;
    }
    l
}

/// `S` as a dense matrix, by applying the controller's compensator to unit data.
pub fn compensator_matrix(ctrl: &ControllerSynthesis) -> Result<DMatrix<f64>> {
    let g = *ctrl.p().grid();
    let mut s = DMatrix::zeros(g.free_count(), g.gamma1_count());
    for k in 0..g.gamma1_count() {
        let mut e = BoundaryField::zeros(g);
        e.values_mut()[k] = 1.0;
        s.set_column(k, &nalgebra::DVector::from_column_slice(ctrl.apply_s(&e)?.values()));
    }
    Ok(s)
}

/// `P` as a dense matrix, by applying the observer's map to unit fields.
pub fn observer_p_matrix(obs: &ObserverSynthesis) -> Result<DMatrix<f64>> {
    let g = *obs.q().grid();
    let mut p = DMatrix::zeros(g.gamma1_count(), g.free_count());
    for k in 0..g.free_count() {
        let mut e = ScalarField::zeros(g);
        e.values_mut()[k] = 1.0;
        p.set_column(k, &nalgebra::DVector::from_column_slice(obs.apply_p(&e)?.values()));
    }
    Ok(p)
}

/// Row vector `f ↦ ⟨f, kernel⟩_Ω`.
fn functional_row(kernel: &ScalarField) -> DMatrix<f64> {
    let w = kernel.grid().free_weights();
    let vals: Vec<f64> = kernel.values().iter().zip(&w).map(|(k, w)| k * w).collect();
    DMatrix::from_row_slice(1, vals.len(), &vals)
}

fn column(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(values.len(), 1, values)
}

fn stack(a11: &DMatrix<f64>, a12: &DMatrix<f64>, a21: &DMatrix<f64>, a22: &DMatrix<f64>) -> BlockMatrix {
    let (n1, n2) = (a11.nrows(), a22.nrows());
    let mut m = DMatrix::zeros(n1 + n2, n1 + n2);
    m.view_mut((0, 0), (n1, n1)).copy_from(a11);
    m.view_mut((0, n1), (n1, n2)).copy_from(a12);
    m.view_mut((n1, 0), (n2, n1)).copy_from(a21);
    m.view_mut((n1, n1), (n2, n2)).copy_from(a22);
    BlockMatrix { matrix: m, split: n1 }
}

fn identity_pair(n1: usize, n2: usize, off: &DMatrix<f64>, upper: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut t = DMatrix::identity(n1 + n2, n1 + n2);
    let mut t_inv = t.clone();
    if upper {
        t.view_mut((0, n1), (n1, n2)).copy_from(off);
        t_inv.view_mut((0, n1), (n1, n2)).copy_from(&(-off));
    } else {
        t.view_mut((n1, 0), (n2, n1)).copy_from(off);
        t_inv.view_mut((n1, 0), (n2, n1)).copy_from(&(-off));
    }
    (t, t_inv)
}

/// Closed-loop generator `[[L+μ, B], [−pK, −pKS − α]]` acting on `(w, v)`.
pub fn closed_loop_generator(op: &LinearOperator, ctrl: &ControllerSynthesis) -> Result<BlockMatrix> {
    let mu = ctrl.basis().mu();
    let a11 = shifted_dense(op, mu);
    let b = load_matrix(op)?;
    let s = compensator_matrix(ctrl)?;
    let pk = column(ctrl.p().values()) * functional_row(ctrl.kernel());
    let m = op.grid().gamma1_count();
    let a22 = -(&pk * &s) - DMatrix::identity(m, m) * ctrl.alpha();
    Ok(stack(&a11, &b, &(-pk), &a22))
}

/// `𝕊 = [[I, S], [0, I]]` and its inverse.
pub fn sylvester_transform(ctrl: &ControllerSynthesis) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let s = compensator_matrix(ctrl)?;
    Ok(identity_pair(s.nrows(), s.ncols(), &s, true))
}

/// Observer error generator `[[L+μ, −K_field C_v], [Q T, L_trace C_v − β]]`
/// acting on `(w − ŵ, v − v̂)`.
pub fn observer_error_generator(op: &LinearOperator, obs: &ObserverSynthesis) -> Result<BlockMatrix> {
    let g = op.grid();
    let mu = obs.basis().mu();
    let a11 = shifted_dense(op, mu);
    let cw = g.gamma1_weights();
    let cv = DMatrix::from_row_slice(1, cw.len(), &cw);
    let a12 = -(column(obs.k_field().values()) * &cv);
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(obs.q().values()));
    let a21 = q * trace_matrix(op);
    let m = g.gamma1_count();
    let a22 = column(obs.l_trace().values()) * &cv - DMatrix::identity(m, m) * obs.beta();
    Ok(stack(&a11, &a12, &a21, &a22))
}

/// `ℙ = [[I, 0], [P, I]]` and its inverse.
pub fn observer_transform(obs: &ObserverSynthesis) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = observer_p_matrix(obs)?;
    Ok(identity_pair(p.ncols(), p.nrows(), &p, false))
}

/// `S` from an independent dense solve of `(L + μ + α) S = B`.
pub fn dense_compensator(op: &LinearOperator, mu: f64, alpha: f64) -> Result<DMatrix<f64>> {
    let b = load_matrix(op)?;
    Ok(shifted_dense(op, mu + alpha).lu().solve(&b).unwrap_or_else(|| DMatrix::from_element(b.nrows(), b.ncols(), f64::NAN)))
}

/// `P = −Q T (L + μ + β)⁻¹` from an independent dense solve.
pub fn dense_observer_p(op: &LinearOperator, q: &BoundaryField, mu: f64, beta: f64) -> DMatrix<f64> {
    let qt = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(q.values())) * trace_matrix(op);
    // P A = −QT with A = L + μ + β, i.e. Aᵀ Pᵀ = −(QT)ᵀ.
    let at = shifted_dense(op, mu + beta).transpose();
    let n = qt.nrows();
    at.lu()
        .solve(&(-qt.transpose()))
        .map(|pt| pt.transpose())
        .unwrap_or_else(|| DMatrix::from_element(n, op.dim(), f64::NAN))
}

/// States flattened as `(w, v)`.
pub fn stack_state(w: &ScalarField, v: &BoundaryField) -> nalgebra::DVector<f64> {
    let mut x = nalgebra::DVector::zeros(w.values().len() + v.values().len());
    x.rows_mut(0, w.values().len()).copy_from_slice(w.values());
    x.rows_mut(w.values().len(), v.values().len()).copy_from_slice(v.values());
    x
}

/// Trapezoid-weighted norm of a stacked `(w, v)` state.
pub fn state_norm(op: &LinearOperator, x: &nalgebra::DVector<f64>) -> f64 {
    let wf = op.grid().free_weights();
    let wb = op.grid().gamma1_weights();
    let s: f64 = wf.iter().chain(&wb).zip(x.iter()).map(|(w, v)| w * v * v).sum();
    libm::sqrt(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::laplacian::{assemble_laplacian, BoundaryScheme};
    use crate::spectral::truncate_operator;
    use crate::synthesis::GainChoice;

    fn setup() -> (LinearOperator, ControllerSynthesis, ObserverSynthesis) {
        let g = Grid::new(1.0, 1.0, 11, 11).unwrap();
        let op = assemble_laplacian(&g, BoundaryScheme::GhostPoint);
        let basis = truncate_operator(&op, 6.0, 4).unwrap();
        let p = BoundaryField::from_fn(g, |x, y| libm::sin(x) * libm::sin(y));
        let ctrl = ControllerSynthesis::build(&op, &basis, 3.0, Some(&p), &GainChoice::Fixed(vec![15.0])).unwrap();
        let obs = ObserverSynthesis::build(&op, &basis, 3.0, None, &GainChoice::default()).unwrap();
        (op, ctrl, obs)
    }

    #[test]
    fn compensator_matches_dense_solve() {
        let (op, ctrl, obs) = setup();
        let s = compensator_matrix(&ctrl).unwrap();
        let d = dense_compensator(&op, 6.0, 3.0).unwrap();
        assert!((&s - &d).norm() < 1e-10 * d.norm());
        let p = observer_p_matrix(&obs).unwrap();
        let d = dense_observer_p(&op, obs.q(), 6.0, 3.0);
        assert!((&p - &d).norm() < 1e-10 * d.norm());
    }

    #[test]
    fn transforms_decouple() {
        let (op, ctrl, obs) = setup();
        let a = closed_loop_generator(&op, &ctrl).unwrap();
        let (t, ti) = sylvester_transform(&ctrl).unwrap();
        let c = a.conjugate(&t, &ti);
        assert!(c.block(0, 1).norm() < 1e-8 * a.norm());
        // (2,2) block becomes −α.
        let m = op.grid().gamma1_count();
        assert!((c.block(1, 1) + DMatrix::identity(m, m) * 3.0).norm() < 1e-8 * a.norm());

        let e = observer_error_generator(&op, &obs).unwrap();
        let (t, ti) = observer_transform(&obs).unwrap();
        let c = e.conjugate(&t, &ti);
        assert!(c.block(1, 0).norm() < 1e-8 * e.norm());
        assert!((c.block(1, 1) + DMatrix::identity(m, m) * 3.0).norm() < 1e-8 * e.norm());
    }

    #[test]
    fn generators_are_stable() {
        let (op, ctrl, obs) = setup();
        assert!(closed_loop_generator(&op, &ctrl).unwrap().spectral_abscissa() < 0.0);
        assert!(observer_error_generator(&op, &obs).unwrap().spectral_abscissa() < 0.0);
    }
}
