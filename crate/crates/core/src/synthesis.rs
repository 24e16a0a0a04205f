//! Truncated-mode gain synthesis: shape functions, pole placement, the
//! feedback and observer objects built on top of them, and their certificates.
//!
//! Sign conventions. With `Φ` the inhomogeneous-Neumann solution map at
//! `θ = −α−μ`, the compensator is `S = −Φ`, and the actuator state is driven
//! by `u_v = −⟨w − φ_v, Σ l_k φ_k⟩`. Projected on the unstable modes this
//! closes as `Λ_N + F_N L_N` with `f_k = ⟨Φp, φ_k⟩`. On the observer side,
//! `γ = −β−μ`, `ξ_j = (Δ_h − γ)⁻¹ φ_j` and the boundary injection is
//! `L = −Σ k_j q ξ_j|_{Γ₁}`; the error modes close as `Λ_N + K_N J_N`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};

use crate::elliptic::HelmholtzSolver;
use crate::error::{Error, Result};
use crate::grid::{boundary_trace, check_grid, inner_product_gamma1, inner_product_omega, weighted_dot, BoundaryField, ScalarField};
use crate::laplacian::LinearOperator;
use crate::spectral::TruncationBasis;

/// Floor on `|⟨p̂, φ_j⟩_{Γ₁}|` for a unit-norm shape function.
pub const SHAPE_FLOOR: f64 = 1e-8;
/// Floor on `|f_k|` and `|J_q(φ_j)|`.
pub const CERTIFICATE_FLOOR: f64 = 1e-10;
/// Hurwitz margin relative to `max(1, max |Λ_N|)`.
pub const HURWITZ_MARGIN: f64 = 1e-3;

const MAX_HALVINGS: usize = 60;

/// Normalized products `⟨p/‖p‖, trace φ_j⟩_{Γ₁}` for `j ≤ N`.
pub fn shape_products(basis: &TruncationBasis, p: &BoundaryField) -> Result<Vec<f64>> {
    check_grid(basis.grid(), p.grid())?;
    let norm = p.norm();
    basis
        .unstable()
        .iter()
        .map(|pair| Ok(if norm > 0.0 { inner_product_gamma1(p, &boundary_trace(&pair.phi))? / norm } else { 0.0 }))
        .collect()
}

fn shape_ok(products: &[f64]) -> bool {
    products.iter().all(|c| c.abs() > SHAPE_FLOOR)
}

/// A boundary shape with nonzero products against every unstable mode.
///
/// An admissible seed is returned unchanged; an identically zero seed is
/// rejected. Otherwise the greedy construction starts from `trace φ₁` and,
/// for each failing mode `j`, adds `γ·trace φ_j` with `γ` halved from 1 until
/// the products for modes `1..=j` are all nonzero.
pub fn construct_shape(basis: &TruncationBasis, seed: Option<&BoundaryField>) -> Result<BoundaryField> {
    let n = basis.n_trunc();
    if n == 0 {
        return Err(Error::NoUnstableModes);
    }
    if let Some(seed) = seed {
        check_grid(basis.grid(), seed.grid())?;
        if seed.norm() == 0.0 {
            return Err(Error::InvalidParameter { name: "shape", reason: "shape function is identically zero".into() });
        }
        if shape_ok(&shape_products(basis, seed)?) {
            return Ok(seed.clone());
        }
    }
    let traces: Vec<BoundaryField> = basis.unstable().iter().map(|pair| boundary_trace(&pair.phi)).collect();
    let mut p = traces[0].clone();
    let prefix_ok = |p: &BoundaryField, j: usize| -> Result<bool> { Ok(shape_ok(&shape_products(basis, p)?[..=j])) };
    for j in 1..n {
        if prefix_ok(&p, j)? {
            continue;
        }
        let mut gamma = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let mut cand = p.clone();
            cand.axpy(gamma, &traces[j])?;
            if prefix_ok(&cand, j)? {
                p = cand;
                accepted = true;
                break;
            }
            gamma *= 0.5;
        }
        if !accepted {
            return Err(Error::ShapeConstruction { index: j + 1 });
        }
    }
    if let Some(j) = shape_products(basis, &p)?.iter().position(|c| c.abs() <= SHAPE_FLOOR) {
        return Err(Error::ShapeConstruction { index: j + 1 });
    }
    Ok(p)
}

/// `f_k = ⟨Φp, φ_k⟩_Ω` at the solver's shift.
pub fn compute_fn(basis: &TruncationBasis, p: &BoundaryField, solver: &HelmholtzSolver) -> Result<Vec<f64>> {
    let zeta = solver.solve_neumann(p)?;
    let f: Vec<f64> =
        basis.unstable().iter().map(|pair| inner_product_omega(&zeta, &pair.phi)).collect::<Result<_>>()?;
    if let Some((index, v)) = f.iter().enumerate().find(|(_, v)| v.abs() < CERTIFICATE_FLOOR) {
        return Err(Error::LostCertificate { what: "controllability", index: index + 1, value: v.abs() });
    }
    Ok(f)
}

/// Both evaluations of `J_q^γ(φ_j)`, plus the `ξ_j` used by the direct one.
#[derive(Debug, Clone)]
pub struct ObservationRow {
    /// `−∫_{Γ₁} q ξ_j`.
    pub direct: Vec<f64>,
    /// `⟨φ_j, η_q⟩_Ω` with `η_q` the Neumann solution for data `q`.
    pub adjoint: Vec<f64>,
    pub xi: Vec<ScalarField>,
}

impl ObservationRow {
    /// Largest relative disagreement between the two routes.
    pub fn route_gap(&self) -> f64 {
        self.direct
            .iter()
            .zip(&self.adjoint)
            .map(|(d, a)| (d - a).abs() / d.abs().max(a.abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

pub fn compute_jn(basis: &TruncationBasis, q: &BoundaryField, solver: &HelmholtzSolver) -> Result<ObservationRow> {
    check_grid(basis.grid(), q.grid())?;
    let eta = solver.solve_neumann(q)?;
    let mut direct = Vec::with_capacity(basis.n_trunc());
    let mut adjoint = Vec::with_capacity(basis.n_trunc());
    let mut xi = Vec::with_capacity(basis.n_trunc());
    for pair in basis.unstable() {
        let x = solver.solve_source(&pair.phi)?;
        direct.push(-inner_product_gamma1(q, &boundary_trace(&x))?);
        adjoint.push(inner_product_omega(&pair.phi, &eta)?);
        xi.push(x);
    }
    if let Some((index, v)) = direct.iter().enumerate().find(|(_, v)| v.abs() < CERTIFICATE_FLOOR) {
        return Err(Error::LostCertificate { what: "observability", index: index + 1, value: v.abs() });
    }
    Ok(ObservationRow { direct, adjoint, xi })
}

fn check_targets(n: usize, targets: &[Complex<f64>]) -> Result<()> {
    if targets.len() != n {
        return Err(Error::InvalidTargets(format!("expected {n} poles, got {}", targets.len())));
    }
    let scale = targets.iter().fold(1.0f64, |s, t| s.max(modulus(*t)));
    let tol = 1e-12 * scale;
    let mut used = vec![false; n];
    for (i, t) in targets.iter().enumerate() {
        if !(t.re.is_finite() && t.im.is_finite()) || t.re >= 0.0 {
            return Err(Error::InvalidTargets(format!("pole {t} must have negative real part")));
        }
        if t.im.abs() <= tol || used[i] {
            continue;
        }
        let partner = (0..n).find(|&k| k != i && !used[k] && modulus(targets[k] - t.conj()) <= tol * 1e3);
        match partner {
            Some(k) => {
                used[i] = true;
                used[k] = true;
            }
            None => return Err(Error::InvalidTargets(format!("pole {t} has no conjugate partner"))),
        }
    }
    Ok(())
}

/// Single-input pole placement for diagonal `Λ`: returns `L` with
/// `spec(Λ + F·L) = targets`.
///
/// Matching `det(sI − Λ − F L)` with `∏(s − t_j)` at `s = d_i` gives
/// `l_i = −∏_j (d_i − t_j) / (f_i ∏_{k≠i} (d_i − d_k))`.
pub fn place_poles(lambda: &[f64], f: &[f64], targets: &[Complex<f64>]) -> Result<Vec<f64>> {
    let n = lambda.len();
    if f.len() != n {
        return Err(Error::ShapeMismatch { expected: n, found: f.len() });
    }
    check_targets(n, targets)?;
    if let Some(index) = f.iter().position(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::Uncontrollable { index: index + 1 });
    }
    let scale = lambda.iter().fold(1.0f64, |s, d| s.max(d.abs()));
    for i in 0..n {
        for k in i + 1..n {
            if (lambda[i] - lambda[k]).abs() <= 1e-12 * scale {
                return Err(Error::RepeatedDiagonal { i: i + 1, j: k + 1 });
            }
        }
    }
    Ok((0..n)
        .map(|i| {
            let d = Complex::new(lambda[i], 0.0);
            let num = targets.iter().fold(Complex::new(1.0, 0.0), |acc, t| acc * (d - t));
            let den: f64 = (0..n).filter(|&k| k != i).map(|k| lambda[i] - lambda[k]).product();
            -num.re / (f[i] * den)
        })
        .collect())
}

/// Dual placement: `K` with `spec(Λ + K·J) = targets`.
pub fn place_observer_gain(lambda: &[f64], j: &[f64], targets: &[Complex<f64>]) -> Result<Vec<f64>> {
    // Λ is diagonal, so Λ + K J is the transpose of Λ + Jᵀ Kᵀ.
    place_poles(lambda, j, targets)
}

/// `Λ + col·row` as a dense matrix.
pub fn closed_truncated(lambda: &[f64], col: &[f64], row: &[f64]) -> DMatrix<f64> {
    let n = lambda.len();
    DMatrix::from_fn(n, n, |i, k| if i == k { lambda[i] } else { 0.0 } + col[i] * row[k])
}

fn modulus(z: Complex<f64>) -> f64 {
    libm::hypot(z.re, z.im)
}

/// Determinant of the Kalman matrix `[B, ΛB, …, Λ^{N−1}B]` for diagonal `Λ`.
pub fn controllability_det(lambda: &[f64], b: &[f64]) -> f64 {
    let n = lambda.len();
    if n == 0 {
        return 1.0;
    }
    let m = DMatrix::from_fn(n, n, |i, k| b[i] * libm::pow(lambda[i], k as f64));
    m.lu().determinant()
}

/// `b₁⋯b_N ∏_{i<j} (λ_i − λ_j)`. Equal in magnitude to [`controllability_det`];
/// the signs differ by `(−1)^{N(N−1)/2}`.
pub fn vandermonde_det(lambda: &[f64], b: &[f64]) -> f64 {
    let n = lambda.len();
    let mut d: f64 = b.iter().product();
    for i in 0..n {
        for j in i + 1..n {
            d *= lambda[i] - lambda[j];
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct HurwitzCertificate {
    pub abscissa: f64,
    pub margin: f64,
    pub is_hurwitz: bool,
    pub eigenvalues: Vec<Complex<f64>>,
}

/// Eigenvalues of a real square matrix, sorted by decreasing real part.
///
/// Parlett–Reinsch balancing followed by a bounded Schur iteration; the
/// convergence tolerance is loosened stepwise if the strict one stalls.
/// `None` if no attempt converges.
pub fn complex_spectrum(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    if m.nrows() == 0 {
        return Some(Vec::new());
    }
    let mut balanced = m.clone();
    nalgebra::linalg::balancing::balance_parlett_reinsch(&mut balanced);
    // Successful attempts need a few sweeps per eigenvalue; a stalled one is abandoned early.
    let max_iter = 30 * m.nrows().max(10);
    for eps in [1e-14, 1e-13, 1e-12, 1e-11, 1e-10] {
        if let Some(schur) = balanced.clone().try_schur(eps, max_iter) {
            let mut eigs: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
            eigs.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
            return Some(eigs);
        }
    }
    None
}

/// A failed eigensolve yields a NaN abscissa and no certificate.
pub fn verify_hurwitz(m: &DMatrix<f64>, margin: f64) -> HurwitzCertificate {
    let (abscissa, eigenvalues) = match complex_spectrum(m) {
        Some(e) => (e.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max), e),
        None => (f64::NAN, Vec::new()),
    };
    HurwitzCertificate { abscissa, margin, is_hurwitz: abscissa < -margin, eigenvalues }
}

pub fn hurwitz_margin(lambda_n: &[f64]) -> f64 {
    HURWITZ_MARGIN * lambda_n.iter().fold(1.0f64, |s, d| s.max(d.abs()))
}

/// Mirror-and-shift targets `−(λ_j+μ) − σ`.
pub fn default_targets(lambda_n: &[f64], sigma: f64) -> Vec<Complex<f64>> {
    lambda_n.iter().map(|d| Complex::new(-d - sigma, 0.0)).collect()
}

/// How the truncated gain is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum GainChoice {
    MirrorShift { sigma: f64 },
    Targets(Vec<Complex<f64>>),
    /// Gain entries given directly (e.g. `l₁ = 15`).
    Fixed(Vec<f64>),
}

impl Default for GainChoice {
    fn default() -> Self {
        GainChoice::MirrorShift { sigma: 1.0 }
    }
}

fn resolve_gain(choice: &GainChoice, lambda_n: &[f64], coupling: &[f64], observer: bool) -> Result<Vec<f64>> {
    let place = if observer { place_observer_gain } else { place_poles };
    match choice {
        GainChoice::MirrorShift { sigma } => {
            if sigma.is_nan() || *sigma <= 0.0 {
                return Err(Error::InvalidParameter { name: "sigma", reason: format!("must be positive, got {sigma}") });
            }
            place(lambda_n, coupling, &default_targets(lambda_n, *sigma))
        }
        GainChoice::Targets(t) => place(lambda_n, coupling, t),
        GainChoice::Fixed(g) if g.len() == lambda_n.len() => Ok(g.clone()),
        GainChoice::Fixed(g) => Err(Error::ShapeMismatch { expected: lambda_n.len(), found: g.len() }),
    }
}

fn mode_sum(basis: &TruncationBasis, coeffs: &[f64]) -> Result<ScalarField> {
    let mut out = ScalarField::zeros(*basis.grid());
    for (pair, c) in basis.unstable().iter().zip(coeffs) {
        out.axpy(*c, &pair.phi)?;
    }
    Ok(out)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") })
    }
}

/// Dynamic boundary feedback: actuator state `v` with `v_t = −αv + p·u_v`.
#[derive(Debug, Clone)]
pub struct ControllerSynthesis {
    basis: TruncationBasis,
    alpha: f64,
    p: BoundaryField,
    lambda_n: Vec<f64>,
    f_n: Vec<f64>,
    l_n: Vec<f64>,
    kernel: ScalarField,
    solver: HelmholtzSolver,
    certificate: HurwitzCertificate,
}

impl ControllerSynthesis {
    /// With `N = 0` the gain is empty and the feedback vanishes identically.
    pub fn build(
        op: &LinearOperator,
        basis: &TruncationBasis,
        alpha: f64,
        p_seed: Option<&BoundaryField>,
        gains: &GainChoice,
    ) -> Result<Self> {
        positive("alpha", alpha)?;
        check_grid(op.grid(), basis.grid())?;
        let theta = -alpha - basis.mu();
        let solver = HelmholtzSolver::new(op, theta, &basis.spectrum())?;
        let lambda_n = basis.shifted_unstable();
        let (p, f_n, l_n) = if basis.n_trunc() == 0 {
            (p_seed.cloned().unwrap_or_else(|| BoundaryField::zeros(*op.grid())), Vec::new(), Vec::new())
        } else {
            let p = construct_shape(basis, p_seed)?;
            let f_n = compute_fn(basis, &p, &solver)?;
            let l_n = resolve_gain(gains, &lambda_n, &f_n, false)?;
            (p, f_n, l_n)
        };
        let kernel = mode_sum(basis, &l_n)?;
        let certificate = verify_hurwitz(&closed_truncated(&lambda_n, &f_n, &l_n), hurwitz_margin(&lambda_n));
        if !certificate.is_hurwitz {
            return Err(Error::NotHurwitz { abscissa: certificate.abscissa });
        }
        Ok(ControllerSynthesis { basis: basis.clone(), alpha, p, lambda_n, f_n, l_n, kernel, solver, certificate })
    }

    pub fn basis(&self) -> &TruncationBasis {
        &self.basis
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Shift of the compensator solves, `−α−μ`.
    pub fn theta(&self) -> f64 {
        self.solver.theta()
    }

    pub fn p(&self) -> &BoundaryField {
        &self.p
    }

    pub fn lambda_n(&self) -> &[f64] {
        &self.lambda_n
    }

    pub fn f_n(&self) -> &[f64] {
        &self.f_n
    }

    pub fn l_n(&self) -> &[f64] {
        &self.l_n
    }

    /// `Σ l_k φ_k`.
    pub fn kernel(&self) -> &ScalarField {
        &self.kernel
    }

    pub fn solver(&self) -> &HelmholtzSolver {
        &self.solver
    }

    pub fn certificate(&self) -> &HurwitzCertificate {
        &self.certificate
    }

    pub fn closed_matrix(&self) -> DMatrix<f64> {
        closed_truncated(&self.lambda_n, &self.f_n, &self.l_n)
    }

    /// `φ_v`: `Δφ = θφ`, `∂φ/∂ν = v`.
    pub fn phi_v(&self, v: &BoundaryField) -> Result<ScalarField> {
        self.solver.solve_neumann(v)
    }

    /// The compensator `S g = −φ_g`.
    pub fn apply_s(&self, g: &BoundaryField) -> Result<ScalarField> {
        let mut s = self.phi_v(g)?;
        s.scale(-1.0);
        Ok(s)
    }

    /// `K f = ⟨f, Σ l_k φ_k⟩_Ω`.
    pub fn apply_k(&self, f: &ScalarField) -> Result<f64> {
        inner_product_omega(f, &self.kernel)
    }

    /// Scalar feedback `u_v = −K(w − φ_v)`.
    pub fn feedback(&self, w: &ScalarField, v: &BoundaryField) -> Result<f64> {
        if self.l_n.is_empty() {
            check_grid(self.kernel.grid(), v.grid())?;
            return Ok(0.0);
        }
        let mut z = w.clone();
        z.axpy(-1.0, &self.phi_v(v)?)?;
        Ok(-self.apply_k(&z)?)
    }

    /// `‖(Δ_h + μ + α) S g − load(g)‖ / ‖load(g)‖` in the trapezoid norm.
    pub fn sylvester_residual(&self, g: &BoundaryField) -> Result<f64> {
        let op = self.solver.operator();
        let sg = self.apply_s(g)?;
        let mut r = op.apply(&sg)?;
        r.axpy(self.basis.mu() + self.alpha, &sg)?;
        let load = op.neumann_load(g)?;
        r.axpy(-1.0, &load)?;
        let w = op.grid().free_weights();
        let den = libm::sqrt(weighted_dot(load.values(), load.values(), &w));
        let num = libm::sqrt(weighted_dot(r.values(), r.values(), &w));
        Ok(if den == 0.0 { num } else { num / den })
    }
}

/// Boundary-filter observer: `v_t = −βv + q·w|_{Γ₁}` is measured through
/// `y_v = ∫_{Γ₁} v`, and the estimate is corrected by
/// `K_field = Σ k_j φ_j` in the interior and `−L_trace` on the filter.
#[derive(Debug, Clone)]
pub struct ObserverSynthesis {
    basis: TruncationBasis,
    beta: f64,
    q: BoundaryField,
    lambda_n: Vec<f64>,
    row: ObservationRow,
    k_n: Vec<f64>,
    k_field: ScalarField,
    l_trace: BoundaryField,
    solver: HelmholtzSolver,
    certificate: HurwitzCertificate,
}

impl ObserverSynthesis {
    pub fn build(
        op: &LinearOperator,
        basis: &TruncationBasis,
        beta: f64,
        q_seed: Option<&BoundaryField>,
        gains: &GainChoice,
    ) -> Result<Self> {
        positive("beta", beta)?;
        check_grid(op.grid(), basis.grid())?;
        let gamma = -beta - basis.mu();
        let solver = HelmholtzSolver::new(op, gamma, &basis.spectrum())?;
        let lambda_n = basis.shifted_unstable();
        let (q, row, k_n) = if basis.n_trunc() == 0 {
            let q = q_seed.cloned().unwrap_or_else(|| BoundaryField::zeros(*op.grid()));
            (q, ObservationRow { direct: Vec::new(), adjoint: Vec::new(), xi: Vec::new() }, Vec::new())
        } else {
            let q = construct_shape(basis, q_seed)?;
            let row = compute_jn(basis, &q, &solver)?;
            let k_n = resolve_gain(gains, &lambda_n, &row.direct, true)?;
            (q, row, k_n)
        };
        let k_field = mode_sum(basis, &k_n)?;
        let mut l_trace = BoundaryField::zeros(*op.grid());
        for (k, xi) in k_n.iter().zip(&row.xi) {
            l_trace.axpy(-k, &q.pointwise(&boundary_trace(xi))?)?;
        }
        let certificate = verify_hurwitz(&closed_truncated(&lambda_n, &k_n, &row.direct), hurwitz_margin(&lambda_n));
        if !certificate.is_hurwitz {
            return Err(Error::NotHurwitz { abscissa: certificate.abscissa });
        }
        Ok(ObserverSynthesis { basis: basis.clone(), beta, q, lambda_n, row, k_n, k_field, l_trace, solver, certificate })
    }

    pub fn basis(&self) -> &TruncationBasis {
        &self.basis
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `−β−μ`.
    pub fn gamma(&self) -> f64 {
        self.solver.theta()
    }

    pub fn q(&self) -> &BoundaryField {
        &self.q
    }

    pub fn lambda_n(&self) -> &[f64] {
        &self.lambda_n
    }

    pub fn j_n(&self) -> &[f64] {
        &self.row.direct
    }

    pub fn j_n_adjoint(&self) -> &[f64] {
        &self.row.adjoint
    }

    pub fn observation_row(&self) -> &ObservationRow {
        &self.row
    }

    pub fn k_n(&self) -> &[f64] {
        &self.k_n
    }

    pub fn k_field(&self) -> &ScalarField {
        &self.k_field
    }

    pub fn l_trace(&self) -> &BoundaryField {
        &self.l_trace
    }

    pub fn solver(&self) -> &HelmholtzSolver {
        &self.solver
    }

    pub fn certificate(&self) -> &HurwitzCertificate {
        &self.certificate
    }

    pub fn closed_matrix(&self) -> DMatrix<f64> {
        closed_truncated(&self.lambda_n, &self.k_n, &self.row.direct)
    }

    /// `P f = −q·((Δ_h − γ)⁻¹ f)|_{Γ₁}`, the solution of `βP + P(A+μ) + QB* = 0`.
    pub fn apply_p(&self, f: &ScalarField) -> Result<BoundaryField> {
        let x = self.solver.solve_source(f)?;
        let mut out = self.q.pointwise(&boundary_trace(&x))?;
        out.scale(-1.0);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::laplacian::{assemble_laplacian, BoundaryScheme};
    use crate::spectral::truncate_operator;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn sorted_eigs(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
        verify_hurwitz(m, 0.0).eigenvalues
    }

    #[test]
    fn scalar_placement() {
        assert_eq!(place_poles(&[1.0], &[1.0], &[c(-1.0)]).unwrap(), vec![-2.0]);
        assert_eq!(place_observer_gain(&[1.0], &[1.0], &[c(-1.0)]).unwrap(), vec![-2.0]);
    }

    #[test]
    fn two_mode_placement() {
        let l = place_poles(&[1.0, -1.0], &[1.0, 1.0], &[c(-2.0), c(-3.0)]).unwrap();
        assert!((l[0] + 6.0).abs() < 1e-14 && (l[1] - 1.0).abs() < 1e-14, "{l:?}");
        let eigs = sorted_eigs(&closed_truncated(&[1.0, -1.0], &[1.0, 1.0], &l));
        assert!((eigs[0] - c(-2.0)).norm() < 1e-10 && (eigs[1] - c(-3.0)).norm() < 1e-10);
    }

    #[test]
    fn complex_targets() {
        let lambda = [2.0, 0.5, -1.0];
        let f = [0.3, -1.2, 0.7];
        let targets = [Complex::new(-1.0, 2.0), Complex::new(-1.0, -2.0), c(-4.0)];
        let l = place_poles(&lambda, &f, &targets).unwrap();
        let eigs = sorted_eigs(&closed_truncated(&lambda, &f, &l));
        for t in &targets {
            assert!(eigs.iter().any(|e| (e - t).norm() < 1e-8), "{eigs:?}");
        }
    }

    #[test]
    fn placement_errors() {
        assert!(matches!(place_poles(&[1.0, 2.0], &[1.0, 0.0], &[c(-1.0), c(-2.0)]), Err(Error::Uncontrollable { index: 2 })));
        assert!(matches!(place_poles(&[1.0, 1.0], &[1.0, 1.0], &[c(-1.0), c(-2.0)]), Err(Error::RepeatedDiagonal { .. })));
        assert!(matches!(place_poles(&[1.0], &[1.0], &[c(1.0)]), Err(Error::InvalidTargets(_))));
        assert!(matches!(place_poles(&[1.0], &[1.0], &[Complex::new(-1.0, 1.0)]), Err(Error::InvalidTargets(_))));
        assert!(matches!(place_poles(&[1.0], &[1.0], &[]), Err(Error::InvalidTargets(_))));
        assert!(matches!(place_observer_gain(&[1.0, 3.0], &[0.0, 1.0], &[c(-1.0), c(-2.0)]), Err(Error::Uncontrollable { index: 1 })));
    }

    #[test]
    fn kalman_determinant() {
        let d = controllability_det(&[1.0, 2.0], &[1.0, 1.0]);
        assert!((d - 1.0).abs() < 1e-14);
        assert!((vandermonde_det(&[1.0, 2.0], &[1.0, 1.0]) + 1.0).abs() < 1e-14);
        assert_eq!(vandermonde_det(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]), 0.0);
        assert!(controllability_det(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).abs() < 1e-14);
        assert!(controllability_det(&[1.5, 1.5], &[1.0, 2.0]).abs() < 1e-14);
    }

    #[test]
    fn hurwitz_certificates() {
        let cert = verify_hurwitz(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]), 1e-3);
        assert!(cert.is_hurwitz);
        assert!((cert.abscissa + 1.0).abs() < 1e-14);
        let cert = verify_hurwitz(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]), 1e-3);
        assert!(!cert.is_hurwitz);
        assert!(cert.abscissa.abs() < 1e-14);
    }

    fn unit_square(n: usize, mu: f64) -> (LinearOperator, TruncationBasis) {
        let g = Grid::new(1.0, 1.0, n, n).unwrap();
        let op = assemble_laplacian(&g, BoundaryScheme::GhostPoint);
        let basis = truncate_operator(&op, mu, 4).unwrap();
        (op, basis)
    }

    #[test]
    fn shapes() {
        let (_, basis) = unit_square(11, 6.0);
        let seed = BoundaryField::from_fn(*basis.grid(), |x, y| libm::sin(x) * libm::sin(y));
        assert_eq!(construct_shape(&basis, Some(&seed)).unwrap(), seed);
        let p = construct_shape(&basis, None).unwrap();
        assert_eq!(p, boundary_trace(&basis.unstable()[0].phi));
        let zero = BoundaryField::zeros(*basis.grid());
        assert!(construct_shape(&basis, Some(&zero)).is_err());

        let (_, stable) = unit_square(11, 1.0);
        assert!(matches!(construct_shape(&stable, None), Err(Error::NoUnstableModes)));
    }

    #[test]
    fn controller_on_unit_square() {
        let (op, basis) = unit_square(21, 6.0);
        let seed = BoundaryField::from_fn(*op.grid(), |x, y| libm::sin(x) * libm::sin(y));
        let ctrl = ControllerSynthesis::build(&op, &basis, 3.0, Some(&seed), &GainChoice::Fixed(vec![15.0])).unwrap();
        let lam = basis.unstable()[0].lambda;
        let closed_form = inner_product_gamma1(&seed, &boundary_trace(&basis.unstable()[0].phi)).unwrap() / (-9.0 - lam);
        assert!(ctrl.f_n()[0] < 0.0);
        assert!((ctrl.f_n()[0] - closed_form).abs() < 1e-8 * closed_form.abs());
        let pole = lam + 6.0 + 15.0 * ctrl.f_n()[0];
        assert!(pole < 0.0);
        assert!((ctrl.certificate().abscissa - pole).abs() < 1e-12);

        let ctrl = ControllerSynthesis::build(&op, &basis, 3.0, Some(&seed), &GainChoice::default()).unwrap();
        assert!((ctrl.certificate().abscissa - (-(lam + 6.0) - 1.0)).abs() < 1e-10);

        let g = BoundaryField::from_fn(*op.grid(), |x, y| 1.0 + x * x - y);
        assert!(ctrl.sylvester_residual(&g).unwrap() < 1e-8);
    }

    #[test]
    fn controller_resonance() {
        let (op, basis) = unit_square(11, 6.0);
        let alpha = -6.0 - basis.pairs()[1].lambda;
        assert!(matches!(
            ControllerSynthesis::build(&op, &basis, alpha, None, &GainChoice::default()),
            Err(Error::Resonance { index: 2, .. })
        ));
        let (op1, stable) = unit_square(11, 1.0);
        let alpha = -1.0 - stable.pairs()[0].lambda;
        assert!(matches!(
            ControllerSynthesis::build(&op1, &stable, alpha, None, &GainChoice::default()),
            Err(Error::Resonance { index: 1, .. })
        ));
        assert!(ControllerSynthesis::build(&op, &basis, -1.0, None, &GainChoice::default()).is_err());
        assert!(matches!(
            ControllerSynthesis::build(&op, &basis, 3.0, None, &GainChoice::Fixed(vec![0.0])),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn stable_plant_needs_no_gain() {
        let (op, basis) = unit_square(11, 1.0);
        let ctrl = ControllerSynthesis::build(&op, &basis, 3.0, None, &GainChoice::default()).unwrap();
        assert!(ctrl.l_n().is_empty() && ctrl.certificate().is_hurwitz);
        let w = ScalarField::from_fn(*op.grid(), |x, y| x * y);
        assert_eq!(ctrl.feedback(&w, &BoundaryField::zeros(*op.grid())).unwrap(), 0.0);
    }

    #[test]
    fn observer_on_unit_square() {
        let (op, basis) = unit_square(21, 6.0);
        let obs = ObserverSynthesis::build(&op, &basis, 3.0, None, &GainChoice::Targets(vec![c(-2.0)])).unwrap();
        let lam = basis.unstable()[0].lambda;
        let j1 = obs.j_n()[0];
        assert!((obs.k_n()[0] - (-2.0 - lam - 6.0) / j1).abs() < 1e-12 * obs.k_n()[0].abs());
        assert!((obs.closed_matrix()[(0, 0)] + 2.0).abs() < 1e-12);
        assert!(obs.observation_row().route_gap() < 1e-8);
        let expected: f64 = obs.k_n().iter().zip(obs.j_n()).map(|(k, j)| k * j).sum();
        assert!((obs.l_trace().integral() - expected).abs() < 1e-8 * expected.abs());
        // C_v P φ_j = J(φ_j).
        let cp = obs.apply_p(&basis.unstable()[0].phi).unwrap().integral();
        assert!((cp - j1).abs() < 1e-10 * j1.abs());
    }
}
