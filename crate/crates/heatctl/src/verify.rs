//! Numerical self-checks behind `heatctl verify`.
//!
//! Each check yields one line. With the one-sided Neumann scheme the discrete
//! operator is not self-adjoint, so the identities that rest on adjointness
//! are reported as expected failures rather than errors.

use std::fmt;

use heatctl_core::elliptic::HelmholtzSolver;
use heatctl_core::generator::{closed_loop_generator, observer_error_generator, observer_transform, sylvester_transform};
use heatctl_core::spectral::truncate_operator;
use heatctl_core::synthesis::{
    construct_shape, controllability_det, default_targets, vandermonde_det, verify_hurwitz, closed_truncated,
};
use heatctl_core::{
    assemble_laplacian, boundary_trace, inner_product_gamma1, inner_product_omega, BoundaryField, BoundaryScheme,
    Complex, ControllerSynthesis, GainChoice, Grid, ObserverSynthesis,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pipeline::Problem;

/// Grids larger than this are decoupled on an 11×11 copy (dense generators).
const DENSE_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Failure that the configured scheme makes unavoidable.
    ExpectedFail,
    /// Expected to fail but passed.
    UnexpectedPass,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, ok: bool, expect_fail: bool, detail: String) -> Check {
        let status = match (ok, expect_fail) {
            (true, false) => Status::Pass,
            (false, false) => Status::Fail,
            (false, true) => Status::ExpectedFail,
            (true, true) => Status::UnexpectedPass,
        };
        Check { name, status, detail }
    }

    fn error(name: &'static str, e: impl fmt::Display) -> Check {
        Check { name, status: Status::Fail, detail: e.to_string() }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS ",
            Status::Fail => "FAIL ",
            Status::ExpectedFail => "XFAIL",
            Status::UnexpectedPass => "XPASS",
        };
        write!(f, "{tag} {:<34} {}", self.name, self.detail)
    }
}

/// `max |a_j − b_j| / max |b_j|`: entries that vanish by symmetry do not blow up the ratio.
pub fn scaled_gap(pairs: &[(f64, f64)]) -> f64 {
    let gap = pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = pairs.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
    if gap == 0.0 {
        0.0
    } else {
        gap / scale
    }
}

/// `(⟨Φg, φ_j⟩, ⟨g, φ_j⟩_Γ₁/(θ − λ_j))` for the first `count` modes.
pub fn neumann_lift_pairs(p: &Problem, g: &BoundaryField, theta: f64, count: usize) -> heatctl_core::Result<Vec<(f64, f64)>> {
    let solver = HelmholtzSolver::new(&p.op, theta, &p.basis.spectrum())?;
    let zeta = solver.solve_neumann(g)?;
    let mut vals = Vec::new();
    for pair in p.basis.pairs().iter().take(count) {
        let lhs = inner_product_omega(&zeta, &pair.phi)?;
        let rhs = inner_product_gamma1(g, &boundary_trace(&pair.phi))? / (theta - pair.lambda);
        vals.push((lhs, rhs));
    }
    Ok(vals)
}

/// Direct and adjoint evaluations of the observation functional on the first `count` modes.
pub fn two_route_pairs(p: &Problem, q: &BoundaryField, gamma: f64, count: usize) -> heatctl_core::Result<Vec<(f64, f64)>> {
    let solver = HelmholtzSolver::new(&p.op, gamma, &p.basis.spectrum())?;
    let eta = solver.solve_neumann(q)?;
    let mut vals = Vec::new();
    for pair in p.basis.pairs().iter().take(count) {
        let xi = solver.solve_source(&pair.phi)?;
        let direct = -inner_product_gamma1(q, &boundary_trace(&xi))?;
        let adjoint = inner_product_omega(&pair.phi, &eta)?;
        vals.push((direct, adjoint));
    }
    Ok(vals)
}

/// Worst relative gap `| |det Kalman| − |Vandermonde product| |` over random
/// diagonal instances with `N ≤ 6` and well separated eigenvalues.
pub fn vandermonde_sweep(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < count {
        let n = rng.random_range(1..=6);
        let lam: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let separated = lam.iter().enumerate().all(|(i, a)| lam[i + 1..].iter().all(|b| (a - b).abs() > 0.05));
        if !separated {
            continue;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let kalman = controllability_det(&lam, &b).abs();
        let closed = vandermonde_det(&lam, &b).abs();
        worst = worst.max((kalman - closed).abs() / closed);
        done += 1;
    }
    worst
}

/// `‖offdiag block‖ / ‖𝒜‖` after the similarity transforms, for controller and observer.
pub fn decoupling(ctrl: &ControllerSynthesis, obs: &ObserverSynthesis) -> heatctl_core::Result<(f64, f64)> {
    let op = ctrl.solver().operator();
    let a = closed_loop_generator(op, ctrl)?;
    let (t, ti) = sylvester_transform(ctrl)?;
    let c = a.conjugate(&t, &ti).block(0, 1).norm() / a.norm();
    let e = observer_error_generator(op, obs)?;
    let (t, ti) = observer_transform(obs)?;
    let o = e.conjugate(&t, &ti).block(1, 0).norm() / e.norm();
    Ok((c, o))
}

fn placement_targets(choice: &GainChoice, lambda_n: &[f64]) -> Option<Vec<Complex<f64>>> {
    match choice {
        GainChoice::MirrorShift { sigma } => Some(default_targets(lambda_n, *sigma)),
        GainChoice::Targets(t) => Some(t.clone()),
        GainChoice::Fixed(_) => None,
    }
}

/// Distance from each target to the nearest closed-loop eigenvalue.
fn placement_gap(eigs: &[Complex<f64>], targets: Vec<Complex<f64>>) -> f64 {
    let nearest = |t: &Complex<f64>| eigs.iter().map(|e| { let d = e - t; d.re.hypot(d.im) }).fold(f64::INFINITY, f64::min);
    targets.iter().map(|t| nearest(t) / (1.0 + t.re.hypot(t.im))).fold(0.0, f64::max)
}

pub fn run_checks(p: &Problem) -> Vec<Check> {
    let c = &p.cfg;
    let adjoint_broken = c.scheme == BoundaryScheme::OneSided;
    let count = p.basis.pairs().len().min(5);
    let mut out = Vec::new();

    let defect = p.op.symmetry_defect();
    out.push(Check::new("W-symmetry of the Laplacian", defect <= 1e-12, adjoint_broken, format!("defect {defect:.2e} (tol 1e-12)")));

    // Without unstable modes there is nothing to construct; any shape will do.
    let shape_or_default = |e: Option<&heatctl_core::Expr>| match p.shape(e) {
        Some(g) => Ok(g),
        None if p.n_trunc() == 0 => Ok(BoundaryField::from_fn(p.grid, |x, y| 1.0 + x + y)),
        None => construct_shape(&p.basis, None),
    };
    let p_shape = shape_or_default(c.p.as_ref());
    let q_shape = shape_or_default(c.q.as_ref());
    let theta = -c.alpha - c.mu;
    match p_shape.as_ref().map_err(|e| e.to_string()).and_then(|g| neumann_lift_pairs(p, g, theta, count).map(|v| scaled_gap(&v)).map_err(|e| e.to_string())) {
        Ok(e) => out.push(Check::new(
            "Neumann lift modal identity",
            e <= 1e-8,
            adjoint_broken,
            format!("max scaled err {e:.2e} over {count} modes, theta = {theta} (tol 1e-8)"),
        )),
        Err(e) => out.push(Check::error("Neumann lift modal identity", e)),
    }
    let gamma = -c.beta - c.mu;
    match q_shape.as_ref().map_err(|e| e.to_string()).and_then(|g| two_route_pairs(p, g, gamma, count).map(|v| scaled_gap(&v)).map_err(|e| e.to_string())) {
        Ok(e) => out.push(Check::new(
            "observation functional two routes",
            e <= 1e-8,
            adjoint_broken,
            format!("max scaled gap {e:.2e}, gamma = {gamma} (tol 1e-8)"),
        )),
        Err(e) => out.push(Check::error("observation functional two routes", e)),
    }

    let worst = vandermonde_sweep(c.seed, 100);
    out.push(Check::new("Kalman determinant = Vandermonde", worst <= 1e-10, false, format!("100 instances, max rel gap {worst:.2e} (tol 1e-10)")));

    let ctrl = p.controller();
    let obs = p.observer();
    match &ctrl {
        Ok(ctrl) => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let worst = (0..10)
                .map(|_| {
                    let g = BoundaryField::from_fn(p.grid, |_, _| rng.random_range(-1.0..1.0));
                    ctrl.sylvester_residual(&g).unwrap_or(f64::INFINITY)
                })
                .fold(0.0, f64::max);
            out.push(Check::new("Sylvester equation residual", worst <= 1e-8, false, format!("10 random g, max {worst:.2e} (tol 1e-8)")));
            let cert = ctrl.certificate();
            out.push(Check::new(
                "controller Hurwitz certificate",
                cert.is_hurwitz,
                false,
                format!("abscissa {:.6}, margin {:.1e}", cert.abscissa, cert.margin),
            ));
            let gains = if c.gain_file.is_some() { GainChoice::Fixed(vec![]) } else { c.gains.clone() };
            if let Some(t) = placement_targets(&gains, ctrl.lambda_n()) {
                let eigs = verify_hurwitz(&closed_truncated(ctrl.lambda_n(), ctrl.f_n(), ctrl.l_n()), 0.0).eigenvalues;
                let gap = placement_gap(&eigs, t);
                out.push(Check::new("controller pole placement", gap <= 1e-6, false, format!("max rel gap {gap:.2e} (tol 1e-6)")));
            }
        }
        Err(e) => out.push(Check::error("controller synthesis", e)),
    }
    match &obs {
        Ok(obs) => {
            let cert = obs.certificate();
            out.push(Check::new(
                "observer Hurwitz certificate",
                cert.is_hurwitz,
                false,
                format!("abscissa {:.6}, margin {:.1e}", cert.abscissa, cert.margin),
            ));
            let gains = if c.gain_file.is_some() { GainChoice::Fixed(vec![]) } else { c.observer_gains.clone() };
            if let Some(t) = placement_targets(&gains, obs.lambda_n()) {
                let eigs = verify_hurwitz(&closed_truncated(obs.lambda_n(), obs.k_n(), obs.j_n()), 0.0).eigenvalues;
                let gap = placement_gap(&eigs, t);
                out.push(Check::new("observer pole placement", gap <= 1e-6, false, format!("max rel gap {gap:.2e} (tol 1e-6)")));
            }
        }
        Err(e) => out.push(Check::error("observer synthesis", e)),
    }

    out.push(match decoupling_check(p) {
        Ok((label, (dc, dobs))) => Check::new(
            "block decoupling of the generators",
            dc <= 1e-8 && dobs <= 1e-8,
            false,
            format!("{label}: controller {dc:.2e}, observer {dobs:.2e} relative to |A| (tol 1e-8)"),
        ),
        Err(e) => Check::error("block decoupling of the generators", e),
    });
    out
}

fn decoupling_check(p: &Problem) -> Result<(String, (f64, f64)), String> {
    let c = &p.cfg;
    if p.grid.free_count() + p.grid.gamma1_count() <= DENSE_LIMIT {
        let ctrl = p.controller().map_err(|e| e.to_string())?;
        let obs = p.observer().map_err(|e| e.to_string())?;
        return decoupling(&ctrl, &obs).map(|d| (format!("{}x{}", c.nx, c.ny), d)).map_err(|e| e.to_string());
    }
    // Coarse copy on the same rectangle; the gains are resynthesized there.
    let grid = Grid::new(c.a, c.b, 11, 11).map_err(|e| e.to_string())?;
    let op = assemble_laplacian(&grid, c.scheme);
    let basis = truncate_operator(&op, c.mu, c.eig_count.min(op.dim())).map_err(|e| e.to_string())?;
    let shape = |e: &Option<heatctl_core::Expr>| e.as_ref().map(|e| BoundaryField::from_fn(grid, |x, y| e.eval(x, y)));
    let gains = |g: &GainChoice| if c.gain_file.is_some() { GainChoice::default() } else { g.clone() };
    let ctrl = ControllerSynthesis::build(&op, &basis, c.alpha, shape(&c.p).as_ref(), &gains(&c.gains)).map_err(|e| e.to_string())?;
    let obs =
        ObserverSynthesis::build(&op, &basis, c.beta, shape(&c.q).as_ref(), &gains(&c.observer_gains)).map_err(|e| e.to_string())?;
    decoupling(&ctrl, &obs).map(|d| ("11x11 copy".to_string(), d)).map_err(|e| e.to_string())
}
