//! Plain-text reports for `eigs` and `synthesize`.

use std::fmt::Write;
use std::path::Path;

use heatctl_core::spectral::{analytic_spectrum, build_truncation, find_ties, TIE_TOLERANCE};
use heatctl_core::synthesis::HurwitzCertificate;
use heatctl_core::{compute_eigenpairs, Complex, ControllerSynthesis, EigenPair, LinearOperator, ObserverSynthesis};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub struct EigTable {
    pub pairs: Vec<EigenPair>,
    pub analytic: Vec<f64>,
    pub mu: f64,
    /// `N`, or the reason a truncation cannot be formed.
    pub truncation: Result<usize, String>,
}

pub fn eig_table(op: &LinearOperator, cfg: &RunConfig) -> CliResult<EigTable> {
    let m = cfg.eig_count.min(op.dim());
    let pairs = compute_eigenpairs(op, m)?;
    let analytic = analytic_spectrum(cfg.a, cfg.b, m).into_iter().map(|(l, _)| l).collect();
    let truncation = build_truncation(pairs.clone(), cfg.mu).map(|b| b.n_trunc()).map_err(|e| e.to_string());
    Ok(EigTable { pairs, analytic, mu: cfg.mu, truncation })
}

pub fn write_eig_csv(path: &Path, t: &EigTable) -> CliResult<()> {
    let mut out = String::from("index,lambda,lambda_analytic,lambda_plus_mu,residual\n");
    for (k, (p, a)) in t.pairs.iter().zip(&t.analytic).enumerate() {
        let r = p.residual.unwrap_or(f64::NAN);
        writeln!(out, "{},{:.14e},{:.14e},{:.14e},{:.3e}", k + 1, p.lambda, a, p.lambda + t.mu, r).unwrap();
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, out).map_err(CliError::io(path))
}

pub fn format_eigs(t: &EigTable) -> String {
    let mut s = String::new();
    writeln!(s, "{:>5} {:>14} {:>14} {:>9} {:>12} {:>10}", "k", "lambda", "continuum", "rel.err", "lambda+mu", "residual").unwrap();
    for (k, (p, a)) in t.pairs.iter().zip(&t.analytic).enumerate() {
        let rel = (p.lambda - a).abs() / a.abs();
        let r = p.residual.map_or_else(|| "-".to_string(), |r| format!("{r:.2e}"));
        let flag = if p.lambda + t.mu >= 0.0 { "  unstable" } else { "" };
        writeln!(s, "{:>5} {:>14.6} {:>14.6} {:>9.2e} {:>12.6} {:>10}{flag}", k + 1, p.lambda, a, rel, p.lambda + t.mu, r).unwrap();
    }
    for (i, j) in find_ties(&t.pairs, TIE_TOLERANCE) {
        writeln!(s, "warning: eigenvalues {} and {} coincide", i + 1, j + 1).unwrap();
    }
    match &t.truncation {
        Ok(n) => writeln!(s, "N = {n} unstable mode(s) for mu = {}", t.mu).unwrap(),
        Err(e) => writeln!(s, "no truncation for mu = {}: {e}", t.mu).unwrap(),
    }
    s
}

fn complex(z: &Complex<f64>) -> String {
    if z.im.abs() < 1e-12 * z.re.abs().max(1.0) {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

fn certificate(s: &mut String, name: &str, c: &HurwitzCertificate) {
    let eig = c.eigenvalues.iter().map(complex).collect::<Vec<_>>().join(", ");
    writeln!(s, "  {name} spectrum: [{eig}]").unwrap();
    writeln!(
        s,
        "  {name} certificate: abscissa {:.6} (margin {:.1e}) -> {}",
        c.abscissa,
        c.margin,
        if c.is_hurwitz { "Hurwitz" } else { "NOT Hurwitz" }
    )
    .unwrap();
}

pub fn format_synthesis(ctrl: &ControllerSynthesis, obs: &ObserverSynthesis, generators: Option<(f64, f64)>) -> String {
    let mut s = String::new();
    let n = ctrl.lambda_n().len();
    writeln!(s, "N = {n}").unwrap();
    if n == 0 {
        writeln!(s, "plant is already stable: no feedback or output injection needed").unwrap();
        return s;
    }
    writeln!(s, "lambda_j + mu: [{}]", list(ctrl.lambda_n())).unwrap();
    writeln!(s, "controller (alpha = {}, theta = {}):", ctrl.alpha(), ctrl.theta()).unwrap();
    writeln!(s, "  F_N = [{}]", list(ctrl.f_n())).unwrap();
    writeln!(s, "  L_N = [{}]", list(ctrl.l_n())).unwrap();
    certificate(&mut s, "Lambda_N + F_N L_N", ctrl.certificate());
    writeln!(s, "observer (beta = {}, gamma = {}):", obs.beta(), obs.gamma()).unwrap();
    writeln!(s, "  J_N = [{}]", list(obs.j_n())).unwrap();
    writeln!(s, "  J_N (adjoint route) = [{}]", list(obs.j_n_adjoint())).unwrap();
    writeln!(s, "  K_N = [{}]", list(obs.k_n())).unwrap();
    certificate(&mut s, "Lambda_N + K_N J_N", obs.certificate());
    if let Some((c, o)) = generators {
        writeln!(s, "full generators: closed-loop abscissa {c:.6}, observer-error abscissa {o:.6}").unwrap();
    }
    s
}
