use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use heatctl_core::generator::{closed_loop_generator, observer_error_generator};
use heatctl_core::{assemble_laplacian, HelmholtzSolver};

use crate::config::{self, Mode, RawConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, Problem, RunSummary};
use crate::{io, plot, report, sweep, verify};

/// Full generators are only assembled densely up to this many unknowns.
const GENERATOR_LIMIT: usize = 900;

#[derive(Debug, Parser)]
#[command(name = "heatctl", version, about = "Boundary feedback and observers for a reaction-diffusion equation on a rectangle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Configuration file (`key = value` lines, `#` comments).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Named parameter set applied before the file (e.g. `paper-fig4`).
    #[arg(long, global = true)]
    pub preset: Option<String>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Override a configuration key; repeatable, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Discrete eigenvalues against the continuum values, and the truncation order.
    Eigs,
    /// Controller and observer gains with their certificates; writes gains.csv.
    Synthesize,
    /// Time-domain run in the configured mode; writes traces, snapshots and plots.
    Simulate,
    /// Observer run plus a second run with a different input (error must not change).
    Observe,
    /// Numerical self-checks; nonzero exit status if any check fails.
    Verify,
    /// Closed-loop runs over `sweep_values` of `sweep_key`; writes sweep.csv.
    Sweep,
    /// List configuration keys and presets.
    Keys,
}

fn load(cli: &Cli) -> CliResult<(RawConfig, RunConfig)> {
    let text = cli.config.as_ref().map(|p| std::fs::read_to_string(p).map_err(CliError::io(p))).transpose()?;
    config::load(cli.preset.as_deref(), text.as_deref(), &cli.set)
}

fn line(out: &mut dyn Write, s: impl AsRef<str>) -> CliResult<()> {
    writeln!(out, "{}", s.as_ref()).map_err(CliError::io("<stdout>"))
}

fn run_line(r: &RunSummary) -> String {
    let rate = r.rate.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    format!("{:<15} ||.||(T)/||.||(0) = {:.4e}   fitted decay rate = {rate}   ({} steps, {})", r.label, r.ratio, r.steps, r.dir.display())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    if let Command::Keys = cli.command {
        for (k, d) in config::KEYS {
            line(out, format!("{k:<20} {d}"))?;
        }
        return line(out, format!("presets: {}", config::PRESETS.join(", ")));
    }
    let (raw, cfg) = load(cli)?;
    let dir = cli.out.as_path();
    match cli.command {
        Command::Eigs => eigs(&cfg, dir, out),
        Command::Synthesize => synthesize(cfg, dir, out),
        Command::Simulate => simulate(cfg, dir, out),
        Command::Observe => observe(cfg, dir, out),
        Command::Verify => verify(cfg, out),
        Command::Sweep => {
            let rows = sweep::sweep(&raw, &cfg)?;
            let key = cfg.sweep_key.as_deref().unwrap_or_default();
            let path = dir.join("sweep.csv");
            sweep::write_csv(&path, key, &rows)?;
            for r in &rows {
                match &r.outcome {
                    Ok(p) => line(out, format!("{key} = {:<10} N = {}  ratio {:.4e}  truncated abscissa {:.4}", r.value, p.n_trunc, p.ratio, p.abscissa))?,
                    Err(e) => line(out, format!("{key} = {:<10} failed: {e}", r.value))?,
                }
            }
            line(out, format!("wrote {}", path.display()))
        }
        Command::Keys => unreachable!(),
    }
}

fn eigs(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> CliResult<()> {
    let op = assemble_laplacian(&cfg.grid()?, cfg.scheme);
    let table = report::eig_table(&op, cfg)?;
    line(out, format!("{}x{} grid on [0,{}]x[0,{}], {} scheme", cfg.nx, cfg.ny, cfg.a, cfg.b, cfg.scheme))?;
    line(out, report::format_eigs(&table))?;
    let path = dir.join("eigs.csv");
    report::write_eig_csv(&path, &table)?;
    line(out, format!("wrote {}", path.display()))
}

fn synthesize(cfg: RunConfig, dir: &Path, out: &mut dyn Write) -> CliResult<()> {
    let p = Problem::new(cfg)?;
    let ctrl = p.controller()?;
    let obs = p.observer()?;
    let generators = if p.n_trunc() > 0 && p.grid.free_count() + p.grid.gamma1_count() <= GENERATOR_LIMIT {
        let c = closed_loop_generator(&p.op, &ctrl)?.spectral_abscissa();
        let o = observer_error_generator(&p.op, &obs)?.spectral_abscissa();
        Some((c, o))
    } else {
        None
    };
    line(out, report::format_synthesis(&ctrl, &obs, generators))?;
    let gf = io::GainFile {
        mu: p.cfg.mu,
        alpha: p.cfg.alpha,
        beta: p.cfg.beta,
        nx: p.cfg.nx,
        ny: p.cfg.ny,
        scheme: p.cfg.scheme,
        lambda: ctrl.lambda_n().to_vec(),
        f: ctrl.f_n().to_vec(),
        l: ctrl.l_n().to_vec(),
        j: obs.j_n().to_vec(),
        k: obs.k_n().to_vec(),
        p: ctrl.p().values().to_vec(),
        q: obs.q().values().to_vec(),
    };
    let path = dir.join("gains.csv");
    io::write_gains(&path, &gf)?;
    line(out, format!("wrote {}", path.display()))
}

fn simulate(cfg: RunConfig, dir: &Path, out: &mut dyn Write) -> CliResult<()> {
    if cfg.mode == Mode::Observer {
        return observe(cfg, dir, out);
    }
    let p = Problem::new(cfg)?;
    line(out, format!("mode {}, N = {}, dt = {}, t_end = {}", p.cfg.mode.as_str(), p.n_trunc(), p.cfg.dt, p.cfg.t_end))?;
    let o = pipeline::simulate(&p, dir)?;
    if let Some(ctrl) = &o.controller {
        line(out, format!("gains L_N = {:?}, truncated abscissa {:.6}", ctrl.l_n(), ctrl.certificate().abscissa))?;
    }
    for r in &o.runs {
        line(out, run_line(r))?;
    }
    let last = p.cfg.steps();
    plot::write_script(dir, 0, last, o.runs.len() > 1)?;
    line(out, format!("wrote {} files and {}", o.files.len(), dir.join("plots.gp").display()))
}

fn observe(mut cfg: RunConfig, dir: &Path, out: &mut dyn Write) -> CliResult<()> {
    cfg.mode = Mode::Observer;
    let p = Problem::new(cfg)?;
    let o = pipeline::observe(&p, dir)?;
    line(out, format!("N = {}, K_N = {:?}, truncated abscissa {:.6}", p.n_trunc(), o.observer.k_n(), o.observer.certificate().abscissa))?;
    line(out, run_line(&o.summary))?;
    let (gap, scale) = o.invariance;
    line(
        out,
        format!(
            "error vs {} input: max gap {gap:.3e} (max error {scale:.3e}) -> {}",
            o.reference_input,
            if o.invariant() { "input-independent" } else { "INPUT-DEPENDENT" }
        ),
    )?;
    line(out, format!("wrote {} files", o.files.len()))?;
    if o.invariant() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(1))
    }
}

fn verify(cfg: RunConfig, out: &mut dyn Write) -> CliResult<()> {
    // Resonant shifts surface as failing checks instead of aborting the run.
    let p = match Problem::new(cfg) {
        Ok(p) => p,
        Err(e) => {
            line(out, format!("FAIL  {:<34} {e}", "truncation"))?;
            return Err(CliError::ChecksFailed(1));
        }
    };
    let spectrum = p.basis.spectrum();
    for (name, shift) in [("controller shift", -p.cfg.alpha - p.cfg.mu), ("observer shift", -p.cfg.beta - p.cfg.mu)] {
        if let Err(e) = HelmholtzSolver::new(&p.op, shift, &spectrum) {
            line(out, format!("FAIL  {name:<34} {e}"))?;
        }
    }
    let checks = verify::run_checks(&p);
    for c in &checks {
        line(out, c.to_string())?;
    }
    let failed = checks.iter().filter(|c| c.failed()).count();
    line(out, format!("{} checks, {failed} failed", checks.len()))?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(failed))
    }
}
