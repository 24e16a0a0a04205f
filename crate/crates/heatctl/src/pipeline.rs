//! Builds operators, bases and syntheses from a [`RunConfig`] and runs the
//! simulations behind `simulate`, `observe` and `sweep`.

use std::path::{Path, PathBuf};

use heatctl_core::simulate::{estimate_decay_rate, BoundaryInput, SimTrace, ZeroInput};
use heatctl_core::spectral::truncate_operator;
use heatctl_core::{
    assemble_laplacian, run, BoundaryField, ControllerSynthesis, Dynamics, GainChoice, Grid, LinearOperator,
    ObserverSynthesis, ScalarField, SimConfig, SimState, TruncationBasis,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{FieldSource, InputSpec, Mode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{self, Edge, GainFile};

/// Upper bound on stored time samples for slice and control outputs.
const MAX_FRAMES: usize = 400;

pub struct Problem {
    pub cfg: RunConfig,
    pub grid: Grid,
    pub op: LinearOperator,
    pub basis: TruncationBasis,
}

impl Problem {
    pub fn new(cfg: RunConfig) -> CliResult<Self> {
        let grid = cfg.grid()?;
        let op = assemble_laplacian(&grid, cfg.scheme);
        let basis = truncate_operator(&op, cfg.mu, cfg.eig_count.min(op.dim()))?;
        Ok(Problem { cfg, grid, op, basis })
    }

    pub fn n_trunc(&self) -> usize {
        self.basis.n_trunc()
    }

    fn gain_file(&self) -> CliResult<Option<(PathBuf, GainFile)>> {
        let Some(path) = &self.cfg.gain_file else { return Ok(None) };
        let gf = io::read_gains(path)?;
        let c = &self.cfg;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
        let mismatch = |what: &str, file: String, cfg: String| {
            CliError::Config(format!("gain file {} was built for {what} = {file}, configuration has {cfg}", path.display()))
        };
        if (gf.nx, gf.ny) != (c.nx, c.ny) {
            return Err(mismatch("grid", format!("{}x{}", gf.nx, gf.ny), format!("{}x{}", c.nx, c.ny)));
        }
        if gf.scheme != c.scheme {
            return Err(mismatch("scheme", gf.scheme.to_string(), c.scheme.to_string()));
        }
        for (what, f, v) in [("mu", gf.mu, c.mu), ("alpha", gf.alpha, c.alpha), ("beta", gf.beta, c.beta)] {
            if !close(f, v) {
                return Err(mismatch(what, f.to_string(), v.to_string()));
            }
        }
        if gf.l.len() != self.n_trunc() || gf.k.len() != self.n_trunc() {
            return Err(mismatch("N", gf.l.len().to_string(), self.n_trunc().to_string()));
        }
        Ok(Some((path.clone(), gf)))
    }

    pub fn shape(&self, expr: Option<&heatctl_core::Expr>) -> Option<BoundaryField> {
        expr.map(|e| BoundaryField::from_fn(self.grid, |x, y| e.eval(x, y)))
    }

    pub fn controller(&self) -> CliResult<ControllerSynthesis> {
        let (seed, gains) = match self.gain_file()? {
            Some((path, gf)) => (Some(io::boundary_from(self.grid, &gf.p, &path, "p")?), GainChoice::Fixed(gf.l)),
            None => (self.shape(self.cfg.p.as_ref()), self.cfg.gains.clone()),
        };
        Ok(ControllerSynthesis::build(&self.op, &self.basis, self.cfg.alpha, seed.as_ref(), &gains)?)
    }

    pub fn observer(&self) -> CliResult<ObserverSynthesis> {
        let (seed, gains) = match self.gain_file()? {
            Some((path, gf)) => (Some(io::boundary_from(self.grid, &gf.q, &path, "q")?), GainChoice::Fixed(gf.k)),
            None => (self.shape(self.cfg.q.as_ref()), self.cfg.observer_gains.clone()),
        };
        Ok(ObserverSynthesis::build(&self.op, &self.basis, self.cfg.beta, seed.as_ref(), &gains)?)
    }

    pub fn initial_w(&self) -> CliResult<ScalarField> {
        match &self.cfg.w0 {
            FieldSource::Expr(e) => Ok(ScalarField::from_fn(self.grid, |x, y| e.eval(x, y))),
            FieldSource::Csv(path) => io::read_field(path, self.grid),
        }
    }

    fn boundary(&self, e: &heatctl_core::Expr) -> BoundaryField {
        BoundaryField::from_fn(self.grid, |x, y| e.eval(x, y))
    }

    pub fn initial_state(&self) -> CliResult<SimState> {
        Ok(SimState::new(self.initial_w()?, self.boundary(&self.cfg.v0))?)
    }

    pub fn observer_state(&self) -> CliResult<SimState> {
        let w_hat = ScalarField::from_fn(self.grid, |x, y| self.cfg.w_hat0.eval(x, y));
        Ok(self.initial_state()?.with_estimate(w_hat, self.boundary(&self.cfg.v_hat0))?)
    }

    pub fn input(&self, spec: &InputSpec, seed: u64) -> Box<dyn BoundaryInput> {
        match spec {
            InputSpec::Zero => Box::new(ZeroInput),
            InputSpec::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Box::new(move |_t: f64, g: &Grid| BoundaryField::from_fn(*g, |_, _| rng.random_range(-1.0..1.0)))
            }
            InputSpec::Expr(e) => {
                let u = self.boundary(e);
                Box::new(move |_t: f64, _g: &Grid| u.clone())
            }
        }
    }

    /// Internal sampling stride: fine enough for slice plots, and a divisor
    /// of the snapshot interval so every requested snapshot is stored.
    fn stride(&self) -> usize {
        let steps = self.cfg.steps();
        let every = self.cfg.sim_config().snapshot_every.unwrap_or(steps).max(1);
        let want = steps.div_ceil(MAX_FRAMES).max(1);
        (1..=want).rev().find(|s| every.is_multiple_of(*s)).unwrap_or(1)
    }

    pub fn simulate(&self, dynamics: Dynamics<'_>, initial: SimState, input: &mut dyn BoundaryInput) -> CliResult<SimTrace> {
        let cfg = SimConfig { snapshot_every: Some(self.stride()), ..self.cfg.sim_config() };
        Ok(run(&self.op, &cfg, dynamics, initial, input)?)
    }
}

/// Headline numbers of one run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub label: &'static str,
    pub ratio: f64,
    pub rate: Option<f64>,
    pub steps: usize,
    pub dir: PathBuf,
}

pub fn summarize(label: &'static str, times: &[f64], norms: &[f64], from: f64, steps: usize, dir: &Path) -> RunSummary {
    RunSummary {
        label,
        ratio: norms[norms.len() - 1] / norms[0],
        rate: estimate_decay_rate(times, norms, from).ok().map(|d| d.rate),
        steps,
        dir: dir.to_path_buf(),
    }
}

/// Writes trace, requested snapshots, the `w(x, y_s, t)` slice and both edge controls.
pub fn write_outputs(p: &Problem, trace: &SimTrace, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    let path = dir.join("trace.csv");
    io::write_trace(&path, trace)?;
    files.push(path);
    let every = p.cfg.sim_config().snapshot_every.unwrap_or(usize::MAX);
    let last = trace.snapshots.last().map_or(0, |s| s.index);
    for s in trace.snapshots.iter().filter(|s| s.index % every == 0 || s.index == last) {
        let path = io::snapshot_path(dir, s);
        io::write_field(&path, &s.w)?;
        files.push(path);
    }
    let path = dir.join("slice.csv");
    io::write_slice(&path, &trace.snapshots, p.cfg.slice_y)?;
    files.push(path);
    for (name, edge) in [("control_top.csv", Edge::Top), ("control_right.csv", Edge::Right)] {
        let path = dir.join(name);
        io::write_control(&path, &trace.snapshots, edge)?;
        files.push(path);
    }
    Ok(files)
}

pub struct SimulateOutcome {
    pub runs: Vec<RunSummary>,
    pub files: Vec<PathBuf>,
    pub controller: Option<ControllerSynthesis>,
}

pub fn simulate(p: &Problem, out: &Path) -> CliResult<SimulateOutcome> {
    let c = &p.cfg;
    let mut runs = Vec::new();
    let mut files = Vec::new();
    let mut controller = None;
    match c.mode {
        Mode::ClosedLoop => {
            let ctrl = p.controller()?;
            let tr = p.simulate(Dynamics::ClosedLoop(&ctrl), p.initial_state()?, &mut ZeroInput)?;
            files.extend(write_outputs(p, &tr, out)?);
            runs.push(summarize("closed loop", &tr.times(), &tr.norm_w(), c.decay_from, c.steps(), out));
            if c.companion_open_loop {
                let dir = out.join("open_loop");
                let tr = p.simulate(Dynamics::OpenLoop, p.initial_state()?, &mut ZeroInput)?;
                files.extend(write_outputs(p, &tr, &dir)?);
                runs.push(summarize("open loop", &tr.times(), &tr.norm_w(), c.decay_from, c.steps(), &dir));
            }
            controller = Some(ctrl);
        }
        Mode::OpenLoop => {
            let mut input = p.input(&c.input, c.seed);
            let tr = p.simulate(Dynamics::OpenLoop, p.initial_state()?, input.as_mut())?;
            files.extend(write_outputs(p, &tr, out)?);
            runs.push(summarize("open loop", &tr.times(), &tr.norm_w(), c.decay_from, c.steps(), out));
        }
        Mode::Observer => {
            let o = observe(p, out)?;
            runs.push(o.summary);
            files.extend(o.files);
        }
    }
    Ok(SimulateOutcome { runs, files, controller })
}

pub struct ObserveOutcome {
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
    pub reference_input: &'static str,
    /// `max_t |e_u(t) − e_ref(t)|` and `max_t e_u(t)`.
    pub invariance: (f64, f64),
    pub observer: ObserverSynthesis,
}

impl ObserveOutcome {
    pub fn invariant(&self) -> bool {
        self.invariance.0 <= 1e-10 * self.invariance.1
    }
}

/// Observer run with the configured input, then a reference run with a
/// different input from the same initial data; the estimation error must not
/// depend on the input.
pub fn observe(p: &Problem, out: &Path) -> CliResult<ObserveOutcome> {
    let c = &p.cfg;
    let obs = p.observer()?;
    let mut input = p.input(&c.input, c.seed);
    let tr = p.simulate(Dynamics::Observer(&obs), p.observer_state()?, input.as_mut())?;
    let mut files = write_outputs(p, &tr, out)?;
    let err = tr.error_norm().expect("observer trace carries errors");
    let summary = summarize("observer error", &tr.times(), &err, c.decay_from, c.steps(), out);

    let (reference, label) = match c.input {
        InputSpec::Random => (InputSpec::Zero, "zero"),
        _ => (InputSpec::Random, "random"),
    };
    let mut input = p.input(&reference, c.seed.wrapping_add(1));
    let other = p.simulate(Dynamics::Observer(&obs), p.observer_state()?, input.as_mut())?;
    let other_err = other.error_norm().expect("observer trace carries errors");
    let gap = err.iter().zip(&other_err).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = err.iter().copied().fold(0.0, f64::max);
    let path = out.join("reference").join("trace.csv");
    io::write_trace(&path, &other)?;
    files.push(path);
    Ok(ObserveOutcome { summary, files, reference_input: label, invariance: (gap, scale), observer: obs })
}

