//! Time integration: backward Euler on the diffusion, implicit decay on the
//! boundary filters, explicit coupling between the two.

use alloc::format;
use alloc::vec::Vec;

use crate::elliptic::HelmholtzSolver;
use crate::error::{Error, Result};
use crate::grid::{boundary_trace, check_grid, inner_product_omega, BoundaryField, Grid, ScalarField};
use crate::laplacian::LinearOperator;
use crate::synthesis::{ControllerSynthesis, ObserverSynthesis};

/// Norms below this are clamped before taking logarithms.
pub const NORM_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub mu: f64,
    /// Keep `w` every this many steps (and at `t = 0`); `None` keeps nothing.
    pub snapshot_every: Option<usize>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {}", self.dt) });
        }
        if !self.t_end.is_finite() || self.t_end < self.dt * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter { name: "t_end", reason: format!("must be at least dt = {}, got {}", self.dt, self.t_end) });
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter { name: "mu", reason: format!("{}", self.mu) });
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidParameter { name: "snapshot_every", reason: "must be at least 1".into() });
        }
        Ok(())
    }

    /// Number of steps, `round(t_end / dt)`.
    pub fn steps(&self) -> usize {
        libm::round(self.t_end / self.dt).max(1.0) as usize
    }
}

/// `(w, v)` and, in observer mode, the estimates `(ŵ, v̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub w: ScalarField,
    pub v: BoundaryField,
    pub estimate: Option<(ScalarField, BoundaryField)>,
}

impl SimState {
    pub fn new(w: ScalarField, v: BoundaryField) -> Result<Self> {
        check_grid(w.grid(), v.grid())?;
        Ok(SimState { t: 0.0, w, v, estimate: None })
    }

    pub fn with_estimate(mut self, w_hat: ScalarField, v_hat: BoundaryField) -> Result<Self> {
        check_grid(self.w.grid(), w_hat.grid())?;
        check_grid(self.w.grid(), v_hat.grid())?;
        self.estimate = Some((w_hat, v_hat));
        Ok(self)
    }

    pub fn zeros(grid: Grid) -> Self {
        SimState { t: 0.0, w: ScalarField::zeros(grid), v: BoundaryField::zeros(grid), estimate: None }
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite()
            && self.v.is_finite()
            && self.estimate.as_ref().is_none_or(|(w, v)| w.is_finite() && v.is_finite())
    }

    /// `(‖w − ŵ‖, ‖v − v̂‖)`.
    pub fn error_norms(&self) -> Option<(f64, f64)> {
        self.estimate.as_ref().map(|(wh, vh)| {
            let mut ew = self.w.clone();
            ew.axpy(-1.0, wh).expect("grids checked on construction");
            let mut ev = self.v.clone();
            ev.axpy(-1.0, vh).expect("grids checked on construction");
            (ew.norm(), ev.norm())
        })
    }

    pub fn scaled(&self, c: f64) -> SimState {
        let mut s = self.clone();
        s.w.scale(c);
        s.v.scale(c);
        if let Some((w, v)) = s.estimate.as_mut() {
            w.scale(c);
            v.scale(c);
        }
        s
    }
}

/// Neumann data applied to the plant as a function of time.
pub trait BoundaryInput {
    fn value(&mut self, t: f64, grid: &Grid) -> BoundaryField;
}

/// `u ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroInput;

impl BoundaryInput for ZeroInput {
    fn value(&mut self, _t: f64, grid: &Grid) -> BoundaryField {
        BoundaryField::zeros(*grid)
    }
}

impl<F: FnMut(f64, &Grid) -> BoundaryField> BoundaryInput for F {
    fn value(&mut self, t: f64, grid: &Grid) -> BoundaryField {
        self(t, grid)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Dynamics<'a> {
    /// `∂w/∂ν = u`; the `v` slot records `u`.
    OpenLoop,
    ClosedLoop(&'a ControllerSynthesis),
    /// Plant driven by `u`, boundary filter `v`, and the observer pair.
    Observer(&'a ObserverSynthesis),
}

/// One-step maps sharing a single backward-Euler factorization.
#[derive(Debug, Clone)]
pub struct Stepper {
    op: LinearOperator,
    dt: f64,
    implicit: HelmholtzSolver,
}

impl Stepper {
    /// `(I − dt(Δ_h + μ))` is factored as `Δ_h − θ` with `θ = 1/dt − μ`.
    pub fn new(op: &LinearOperator, mu: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt}") });
        }
        let implicit = HelmholtzSolver::new(op, 1.0 / dt - mu, &[])?;
        Ok(Stepper { op: op.clone(), dt, implicit })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Solves `(I − dt(Δ_h+μ)) x = w + dt·(load(g) + source)`.
    fn diffuse(&self, w: &ScalarField, g: &BoundaryField, source: Option<&ScalarField>) -> Result<ScalarField> {
        let mut rhs = self.op.neumann_load(g)?;
        if let Some(s) = source {
            rhs.axpy(1.0, s)?;
        }
        rhs.scale(self.dt);
        rhs.axpy(1.0, w)?;
        rhs.scale(-1.0 / self.dt);
        self.implicit.solve_source(&rhs)
    }

    pub fn step_open_loop(&self, state: &SimState, u: &BoundaryField) -> Result<SimState> {
        let w = self.diffuse(&state.w, u, None)?;
        Ok(SimState { t: state.t + self.dt, w, v: u.clone(), estimate: None })
    }

    pub fn step_closed_loop(&self, state: &SimState, ctrl: &ControllerSynthesis) -> Result<SimState> {
        let u_v = ctrl.feedback(&state.w, &state.v)?;
        let mut v = state.v.clone();
        v.axpy(self.dt * u_v, ctrl.p())?;
        v.scale(1.0 / (1.0 + ctrl.alpha() * self.dt));
        let w = self.diffuse(&state.w, &v, None)?;
        Ok(SimState { t: state.t + self.dt, w, v, estimate: None })
    }

    pub fn step_observer(&self, state: &SimState, obs: &ObserverSynthesis, u: &BoundaryField) -> Result<SimState> {
        let (w_hat, v_hat) = state
            .estimate
            .as_ref()
            .ok_or(Error::InvalidParameter { name: "state", reason: "observer mode needs an estimate".into() })?;
        let innovation = state.v.integral() - v_hat.integral();
        let decay = 1.0 / (1.0 + obs.beta() * self.dt);

        let mut v = state.v.clone();
        v.axpy(self.dt, &obs.q().pointwise(&boundary_trace(&state.w))?)?;
        v.scale(decay);

        let mut v_new_hat = v_hat.clone();
        v_new_hat.axpy(self.dt, &obs.q().pointwise(&boundary_trace(w_hat))?)?;
        v_new_hat.axpy(-self.dt * innovation, obs.l_trace())?;
        v_new_hat.scale(decay);

        let w = self.diffuse(&state.w, u, None)?;
        let mut correction = obs.k_field().clone();
        correction.scale(innovation);
        let w_new_hat = self.diffuse(w_hat, u, Some(&correction))?;
        Ok(SimState { t: state.t + self.dt, w, v, estimate: Some((w_new_hat, v_new_hat)) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub norm_w: f64,
    pub norm_v: f64,
    pub u_v: f64,
    pub y_v: f64,
    pub err: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub t: f64,
    pub w: ScalarField,
    pub v: BoundaryField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SimState,
}

impl SimTrace {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn norm_w(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.norm_w).collect()
    }

    /// `‖(w − ŵ, v − v̂)‖` per row (observer mode).
    pub fn error_norm(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.err.map(|(a, b)| libm::sqrt(a * a + b * b))).collect()
    }

    /// `‖w(t_end)‖ / ‖w(0)‖`.
    pub fn growth_ratio(&self) -> f64 {
        self.rows[self.rows.len() - 1].norm_w / self.rows[0].norm_w
    }
}

fn record(state: &SimState, dynamics: &Dynamics<'_>) -> Result<TraceRow> {
    let u_v = match dynamics {
        Dynamics::ClosedLoop(ctrl) => ctrl.feedback(&state.w, &state.v)?,
        _ => 0.0,
    };
    Ok(TraceRow {
        t: state.t,
        norm_w: state.w.norm(),
        norm_v: state.v.norm(),
        u_v,
        y_v: state.v.integral(),
        err: state.error_norms(),
    })
}

/// Runs `round(t_end/dt)` steps from `initial`; the trace has one row per
/// step plus the initial row.
pub fn run(
    op: &LinearOperator,
    config: &SimConfig,
    dynamics: Dynamics<'_>,
    initial: SimState,
    input: &mut dyn BoundaryInput,
) -> Result<SimTrace> {
    config.validate()?;
    check_grid(op.grid(), initial.w.grid())?;
    if matches!(dynamics, Dynamics::Observer(_)) && initial.estimate.is_none() {
        return Err(Error::InvalidParameter { name: "state", reason: "observer mode needs an estimate".into() });
    }
    let stepper = Stepper::new(op, config.mu, config.dt)?;
    let grid = *op.grid();
    let steps = config.steps();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();
    let mut state = initial;
    rows.push(record(&state, &dynamics)?);
    if config.snapshot_every.is_some() {
        snapshots.push(Snapshot { index: 0, t: state.t, w: state.w.clone(), v: state.v.clone() });
    }
    for n in 1..=steps {
        let t_next = n as f64 * config.dt;
        let mut next = match dynamics {
            Dynamics::OpenLoop => stepper.step_open_loop(&state, &input.value(t_next, &grid))?,
            Dynamics::ClosedLoop(ctrl) => stepper.step_closed_loop(&state, ctrl)?,
            Dynamics::Observer(obs) => stepper.step_observer(&state, obs, &input.value(t_next, &grid))?,
        };
        next.t = t_next;
        if !next.is_finite() {
            return Err(Error::NonFinite { step: n });
        }
        state = next;
        rows.push(record(&state, &dynamics)?);
        if let Some(k) = config.snapshot_every {
            if n % k == 0 {
                snapshots.push(Snapshot { index: n, t: state.t, w: state.w.clone(), v: state.v.clone() });
            }
        }
    }
    Ok(SimTrace { rows, snapshots, final_state: state })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    /// `−slope` of `log ‖·‖` against `t`.
    pub rate: f64,
    pub samples: usize,
    /// Samples clamped at [`NORM_FLOOR`].
    pub clamped: usize,
}

/// Least-squares fit of `log ‖·‖` over `t ≥ t_start`.
pub fn estimate_decay_rate(times: &[f64], norms: &[f64], t_start: f64) -> Result<DecayEstimate> {
    if times.len() != norms.len() {
        return Err(Error::ShapeMismatch { expected: times.len(), found: norms.len() });
    }
    let mut clamped = 0;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t >= t_start)
        .map(|(t, n)| {
            if n.is_nan() || *n < NORM_FLOOR {
                clamped += 1;
            }
            (*t, libm::log(n.max(NORM_FLOOR)))
        })
        .collect();
    if pts.len() < 5 {
        return Err(Error::TooFewSamples(pts.len()));
    }
    let k = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / k, b + y / k));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt) * (t - mt)));
    Ok(DecayEstimate { rate: -sxy / sxx, samples: pts.len(), clamped })
}

/// `⟨w, φ⟩_Ω` for each field, e.g. modal coefficients of a snapshot.
pub fn modal_coefficients(w: &ScalarField, modes: &[ScalarField]) -> Result<Vec<f64>> {
    modes.iter().map(|m| inner_product_omega(w, m)).collect()
}
