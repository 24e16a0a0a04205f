use std::f64::consts::PI;

use heatctl_core::generator::{closed_loop_generator, stack_state, state_norm};
use heatctl_core::simulate::{estimate_decay_rate, run, Dynamics, SimConfig, SimState, ZeroInput};
use heatctl_core::spectral::truncate_operator;
use heatctl_core::{
    assemble_laplacian, BoundaryField, BoundaryScheme, ControllerSynthesis, GainChoice, Grid, LinearOperator,
    ObserverSynthesis, ScalarField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> (Grid, LinearOperator) {
    let g = Grid::new(1.0, 1.0, n, n).unwrap();
    (g, assemble_laplacian(&g, BoundaryScheme::GhostPoint))
}

fn controller(op: &LinearOperator, gains: GainChoice) -> ControllerSynthesis {
    let basis = truncate_operator(op, 6.0, 4).unwrap();
    let p = BoundaryField::from_fn(*op.grid(), |x, y| x.sin() * y.sin());
    ControllerSynthesis::build(op, &basis, 3.0, Some(&p), &gains).unwrap()
}

fn w0(g: Grid) -> ScalarField {
    ScalarField::from_fn(g, |x, y| x * (2.0 * PI * y).sin())
}

#[test]
fn closed_loop_matches_semi_discrete_exponential() {
    let (g, op) = square(11);
    let ctrl = controller(&op, GainChoice::Fixed(vec![15.0]));
    let gen = closed_loop_generator(&op, &ctrl).unwrap();
    let exact = gen.matrix.clone().exp() * stack_state(&w0(g), &BoundaryField::zeros(g));
    let mut errors = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3] {
        let cfg = SimConfig { dt, t_end: 1.0, mu: 6.0, snapshot_every: None };
        let s = SimState::new(w0(g), BoundaryField::zeros(g)).unwrap();
        let tr = run(&op, &cfg, Dynamics::ClosedLoop(&ctrl), s, &mut ZeroInput).unwrap();
        let x = stack_state(&tr.final_state.w, &tr.final_state.v);
        errors.push(state_norm(&op, &(&x - &exact)) / state_norm(&op, &exact));
    }
    assert!(errors[2] < 0.05, "{errors:?}");
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 1.0).abs() < 0.3, "{errors:?}");
    }
}

#[test]
fn decay_rate_matches_spectral_abscissa() {
    let (g, op) = square(11);
    for gains in [GainChoice::Fixed(vec![15.0]), GainChoice::default()] {
        let ctrl = controller(&op, gains);
        let abscissa = closed_loop_generator(&op, &ctrl).unwrap().spectral_abscissa();
        let cfg = SimConfig { dt: 1e-3, t_end: 6.0, mu: 6.0, snapshot_every: None };
        let s = SimState::new(w0(g), BoundaryField::zeros(g)).unwrap();
        let tr = run(&op, &cfg, Dynamics::ClosedLoop(&ctrl), s, &mut ZeroInput).unwrap();
        let rate = estimate_decay_rate(&tr.times(), &tr.norm_w(), 2.0).unwrap().rate;
        assert!((rate + abscissa).abs() < 0.1 * abscissa.abs(), "{rate} vs {abscissa}");
    }
}

#[test]
fn single_mode_open_loop() {
    let (g, op) = square(21);
    let pairs = heatctl_core::compute_eigenpairs(&op, 2).unwrap();
    for (mu, horizon) in [(6.0, 1.0), (1.0, 2.0)] {
        let cfg = SimConfig { dt: 1e-3, t_end: horizon, mu, snapshot_every: None };
        let s = SimState::new(pairs[0].phi.clone(), BoundaryField::zeros(g)).unwrap();
        let tr = run(&op, &cfg, Dynamics::OpenLoop, s, &mut ZeroInput).unwrap();
        let r = pairs[0].lambda + mu;
        let backward_euler = (1.0 - cfg.dt * r).powi(-(cfg.steps() as i32));
        assert!((tr.growth_ratio() / backward_euler - 1.0).abs() < 1e-8);
        let expected = (r * horizon).exp();
        assert!((tr.growth_ratio() / expected - 1.0).abs() < 0.02, "{} vs {expected}", tr.growth_ratio());
        if mu == 1.0 {
            let rate = estimate_decay_rate(&tr.times(), &tr.norm_w(), 0.0).unwrap().rate;
            assert!((rate / -(pairs[0].lambda + 1.0) - 1.0).abs() < 0.02);
        }
    }
}

#[test]
fn observer_error_is_input_independent() {
    let (g, op) = square(15);
    let basis = truncate_operator(&op, 6.0, 4).unwrap();
    let obs = ObserverSynthesis::build(&op, &basis, 3.0, None, &GainChoice::default()).unwrap();
    let cfg = SimConfig { dt: 0.05, t_end: 4.0, mu: 6.0, snapshot_every: None };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let e0 = ScalarField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
    let start = SimState::new(w0(g), BoundaryField::zeros(g))
        .unwrap()
        .with_estimate(
            {
                let mut h = w0(g);
                h.axpy(-1.0, &e0).unwrap();
                h
            },
            BoundaryField::zeros(g),
        )
        .unwrap();
    let quiet = run(&op, &cfg, Dynamics::Observer(&obs), start.clone(), &mut ZeroInput).unwrap();
    let mut noise = ChaCha8Rng::seed_from_u64(6);
    let mut input = |_t: f64, g: &Grid| BoundaryField::from_fn(*g, |_, _| noise.random_range(-1.0..1.0));
    let driven = run(&op, &cfg, Dynamics::Observer(&obs), start, &mut input).unwrap();
    let a = quiet.error_norm().unwrap();
    let b = driven.error_norm().unwrap();
    let scale = a.iter().copied().fold(0.0, f64::max);
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-10 * scale));
    assert!(a[a.len() - 1] < 0.05 * a[0]);
    let rate = estimate_decay_rate(&quiet.times(), &a, 1.0).unwrap().rate;
    assert!(rate > 0.0);
}

#[test]
fn matched_estimate_has_zero_error() {
    let (g, op) = square(11);
    let basis = truncate_operator(&op, 6.0, 4).unwrap();
    let obs = ObserverSynthesis::build(&op, &basis, 3.0, None, &GainChoice::default()).unwrap();
    let cfg = SimConfig { dt: 0.05, t_end: 1.0, mu: 6.0, snapshot_every: None };
    let v0 = BoundaryField::from_fn(g, |x, y| x + y);
    let s = SimState::new(w0(g), v0.clone()).unwrap().with_estimate(w0(g), v0).unwrap();
    let tr = run(&op, &cfg, Dynamics::Observer(&obs), s, &mut ZeroInput).unwrap();
    assert!(tr.rows.iter().all(|r| r.err == Some((0.0, 0.0))));
}
