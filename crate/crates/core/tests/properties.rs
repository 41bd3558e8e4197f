//! Structural properties of the forward and backward solvers.

use epictrl_core::{
    apply_lambda, apply_lambda_adjoint, build_grid, cost_and_gradient, fd_gradient, mass_balance_residuals,
    solve_backward, solve_forward, ControlLayout, ControlSchedule, Diffusion, Field, GridSpec, Layer, ModelParams,
    OracleReport, Problem, StateField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(spec: GridSpec, params: ModelParams) -> Problem {
    Problem::new(build_grid(spec).unwrap(), params, ControlLayout::default()).unwrap()
}

fn reference_start(p: &Problem) -> StateField {
    Layer::uniform(&p.grid, [1000.0, 0.0, 10.0, 0.0])
}

fn random_schedule(p: &Problem, rng: &mut ChaCha8Rng, hi: f64) -> ControlSchedule {
    let mut s = ControlSchedule::zeros_for(p);
    s.values_mut().iter_mut().for_each(|v| *v = rng.gen_range(0.0..hi));
    s
}

#[test]
fn infection_free_start_stays_infection_free() {
    let p = problem(GridSpec::new(5.0, 1.0, 0.01, 0.1), ModelParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y0 = Layer::from_fn(&p.grid, |a, x| [1000.0 * (1.0 + 0.2 * (3.0 * x + a).sin()), 40.0 * a, 0.0, 25.0]);
    let s_max = y0.s().max_abs();
    for _ in 0..3 {
        let sched = random_schedule(&p, &mut rng, p.params.u_bar);
        let traj = solve_forward(&y0, &sched, &p).unwrap();
        let worst = traj.layers.iter().map(|l| l.i().max_abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-12 * s_max, "{worst}");
    }
}

#[test]
fn population_balance_without_deaths() {
    let sigma = Diffusion::new(0.1, 0.1);
    let params = ModelParams {
        mortality_scale: 0.0,
        d_i: 0.0,
        fertility_scale: 0.0,
        sigma_s: sigma,
        sigma_v: sigma,
        sigma_i: sigma,
        sigma_r: sigma,
        ..ModelParams::default()
    };
    for (dt, dx) in [(0.02, 0.1), (0.01, 0.05)] {
        let p = problem(GridSpec::new(2.0, 1.0, dt, dx), params.clone());
        let y0 = Layer::from_fn(&p.grid, |a, x| {
            let bump = 1.0 + 0.5 * (std::f64::consts::PI * x).cos();
            [900.0 * bump, 50.0 * a, 10.0 * bump * (1.0 - a), 30.0]
        });
        let sched = ControlSchedule::constant_for(&p, 6.0);
        let traj = solve_forward(&y0, &sched, &p).unwrap();
        let total0 = traj.layers[0].total_mass(&p.grid);
        let bound = 5.0 * (dt * dt + dt * dx * dx) * total0;
        let worst = mass_balance_residuals(&traj, &p.grid).into_iter().fold(0.0, f64::max);
        assert!(worst <= bound, "{worst} > {bound}");
    }
}

#[test]
fn repeated_solves_are_bit_identical() {
    let p = problem(GridSpec::new(1.0, 1.0, 0.02, 0.1), ModelParams::default());
    let y0 = reference_start(&p);
    let sched = random_schedule(&p, &mut ChaCha8Rng::seed_from_u64(9), 10.0);
    let (r1, g1, t1) = cost_and_gradient(&y0, &sched, &p).unwrap();
    let (r2, g2, t2) = cost_and_gradient(&y0, &sched, &p).unwrap();
    assert_eq!(r1.j_total.to_bits(), r2.j_total.to_bits());
    assert_eq!(g1, g2);
    for (a, b) in t1.layers.iter().zip(&t2.layers) {
        assert_eq!(a, b);
    }
}

#[test]
fn long_horizon_stays_finite_and_nonnegative() {
    let params = ModelParams { u_bar: 80.0, ..ModelParams::default() };
    let p = problem(GridSpec::default(), params);
    let y0 = reference_start(&p);
    let traj = solve_forward(&y0, &ControlSchedule::constant_for(&p, 80.0), &p).unwrap();
    for layer in &traj.layers {
        assert!(layer.is_finite());
        for f in &layer.comps {
            assert!(f.as_slice().iter().all(|&v| v >= -1e-9));
        }
    }
    let adjoint = solve_backward(&traj, &ControlSchedule::constant_for(&p, 80.0), &p).unwrap();
    assert!(adjoint.iter().all(|l| l.is_finite()));
}

fn gradient_error(dt: f64) -> f64 {
    let p = problem(GridSpec::new(1.0, 1.0, dt, 0.1), ModelParams::default());
    let y0 = reference_start(&p);
    let sched = random_schedule(&p, &mut ChaCha8Rng::seed_from_u64(4), 8.0);
    let (_, adjoint, _) = cost_and_gradient(&y0, &sched, &p).unwrap();
    let fd = fd_gradient(&y0, &sched, &p, 1e-3).unwrap();
    OracleReport::relative("gradient", adjoint.into_values(), fd.into_values(), 1e-2).rel_error
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let coarse = gradient_error(0.02);
    let fine = gradient_error(0.01);
    assert!(coarse < 1e-2, "{coarse}");
    assert!(fine < coarse, "{fine} >= {coarse}");
}

#[test]
fn nonlocal_pairing_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let na = rng.gen_range(2..12);
        let nx = rng.gen_range(2..12);
        let dt = 1.0 / (na - 1) as f64;
        let dx = 1.0 / (nx - 1) as f64;
        let g = build_grid(GridSpec::new(dt, 1.0, dt, dx)).unwrap();
        let params = ModelParams {
            kernel_width: rng.gen_range(0.05..0.8),
            kernel_scale: rng.gen_range(0.1..3.0),
            phi1: rng.gen_range(0.0..1.0),
            phi2: rng.gen_range(0.0..1.0),
            ..ModelParams::default()
        };
        // Signs chosen so every term of the pairing has the same sign and the
        // relative comparison is not swamped by cancellation.
        let mut field = |lo: f64, hi: f64| Field::from_fn(&g, |_, _| rng.gen_range(lo..hi));
        let h = field(0.0, 1.0);
        let y = Layer { comps: [field(0.0, 1.0), field(0.0, 1.0), field(0.0, 1.0), field(0.0, 1.0)] };
        let q = Layer { comps: [field(0.0, 1.0), field(0.0, 1.0), field(-1.0, 0.0), field(0.0, 1.0)] };
        // ⟨Λ(h) y, q⟩ with the coupling of y.
        let lam = apply_lambda(&h, &g, &params).unwrap();
        let mut lhs = 0.0;
        for k in 0..g.na {
            for m in 0..g.nx {
                let [s, v, _, r] = y.node(k, m);
                let [qs, qv, qi, qr] = q.node(k, m);
                let bracket =
                    s * qs + params.phi1 * v * qv - (s + params.phi1 * v + params.phi2 * r) * qi + params.phi2 * r * qr;
                lhs += g.cell_weight(k, m) * lam.values[m] * bracket;
            }
        }
        let adj = apply_lambda_adjoint(&y, &q, &g, &params).unwrap();
        let rhs: f64 = (0..g.na)
            .flat_map(|k| (0..g.nx).map(move |m| (k, m)))
            .map(|(k, m)| g.cell_weight(k, m) * h[(k, m)] * adj.values[m])
            .sum();
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        assert!((lhs - rhs).abs() / scale < 1e-12, "{lhs} vs {rhs}");
    }
}
