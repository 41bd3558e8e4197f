//! Refinement studies against manufactured solutions and duality.

use epictrl_core::{
    build_grid, duality_check, manufactured_forcing, observed_orders, solve_forward_forced, ControlLayout,
    ControlSchedule, DualityFields, Forcing, ForcingMode, GridSpec, Manufactured, ModelParams, Problem,
};

fn problem(spec: GridSpec) -> Problem {
    Problem::new(build_grid(spec).unwrap(), ModelParams::default(), ControlLayout::default()).unwrap()
}

/// Largest weighted ℓ² error over all time layers.
fn manufactured_error(spec: GridSpec, mode: ForcingMode) -> f64 {
    let p = problem(spec);
    let target = Manufactured::exp_cos([1.0; 4]);
    let mf = manufactured_forcing(&target, &p, mode).unwrap();
    let source = |t, a, x| mf.source(t, a, x);
    let boundary = |t, x| mf.boundary(t, x);
    let forcing = Forcing { source: &source, boundary: Some(&boundary) };
    let y0 = mf.exact_layer(0);
    let traj = solve_forward_forced(&y0, &ControlSchedule::zeros_for(&p), &p, Some(&forcing)).unwrap();
    let g = &p.grid;
    let mut worst: f64 = 0.0;
    for (n, layer) in traj.layers.iter().enumerate() {
        let exact = mf.exact_layer(n);
        let mut acc = 0.0;
        for c in 0..4 {
            for k in 0..g.na {
                for m in 0..g.nx {
                    let e = layer.comps[c][(k, m)] - exact.comps[c][(k, m)];
                    acc += g.cell_weight(k, m) * e * e;
                }
            }
        }
        worst = worst.max(acc.sqrt());
    }
    worst
}

#[test]
fn space_order_with_manufactured_solution() {
    let errors: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&dx| manufactured_error(GridSpec::new(0.2, 1.0, 0.002, dx), ForcingMode::Continuous))
        .collect();
    let orders = observed_orders(&errors);
    eprintln!("space errors {errors:?} orders {orders:?}");
    assert!(orders.iter().all(|&o| o >= 1.9), "{orders:?}");
}

#[test]
fn time_order_with_manufactured_solution() {
    let errors: Vec<f64> = [0.04, 0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| manufactured_error(GridSpec::new(0.4, 1.0, dt, 0.1), ForcingMode::SpaceDiscrete))
        .collect();
    let orders = observed_orders(&errors);
    eprintln!("time errors {errors:?} orders {orders:?}");
    assert!(orders.iter().all(|&o| o >= 1.5), "{orders:?}");
}

#[test]
fn duality_gap_vanishes_under_refinement() {
    let mut gaps = Vec::new();
    for (dt, dx) in [(0.04, 0.1), (0.02, 0.05), (0.01, 0.025), (0.005, 0.0125)] {
        let p = problem(GridSpec::new(0.4, 1.0, dt, dx));
        let sched = ControlSchedule::constant_for(&p, 5.0);
        let gap = duality_check(&p, &sched, &DualityFields::smooth(0.4, 1.0)).unwrap();
        gaps.push(gap.relative);
    }
    let orders = observed_orders(&gaps);
    eprintln!("duality gaps {gaps:?} orders {orders:?}");
    assert!(gaps[3] < 1e-2, "{gaps:?}");
    assert!(orders.iter().all(|&o| o >= 0.9), "{orders:?}");
}
