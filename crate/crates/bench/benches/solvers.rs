use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use epictrl_core::{
    apply_lambda, build_grid, solve_backward, solve_forward, ControlLayout, ControlSchedule, Field, GridSpec, Layer,
    ModelParams, Problem,
};

fn coarse() -> Problem {
    Problem::new(build_grid(GridSpec::default()).unwrap(), ModelParams::default(), ControlLayout::default()).unwrap()
}

fn forward(c: &mut Criterion) {
    let p = coarse();
    let y0 = Layer::uniform(&p.grid, [1000.0, 0.0, 10.0, 0.0]);
    let sched = ControlSchedule::constant_for(&p, 5.0);
    c.bench_function("forward_coarse", |b| b.iter(|| solve_forward(&y0, &sched, &p).unwrap()));
}

fn backward(c: &mut Criterion) {
    let p = coarse();
    let y0 = Layer::uniform(&p.grid, [1000.0, 0.0, 10.0, 0.0]);
    let sched = ControlSchedule::constant_for(&p, 5.0);
    let traj = solve_forward(&y0, &sched, &p).unwrap();
    c.bench_function("backward_coarse", |b| b.iter(|| solve_backward(&traj, &sched, &p).unwrap()));
}

fn force_of_infection(c: &mut Criterion) {
    let params = ModelParams::default();
    for dx in [0.1, 0.01] {
        let g = build_grid(GridSpec::new(5.0, 1.0, 0.005, dx)).unwrap();
        c.bench_function(&format!("lambda_nx{}", g.nx), |b| {
            b.iter_batched(
                || Field::from_fn(&g, |a, x| 10.0 * (1.0 + a * x)),
                |i| apply_lambda(&i, &g, &params).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = forward, backward, force_of_infection
}
criterion_main!(benches);
