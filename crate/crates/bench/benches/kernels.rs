use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use glvortex::pde::{default_dt, BoundaryCondition, ExternalFields, PdeState, Stepper};
use glvortex::poisson::{BoundaryFlux, SolverKind, SpectralSolver};
use glvortex::renergy::{grad_w_regular, stream_function};
use glvortex::track::{detect_vortices, DetectOptions};
use glvortex_bench::dipole;
use ndarray::Array2;

fn step(c: &mut Criterion) {
    let mut g = c.benchmark_group("imex_step");
    for eps in [0.08, 0.04] {
        let (grid, scaling, u) = dipole(eps);
        let dt = default_dt(&scaling, &grid, 0.0);
        let st = Stepper::new(grid, scaling, dt, BoundaryCondition::Neumann, ExternalFields::none()).unwrap();
        let state = PdeState::new(u, 0.0);
        g.bench_with_input(BenchmarkId::from_parameter(grid.n1()), &state, |b, s| {
            b.iter(|| st.step(black_box(s)).unwrap())
        });
    }
    g.finish();
}

fn poisson(c: &mut Criterion) {
    let mut g = c.benchmark_group("neumann_poisson");
    for eps in [0.08, 0.04] {
        let (grid, _, _) = dipole(eps);
        let solver = SpectralSolver::new(grid, SolverKind::Neumann);
        let f = Array2::from_shape_fn(grid.shape(), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let q = BoundaryFlux::zeros(&grid);
        let f = &f - glvortex::poisson::trapezoid_mean(&grid, &f);
        g.bench_with_input(BenchmarkId::from_parameter(grid.n1()), &f, |b, f| {
            b.iter(|| solver.neumann_poisson(black_box(f), &q).unwrap())
        });
    }
    g.finish();
}

fn detection(c: &mut Criterion) {
    let mut g = c.benchmark_group("detect_and_grad_w");
    let (grid, _, u) = dipole(0.04);
    let opts = DetectOptions::new(0.04);
    g.bench_function("detect", |b| b.iter(|| detect_vortices(black_box(&u), &opts).unwrap()));
    let conf = detect_vortices(&u, &opts).unwrap();
    g.bench_function("grad_w_regular", |b| {
        b.iter(|| grad_w_regular(&stream_function(black_box(&conf), &BoundaryCondition::Neumann, &grid).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, step, poisson, detection);
criterion_main!(benches);
