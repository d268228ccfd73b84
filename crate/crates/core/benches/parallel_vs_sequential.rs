use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fraclab::continuation::{detect_bifurcations, Problem};
use fraclab::exec::Execution;
use fraclab::grid::Grid1D;
use fraclab::nonlinearity::{builtin, TermSpec};
use fraclab::operator::{assemble_restricted, assemble_restricted_with, RestrictedScheme};
use fraclab::params::FracParams;
use fraclab::picone::picone_property_run;
use fraclab::spectrum::solve_spectrum;
use std::hint::black_box;

const POLICIES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn label(exec: Execution) -> &'static str {
    match exec {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn assembly(c: &mut Criterion) {
    let params = FracParams::new(0.4).unwrap();
    let mut group = c.benchmark_group("assembly");
    group.sample_size(10);
    for n in [128, 256] {
        let grid = Grid1D::new(-1.0, 1.0, n).unwrap();
        for exec in POLICIES {
            group.bench_with_input(BenchmarkId::new(label(exec), n), &grid, |b, grid| {
                b.iter(|| assemble_restricted_with(grid, &params, RestrictedScheme::BoundaryWeighted, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn picone(c: &mut Criterion) {
    let pair = assemble_restricted(&Grid1D::new(-1.0, 1.0, 64).unwrap(), &FracParams::new(0.4).unwrap()).unwrap();
    let mut group = c.benchmark_group("picone_property_run");
    group.sample_size(10);
    for exec in POLICIES {
        group.bench_function(label(exec), |b| b.iter(|| picone_property_run(&pair, black_box(2_000), 7, exec).unwrap()));
    }
    group.finish();
}

fn lambda_scan(c: &mut Criterion) {
    let pair = assemble_restricted(&Grid1D::new(-1.0, 1.0, 128).unwrap(), &FracParams::new(0.4).unwrap()).unwrap();
    let term = builtin(&TermSpec::OddPower { gamma: 3.0 }, &pair).unwrap();
    let spectrum = solve_spectrum(&pair, 6).unwrap();
    let range = (0.0, spectrum.eigenvalue(5) + 0.1);
    let mut group = c.benchmark_group("lambda_scan");
    group.sample_size(10);
    for exec in POLICIES {
        let problem = Problem::new(&pair, &term, &spectrum).with_exec(exec);
        group.bench_function(label(exec), |b| b.iter(|| detect_bifurcations(&problem, black_box(range), 200).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, assembly, picone, lambda_scan);
criterion_main!(benches);
