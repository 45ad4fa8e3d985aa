use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use weaksym::analysis::case_catalog;
use weaksym::assembly::{assemble, Discretization, Problem};
use weaksym::derham::ElasticitySpaces;
use weaksym::par::Exec;

fn bench(c: &mut Criterion) {
    let case = case_catalog("deformed_square").unwrap();
    let geo = case.geometry().unwrap();
    let load = |x: [f64; 3]| case.load(x);
    let problem = Problem { load: Some(&load), ..Problem::pure_dirichlet(case.params) };

    let mut group = c.benchmark_group("assembly");
    group.sample_size(10);
    for n_el in [8, 16] {
        let disc = Discretization::new(&geo, ElasticitySpaces::build(2, 3, 1, n_el).unwrap(), true).unwrap();
        for exec in [Exec::Sequential, Exec::Parallel] {
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), n_el), &disc, |b, d| {
                b.iter(|| assemble(black_box(d), &problem, exec).unwrap())
            });
        }
    }
    group.finish();

    let disc = Discretization::new(&geo, ElasticitySpaces::build(2, 3, 1, 32).unwrap(), true).unwrap();
    let sys = assemble(&disc, &problem, Exec::default()).unwrap();
    let x: Vec<f64> = (0..sys.a.ncols()).map(|i| (i as f64).sin()).collect();
    let mut y = vec![0.0; sys.a.nrows()];
    let mut group = c.benchmark_group("matvec");
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| b.iter(|| sys.a.matvec(black_box(&x), &mut y, exec)));
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
