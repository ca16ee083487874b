use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rdsl::scenario::Scenario;
use rdsl::schedule::solve;

const RESTARTS: [usize; 3] = [1, 4, 8];

fn load(rel: &str) -> Scenario {
    Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(rel)).unwrap()
}

// Without the `parallel` feature both groups take the sequential path.
fn restarts(c: &mut Criterion) {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    for rel in ["quad_cell/scenario.yaml", "mmimo/scenario.yaml"] {
        let sc = load(rel);
        let name = rel.split('/').next().unwrap();
        let mut group = c.benchmark_group(format!("solve {name}"));
        group.sample_size(10);
        for r in RESTARTS {
            let mut cfg = sc.solver_config();
            cfg.restarts = r;
            cfg.iterations = 2000;
            let run = || solve(&sc.graph, &sc.platform, &sc.constraints, &cfg).unwrap();
            group.bench_with_input(BenchmarkId::new("parallel", r), &r, |b, _| b.iter(run));
            group.bench_with_input(BenchmarkId::new("sequential", r), &r, |b, _| {
                b.iter(|| one.install(run))
            });
        }
        group.finish();
    }
}

criterion_group!(benches, restarts);
criterion_main!(benches);
