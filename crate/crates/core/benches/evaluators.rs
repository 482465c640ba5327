//! Evaluator throughput. Run twice to compare the rayon core against the
//! sequential fallback:
//!
//!     cargo bench -p minksym --bench evaluators
//!     cargo bench -p minksym --bench evaluators --no-default-features
//!
//! Group names carry the build mode so both runs land side by side in the
//! criterion report.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minksym::bodies::{cross_dual_norm, EvalMode, ScaledCrossPolytope, SupportBody, SymmetrizedBody};
use minksym::estimators::mean_width;
use minksym::linalg::{sample_haar_basis, sample_sphere, OrthogonalBasis, Seed};
use minksym::probes::probe_unbiased_directions;

const MODE: &str = if cfg!(feature = "parallel") { "parallel" } else { "sequential" };

fn stacked(n: usize, stages: usize, samples: usize) -> SymmetrizedBody {
    let q = Arc::new(ScaledCrossPolytope::normalized(n).unwrap());
    let mut body = SymmetrizedBody::new(q, EvalMode::MonteCarlo { samples, seed: Seed(1) }).unwrap();
    for s in 0..stages {
        let b = sample_haar_basis(n, Seed(10 + s as u64)).unwrap();
        body = body.symmetrize_basis(&b, s > 0).unwrap();
    }
    body
}

fn symmetrized_eval(c: &mut Criterion) {
    let mut g = c.benchmark_group(format!("symmetrized-eval/{MODE}"));
    g.sample_size(10);
    for n in [16usize, 64] {
        let body = stacked(n, 4, 5_000);
        let x = sample_sphere(n, Seed(2)).unwrap();
        g.bench_with_input(BenchmarkId::new("h", n), &n, |b, _| b.iter(|| black_box(body.h(x.as_slice()))));
        g.bench_with_input(BenchmarkId::new("gradient", n), &n, |b, _| {
            b.iter(|| black_box(body.evaluate_with_gradient(x.as_slice()).unwrap()))
        });
    }
    g.finish();
}

fn cross_specialized(c: &mut Criterion) {
    let mut g = c.benchmark_group(format!("cross-dual-norm/{MODE}"));
    g.sample_size(10);
    let n = 64;
    let u = sample_haar_basis(n, Seed(3)).unwrap();
    let f = OrthogonalBasis::identity(n);
    let x = sample_sphere(n, Seed(4)).unwrap();
    let mode = EvalMode::MonteCarlo { samples: 20_000, seed: Seed(5) };
    g.bench_function("n64", |b| b.iter(|| black_box(cross_dual_norm(x.as_slice(), &u, &f, mode).unwrap())));
    let n = 14;
    let u = sample_haar_basis(n, Seed(6)).unwrap();
    let f = OrthogonalBasis::identity(n);
    let x = sample_sphere(n, Seed(7)).unwrap();
    g.bench_function("exact-n14", |b| {
        b.iter(|| black_box(cross_dual_norm(x.as_slice(), &u, &f, EvalMode::Exact).unwrap()))
    });
    g.finish();
}

fn estimators(c: &mut Criterion) {
    let mut g = c.benchmark_group(format!("estimators/{MODE}"));
    g.sample_size(10);
    let body = stacked(32, 3, 2_000);
    g.bench_function("mean-width-n32", |b| {
        b.iter(|| black_box(mean_width(&body, 64, Seed(8), false, None).unwrap()))
    });
    g.bench_function("unbiased-directions-n64", |b| {
        b.iter(|| black_box(probe_unbiased_directions(64, 32, Seed(9)).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, symmetrized_eval, cross_specialized, estimators);
criterion_main!(benches);
