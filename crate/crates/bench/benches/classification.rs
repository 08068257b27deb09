use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mrd_core::rule_algebra::random::{random_nondegenerate_rule, random_rule};
use mrd_core::{classify_cutoff, classify_general, CutoffRule, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cases(dim: usize, n: usize) -> Vec<(CutoffRule, CutoffRule, Vec<f64>)> {
    let mut r = ChaCha8Rng::seed_from_u64(17);
    let all: Vec<usize> = (1..=dim).collect();
    (0..n)
        .map(|_| {
            let t = random_nondegenerate_rule(&mut r, dim, &all, 3);
            let d = random_rule(&mut r, dim, 3);
            let x = (0..dim).map(|_| r.random_range(-2.0..2.0)).collect();
            (t, d, x)
        })
        .collect()
}

fn bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("classify");
    for dim in [2, 4] {
        let data = cases(dim, 200);
        g.bench_function(format!("cutoff/k{dim}"), |b| {
            b.iter(|| {
                for (t, d, x) in &data {
                    black_box(classify_cutoff(t, d, x).unwrap());
                }
            })
        });
        g.bench_function(format!("grid/k{dim}"), |b| {
            b.iter(|| {
                for (t, d, x) in &data {
                    let support: Vec<usize> = t.support_directions().unwrap().into_iter().collect();
                    let grid = GridSpec::bracketing(x, &support, 1.0);
                    black_box(classify_general(t, |p| d.evaluate(p).unwrap(), x, &grid).unwrap());
                }
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
