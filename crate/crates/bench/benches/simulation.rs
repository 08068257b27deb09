use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mrd_core::led_dgp::simulate_panel;
use mrd_core::{LotConfig, OperatorPolicy};

fn bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_panel");
    g.sample_size(10);
    let cfg = LotConfig::default();
    for policy in [OperatorPolicy::Acknowledging, OperatorPolicy::Cautious] {
        g.bench_function(format!("{policy}/500"), |b| b.iter(|| black_box(simulate_panel(3, 500, &cfg, policy).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
