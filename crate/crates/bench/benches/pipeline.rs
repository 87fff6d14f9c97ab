use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tokensyn::metrics::evaluate_ensembles;
use tokensyn::{build_synonym_dict, encode, generate_ensemble, SwapConfig};
use tokensyn_bench::{chains, trained_codebook};

fn pipeline(c: &mut Criterion) {
    let cb = trained_codebook(256, 5);
    let dict = build_synonym_dict(&cb, 0.5).unwrap();
    let chain = chains(1, 100, 6).remove(0);
    c.bench_function("encode_100", |b| b.iter(|| encode(black_box(&chain), &cb, 5)));

    let cfg = SwapConfig::default();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    group.bench_function("generate_250x100", |b| b.iter(|| generate_ensemble(black_box(&chain), &cb, &dict, &cfg, 5)));
    let a = generate_ensemble(&chain, &cb, &dict, &cfg, 5).unwrap();
    let other = SwapConfig { seed: 1, ..cfg };
    let r = generate_ensemble(&chain, &cb, &dict, &other, 5).unwrap();
    group.bench_function("evaluate_250x100", |b| b.iter(|| evaluate_ensembles(black_box(&a), &r)));
    group.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
