use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tokensyn::io::{load_codebook, save_codebook_binary, CodebookFormat};
use tokensyn::{build_synonym_dict, quantize, redundancy_stats};
use tokensyn_bench::random_codebook;

fn codebook(c: &mut Criterion) {
    let cb = random_codebook(1024, 11, 3);
    c.bench_function("synonym_dict_1024x11", |b| b.iter(|| build_synonym_dict(black_box(&cb), 10.0)));
    c.bench_function("redundancy_stats_1024x11", |b| b.iter(|| redundancy_stats(black_box(&cb), 10.0)));

    let query = cb.row(17).iter().map(|v| v + 0.01).collect::<Vec<_>>();
    c.bench_function("quantize_1024x11", |b| b.iter(|| quantize(black_box(&query), &cb)));

    let big = save_codebook_binary(&random_codebook(4096, 128, 4));
    c.bench_function("load_binary_4096x128", |b| b.iter(|| load_codebook(black_box(&big), CodebookFormat::Binary)));
}

criterion_group!(benches, codebook);
criterion_main!(benches);
