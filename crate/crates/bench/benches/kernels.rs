use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fblearn_core::capacity::{blahut_arimoto, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use fblearn_core::codesim::{empirical_ml_decode, generate_codebook};
use fblearn_core::density::{info_density_pmf, np_beta, self_convolve};
use fblearn_core::{Dist, Dmc};

fn convolution(c: &mut Criterion) {
    let w = Dmc::new(&[vec![0.7, 0.2, 0.1], vec![0.1, 0.6, 0.3], vec![0.2, 0.2, 0.6]]).unwrap();
    let letter = info_density_pmf(&w, &Dist::uniform(3)).unwrap();
    let mut g = c.benchmark_group("self_convolve");
    for n in [50usize, 200] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| self_convolve(black_box(&letter), n).unwrap()));
    }
    g.finish();

    let pmf = self_convolve(&letter, 200).unwrap();
    c.bench_function("np_beta/n200", |b| b.iter(|| np_beta(black_box(&pmf), 0.9).unwrap()));
}

fn capacity(c: &mut Criterion) {
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|x| {
            let raw: Vec<f64> = (0..8).map(|y| 1.0 + ((x * 5 + y * 3) % 7) as f64).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect();
    let w = Dmc::new(&rows).unwrap();
    c.bench_function("blahut_arimoto/8x8", |b| {
        b.iter(|| blahut_arimoto(black_box(&w), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap())
    });
}

fn decoding(c: &mut Criterion) {
    let w = Dmc::bsc(0.11);
    let cb = generate_codebook(&Dist::uniform(2), 8.0, 32, 32, 7).unwrap();
    let y = cb.encode(&[17]);
    c.bench_function("empirical_ml_decode/256x32", |b| {
        b.iter(|| empirical_ml_decode(black_box(&w), &cb, black_box(&y)).unwrap())
    });
}

criterion_group!(benches, convolution, capacity, decoding);
criterion_main!(benches);
