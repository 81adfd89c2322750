use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use nalgebra::DVector;
use rpt_bench::randn;
use rpt_core::analysis::exact_pdf;
use rpt_core::baselines::{cca_rho, reference_matrix};
use rpt_core::detector::{BinaryDetector, MaryDetector, SpatialCovariance};
use rpt_core::ramanujan::DictionaryMatrix;
use rpt_core::Hypothesis;

fn bench_dictionary(c: &mut Criterion) {
    c.bench_function("dictionary_build_pmax32_l288", |b| {
        b.iter(|| DictionaryMatrix::build(black_box(32), black_box(288)).unwrap())
    });
}

fn bench_binary_statistic(c: &mut Criterion) {
    let dict = DictionaryMatrix::build(32, 288).unwrap();
    let det = BinaryDetector::from_dictionary(&dict, 32, 18, 0.0).unwrap();
    let y = randn(288, 1, 1);
    let yv = DVector::from_column_slice(y.column(0).as_slice());
    c.bench_function("binary_statistic_l288", |b| {
        b.iter(|| det.statistic(black_box(&yv)).unwrap())
    });

    c.bench_function("binary_detector_build_l288", |b| {
        b.iter_batched(
            || (),
            |_| BinaryDetector::from_dictionary(black_box(&dict), 32, 18, 0.0).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_mary_statistic(c: &mut Criterion) {
    let periods = [28usize, 26, 25, 24, 23, 22, 21, 20, 18];
    let dict = DictionaryMatrix::build(28, 128).unwrap();
    let sigma = SpatialCovariance::rho_distance(8, 0.7, None).unwrap();
    let det = MaryDetector::new(&dict, &periods, sigma).unwrap();
    let y = randn(128, 8, 2);
    c.bench_function("mary_decide_m9_nc8_l128", |b| {
        b.iter(|| det.decide(black_box(&y)).unwrap())
    });
}

fn bench_cca(c: &mut Criterion) {
    let l = 256usize;
    let y = randn(l, 8, 3);
    let q = reference_matrix(9.25, 2, 256.0, l).unwrap();
    c.bench_function("cca_rho_nc8_l256", |b| {
        b.iter(|| cca_rho(black_box(&y), black_box(&q)).unwrap())
    });
}

fn bench_exact_pdf(c: &mut Criterion) {
    let params = rpt_core::analysis::ChiSquareParams {
        r_a: 30,
        r_b: 16,
        lambda2_0a: 11.5,
        lambda2_0b: 0.0,
        lambda2_1a: 0.0,
        lambda2_1b: 11.5,
        cross_cov_base: 0.0,
    };
    c.bench_function("exact_pdf_point", |b| {
        b.iter(|| exact_pdf(black_box(3.0), &params, Hypothesis::H1, 1e-10).unwrap())
    });
}

criterion_group!(
    benches,
    bench_dictionary,
    bench_binary_statistic,
    bench_mary_statistic,
    bench_cca,
    bench_exact_pdf
);
criterion_main!(benches);
