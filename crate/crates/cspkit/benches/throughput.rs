//! Throughput benchmarks for the data-parallel hot paths.
//!
//! The parallel/sequential comparison is a two-run affair because the
//! fallback is compile-time:
//!
//! ```text
//! cargo bench -p cspkit                           # rayon fan-out (default)
//! cargo bench -p cspkit --no-default-features     # sequential fallback
//! ```
//!
//! Benchmark names are identical in both modes, so criterion's saved
//! baselines line the two up directly. Outputs are bit-identical between the
//! modes; only the wall-clock differs.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use cspkit::covariance::{class_average, detect_outliers, trial_norms};
use cspkit::csp::ffdiag::FfdiagConfig;
use cspkit::csp::itfe::MiEstimator;
use cspkit::csp::{extract_features_set, multiclass_csp};
use cspkit::dataio::TrialSet;
use cspkit::synth::{generate, SynthSpec};

fn fixture(n_channels: usize, n_classes: u32, trials_per_class: usize, samples: usize) -> TrialSet {
    let spec = SynthSpec {
        n_channels,
        n_classes,
        trials_per_class,
        samples_per_trial: samples,
        noise_variance: 0.05,
        outlier_rate: 0.05,
        seed: 1234,
        ..SynthSpec::default()
    };
    generate(&spec).expect("bench fixture").0
}

fn bench_trial_norms(c: &mut Criterion) {
    let set = fixture(22, 4, 18, 250);
    c.bench_function("trial_norms/22ch_72trials_250smp", |b| {
        b.iter(|| trial_norms(black_box(&set.trials)).unwrap())
    });
}

fn bench_class_average(c: &mut Criterion) {
    let set = fixture(22, 4, 18, 250);
    let mask = detect_outliers(&set, 2.5).unwrap();
    c.bench_function("class_average/22ch_72trials_250smp", |b| {
        b.iter(|| class_average(black_box(&set), black_box(&mask)).unwrap())
    });
}

fn bench_feature_extraction(c: &mut Criterion) {
    let set = fixture(22, 4, 18, 250);
    let mask = detect_outliers(&set, 2.5).unwrap();
    let ccs = class_average(&set, &mask).unwrap();
    let result =
        multiclass_csp(&ccs, &set, 6, MiEstimator::Gaussian, FfdiagConfig::default()).unwrap();
    let bank = result.bank;
    c.bench_function("extract_features_set/22ch_72trials_k6", |b| {
        b.iter(|| {
            extract_features_set(black_box(&set), black_box(&bank.w), black_box(&bank.selected))
                .unwrap()
        })
    });
}

fn bench_multiclass_csp(c: &mut Criterion) {
    let set = fixture(22, 4, 18, 250);
    let mask = detect_outliers(&set, 2.5).unwrap();
    let ccs = class_average(&set, &mask).unwrap();
    c.bench_function("multiclass_csp/22ch_4class_k6", |b| {
        b.iter(|| {
            multiclass_csp(
                black_box(&ccs),
                black_box(&set),
                6,
                MiEstimator::Gaussian,
                FfdiagConfig::default(),
            )
            .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_trial_norms,
    bench_class_average,
    bench_feature_extraction,
    bench_multiclass_csp
);
criterion_main!(benches);
