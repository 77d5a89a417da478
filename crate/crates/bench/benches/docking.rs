use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fovdock_bench::{chair_cloud, labels, preset, small_grid};
use fovdock_core::feasible::sweep_params;
use fovdock_core::{
    fit_boundary, perceive, run_episode, sweep, verify_lyapunov, EpisodeParams, EstimatorSetup, FitSettings,
    InitialState, MeasurementSource, PolarState,
};

fn episode(c: &mut Criterion) {
    let cfg = preset("case1");
    let params = EpisodeParams::from_config(&cfg).unwrap();
    let start = InitialState::Polar(PolarState::new(1.5, 0.1, 0.05).unwrap());
    c.bench_function("episode_case1", |b| {
        b.iter(|| run_episode(black_box(&start), &params, None).unwrap())
    });

    let setup = EstimatorSetup {
        params: cfg.estimation,
        source: MeasurementSource::NoisyTruth,
        seed: 3,
    };
    c.bench_function("episode_case1_estimator", |b| {
        b.iter(|| run_episode(black_box(&start), &params, Some(&setup)).unwrap())
    });
}

fn feasible(c: &mut Criterion) {
    let cfg = preset("case2");
    let params = sweep_params(&cfg).unwrap();
    let grid = small_grid();
    c.bench_function("sweep_9x9x9_case2", |b| {
        b.iter(|| sweep(black_box(&grid), &params).unwrap())
    });

    let gains = cfg.resolved_gains().unwrap();
    let all = labels(&cfg);
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("fit_case2", |b| {
        b.iter(|| {
            fit_boundary(
                black_box(&all),
                &cfg.grid,
                &cfg.camera,
                &cfg.landmark,
                &gains,
                &FitSettings::default(),
            )
        })
    });
    group.finish();

    let fit = fit_boundary(
        &all,
        &cfg.grid,
        &cfg.camera,
        &cfg.landmark,
        &gains,
        &FitSettings::default(),
    )
    .unwrap();
    c.bench_function("verify_10k_case2", |b| {
        b.iter(|| verify_lyapunov(black_box(&fit), &cfg.camera, &cfg.landmark, &gains, 10_000).unwrap())
    });
}

fn perception(c: &mut Criterion) {
    let cfg = preset("case1");
    let cloud = chair_cloud(&cfg);
    c.bench_function("perceive_chair_2m", |b| {
        b.iter(|| perceive(black_box(&cloud), &cfg.perception, &cfg.camera, &cfg.landmark).unwrap())
    });
}

criterion_group!(benches, episode, feasible, perception);
criterion_main!(benches);
