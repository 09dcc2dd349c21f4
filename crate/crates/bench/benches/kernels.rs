use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use irscov::dequiv::{aggregate_bm, aggregate_bn, threshold_at_coverage};
use irscov::montecarlo::{estimate_coverage_grid, trial_rng, FactorSet, McConfig, SnrKernel};
use irscov::optimizer::{optimize, CoverageProblem, OptimizerConfig};
use irscov::spatialcorr::build_correlation;
use irscov::{CorrelationOptions, PhaseConfig, Regime, Scenario, SystemModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(m: usize, side: usize) -> SystemModel {
    SystemModel::new(Scenario::reference(m, side).unwrap(), CorrelationOptions::default()).unwrap()
}

fn correlation(c: &mut Criterion) {
    let s = Scenario::reference(1, 15).unwrap();
    let lambda = s.radio.wavelength();
    c.bench_function("sinc correlation 225", |b| {
        b.iter(|| build_correlation(black_box(&s.panel), lambda).unwrap())
    });
}

fn aggregates(c: &mut Criterion) {
    let m = model(15, 15);
    let phases = PhaseConfig::random(15, 225, &mut ChaCha8Rng::seed_from_u64(1));
    c.bench_function("B_M 15x225", |b| {
        b.iter(|| aggregate_bm(&m.gains, &m.correlations, black_box(&phases)).unwrap())
    });
    c.bench_function("B_N 15x225", |b| {
        b.iter(|| aggregate_bn(&m.gains, &m.correlations, black_box(&phases)).unwrap())
    });
}

fn monte_carlo(c: &mut Criterion) {
    let m = model(8, 8);
    let phases = PhaseConfig::random(8, 64, &mut ChaCha8Rng::seed_from_u64(2));
    let factors = FactorSet::for_correlations(&m.correlations).unwrap();
    let kernel = SnrKernel::new(&m.gains, &factors, &phases, m.gamma0).unwrap();
    let mut t = 0u64;
    c.bench_function("SNR trial 8x64", |b| {
        b.iter(|| {
            t += 1;
            kernel.snr(&kernel.trial_terms(&mut trial_rng(0, t)))
        })
    });
    let grid: Vec<f64> = (0..15).map(|k| 10f64.powf(-2.0 + 0.25 * k as f64)).collect();
    c.bench_function("coverage grid 8x64, 1e4 trials", |b| {
        b.iter(|| estimate_coverage_grid(&kernel, &grid, &McConfig::new(10_000, 3)).unwrap())
    });
}

fn optimizer(c: &mut Criterion) {
    let m = model(8, 8);
    let b0 = m.aggregate(Regime::FiniteMLargeN, &m.initial_phases()).unwrap();
    let t = threshold_at_coverage(b0, m.gamma0, m.beta_d(), 0.5).unwrap();
    let problem = CoverageProblem::for_model(&m, t, Regime::FiniteMLargeN).unwrap();
    let cfg = OptimizerConfig {
        initial: Some(PhaseConfig::random(8, 64, &mut ChaCha8Rng::seed_from_u64(4))),
        ..OptimizerConfig::default()
    };
    c.bench_function("optimize 8x64 from random phases", |b| {
        b.iter(|| optimize(&problem, black_box(&cfg)).unwrap())
    });
}

criterion_group!(benches, correlation, aggregates, monte_carlo, optimizer);
criterion_main!(benches);
