mod common;

use irscov::optimizer::{optimize, CoverageProblem, Objective, OptimizerConfig, Termination, UpdateMode};
use irscov::{PhaseConfig, Regime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Synthetic instance with `β_d` and `T` scaled to the attainable range of
/// `B`, so coverage stays away from both zero and one.
fn calibrated(seed: u64, irs_count: usize, side: usize) -> (common::Synthetic, f64) {
    let mut syn = common::synthetic(&mut ChaCha8Rng::seed_from_u64(seed), irs_count, side);
    let bound: f64 = syn
        .correlations
        .iter()
        .zip(syn.gains.cascaded())
        .map(|(c, beta)| beta * c.link1.entries().component_mul(c.link2.entries()).abs().sum())
        .sum();
    syn.gains.direct = bound / 4.0;
    (syn, 1.01 * bound)
}

fn problem_for(syn: &common::Synthetic, t: f64, regime: Regime) -> CoverageProblem<'_> {
    CoverageProblem::new(&syn.gains, &syn.correlations, 1.0, t, regime).unwrap()
}

/// The uniform start is stationary whenever `(R1 ∘ R2ᵀ) 1` is positive,
/// so runs that must move start from random phases.
fn random_start(syn: &common::Synthetic, seed: u64) -> PhaseConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    PhaseConfig::random(syn.correlations.irs_count(), syn.correlations.order(), &mut rng)
}

#[test]
fn uniform_start_is_stationary_for_positive_row_sums() {
    let (syn, t) = calibrated(1, 2, 2);
    let problem = problem_for(&syn, t, Regime::FiniteMLargeN);
    let out = optimize(&problem, &OptimizerConfig::default()).unwrap();
    assert_eq!(out.phases(), &PhaseConfig::initial(2, 4));
}

#[test]
fn trace_is_monotone_and_feasible() {
    for seed in 0..25 {
        let (syn, t) = calibrated(seed, 3, 3);
        for regime in [Regime::FiniteMLargeN, Regime::LargeMFiniteN] {
            for mode in [UpdateMode::Sweep, UpdateMode::Simultaneous] {
                let problem = problem_for(&syn, t, regime);
                let cfg = OptimizerConfig {
                    mode,
                    initial: Some(random_start(&syn, seed)),
                    ..OptimizerConfig::default()
                };
                let out = optimize(&problem, &cfg).unwrap();
                for w in out.trace.windows(2) {
                    assert!(w[1].coverage >= w[0].coverage, "seed {seed}: {w:?}");
                }
                assert!(out.phases().max_modulus_violation() <= 1e-12);
                assert!(out.coverage() >= out.trace[0].coverage);
            }
        }
    }
}

#[test]
fn ascent_improves_on_asymmetric_hops() {
    let mut improved = 0;
    for seed in 0..10 {
        let (syn, t) = calibrated(seed, 2, 3);
        let problem = problem_for(&syn, t, Regime::FiniteMLargeN);
        let cfg = OptimizerConfig {
            initial: Some(random_start(&syn, seed)),
            ..OptimizerConfig::default()
        };
        let out = optimize(&problem, &cfg).unwrap();
        if out.coverage() > out.trace[0].coverage * (1.0 + 1e-9) {
            improved += 1;
        }
    }
    assert!(improved >= 5, "only {improved} of 10 runs moved");
}

#[test]
fn beats_random_restarts() {
    for seed in 0..10 {
        let (syn, t) = calibrated(seed, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let problem = problem_for(&syn, t, Regime::FiniteMLargeN);
        let cfg = OptimizerConfig {
            initial: Some(random_start(&syn, seed)),
            ..OptimizerConfig::default()
        };
        let best = optimize(&problem, &cfg).unwrap().coverage();
        for _ in 0..50 {
            let random = PhaseConfig::random(2, 9, &mut rng);
            assert!(best >= problem.coverage(&random).unwrap());
        }
    }
}

fn tight(syn: &common::Synthetic, objective: Objective, mode: UpdateMode) -> OptimizerConfig {
    OptimizerConfig {
        initial: Some(random_start(syn, 99)),
        epsilon: 1e-30,
        max_iterations: 5000,
        objective,
        mode,
        ..OptimizerConfig::default()
    }
}

#[test]
fn coverage_and_aggregate_objectives_agree() {
    for seed in 0..8 {
        let (syn, t) = calibrated(seed, 2, 2);
        let problem = problem_for(&syn, t, Regime::FiniteMLargeN);
        let by_pc = optimize(&problem, &tight(&syn, Objective::Coverage, UpdateMode::Sweep)).unwrap();
        let by_b = optimize(&problem, &tight(&syn, Objective::Aggregate, UpdateMode::Sweep)).unwrap();
        let rel = (by_pc.b - by_b.b).abs() / by_b.b;
        assert!(rel <= 1e-6, "seed {seed}: {} vs {} ({rel:e})", by_pc.b, by_b.b);
    }
}

#[test]
fn sweep_and_simultaneous_agree() {
    for seed in 0..8 {
        let (syn, t) = calibrated(seed, 2, 2);
        let problem = problem_for(&syn, t, Regime::LargeMFiniteN);
        let a = optimize(&problem, &tight(&syn, Objective::Coverage, UpdateMode::Sweep)).unwrap();
        let b = optimize(&problem, &tight(&syn, Objective::Coverage, UpdateMode::Simultaneous)).unwrap();
        let rel = (a.b - b.b).abs() / a.b;
        assert!(rel <= 1e-6, "seed {seed}: {} vs {} ({rel:e})", a.b, b.b);
    }
}

#[test]
fn uncorrelated_scenario_is_a_fixed_point() {
    let scenario = irscov::Scenario::reference(4, 3).unwrap();
    let model =
        irscov::SystemModel::new(scenario, irscov::CorrelationOptions::uncorrelated()).unwrap();
    let b = model.aggregate(Regime::FiniteMLargeN, &model.initial_phases()).unwrap();
    let t = model.gamma0 * (b + model.beta_d());
    let problem = CoverageProblem::for_model(&model, t, Regime::FiniteMLargeN).unwrap();
    let out = optimize(&problem, &OptimizerConfig::default()).unwrap();
    assert_eq!(out.state.iteration, 1);
    assert_eq!(out.termination, Termination::Converged);
    assert_eq!(out.phases(), &model.initial_phases());
}

#[test]
fn full_coverage_at_start_returns_immediately() {
    let scenario = irscov::Scenario::reference(2, 2).unwrap();
    let model = irscov::SystemModel::new(scenario, Default::default()).unwrap();
    let b = model.aggregate(Regime::FiniteMLargeN, &model.initial_phases()).unwrap();
    let problem = CoverageProblem::for_model(&model, 0.5 * model.gamma0 * b, Regime::FiniteMLargeN).unwrap();
    let out = optimize(&problem, &OptimizerConfig::default()).unwrap();
    assert_eq!(out.termination, Termination::Saturated);
    assert_eq!(out.coverage(), 1.0);
    assert_eq!(out.state.iteration, 0);
}
