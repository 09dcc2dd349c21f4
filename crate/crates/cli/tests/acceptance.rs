//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every verdict is printed even when the run passes.

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};

use irscov::config::ConfigFile;
use irscov::dequiv::{
    aggregate_bm, aggregate_bn, aggregate_bn_literal, coverage_closed_form, knee_threshold,
    threshold_at_coverage,
};
use irscov::montecarlo::{
    instantaneous_snr, instantaneous_snr_by_element, sample_channels, second_moment,
    snr_magnitude_scale, trial_rng, FactorSet, McConfig,
};
use irscov::optimizer::{optimize, CoverageProblem, OptimizerConfig, Termination};
use irscov::scenario::{linear_to_db, place_irs_random, PanelGeometry};
use irscov::spatialcorr::Normalization;
use irscov::{CorrelationOptions, PhaseConfig, Regime, Scenario, SystemModel};
use irscov_cli::sweep::{evaluate_grid, grid, optimized_phases};
use irscov_cli::gradient_check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

const REGIMES: [Regime; 2] = [Regime::FiniteMLargeN, Regime::LargeMFiniteN];

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Reference radio and geometry, 8 evenly spaced surfaces of 8×8 elements.
fn desk() -> SystemModel {
    SystemModel::new(Scenario::reference(8, 8).unwrap(), CorrelationOptions::default()).unwrap()
}

/// Desk scenario with seeded random placement along the link.
fn desk_placed(seed: u64) -> SystemModel {
    let mut s = Scenario::reference(8, 8).unwrap();
    s.irs_positions = place_irs_random(8, s.tx, s.rx, seed).unwrap();
    SystemModel::new(s, CorrelationOptions::default()).unwrap()
}

fn reference(m: usize, side: usize) -> SystemModel {
    SystemModel::new(Scenario::reference(m, side).unwrap(), CorrelationOptions::default()).unwrap()
}

fn c1_tightness() -> Verdict {
    let model = desk();
    let mut worst_all: f64 = 0.0;
    let mut parts = Vec::new();
    for regime in REGIMES {
        let b0 = model.aggregate(regime, &model.initial_phases()).unwrap();
        let t_mid = threshold_at_coverage(b0, model.gamma0, model.beta_d(), 0.5).unwrap();
        let opt = optimized_phases(&model, regime, t_mid).unwrap();
        let lo = linear_to_db(threshold_at_coverage(opt.b, model.gamma0, model.beta_d(), 0.999).unwrap());
        let hi = linear_to_db(threshold_at_coverage(opt.b, model.gamma0, model.beta_d(), 0.01).unwrap());
        let t: Vec<f64> = (0..15)
            .map(|k| 10f64.powf((lo + (hi - lo) * k as f64 / 14.0) / 10.0))
            .collect();
        let rows = evaluate_grid(&model, regime, opt.phases(), &t, Some(McConfig::new(200_000, 2024))).unwrap();
        let worst = rows
            .iter()
            .map(|r| (r.pc_closed_form - r.pc_mc.unwrap()).abs())
            .fold(0.0_f64, f64::max);
        worst_all = worst_all.max(worst);
        parts.push(format!("{} max|dP|={worst:.2e}", regime.as_str()));
    }
    check(worst_all <= 0.02, format!("{} (tol 0.02, 15 points, 2e5 trials)", parts.join(", ")))
}

fn c2_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_b, mut worst_b_strict, mut worst_snr): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..50 {
        let m = rng.random_range(1..=8);
        let (n_h, n_v) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let mut s = Scenario::reference(m, 1).unwrap();
        s.irs_positions = place_irs_random(m, s.tx, s.rx, k).unwrap();
        let d = s.radio.wavelength() * rng.random_range(0.03..0.6);
        s.panel = PanelGeometry::new(n_h, n_v, d, d).unwrap();
        let opts = CorrelationOptions {
            correlated: rng.random_bool(0.8),
            normalization: if rng.random_bool(0.5) { Normalization::Unit } else { Normalization::ElementArea },
        };
        let model = SystemModel::new(s, opts).unwrap();
        let phases = PhaseConfig::random(m, n_h * n_v, &mut rng);
        let bm = aggregate_bm(&model.gains, &model.correlations, &phases).unwrap();
        let bn = aggregate_bn(&model.gains, &model.correlations, &phases).unwrap();
        let lit = aggregate_bn_literal(&model.gains, &model.correlations, &phases).unwrap();
        worst_b = worst_b.max((bm - bn).abs().max((bm - lit).abs()) / bm.max(1.0));
        worst_b_strict = worst_b_strict.max((bm - bn).abs() / bm);
        let factors = FactorSet::for_correlations(&model.correlations).unwrap();
        for t in 0..20 {
            let draw = sample_channels(&model.gains, &factors, &mut trial_rng(k, t)).unwrap();
            let a = instantaneous_snr(&draw, &phases, model.gamma0).unwrap();
            let b = instantaneous_snr_by_element(&draw, &phases, model.gamma0).unwrap();
            worst_snr = worst_snr.max((a - b).abs() / snr_magnitude_scale(&draw, model.gamma0));
        }
    }
    check(
        worst_b <= 1e-10 && worst_snr <= 1e-12,
        format!(
            "|B_M-B_N|/max(1,B_M)={worst_b:.1e} (|B_M-B_N|/B_M={worst_b_strict:.1e}), per-draw SNR {worst_snr:.1e} over 50 scenarios"
        ),
    )
}

fn c3_second_moment() -> Verdict {
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let model = desk_placed(100 + k);
        let phases = PhaseConfig::random(8, 64, &mut ChaCha8Rng::seed_from_u64(200 + k));
        let est = second_moment(&model, &phases, &McConfig::new(100_000, 300 + k)).unwrap();
        let b = model.aggregate(Regime::FiniteMLargeN, &phases).unwrap();
        worst = worst.max(est.z_score(b).abs());
    }
    check(worst <= 3.0, format!("max |z|={worst:.2} over 10 desk scenarios at 1e5 trials"))
}

fn c4_gradients() -> Verdict {
    let reports = gradient_check(4, 20, 1e-6).unwrap();
    let worst = reports.iter().map(|r| r.worst_relative_error).fold(0.0_f64, f64::max);

    let model = desk();
    let phases = PhaseConfig::random(8, 64, &mut ChaCha8Rng::seed_from_u64(4));
    let mut zero = true;
    for regime in REGIMES {
        let b = model.aggregate(regime, &phases).unwrap();
        let problem = CoverageProblem::for_model(&model, 0.5 * model.gamma0 * b, regime).unwrap();
        let pc = problem.coverage(&phases).unwrap();
        for m in 0..8 {
            zero &= problem
                .gradient(&phases, pc, m)
                .unwrap()
                .iter()
                .all(|q| q.re == 0.0 && q.im == 0.0);
        }
    }
    check(
        worst <= 1e-5 && zero,
        format!("worst relative error {worst:.1e} over 20 instances x 2 regimes (tol 1e-5); saturated gradient zero: {zero}"),
    )
}

fn c5_optimizer() -> Verdict {
    let mut monotone = true;
    let mut worst_violation: f64 = 0.0;
    let mut beaten = 0;
    for k in 0..100u64 {
        let model = desk_placed(k);
        let regime = REGIMES[(k % 2) as usize];
        let b0 = model.aggregate(regime, &model.initial_phases()).unwrap();
        let t = threshold_at_coverage(b0, model.gamma0, model.beta_d(), 0.5).unwrap();
        let problem = CoverageProblem::for_model(&model, t, regime).unwrap();
        let out = optimize(&problem, &OptimizerConfig::default()).unwrap();
        monotone &= out.trace.windows(2).all(|w| w[1].coverage >= w[0].coverage);
        worst_violation = worst_violation.max(out.phases().max_modulus_violation());
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + k);
        for _ in 0..50 {
            if problem.coverage(&PhaseConfig::random(8, 64, &mut rng)).unwrap() > out.coverage() {
                beaten += 1;
            }
        }
    }

    let uncorrelated = SystemModel::new(Scenario::reference(8, 8).unwrap(), CorrelationOptions::uncorrelated()).unwrap();
    let b0 = uncorrelated.aggregate(Regime::FiniteMLargeN, &uncorrelated.initial_phases()).unwrap();
    let t = threshold_at_coverage(b0, uncorrelated.gamma0, uncorrelated.beta_d(), 0.5).unwrap();
    let problem = CoverageProblem::for_model(&uncorrelated, t, Regime::FiniteMLargeN).unwrap();
    let out = optimize(&problem, &OptimizerConfig::default()).unwrap();
    let fixed = out.termination == Termination::Converged
        && out.state.iteration == 1
        && out.phases() == &uncorrelated.initial_phases();

    check(
        monotone && worst_violation <= 1e-12 && beaten == 0 && fixed,
        format!(
            "100 runs: monotone={monotone}, max modulus violation {worst_violation:.1e}, random configs beating optimum {beaten}/5000, identity fixed point={fixed}"
        ),
    )
}

fn c6_branch_point() -> Verdict {
    let e = coverage_closed_form(0.0, 1.0, 1.0, 1.0).unwrap();
    let digits_ok = format!("{e:.14e}") == format!("{:.14e}", (-1.0f64).exp());
    // B = 2, T/γ0 = 3 is the same point with nonzero aggregate
    let e2 = coverage_closed_form(2.0, 6.0, 2.0, 1.0).unwrap();
    let digits_ok2 = format!("{e2:.14e}") == format!("{:.14e}", (-1.0f64).exp());
    let below = coverage_closed_form(1.0 - 1e-13, 1.0, 1.0, 1.0).unwrap();
    let at = coverage_closed_form(1.0, 1.0, 1.0, 1.0).unwrap();
    let gap = (below - 1.0).abs();
    check(
        digits_ok && digits_ok2 && gap <= 1e-12 && at == 1.0,
        format!("P_c={e:.15} (e^-1 to 15 digits: {}), |P_c(B->T/g0-) - 1|={gap:.1e}", digits_ok && digits_ok2),
    )
}

fn curve(model: &SystemModel, regime: Regime, t_db: &[f64]) -> Vec<f64> {
    let t: Vec<f64> = t_db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
    let b0 = model.aggregate(regime, &model.initial_phases()).unwrap();
    let t_opt = threshold_at_coverage(b0, model.gamma0, model.beta_d(), 0.5).unwrap();
    let opt = optimized_phases(model, regime, t_opt).unwrap();
    evaluate_grid(model, regime, opt.phases(), &t, None)
        .unwrap()
        .into_iter()
        .map(|r| r.pc_closed_form)
        .collect()
}

fn c7_monotone_in_m_and_n() -> Verdict {
    let t_db = grid(-60.0, 20.0, 0.5).unwrap();
    let m15 = curve(&reference(15, 15), Regime::LargeMFiniteN, &t_db);
    let m34 = curve(&reference(34, 15), Regime::LargeMFiniteN, &t_db);
    let n100 = curve(&reference(15, 10), Regime::FiniteMLargeN, &t_db);
    let n225 = curve(&reference(15, 15), Regime::FiniteMLargeN, &t_db);
    let m_ok = m34.iter().zip(&m15).all(|(a, b)| a >= b) && m34.iter().zip(&m15).any(|(a, b)| a > b);
    let n_ok = n225.iter().zip(&n100).all(|(a, b)| a >= b) && n225.iter().zip(&n100).any(|(a, b)| a > b);
    check(
        m_ok && n_ok,
        format!("M=34 >= M=15 (m-large): {m_ok}; N=225 >= N=100 (m-finite): {n_ok}; {} thresholds", t_db.len()),
    )
}

fn knee_db(model: &SystemModel, regime: Regime, level: f64) -> (f64, f64) {
    let b0 = model.aggregate(regime, &model.initial_phases()).unwrap();
    let t = threshold_at_coverage(b0, model.gamma0, model.beta_d(), 0.5).unwrap();
    let b = optimized_phases(model, regime, t).unwrap().b;
    let knee = if level >= 1.0 {
        knee_threshold(b, model.gamma0)
    } else {
        threshold_at_coverage(b, model.gamma0, model.beta_d(), level).unwrap()
    };
    (linear_to_db(knee), b)
}

fn c8_surfaces_beat_elements() -> Verdict {
    let base = knee_db(&reference(8, 8), Regime::FiniteMLargeN, 0.999).0;
    let more_m = knee_db(&reference(18, 8), Regime::LargeMFiniteN, 0.999).0;
    let more_n = knee_db(&reference(8, 12), Regime::FiniteMLargeN, 0.999).0;
    let (dm, dn) = (more_m - base, more_n - base);
    check(
        dm >= dn,
        format!("knee shift M 8->18: {dm:.3e} dB, N 64->144: {dn:.3e} dB (baseline {base:.3} dB)"),
    )
}

fn c9_knee() -> Verdict {
    let (k15, b15) = knee_db(&reference(15, 15), Regime::LargeMFiniteN, 1.0);
    let (k34, b34) = knee_db(&reference(34, 15), Regime::LargeMFiniteN, 1.0);
    let ordered = k34 > k15;
    let near = (k15 - 1.47).abs() <= 3.0 && (k34 - 2.2).abs() <= 3.0;
    check(
        ordered && near,
        format!(
            "knees M=15: {k15:.2} dB (B={b15:.3e}), M=34: {k34:.2} dB (B={b34:.3e}); ordered={ordered}; within 3 dB of 1.47/2.2 dB: {near}"
        ),
    )
}

fn run_cli(args: &[&str], threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_irscov"))
        .args(args)
        .env("IRSCOV_THREADS", threads)
        .output()
        .expect("run irscov");
    assert!(out.status.success(), "irscov {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn c10_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("desk.json");
    let file = ConfigFile::reference(8, 8).unwrap();
    std::fs::write(&config, serde_json::to_string_pretty(&file).unwrap()).unwrap();
    let config = config.to_str().unwrap();
    let invocations: Vec<Vec<&str>> = vec![
        vec!["sweep", "--config", config, "--trials", "30000", "--seed", "9", "--t-start", "-30", "--t-stop", "15", "--t-step", "3"],
        vec!["sweep", "--config", config, "--regime", "m-large", "--phases", "random", "--phase-seed", "3", "--trials", "10000", "--rate", "--t-stop", "4"],
        vec!["mc-validate", "--config", config, "--trials", "20000", "--seed", "1"],
        vec!["reproduce", "fig2", "--trials", "2000", "--seed", "5", "--t-step", "5"],
    ];
    let mut identical = 0;
    for args in &invocations {
        let a = run_cli(args, "1");
        let b = run_cli(args, "4");
        let c = run_cli(args, "4");
        if !a.is_empty() && a == b && b == c {
            identical += 1;
        }
    }
    check(
        identical == invocations.len(),
        format!("{identical}/{} invocations byte-identical across repeats and 1/4 threads", invocations.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("DE-MC tightness", c1_tightness),
        ("formulation equivalence", c2_equivalence),
        ("second-moment exactness", c3_second_moment),
        ("gradient correctness", c4_gradients),
        ("optimizer contract", c5_optimizer),
        ("branch-point values", c6_branch_point),
        ("monotonicity in M and N", c7_monotone_in_m_and_n),
        ("more surfaces beat more elements", c8_surfaces_beat_elements),
        ("full-coverage knee targets", c9_knee),
        ("determinism", c10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.ends_with(&format!(" {p}")) || name.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        let verdict = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => println!("{id} ({name}): PASS - {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} ({name}): FAIL - {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
