use std::path::PathBuf;

use irscov::config::ExperimentConfig;
use irscov::dequiv::PhaseFile;
use irscov::montecarlo::{estimate_coverage_grid, FactorSet, McConfig, SnrKernel};
use irscov::optimizer::{optimize, CoverageProblem, OptimizeOutcome, OptimizerConfig};
use irscov::scenario::linear_to_db;
use irscov::{Error, PhaseConfig, Regime, Result, SystemModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Spectral efficiency in b/s/Hz to linear SNR threshold, `2^R − 1`.
pub fn convert_rate_to_threshold(rate: f64) -> Result<f64> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate must be non-negative, got {rate}")));
    }
    Ok(rate.exp2() - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdAxis {
    Db,
    Linear,
    /// Target rate in b/s/Hz.
    Rate,
}

impl ThresholdAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            ThresholdAxis::Db => "db",
            ThresholdAxis::Linear => "linear",
            ThresholdAxis::Rate => "rate",
        }
    }

    pub fn to_linear(&self, value: f64) -> Result<f64> {
        match self {
            ThresholdAxis::Db => Ok(10f64.powf(value / 10.0)),
            ThresholdAxis::Linear => {
                if value >= 0.0 {
                    Ok(value)
                } else {
                    Err(Error::InvalidArgument(format!("threshold must be non-negative, got {value}")))
                }
            }
            ThresholdAxis::Rate => convert_rate_to_threshold(value),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PhaseSource {
    Initial,
    /// Closed-form optimum at the largest threshold of the grid.
    Optimized,
    Random(u64),
    File(PathBuf),
}

impl PhaseSource {
    pub fn label(&self) -> String {
        match self {
            PhaseSource::Initial => "initial".into(),
            PhaseSource::Optimized => "optimized".into(),
            PhaseSource::Random(seed) => format!("random({seed})"),
            PhaseSource::File(p) => format!("file({})", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub t_grid: Vec<f64>,
    pub axis: ThresholdAxis,
    pub regime: Regime,
    pub phase_source: PhaseSource,
    pub mc_trials: u64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(Error::InvalidArgument("threshold grid is empty".into()));
        }
        if self.t_grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("threshold grid has a non-finite value".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("thresholds must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn linear_grid(&self) -> Result<Vec<f64>> {
        self.t_grid.iter().map(|t| self.axis.to_linear(*t)).collect()
    }
}

/// Evenly spaced grid `start, start + step, …` up to `stop` inclusive.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::InvalidArgument(format!("bad grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub t_db: f64,
    pub t_linear: f64,
    pub b_value: f64,
    pub pc_closed_form: f64,
    pub pc_mc: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub m_count: usize,
    pub n_count: usize,
    pub regime: Regime,
    pub correlated: bool,
    pub seed: u64,
}

impl ResultRow {
    pub const HEADER: [&'static str; 12] = [
        "t_db",
        "t_linear",
        "b_value",
        "pc_closed_form",
        "pc_mc",
        "ci_low",
        "ci_high",
        "m_count",
        "n_count",
        "regime",
        "correlated",
        "seed",
    ];

    pub fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.t_db.to_string(),
            self.t_linear.to_string(),
            self.b_value.to_string(),
            self.pc_closed_form.to_string(),
            opt(self.pc_mc),
            opt(self.ci_low),
            opt(self.ci_high),
            self.m_count.to_string(),
            self.n_count.to_string(),
            self.regime.as_str().to_string(),
            self.correlated.to_string(),
            self.seed.to_string(),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub phases: PhaseConfig,
    pub optimization: Option<OptimizeOutcome>,
}

/// Optimizes the closed form at linear threshold `t`.
pub fn optimized_phases(model: &SystemModel, regime: Regime, t: f64) -> Result<OptimizeOutcome> {
    let problem = CoverageProblem::for_model(model, t, regime)?;
    optimize(&problem, &OptimizerConfig::default())
}

pub fn resolve_phases(
    model: &SystemModel,
    regime: Regime,
    source: &PhaseSource,
    t_max: f64,
) -> Result<(PhaseConfig, Option<OptimizeOutcome>)> {
    let (m, n) = (model.irs_count(), model.element_count());
    let phases = match source {
        PhaseSource::Initial => model.initial_phases(),
        PhaseSource::Random(seed) => PhaseConfig::random(m, n, &mut ChaCha8Rng::seed_from_u64(*seed)),
        PhaseSource::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })?;
            let file: PhaseFile = serde_json::from_str(&text)
                .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })?;
            let phases = file.to_config()?;
            if phases.irs_count() != m || phases.element_count() != n {
                return Err(Error::Config {
                    path: path.display().to_string(),
                    message: format!(
                        "phase file is {}×{}, scenario needs {m}×{n}",
                        phases.irs_count(),
                        phases.element_count()
                    ),
                });
            }
            phases
        }
        PhaseSource::Optimized => {
            let out = optimized_phases(model, regime, t_max)?;
            return Ok((out.phases().clone(), Some(out)));
        }
    };
    Ok((phases, None))
}

/// Closed form at every threshold of `t_linear`, plus Monte Carlo from one
/// set of draws when `mc.trials > 0`.
pub fn evaluate_grid(
    model: &SystemModel,
    regime: Regime,
    phases: &PhaseConfig,
    t_linear: &[f64],
    mc: Option<McConfig>,
) -> Result<Vec<ResultRow>> {
    let b = model.aggregate(regime, phases)?;
    let estimates = match mc {
        Some(cfg) => {
            let factors = FactorSet::for_correlations(&model.correlations)?;
            let kernel = SnrKernel::new(&model.gains, &factors, phases, model.gamma0)?;
            Some(estimate_coverage_grid(&kernel, t_linear, &cfg)?)
        }
        None => None,
    };
    t_linear
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let pc = irscov::dequiv::coverage_closed_form(b, t, model.gamma0, model.beta_d())?;
            let est = estimates.as_ref().map(|e| e[i]);
            Ok(ResultRow {
                t_db: linear_to_db(t),
                t_linear: t,
                b_value: b,
                pc_closed_form: pc,
                pc_mc: est.map(|e| e.coverage_hat),
                ci_low: est.map(|e| e.ci_low),
                ci_high: est.map(|e| e.ci_high),
                m_count: model.irs_count(),
                n_count: model.element_count(),
                regime,
                correlated: model.options.correlated,
                seed: mc.map(|c| c.seed).unwrap_or(0),
            })
        })
        .collect()
}

pub fn run_sweep(experiment: &ExperimentConfig, spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let model = SystemModel::new(experiment.scenario.clone(), experiment.correlation)?;
    let t_linear = spec.linear_grid()?;
    let t_max = *t_linear.last().expect("validated non-empty");
    let (phases, optimization) = resolve_phases(&model, spec.regime, &spec.phase_source, t_max)?;
    let mc = (spec.mc_trials > 0).then(|| McConfig::new(spec.mc_trials, spec.seed));
    let rows = evaluate_grid(&model, spec.regime, &phases, &t_linear, mc)?;
    Ok(SweepOutput {
        rows,
        phases,
        optimization,
    })
}
