//! Projected gradient ascent of the closed-form coverage over unit-modulus
//! phase vectors.
//!
//! Gradients are Wirtinger derivatives with respect to the conjugated phase
//! vector, `q_m = ∂P_c/∂s_m*`. For real `f` the ordinary gradient in
//! `(Re s, Im s)` is `2q`, and the derivative along the element angle is
//! `∂f/∂θ_n = 2 Im(s_n* q_n)`. The iterate update is
//! `s ← exp(j arg(s + μ q))`, with `μ` chosen by backtracking.
//!
//! In the active branch `P_c = exp((B − T/γ0)/β_d)` is increasing in `B`, so
//!
//! ```text
//! ∂P_c/∂s_m* = (β_m/β_d) P_c (R_{m,1} ∘ R_{m,2}ᵀ) s_m
//! ```
//!
//! and zero once `B ≥ T/γ0`. The two regimes evaluate the same vector,
//! `diag(R_{m,1} Φ_m R_{m,2})` for the finite-M form and `Σ_p c_p` with
//! `c_p[n] = r¹_{np} r²_{np} φ_{mp}` for the large-M form.

use num_complex::Complex64;

use crate::dequiv::{self, PhaseConfig, Regime};
use crate::error::{Error, Result};
use crate::scenario::LinkGains;
use crate::spatialcorr::CorrelationSet;

/// What the ascent maximizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Objective {
    /// Closed-form coverage probability.
    #[default]
    Coverage,
    /// The aggregate `B` itself.
    Aggregate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UpdateMode {
    /// One line search per IRS, surfaces visited in index order.
    #[default]
    Sweep,
    /// One line search over all surfaces at once.
    Simultaneous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BacktrackingConfig {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_increase: f64,
    pub max_shrinks: u32,
}

impl Default for BacktrackingConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_increase: 1e-4,
            max_shrinks: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    /// Stop when `|f_{i+1} − f_i|² < epsilon`. For [`Objective::Aggregate`]
    /// the change is taken relative to `f_i`.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub line_search: BacktrackingConfig,
    pub mode: UpdateMode,
    pub objective: Objective,
    /// Starting phases; `exp(jπ/2)` everywhere when `None`.
    pub initial: Option<PhaseConfig>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            max_iterations: 500,
            line_search: BacktrackingConfig::default(),
            mode: UpdateMode::Sweep,
            objective: Objective::Coverage,
            initial: None,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(Error::InvalidArgument("shrink factor must lie in (0, 1)".into()));
        }
        if !(ls.initial_step > 0.0) {
            return Err(Error::InvalidArgument("initial step must be positive".into()));
        }
        if !(ls.sufficient_increase >= 0.0 && ls.sufficient_increase < 1.0) {
            return Err(Error::InvalidArgument(
                "sufficient-increase constant must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Closed-form coverage at a fixed threshold, viewed as a function of the
/// phases.
#[derive(Clone, Copy, Debug)]
pub struct CoverageProblem<'a> {
    pub gains: &'a LinkGains,
    pub correlations: &'a CorrelationSet,
    pub gamma0: f64,
    pub t_threshold: f64,
    pub regime: Regime,
}

impl<'a> CoverageProblem<'a> {
    pub fn new(
        gains: &'a LinkGains,
        correlations: &'a CorrelationSet,
        gamma0: f64,
        t_threshold: f64,
        regime: Regime,
    ) -> Result<Self> {
        if gains.irs_count() != correlations.irs_count() {
            return Err(Error::DimensionMismatch {
                context: "coverage problem IRS count",
                expected: correlations.irs_count(),
                actual: gains.irs_count(),
            });
        }
        // surfaces parameter errors up front
        dequiv::coverage_closed_form(0.0, t_threshold, gamma0, gains.direct)?;
        Ok(Self {
            gains,
            correlations,
            gamma0,
            t_threshold,
            regime,
        })
    }

    pub fn for_model(
        model: &'a crate::model::SystemModel,
        t_threshold: f64,
        regime: Regime,
    ) -> Result<Self> {
        Self::new(&model.gains, &model.correlations, model.gamma0, t_threshold, regime)
    }

    pub fn threshold_ratio(&self) -> f64 {
        self.t_threshold / self.gamma0
    }

    pub fn beta_d(&self) -> f64 {
        self.gains.direct
    }

    pub fn aggregate(&self, phases: &PhaseConfig) -> Result<f64> {
        dequiv::aggregate(self.regime, self.gains, self.correlations, phases)
    }

    pub fn coverage_of(&self, b: f64) -> Result<f64> {
        dequiv::coverage_closed_form(b, self.t_threshold, self.gamma0, self.beta_d())
    }

    pub fn coverage(&self, phases: &PhaseConfig) -> Result<f64> {
        self.coverage_of(self.aggregate(phases)?)
    }

    /// `∂P_c/∂s_m*` for the problem's regime.
    pub fn gradient(&self, phases: &PhaseConfig, coverage: f64, m: usize) -> Result<Vec<Complex64>> {
        match self.regime {
            Regime::FiniteMLargeN => gradient_regime1(self, phases, coverage, m),
            Regime::LargeMFiniteN => gradient_regime2(self, phases, coverage, m),
        }
    }

    /// `∂B/∂s_m*`, no saturation branch.
    pub fn aggregate_gradient(&self, phases: &PhaseConfig, m: usize) -> Result<Vec<Complex64>> {
        match self.regime {
            Regime::FiniteMLargeN => aggregate_gradient_regime1(self, phases, m),
            Regime::LargeMFiniteN => aggregate_gradient_regime2(self, phases, m),
        }
    }

    fn check_block(&self, phases: &PhaseConfig, m: usize) -> Result<()> {
        if m >= self.correlations.irs_count() || phases.irs_count() != self.correlations.irs_count()
        {
            return Err(Error::DimensionMismatch {
                context: "gradient IRS index",
                expected: self.correlations.irs_count(),
                actual: phases.irs_count().max(m + 1),
            });
        }
        if phases.element_count() != self.correlations.order() {
            return Err(Error::DimensionMismatch {
                context: "gradient phase vector length",
                expected: self.correlations.order(),
                actual: phases.element_count(),
            });
        }
        Ok(())
    }
}

/// `β_m diag(R_{m,1} Φ_m R_{m,2})`.
fn aggregate_gradient_regime1(
    problem: &CoverageProblem<'_>,
    phases: &PhaseConfig,
    m: usize,
) -> Result<Vec<Complex64>> {
    problem.check_block(phases, m)?;
    let c = problem.correlations.irs(m);
    let (r1, r2) = (c.link1.entries(), c.link2.entries());
    let s = phases.irs(m);
    let beta = problem.gains.per_irs[m].cascaded();
    Ok((0..s.len())
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, sp) in s.iter().enumerate() {
                acc += sp * (r1[(n, p)] * r2[(p, n)]);
            }
            acc * beta
        })
        .collect())
}

/// `β_m Σ_p c_p`, accumulated column by column.
fn aggregate_gradient_regime2(
    problem: &CoverageProblem<'_>,
    phases: &PhaseConfig,
    m: usize,
) -> Result<Vec<Complex64>> {
    problem.check_block(phases, m)?;
    let c = problem.correlations.irs(m);
    let (r1, r2) = (c.link1.entries(), c.link2.entries());
    let s = phases.irs(m);
    let beta = problem.gains.per_irs[m].cascaded();
    let mut out = vec![Complex64::new(0.0, 0.0); s.len()];
    for (p, sp) in s.iter().enumerate() {
        for (n, o) in out.iter_mut().enumerate() {
            *o += sp * (r1[(n, p)] * r2[(n, p)]);
        }
    }
    out.iter_mut().for_each(|v| *v *= beta);
    Ok(out)
}

fn coverage_factor(problem: &CoverageProblem<'_>, coverage: f64) -> Result<Option<f64>> {
    if !coverage.is_finite() {
        return Err(Error::numeric("non-finite coverage"));
    }
    // P_c = 1 exactly on the saturated branch, where the gradient is zero
    if coverage >= 1.0 {
        return Ok(None);
    }
    Ok(Some(coverage / problem.beta_d()))
}

/// `∂P_c/∂s_m*` for the finite-M form: `(β_m/β_d) P_c diag(R_{m,1} Φ_m R_{m,2})`,
/// or zero when `coverage` is one.
pub fn gradient_regime1(
    problem: &CoverageProblem<'_>,
    phases: &PhaseConfig,
    coverage: f64,
    m: usize,
) -> Result<Vec<Complex64>> {
    let g = aggregate_gradient_regime1(problem, phases, m)?;
    Ok(match coverage_factor(problem, coverage)? {
        Some(f) => g.into_iter().map(|v| v * f).collect(),
        None => vec![Complex64::new(0.0, 0.0); g.len()],
    })
}

/// `∂P_c/∂s_m*` for the large-M form: `(β_m/β_d) P_c Σ_p c_p`, or zero when
/// `coverage` is one.
pub fn gradient_regime2(
    problem: &CoverageProblem<'_>,
    phases: &PhaseConfig,
    coverage: f64,
    m: usize,
) -> Result<Vec<Complex64>> {
    let g = aggregate_gradient_regime2(problem, phases, m)?;
    Ok(match coverage_factor(problem, coverage)? {
        Some(f) => g.into_iter().map(|v| v * f).collect(),
        None => vec![Complex64::new(0.0, 0.0); g.len()],
    })
}

/// Nearest unit-modulus vector, `exp(j arg(z))` per entry. Zero maps to `1`.
pub fn project_unit_modulus(raw: &[Complex64]) -> Vec<Complex64> {
    raw.iter()
        .map(|z| {
            if *z == Complex64::new(0.0, 0.0) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, z.arg())
            }
        })
        .collect()
}

/// Ascent direction restricted to a set of surfaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    pub blocks: Vec<(usize, Vec<Complex64>)>,
}

impl Direction {
    pub fn single(m: usize, q: Vec<Complex64>) -> Self {
        Self {
            blocks: vec![(m, q)],
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|(_, q)| q.iter())
            .map(Complex64::norm_sqr)
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.blocks
            .iter()
            .all(|(_, q)| q.iter().all(|v| *v == Complex64::new(0.0, 0.0)))
    }

    /// `exp(j arg(s + μ q))` on the affected surfaces.
    pub fn apply(&self, phases: &PhaseConfig, mu: f64) -> PhaseConfig {
        let mut next = phases.clone();
        for (m, q) in &self.blocks {
            let raw: Vec<Complex64> = phases.irs(*m).iter().zip(q).map(|(s, d)| s + d * mu).collect();
            next.set_irs(*m, project_unit_modulus(&raw));
        }
        next
    }

    /// `2 Re⟨q, s' − s⟩`: first-order change of the objective between two
    /// feasible points.
    fn predicted_increase(&self, from: &PhaseConfig, to: &PhaseConfig) -> f64 {
        self.blocks
            .iter()
            .map(|(m, q)| {
                q.iter()
                    .zip(from.irs(*m).iter().zip(to.irs(*m)))
                    .map(|(d, (a, b))| 2.0 * (d.conj() * (b - a)).re)
                    .sum::<f64>()
            })
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct LineSearchOutcome {
    /// Accepted step, zero when no step qualified.
    pub step: f64,
    pub phases: PhaseConfig,
    pub value: f64,
}

/// Largest `μ = μ0 · shrink^k` whose projected candidate `s'` satisfies
/// `f(s') ≥ f(s) + c · 2 Re⟨q, s' − s⟩` (projected Armijo rule). Returns
/// `step = 0` with the unchanged phases if none of the `max_shrinks + 1`
/// candidates qualifies.
pub fn backtracking_search<F>(
    objective: F,
    phases: &PhaseConfig,
    value: f64,
    direction: &Direction,
    config: &BacktrackingConfig,
) -> Result<LineSearchOutcome>
where
    F: Fn(&PhaseConfig) -> Result<f64>,
{
    if direction.is_zero() {
        return Ok(LineSearchOutcome {
            step: config.initial_step,
            phases: phases.clone(),
            value,
        });
    }
    let mut mu = config.initial_step;
    for _ in 0..=config.max_shrinks {
        let candidate = direction.apply(phases, mu);
        if candidate == *phases {
            // step is below the resolution of the projection
            break;
        }
        let next = objective(&candidate)?;
        if !next.is_finite() {
            return Err(Error::numeric(format!("objective is {next} at step {mu:e}")));
        }
        let required = value + config.sufficient_increase * direction.predicted_increase(phases, &candidate);
        if next >= value && next >= required {
            return Ok(LineSearchOutcome {
                step: mu,
                phases: candidate,
                value: next,
            });
        }
        mu *= config.shrink;
    }
    Ok(LineSearchOutcome {
        step: 0.0,
        phases: phases.clone(),
        value,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// `|Δf|² < ε`.
    Converged,
    /// Full coverage reached; the gradient vanishes identically.
    Saturated,
    /// No step passed the line search.
    Stalled,
    MaxIterations,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Saturated => "saturated",
            Termination::Stalled => "stalled",
            Termination::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub coverage: f64,
    pub b: f64,
    /// Largest step accepted during the iteration.
    pub step: f64,
    /// `‖q‖` at the start of the iteration.
    pub gradient_norm: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub phases: PhaseConfig,
    pub iteration: usize,
    pub coverage: f64,
    pub step: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub state: OptimizerState,
    pub b: f64,
    pub termination: Termination,
    /// Record 0 is the starting point.
    pub trace: Vec<IterationRecord>,
}

impl OptimizeOutcome {
    pub fn phases(&self) -> &PhaseConfig {
        &self.state.phases
    }

    pub fn coverage(&self) -> f64 {
        self.state.coverage
    }
}

fn objective_value(problem: &CoverageProblem<'_>, kind: Objective, phases: &PhaseConfig) -> Result<f64> {
    let b = problem.aggregate(phases)?;
    let v = match kind {
        Objective::Coverage => problem.coverage_of(b)?,
        Objective::Aggregate => b,
    };
    if !v.is_finite() {
        return Err(Error::numeric(format!("objective evaluated to {v}")));
    }
    Ok(v)
}

fn block_direction(
    problem: &CoverageProblem<'_>,
    kind: Objective,
    phases: &PhaseConfig,
    coverage: f64,
    m: usize,
) -> Result<Vec<Complex64>> {
    match kind {
        Objective::Coverage => problem.gradient(phases, coverage, m),
        Objective::Aggregate => problem.aggregate_gradient(phases, m),
    }
}

/// Projected gradient ascent from `exp(jπ/2)·1` (or `config.initial`).
pub fn optimize(problem: &CoverageProblem<'_>, config: &OptimizerConfig) -> Result<OptimizeOutcome> {
    config.validate()?;
    let m_count = problem.correlations.irs_count();
    let n = problem.correlations.order();
    let mut phases = match &config.initial {
        Some(p) => p.clone(),
        None => PhaseConfig::initial(m_count, n),
    };
    let kind = config.objective;
    let value_of = |p: &PhaseConfig| objective_value(problem, kind, p);

    let mut b = problem.aggregate(&phases)?;
    let mut coverage = problem.coverage_of(b)?;
    let mut value = value_of(&phases)?;
    let mut trace = vec![IterationRecord {
        iteration: 0,
        coverage,
        b,
        step: 0.0,
        gradient_norm: 0.0,
    }];

    let finish = |phases, iteration, coverage, step, b, termination, trace| OptimizeOutcome {
        state: OptimizerState {
            phases,
            iteration,
            coverage,
            step,
            converged: termination != Termination::MaxIterations,
        },
        b,
        termination,
        trace,
    };

    if kind == Objective::Coverage && b >= problem.threshold_ratio() {
        return Ok(finish(phases, 0, coverage, 0.0, b, Termination::Saturated, trace));
    }

    for iteration in 1..=config.max_iterations {
        let previous = value;
        let mut best_step = 0.0_f64;
        let mut grad_sq = 0.0;
        let mut moved = false;

        match config.mode {
            UpdateMode::Sweep => {
                for m in 0..m_count {
                    let q = block_direction(problem, kind, &phases, coverage, m)?;
                    let dir = Direction::single(m, q);
                    grad_sq += dir.norm_sqr();
                    if dir.is_zero() {
                        continue;
                    }
                    let out = backtracking_search(value_of, &phases, value, &dir, &config.line_search)?;
                    if out.step > 0.0 {
                        moved = true;
                        best_step = best_step.max(out.step);
                        phases = out.phases;
                        value = out.value;
                        coverage = problem.coverage(&phases)?;
                    }
                }
            }
            UpdateMode::Simultaneous => {
                let blocks = (0..m_count)
                    .map(|m| Ok((m, block_direction(problem, kind, &phases, coverage, m)?)))
                    .collect::<Result<Vec<_>>>()?;
                let dir = Direction { blocks };
                grad_sq = dir.norm_sqr();
                if !dir.is_zero() {
                    let out = backtracking_search(value_of, &phases, value, &dir, &config.line_search)?;
                    if out.step > 0.0 {
                        moved = true;
                        best_step = out.step;
                        phases = out.phases;
                        value = out.value;
                    }
                }
            }
        }

        b = problem.aggregate(&phases)?;
        coverage = problem.coverage_of(b)?;
        trace.push(IterationRecord {
            iteration,
            coverage,
            b,
            step: best_step,
            gradient_norm: grad_sq.sqrt(),
        });

        if kind == Objective::Coverage && b >= problem.threshold_ratio() {
            return Ok(finish(phases, iteration, coverage, best_step, b, Termination::Saturated, trace));
        }
        let change = match kind {
            Objective::Coverage => value - previous,
            Objective::Aggregate => (value - previous) / previous.abs().max(f64::MIN_POSITIVE),
        };
        if change * change < config.epsilon {
            return Ok(finish(phases, iteration, coverage, best_step, b, Termination::Converged, trace));
        }
        if !moved {
            return Ok(finish(phases, iteration, coverage, best_step, b, Termination::Stalled, trace));
        }
    }
    let iteration = config.max_iterations;
    let step = trace.last().map(|r| r.step).unwrap_or(0.0);
    Ok(finish(phases, iteration, coverage, step, b, Termination::MaxIterations, trace))
}

/// `∂f/∂θ` from a Wirtinger gradient `q = ∂f/∂s*` at phases `s`.
pub fn angle_derivative(s: &[Complex64], q: &[Complex64]) -> Vec<f64> {
    s.iter().zip(q).map(|(si, qi)| 2.0 * (si.conj() * qi).im).collect()
}
