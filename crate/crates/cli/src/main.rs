use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use irscov::config::{load_config, ConfigFile, ExperimentConfig};
use irscov::dequiv::{threshold_at_coverage, PhaseFile};
use irscov::montecarlo::McConfig;
use irscov::optimizer::{optimize, CoverageProblem, OptimizerConfig, UpdateMode};
use irscov::scenario::{db_to_linear, linear_to_db};
use irscov::{Regime, SystemModel};
use irscov_cli::output::{dat_path, open_output, write_csv, write_dat};
use irscov_cli::sweep::{evaluate_grid, grid, optimized_phases};
use irscov_cli::{
    gradient_check, reproduce_figure, run_sweep, Figure, FigureOptions, FigureRow, Metadata,
    PhaseSource, ResultRow, SweepSpec, ThresholdAxis,
};

#[derive(Parser, Debug)]
#[command(name = "irscov", version, about = "Coverage of multi-IRS links under correlated Rayleigh fading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form (and optionally Monte-Carlo) coverage over a threshold grid.
    Sweep(SweepArgs),
    /// Maximize the closed-form coverage over the phase shifts.
    Optimize(OptimizeArgs),
    /// Compare closed form and Monte Carlo across the coverage transition.
    McValidate(McValidateArgs),
    /// Regenerate the data behind the coverage-versus-threshold figures.
    Reproduce(ReproduceArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RegimeArg {
    MFinite,
    MLarge,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::MFinite => Regime::FiniteMLargeN,
            RegimeArg::MLarge => Regime::LargeMFiniteN,
        }
    }
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// JSON scenario; the 15-surface, 15×15-element reference deployment when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the sinc correlation by a scaled identity.
    #[arg(long)]
    uncorrelated: bool,
    #[arg(long, value_enum, default_value = "m-finite")]
    regime: RegimeArg,
}

impl ScenarioArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut exp = match &self.config {
            Some(path) => load_config(path)?,
            None => ConfigFile::reference(15, 15)?.resolve()?,
        };
        if self.uncorrelated {
            exp.correlation.correlated = false;
        }
        Ok(exp)
    }

    fn model(&self) -> anyhow::Result<(ExperimentConfig, SystemModel)> {
        let exp = self.load()?;
        let model = SystemModel::new(exp.scenario.clone(), exp.correlation)?;
        Ok((exp, model))
    }
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Grid values are target rates in b/s/Hz, converted by T = 2^R − 1.
    #[arg(long, conflicts_with = "linear")]
    rate: bool,
    /// Grid values are linear thresholds.
    #[arg(long)]
    linear: bool,
    /// Explicit comma-separated grid, overriding start/stop/step.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    thresholds: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    t_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_stop: Option<f64>,
    #[arg(long)]
    t_step: Option<f64>,
}

impl GridArgs {
    fn axis(&self) -> ThresholdAxis {
        if self.rate {
            ThresholdAxis::Rate
        } else if self.linear {
            ThresholdAxis::Linear
        } else {
            ThresholdAxis::Db
        }
    }

    fn values(&self) -> anyhow::Result<Vec<f64>> {
        if let Some(t) = &self.thresholds {
            return Ok(t.clone());
        }
        let defaults = FigureOptions::default_grid(self.axis());
        let start = self.t_start.unwrap_or(defaults[0]);
        let stop = self.t_stop.unwrap_or(*defaults.last().expect("non-empty"));
        let step = self.t_step.unwrap_or(defaults[1] - defaults[0]);
        Ok(grid(start, stop, step)?)
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot-ready .dat next to --out.
    #[arg(long, requires = "out")]
    dat: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhaseArg {
    Initial,
    Optimized,
    Random,
    File,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, value_enum, default_value = "optimized")]
    phases: PhaseArg,
    /// Seed for --phases random.
    #[arg(long, default_value_t = 0)]
    phase_seed: u64,
    /// Phase file for --phases file.
    #[arg(long)]
    phase_file: Option<PathBuf>,
    /// Monte-Carlo trials per threshold; 0 skips simulation.
    #[arg(long, default_value_t = 0)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Sweep,
    Simultaneous,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Threshold in dB.
    #[arg(long, allow_hyphen_values = true)]
    threshold_db: f64,
    #[arg(long, value_enum, default_value = "sweep")]
    mode: ModeArg,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    /// Phase file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McValidateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 200_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid points between the 0.999 and 0.01 coverage levels.
    #[arg(long, default_value_t = 15)]
    points: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FigureArg {
    Fig1,
    Fig2,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: FigureArg,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 0)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplies the direct-link gain.
    #[arg(long, default_value_t = 1.0)]
    direct_scale: f64,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Finite-difference step in radians.
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

#[derive(Debug)]
struct NumericFailure(String);

impl std::fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericFailure {}

fn write_rows(meta: &Metadata, output: &OutputArgs, rows: &[ResultRow]) -> anyhow::Result<()> {
    let out = open_output(output.out.as_deref())?;
    write_csv(out, meta, &ResultRow::HEADER, rows.iter().map(ResultRow::record))?;
    if let (true, Some(path)) = (output.dat, &output.out) {
        let f = std::fs::File::create(dat_path(path))?;
        write_dat(f, meta, &ResultRow::HEADER, [rows.iter().map(ResultRow::record).collect()])?;
    }
    Ok(())
}

fn base_metadata(exp: &ExperimentConfig, axis: ThresholdAxis) -> Metadata {
    Metadata::new(&exp.correlation, exp.scenario.path_loss.sign_convention, axis)
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let exp = args.scenario.load()?;
    let phase_source = match args.phases {
        PhaseArg::Initial => PhaseSource::Initial,
        PhaseArg::Optimized => PhaseSource::Optimized,
        PhaseArg::Random => PhaseSource::Random(args.phase_seed),
        PhaseArg::File => match &args.phase_file {
            Some(p) => PhaseSource::File(p.clone()),
            None => return Err(irscov::Error::InvalidArgument("--phases file needs --phase-file".into()).into()),
        },
    };
    let spec = SweepSpec {
        t_grid: args.grid.values()?,
        axis: args.grid.axis(),
        regime: args.scenario.regime.into(),
        phase_source,
        mc_trials: args.trials,
        seed: args.seed,
    };
    let out = run_sweep(&exp, &spec)?;
    let mut meta = base_metadata(&exp, spec.axis);
    meta.push("command", "sweep");
    meta.push("phases", spec.phase_source.label());
    meta.push("trials", args.trials.to_string());
    write_rows(&meta, &args.output, &out.rows)
}

fn cmd_optimize(args: &OptimizeArgs) -> anyhow::Result<()> {
    let (_, model) = args.scenario.model()?;
    let regime: Regime = args.scenario.regime.into();
    let t = db_to_linear(args.threshold_db);
    let problem = CoverageProblem::for_model(&model, t, regime)?;
    let cfg = OptimizerConfig {
        max_iterations: args.max_iterations,
        mode: match args.mode {
            ModeArg::Sweep => UpdateMode::Sweep,
            ModeArg::Simultaneous => UpdateMode::Simultaneous,
        },
        ..OptimizerConfig::default()
    };
    let out = optimize(&problem, &cfg)?;
    let first = out.trace[0];
    eprintln!(
        "{}: {} iteration(s), coverage {} -> {}, B {:e} -> {:e}",
        out.termination.as_str(),
        out.state.iteration,
        first.coverage,
        out.coverage(),
        first.b,
        out.b
    );
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&PhaseFile::from_config(out.phases()))?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.trace {
        let records = out.trace.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                r.coverage.to_string(),
                r.b.to_string(),
                r.step.to_string(),
                r.gradient_norm.to_string(),
            ]
        });
        let header = ["iteration", "coverage", "b", "step", "gradient_norm"];
        let mut meta = Metadata::default();
        meta.push("termination", out.termination.as_str());
        write_csv(open_output(Some(path))?, &meta, &header, records)?;
    }
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{}", out.coverage())?;
    Ok(())
}

fn cmd_mc_validate(args: &McValidateArgs) -> anyhow::Result<()> {
    if args.points < 2 {
        return Err(irscov::Error::InvalidArgument("--points must be at least 2".into()).into());
    }
    let (exp, model) = args.scenario.model()?;
    let regime: Regime = args.scenario.regime.into();
    // optimize where coverage is about one half, then sweep the transition
    let b0 = model.aggregate(regime, &model.initial_phases())?;
    let t_mid = threshold_at_coverage(b0, model.gamma0, model.beta_d(), 0.5)?;
    let opt = optimized_phases(&model, regime, t_mid)?;
    let b = opt.b;
    let lo = linear_to_db(threshold_at_coverage(b, model.gamma0, model.beta_d(), 0.999)?);
    let hi = linear_to_db(threshold_at_coverage(b, model.gamma0, model.beta_d(), 0.01)?);
    let t_linear: Vec<f64> = (0..args.points)
        .map(|k| db_to_linear(lo + (hi - lo) * k as f64 / (args.points - 1) as f64))
        .collect();
    let rows = evaluate_grid(&model, regime, opt.phases(), &t_linear, Some(McConfig::new(args.trials, args.seed)))?;
    let worst = rows
        .iter()
        .map(|r| (r.pc_closed_form - r.pc_mc.unwrap_or(f64::NAN)).abs())
        .fold(0.0_f64, f64::max);
    eprintln!("max |closed form - monte carlo| = {worst}");
    let mut meta = base_metadata(&exp, ThresholdAxis::Db);
    meta.push("command", "mc-validate");
    meta.push("phases", "optimized");
    meta.push("trials", args.trials.to_string());
    write_rows(&meta, &args.output, &rows)
}

fn cmd_reproduce(args: &ReproduceArgs) -> anyhow::Result<()> {
    let figure = match args.figure {
        FigureArg::Fig1 => Figure::Fig1,
        FigureArg::Fig2 => Figure::Fig2,
    };
    let opts = FigureOptions {
        axis: args.grid.axis(),
        t_grid: args.grid.values()?,
        trials: args.trials,
        seed: args.seed,
        direct_scale: args.direct_scale,
    };
    let rows = reproduce_figure(figure, &opts)?;
    let reference = ConfigFile::reference(15, 15)?.resolve()?;
    let mut meta = base_metadata(&reference, opts.axis);
    meta.push("command", format!("reproduce {}", figure.as_str()));
    meta.push("phases", "optimized");
    meta.push("trials", args.trials.to_string());
    meta.push("direct_scale", args.direct_scale.to_string());
    let header = FigureRow::header();
    write_csv(open_output(args.output.out.as_deref())?, &meta, &header, rows.iter().map(FigureRow::record))?;
    if let (true, Some(path)) = (args.output.dat, &args.output.out) {
        let mut blocks: Vec<Vec<Vec<String>>> = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if i == 0 || rows[i - 1].curve != r.curve {
                blocks.push(Vec::new());
            }
            blocks.last_mut().expect("pushed").push(r.record());
        }
        write_dat(std::fs::File::create(dat_path(path))?, &meta, &header, blocks)?;
    }
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> anyhow::Result<()> {
    let reports = gradient_check(args.seed, args.instances, args.step)?;
    let mut failed = false;
    for r in &reports {
        let ok = r.worst_relative_error <= args.tolerance;
        failed |= !ok;
        println!(
            "{} instances={} worst_relative_error={:e} {}",
            r.regime.as_str(),
            r.instances,
            r.worst_relative_error,
            if ok { "ok" } else { "FAIL" }
        );
    }
    if failed {
        bail!(NumericFailure(format!("gradient check exceeded tolerance {:e}", args.tolerance)));
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("IRSCOV_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| irscov::Error::InvalidArgument(format!("IRSCOV_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<irscov::Error>() {
            return if e.is_config_error() { 2 } else { 3 };
        }
        if cause.is::<NumericFailure>() {
            return 3;
        }
    }
    1
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::McValidate(a) => cmd_mc_validate(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
