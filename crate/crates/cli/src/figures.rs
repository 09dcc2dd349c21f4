use std::str::FromStr;

use irscov::montecarlo::McConfig;
use irscov::{CorrelationOptions, Error, Regime, Result, Scenario, SystemModel};
use rayon::prelude::*;

use crate::sweep::{evaluate_grid, grid, resolve_phases, PhaseSource, ResultRow, ThresholdAxis};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    /// Finite number of surfaces, many elements each.
    Fig1,
    /// Many surfaces, finite elements each.
    Fig2,
}

impl Figure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
        }
    }

    pub fn regime(&self) -> Regime {
        match self {
            Figure::Fig1 => Regime::FiniteMLargeN,
            Figure::Fig2 => Regime::LargeMFiniteN,
        }
    }

    pub fn curves(&self) -> Vec<CurveSpec> {
        let regime = self.regime();
        let mut out = Vec::new();
        match self {
            Figure::Fig1 => {
                for side in [10, 15] {
                    for correlated in [true, false] {
                        for m in [15, 34] {
                            out.push(CurveSpec { irs_count: m, side, correlated, regime });
                        }
                    }
                }
            }
            Figure::Fig2 => {
                for m in [15, 34] {
                    for side in [10, 15] {
                        out.push(CurveSpec { irs_count: m, side, correlated: true, regime });
                    }
                }
            }
        }
        out
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            other => Err(Error::InvalidArgument(format!("unknown figure '{other}' (expected fig1 or fig2)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CurveSpec {
    pub irs_count: usize,
    /// Panel is `side × side`.
    pub side: usize,
    pub correlated: bool,
    pub regime: Regime,
}

impl CurveSpec {
    pub fn label(&self) -> String {
        format!(
            "M={} N={} {}",
            self.irs_count,
            self.side * self.side,
            if self.correlated { "correlated" } else { "uncorrelated" }
        )
    }

    pub fn model(&self, direct_scale: f64) -> Result<SystemModel> {
        let scenario = Scenario::reference(self.irs_count, self.side)?;
        let options = if self.correlated {
            CorrelationOptions::default()
        } else {
            CorrelationOptions::uncorrelated()
        };
        let mut model = SystemModel::new(scenario, options)?;
        if !(direct_scale > 0.0 && direct_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("direct-link scale must be positive, got {direct_scale}")));
        }
        model.gains.direct *= direct_scale;
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureOptions {
    pub axis: ThresholdAxis,
    pub t_grid: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Multiplies the direct-link gain of every curve.
    pub direct_scale: f64,
}

impl FigureOptions {
    pub fn default_grid(axis: ThresholdAxis) -> Vec<f64> {
        match axis {
            ThresholdAxis::Rate => grid(0.0, 8.0, 0.25),
            ThresholdAxis::Linear => grid(0.0, 100.0, 1.0),
            ThresholdAxis::Db => grid(-60.0, 20.0, 1.0),
        }
        .expect("static grid")
    }
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            axis: ThresholdAxis::Db,
            t_grid: Self::default_grid(ThresholdAxis::Db),
            trials: 0,
            seed: 0,
            direct_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureRow {
    pub figure: Figure,
    pub curve: String,
    pub row: ResultRow,
}

impl FigureRow {
    pub fn header() -> Vec<&'static str> {
        let mut h = vec!["figure", "curve"];
        h.extend(ResultRow::HEADER);
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![self.figure.as_str().to_string(), self.curve.clone()];
        r.extend(self.row.record());
        r
    }
}

/// All curves of a figure in long format, curves in [`Figure::curves`] order
/// and thresholds ascending within each curve. Phases are the closed-form
/// optimum at the largest threshold.
pub fn reproduce_figure(figure: Figure, opts: &FigureOptions) -> Result<Vec<FigureRow>> {
    let spec = crate::sweep::SweepSpec {
        t_grid: opts.t_grid.clone(),
        axis: opts.axis,
        regime: figure.regime(),
        phase_source: PhaseSource::Optimized,
        mc_trials: opts.trials,
        seed: opts.seed,
    };
    spec.validate()?;
    let t_linear = spec.linear_grid()?;
    let t_max = *t_linear.last().expect("validated non-empty");
    let mc = (opts.trials > 0).then(|| McConfig::new(opts.trials, opts.seed));
    let curves = figure.curves();
    let per_curve: Vec<Vec<FigureRow>> = curves
        .par_iter()
        .map(|c| {
            let model = c.model(opts.direct_scale)?;
            let (phases, _) = resolve_phases(&model, c.regime, &PhaseSource::Optimized, t_max)?;
            let rows = evaluate_grid(&model, c.regime, &phases, &t_linear, mc)?;
            Ok(rows
                .into_iter()
                .map(|row| FigureRow { figure, curve: c.label(), row })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_curve.into_iter().flatten().collect())
}
