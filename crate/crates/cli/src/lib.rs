//! Experiment driver behind the `irscov` binary. Every number written here
//! comes from the `irscov` library; this crate only arranges grids, phases
//! and output.

pub mod figures;
pub mod gradcheck;
pub mod output;
pub mod sweep;

pub use figures::{reproduce_figure, Figure, FigureOptions, FigureRow};
pub use gradcheck::{gradient_check, GradcheckReport};
pub use output::{Metadata, BUILD_ID};
pub use sweep::{
    convert_rate_to_threshold, run_sweep, PhaseSource, ResultRow, SweepOutput, SweepSpec,
    ThresholdAxis,
};
