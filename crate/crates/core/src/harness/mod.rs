//! Rolling nowcast evaluation, cross-validated model selection, macro-F1 and
//! the noise-robustness experiment.

mod cv;
mod metrics;
mod nowcast;
mod robustness;

pub use cv::stratified_folds;
pub use metrics::{macro_f1, ClassMetrics, F1Report};
pub use nowcast::{
    rolling_nowcast, rolling_nowcast_many, timings_csv, DayReport, Grid, HarnessConfig, ModelKind, ModelSpec,
    NowcastOutput, RunReport, Timing, DEFAULT_GRID,
};
pub use robustness::{robustness_experiment, RobustnessConfig, RobustnessReport, RobustnessRun, RobustnessSummary};
