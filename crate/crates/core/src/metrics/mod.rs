//! Equal error rates and the SV / SPF / SASV report.

mod eer;
mod report;

pub use eer::{compute_eer, Eer};
pub use report::{
    evaluate_system, score_histogram, subset_trials, EvalReport, Histogram, Metric, MetricResult,
    ScoredTrial, DEFAULT_HISTOGRAM_BINS,
};
