//! Thresholded prediction, metrics, and the annotation-fraction and ablation
//! experiments.

mod experiments;
mod metrics;
mod predict;

pub use experiments::{
    ablation_csv, run_ablation, run_fraction_sweep, sweep_csv, AblationRow, SweepRow, Variant,
};
pub use metrics::{compute_metrics, f_beta, Counts, EvalReport, Granularity};
pub use predict::{
    evaluate, predict, predict_all, score_predictions, Evaluation, Prediction, StopMetric,
    TokenPrediction, THRESHOLD,
};
