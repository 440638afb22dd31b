//! Edge-importance perturbation of a trained model and the metrics that
//! score an explanation with it.
//!
//! A [`PerturbationPlan`] names key points to perturb (from a SHAP
//! ranking or at random). [`apply_plan`] returns a model copy whose
//! edge-importance diagonals at those key points are masked or scaled in
//! every block and partition. The prediction gap on the important key
//! points (PGI) should exceed the gap on the unimportant ones (PGU).

mod metrics;
mod plan;
mod report;

pub use metrics::{evaluate, pgi_pgu, probability_gap, ConfusionCounts, Evaluation, Metric, MetricKind};
pub use plan::{apply_plan, build_plan, PerturbMode, PerturbationPlan, Selection, MASK_VALUE};
pub use report::{
    informed_report, random_control, threshold_sweep, write_informed_csv, write_random_csv, InformedRow, MetricSet,
    PerturbReport, RandomReport, RandomRow, Summary, INFORMED_COLUMNS, RANDOM_COLUMNS,
};
