//! Staged SGD training, evaluation and cross-split reporting.

mod config;
mod eval;
mod prepare;
mod report;
mod trainer;

pub use config::{Scope, Stage, StageLength, TrainConfig};
pub use eval::{evaluate, evaluate_with, EvalItem, EvalMode, EvalResult};
pub use prepare::{DifferentialSet, PreparedData, Sample};
pub use report::{cross_split_report, population_stats, MetricsReport, ReportRow, RunResult};
pub use trainer::{train_staged, EpochRecord};
