//! Experiment plumbing: configuration, the training loop, verification
//! reports and CSV persistence.

mod check;
mod config;
mod export;
mod report;
mod training;

pub use check::{grad_check, relative_error, CheckOutcome, Fault, GradCheckOptions, GradCheckReport, FD_REL_TOL};
pub use config::{Experiment, ExperimentConfig, ThetaInit};
pub use export::{export_history, read_history, CSV_FIXED_COLUMNS};
pub use report::{eval_report, AssumptionChecks, EvalReport, PairRow, StateRow};
pub use training::{run_training, Record, TrainingHistory};
