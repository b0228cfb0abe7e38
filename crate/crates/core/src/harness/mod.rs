//! Scenario runner: configuration, experiments, metrics and output files.

pub mod config;
pub mod records;
pub mod scenarios;
pub mod study;

pub use config::{AttitudeSpec, ReplayConfig, Scenario, ScenarioConfig, Sweep, SweepParam, SweepPoint};
pub use records::{
    emit_csv, emit_summary_json, extract_envelope, local_maxima, read_csv, EnvelopePoint, Method, Series, Summary,
    TrajectoryRecord, CSV_COLUMNS,
};
pub use scenarios::{run_batch, run_experiment, run_experiment_with, synthesize, Experiment, InitialConditions};
pub use study::{convergence_order_study, convergence_order_study_with, OrderRow, OrderStudy};
