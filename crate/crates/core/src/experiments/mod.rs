//! The experiment harness: dataset files, aggregation sweeps, CSV and SVG
//! output, and model training on annotation datasets.

pub mod dataset;
pub mod output;
pub mod plot;
pub mod sweep;
pub mod training;

pub use dataset::{read_dataset, write_dataset, Dataset, Manifest};
pub use output::{execute_sweep, read_reports, read_rows, write_loss_trace, write_reports, SweepOptions, SweepOutcome};
pub use sweep::{run_sweep, run_task, sweep_points, ExperimentSpec, Scenario, SweepMean, SweepPoint, SweepResult, SweepRow, SweepTask};
pub use training::{evaluate_dataset, train_on_dataset, TrainingRun};
