//! End-to-end runs of scenarios 0–4 from a JSON manifest, and the report
//! emitter that lays several runs out side by side.
//!
//! | id | pipeline |
//! |----|----------|
//! | 0  | scaled raw features → learner |
//! | 1  | one autoencoder over all features → embeddings → learner |
//! | 2  | two peers, one autoencoder each → strict ID join → learner |
//! | 3  | as 1 with a multitask autoencoder |
//! | 4  | as 2 with multitask autoencoders |

mod manifest;
mod report;
mod runner;

pub use manifest::{
    AutoencoderSpec, DatasetSpec, ExperimentManifest, SearchSettings, TrainingSpec,
};
pub use report::{
    emit_report, parse_json_report, MetricName, MetricRow, MetricsTable, ReportFormat, Split,
};
pub use runner::{run_scenario, sub_seed, RunOutcome};
