//! Dataset generation, evaluation metrics, and the experiment runner.

pub mod dataset;
pub mod experiment;
pub mod metrics;

pub use dataset::{cluster_by_ds, generate_dataset, load_dataset, DatasetMeta, LoadedDataset};
pub use experiment::{run_experiment, EvalConfig, EvalReport};
pub use metrics::{capacity, normalized_gain};
