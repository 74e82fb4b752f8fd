//! On-disk formats: binary datasets, text checkpoints and JSON reports.

pub mod checkpoint;
pub mod dataset;

pub use checkpoint::{load_checkpoint, save_checkpoint, write_json, Checkpoint, TrainingMetadata};
pub use dataset::{read_dataset, write_dataset, Dataset, DatasetTrajectory};
