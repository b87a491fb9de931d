//! Dataset ingestion, the procedural toy dataset, image files and checkpoints.

pub mod checkpoint;
pub mod dataset;
pub mod image_io;
pub mod toy;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, CheckpointMeta};
pub use dataset::{load_dataset, Dataset, DatasetRecord, IndexEntry, Rejected};
pub use toy::{generate_toy_dataset, ToyIdentity};
