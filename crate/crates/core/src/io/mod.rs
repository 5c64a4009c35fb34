//! On-disk formats: PNM frames, dataset directories, checkpoints, and
//! ingestion of externally extracted frames.

pub mod checkpoint;
pub mod dataset;
pub mod ingest;
pub mod pnm;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use dataset::{read_dataset, read_manifest, write_dataset, Manifest, MANIFEST_FILE};
pub use ingest::{ingest_frames, resize_bilinear, EpisodeSplit, IngestReport};
pub use pnm::{read_frame, write_frame};
