//! File formats: trial CSV and latent sidecar, binary model files, run
//! configuration and analysis tables.

pub mod config;
pub mod dataset;
pub mod model_file;
pub mod tables;

pub use config::{EvalSettings, RunConfig, RUN_CONFIG_VERSION};
pub use dataset::{read_dataset, read_latents, write_dataset, write_latents, DATASET_HEADER, LATENTS_HEADER};
pub use model_file::{decode_model, encode_model, load_model, save_model, sha256_hex, MAGIC, MODEL_FORMAT_VERSION};
pub use tables::{read_slices, write_history_gap, write_slices, HISTORY_GAP_HEADER, SLICES_HEADER};
