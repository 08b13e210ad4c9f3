//! Image ingestion, dataset manifests, seeded randomness, and fold splitting.

mod folds;
mod image;
mod manifest;
mod rng;

pub use folds::{kfold_split, stratified_kfold, FoldSplit};
pub use image::{
    decode_ppm, encode_ppm, from_tensor, load_image_tensor, read_ppm, resample_bilinear,
    to_tensor, ImageRGB,
};
pub use manifest::{load_manifest, DatasetManifest, ManifestEntry, APPENDIX_MANIFEST};
pub use rng::Rng;
