//! Dataset ingestion (Photo-Tour, HPatches), the on-disk patch container,
//! pair/triplet sampling, and the synthetic desk-scale generator.

mod hpatches;
mod phototour;
mod sampler;
mod store;
mod synth;

pub use hpatches::load_hpatches;
pub use phototour::{load_match_file, load_phototour};
pub use sampler::{sample_pairs, sample_triplets};
pub use store::{PatchPair, PatchStore, PatchTriplet};
pub use synth::synth_generate;
