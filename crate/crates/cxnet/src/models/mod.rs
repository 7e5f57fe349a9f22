//! Model assembly: the complex feature module, decision and metric heads,
//! and the CCN / CTN architectures.

mod config;
mod decision;
mod feature;
mod metric;
mod network;

pub use config::{Architecture, DecisionMode, InputConversion, ModelConfig};
pub use decision::{DecisionModule, TRUNK_WIDTH};
pub use feature::{FeatureModule, BLOCK_CHANNELS, STEM_CHANNELS};
pub use metric::MetricModule;
pub use network::{ManifestEntry, Model};
