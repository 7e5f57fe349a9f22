//! Architecture and run configuration shared by the model builders, the
//! checkpoint format, and the CLI.

use serde::{Deserialize, Serialize};

use crate::autograd::AdamConfig;
use crate::error::{Error, Result};
use crate::layers::{BnMode, InitScheme};
use crate::objectives::{DistanceMode, LossForm};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Ccn,
    Ctn,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputConversion {
    /// Per-channel 2D DFT of the stem output.
    #[default]
    Dft,
    /// Zero imaginary part.
    ZeroImag,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    /// Real and imaginary branches share trunk weights.
    #[default]
    Siamese,
    /// Independent trunk weights per branch.
    PseudoSiamese,
}

fn default_descriptor_dim() -> usize {
    128
}

fn default_patch_size() -> usize {
    32
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    pub architecture: Architecture,
    #[serde(default)]
    pub input_conversion: InputConversion,
    #[serde(default)]
    pub bn_mode: BnMode,
    #[serde(default)]
    pub distance_mode: DistanceMode,
    #[serde(default)]
    pub loss_form: LossForm,
    #[serde(default)]
    pub decision_mode: DecisionMode,
    #[serde(default = "default_descriptor_dim")]
    pub descriptor_dim: usize,
    #[serde(default = "default_patch_size")]
    pub patch_size: usize,
    #[serde(default)]
    pub init_scheme: InitScheme,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn ccn() -> Self {
        ModelConfig::new(Architecture::Ccn)
    }

    pub fn ctn() -> Self {
        ModelConfig::new(Architecture::Ctn)
    }

    pub fn new(architecture: Architecture) -> Self {
        ModelConfig {
            architecture,
            input_conversion: InputConversion::default(),
            bn_mode: BnMode::default(),
            distance_mode: DistanceMode::default(),
            loss_form: LossForm::default(),
            decision_mode: DecisionMode::default(),
            descriptor_dim: default_descriptor_dim(),
            patch_size: default_patch_size(),
            init_scheme: InitScheme::default(),
            optimizer: AdamConfig::default(),
            seed: 0,
        }
    }

    /// Stem input channels: a stacked pair for CCN, single patches for CTN.
    pub fn stem_channels(&self) -> usize {
        match self.architecture {
            Architecture::Ccn => 2,
            Architecture::Ctn => 1,
        }
    }

    /// Spatial size of the feature maps after the three pooling stages.
    pub fn final_map_size(&self) -> usize {
        self.patch_size / 8
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 8 || self.patch_size % 8 != 0 {
            return Err(Error::contract(
                "ModelConfig",
                format!("patch_size {} must be a positive multiple of 8", self.patch_size),
            ));
        }
        if self.descriptor_dim == 0 {
            return Err(Error::contract("ModelConfig", "descriptor_dim must be >= 1"));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::contract("ModelConfig", "learning rate must be positive"));
        }
        Ok(())
    }
}
