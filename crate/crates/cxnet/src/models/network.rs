//! The two end-to-end architectures. Complex Channel Net (CCN) scores a
//! stacked patch pair directly; Complex Triple Net (CTN) embeds single
//! patches as complex descriptors. Both share the stem + feature module
//! structure; they differ in the head.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::autograd::{checkpoint, CVar, ParamStore, Tape, Var};
use crate::ctensor::{ComplexTensor, Tensor};
use crate::error::{Error, Result};
use crate::layers::flatten;

use super::config::{Architecture, ModelConfig};
use super::decision::DecisionModule;
use super::feature::FeatureModule;
use super::metric::MetricModule;

enum Head {
    Decision(DecisionModule),
    Metric(MetricModule),
}

pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub feature: FeatureModule,
    head: Head,
}

/// One row of the parameter manifest: name, dims, complex?, trainable?.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub complex: bool,
    pub trainable: bool,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let feature = FeatureModule::new(config.stem_channels(), config.input_conversion, config.bn_mode)?;
        let mut store = ParamStore::new();
        feature.register(&mut store, config.init_scheme, &mut rng)?;
        let feat_dim = 128 * config.final_map_size() * config.final_map_size();
        let head = match config.architecture {
            Architecture::Ccn => {
                let dm = DecisionModule::new(feat_dim, config.decision_mode);
                dm.register(&mut store, &mut rng)?;
                Head::Decision(dm)
            }
            Architecture::Ctn => {
                let mm = MetricModule::new(feat_dim, config.descriptor_dim);
                mm.register(&mut store, config.init_scheme, &mut rng)?;
                Head::Metric(mm)
            }
        };
        Ok(Model { config, store, feature, head })
    }

    pub fn is_ctn(&self) -> bool {
        matches!(self.head, Head::Metric(_))
    }

    fn check_input(&self, op: &'static str, x: &Tensor, channels: usize) -> Result<()> {
        let s = self.config.patch_size;
        let d = x.dims();
        if d.len() != 4 || d[1] != channels || d[2] != s || d[3] != s {
            return Err(Error::shape(
                op,
                format!("expected (N,{channels},{s},{s}), got {d:?}"),
            ));
        }
        Ok(())
    }

    /// CCN: stacked pairs (N, 2, S, S) -> match scores (N,) in (0, 1).
    pub fn ccn_forward(&mut self, tape: &mut Tape, pairs: &Tensor, training: bool) -> Result<Var> {
        let Head::Decision(dm) = &self.head else {
            return Err(Error::contract("ccn_forward", "model is a CTN"));
        };
        self.check_input("ccn_forward", pairs, 2)?;
        let x = tape.leaf(pairs.clone());
        let h = self.feature.forward(tape, &mut self.store, x, training)?;
        let flat = flatten(tape, h)?;
        dm.forward(tape, &self.store, flat.re, flat.im)
    }

    /// CTN: patches (N, 1, S, S) -> normalized complex descriptors (N, D).
    pub fn ctn_descriptors(&mut self, tape: &mut Tape, patches: &Tensor, training: bool) -> Result<CVar> {
        let Head::Metric(mm) = &self.head else {
            return Err(Error::contract("ctn_descriptors", "model is a CCN"));
        };
        self.check_input("ctn_descriptors", patches, 1)?;
        let x = tape.leaf(patches.clone());
        let h = self.feature.forward(tape, &mut self.store, x, training)?;
        let flat = flatten(tape, h)?;
        mm.forward(tape, &self.store, flat)
    }

    /// Training-time triple forward: the three patch sets run as one
    /// concatenated batch through the shared branch (so batch-norm statistics
    /// pool across branches), then split back into (f_p1, f_p2, f_n).
    pub fn ctn_forward_train(&mut self, tape: &mut Tape, p1: &Tensor, p2: &Tensor, neg: &Tensor) -> Result<(CVar, CVar, CVar)> {
        if p1.dims() != p2.dims() || p1.dims() != neg.dims() {
            return Err(Error::shape(
                "ctn_forward_train",
                format!("branch shapes differ: {:?} / {:?} / {:?}", p1.dims(), p2.dims(), neg.dims()),
            ));
        }
        let n = p1.dims()[0];
        let joined = Tensor::concat(&[p1, p2, neg], 0)?;
        let all = self.ctn_descriptors(tape, &joined, true)?;
        let split = |tape: &mut Tape, v: CVar, a: usize, b: usize| -> Result<CVar> {
            Ok(CVar { re: tape.slice_rows(v.re, a, b)?, im: tape.slice_rows(v.im, a, b)? })
        };
        let f1 = split(tape, all, 0, n)?;
        let f2 = split(tape, all, n, 2 * n)?;
        let f3 = split(tape, all, 2 * n, 3 * n)?;
        Ok((f1, f2, f3))
    }

    /// Inference-mode descriptor extraction in batches.
    pub fn describe(&mut self, patches: &Tensor, batch: usize) -> Result<ComplexTensor> {
        if !self.is_ctn() {
            return Err(Error::contract("describe", "model is a CCN, which has no descriptor output"));
        }
        let n = patches.dims()[0];
        let mut chunks_re = Vec::new();
        let mut chunks_im = Vec::new();
        let mut at = 0;
        while at < n {
            let hi = (at + batch.max(1)).min(n);
            let part = patches.slice(0, at, hi)?;
            let mut tape = Tape::new();
            let d = self.ctn_descriptors(&mut tape, &part, false)?;
            chunks_re.push(tape.value(d.re).clone());
            chunks_im.push(tape.value(d.im).clone());
            at = hi;
        }
        let re_refs: Vec<&Tensor> = chunks_re.iter().collect();
        let im_refs: Vec<&Tensor> = chunks_im.iter().collect();
        ComplexTensor::new(Tensor::concat(&re_refs, 0)?, Tensor::concat(&im_refs, 0)?)
    }

    /// Inference-mode pair scoring in batches.
    pub fn score_pairs(&mut self, pairs: &Tensor, batch: usize) -> Result<Vec<f64>> {
        let n = pairs.dims()[0];
        let mut out = Vec::with_capacity(n);
        let mut at = 0;
        while at < n {
            let hi = (at + batch.max(1)).min(n);
            let part = pairs.slice(0, at, hi)?;
            let mut tape = Tape::new();
            let s = self.ccn_forward(&mut tape, &part, false)?;
            out.extend_from_slice(tape.value(s).data());
            at = hi;
        }
        Ok(out)
    }

    /// Set every batch-norm layer's running-statistics momentum.
    pub fn set_bn_momentum(&mut self, momentum: f64) {
        for b in &mut self.feature.blocks {
            b.bn1.momentum = momentum;
            b.bn2.momentum = momentum;
        }
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.store
            .iter()
            .map(|p| ManifestEntry {
                name: p.name.clone(),
                dims: p.value.dims().to_vec(),
                complex: matches!(p.value, crate::autograd::Value::Complex(_)),
                trainable: p.trainable,
            })
            .collect()
    }

    /// Count of trainable scalars (complex parameters count both parts).
    pub fn trainable_scalar_count(&self) -> usize {
        self.store.iter().filter(|p| p.trainable).map(|p| p.value.numel()).sum()
    }

    pub fn save(&self, path: &Path, step: u64) -> Result<()> {
        let config_json = serde_json::to_string(&self.config)?;
        checkpoint::save_checkpoint(path, &config_json, step, &self.store)
    }

    /// Rebuild the model from a checkpoint; validates that the stored
    /// parameters agree with the embedded config's architecture.
    pub fn load(path: &Path) -> Result<(Model, u64)> {
        let data = checkpoint::load_checkpoint(path)?;
        let config: ModelConfig = serde_json::from_str(&data.config_json)?;
        let mut model = Model::new(config)?;
        let step = checkpoint::restore_into(&mut model.store, data)?;
        Ok((model, step))
    }
}
