//! Command implementations behind the `cxnet` binary: training, evaluation,
//! descriptor export, and the built-in verification suites.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use serde::{Deserialize, Serialize};

use crate::autograd::{adam_step, Tape};
use crate::ctensor::{io as tio, ComplexTensor, Tensor};
use crate::data::{
    load_hpatches, load_match_file, load_phototour, sample_pairs, sample_triplets, synth_generate,
    PatchPair, PatchStore,
};
use crate::error::{Error, Result};
use crate::models::{Architecture, Model, ModelConfig};
use crate::objectives::{
    complex_distance_rows, fpr95, mse_loss_graph, roc_curve, softpn_loss_graph, write_roc_csv,
    Polarity, RocPoint,
};
use crate::verify;

/// Where the patches come from.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum DataDescriptor {
    Phototour {
        dir: PathBuf,
    },
    Hpatches {
        dir: PathBuf,
        split_file: PathBuf,
        splits: Vec<String>,
    },
    Synthetic {
        #[serde(default = "default_synth_ids")]
        num_ids: usize,
        #[serde(default = "default_synth_per_id")]
        patches_per_id: usize,
        #[serde(default = "default_synth_sigma")]
        noise_sigma: f64,
        #[serde(default = "default_synth_shift")]
        max_shift: usize,
    },
    Container {
        path: PathBuf,
    },
}

fn default_synth_ids() -> usize {
    64
}

fn default_synth_per_id() -> usize {
    8
}

fn default_synth_sigma() -> f64 {
    0.05
}

fn default_synth_shift() -> usize {
    2
}

/// Load the patches a descriptor points at. `seed` only affects synthetic
/// generation.
pub fn load_store(desc: &DataDescriptor, patch_size: usize, seed: u64) -> Result<PatchStore> {
    match desc {
        DataDescriptor::Phototour { dir } => load_phototour(dir),
        DataDescriptor::Hpatches { dir, split_file, splits } => load_hpatches(dir, split_file, splits),
        DataDescriptor::Synthetic { num_ids, patches_per_id, noise_sigma, max_shift } => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xD5D5_D5D5);
            synth_generate(*num_ids, *patches_per_id, *noise_sigma, *max_shift, patch_size, &mut rng)
        }
        DataDescriptor::Container { path } => PatchStore::load(path),
    }
}

fn default_batch() -> usize {
    128
}

fn default_steps() -> u64 {
    2000
}

fn default_eval_pairs() -> usize {
    512
}

fn default_pos_fraction() -> f64 {
    0.5
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Full training-run configuration (model + data + loop parameters).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub data: DataDescriptor,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: u64,
    /// Evaluate held-out FPR95 every this many steps (0 = only at the end).
    #[serde(default)]
    pub eval_every: u64,
    #[serde(default = "default_eval_pairs")]
    pub eval_pairs: usize,
    #[serde(default = "default_pos_fraction")]
    pub pos_fraction: f64,
    /// Write an intermediate checkpoint every this many steps (0 = final only).
    #[serde(default)]
    pub checkpoint_every: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size < 2 {
            return Err(Error::contract(
                "RunConfig",
                format!("batch_size {} violates the batch-norm minimum of 2", self.batch_size),
            ));
        }
        if self.steps == 0 {
            return Err(Error::contract("RunConfig", "steps must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.pos_fraction) {
            return Err(Error::contract("RunConfig", "pos_fraction must lie in [0,1]"));
        }
        Ok(())
    }
}

/// Append-only training log with strictly increasing steps.
#[derive(Default)]
pub struct MetricsLog {
    rows: Vec<MetricsRow>,
}

#[derive(Clone, Debug)]
pub struct MetricsRow {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    pub wall_time: f64,
    pub fpr95: Option<f64>,
}

impl MetricsLog {
    pub fn append(&mut self, row: MetricsRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(Error::contract(
                    "MetricsLog",
                    format!("step {} not greater than previous {}", row.step, last.step),
                ));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "step,loss,lr,wall_time,fpr95")?;
        for r in &self.rows {
            let f = r.fpr95.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", r.step, r.loss, r.lr, r.wall_time, f)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub final_loss: f64,
    pub final_fpr95: Option<f64>,
}

/// Score labeled pairs with a trained model. CCN scores pairs directly
/// (higher = match); CTN compares descriptor distances (lower = match).
pub fn score_store_pairs(
    model: &mut Model,
    store: &PatchStore,
    pairs: &[PatchPair],
    batch: usize,
) -> Result<(Vec<f64>, Vec<bool>, Polarity)> {
    match model.config.architecture {
        Architecture::Ccn => {
            let (stacked, labels) = store.gather_pairs(pairs)?;
            let scores = model.score_pairs(&stacked, batch)?;
            Ok((scores, labels, Polarity::HigherIsMatch))
        }
        Architecture::Ctn => {
            let a_idx: Vec<usize> = pairs.iter().map(|p| p.a).collect();
            let b_idx: Vec<usize> = pairs.iter().map(|p| p.b).collect();
            let da = model.describe(&store.gather(&a_idx)?, batch)?;
            let db = model.describe(&store.gather(&b_idx)?, batch)?;
            let dists = complex_distance_rows(&da, &db, model.config.distance_mode)?;
            let labels = pairs.iter().map(|p| p.label).collect();
            Ok((dists, labels, Polarity::LowerIsMatch))
        }
    }
}

fn eval_fpr95(model: &mut Model, store: &PatchStore, pairs: &[PatchPair], batch: usize) -> Result<(f64, Vec<RocPoint>)> {
    let (scores, labels, polarity) = score_store_pairs(model, store, pairs, batch)?;
    Ok((
        fpr95(&scores, &labels, polarity)?,
        roc_curve(&scores, &labels, polarity)?,
    ))
}

/// Train per the run configuration, periodically logging and checkpointing.
/// Fully deterministic for a fixed config and seed.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let store = load_store(&cfg.data, cfg.model.patch_size, cfg.seed)?;
    // Held-out split for periodic evaluation: synthetic data regenerates
    // with a shifted seed (fresh ids); file-backed datasets reuse the store
    // with an independent pair sample.
    let eval_store = match &cfg.data {
        DataDescriptor::Synthetic { .. } => Some(load_store(&cfg.data, cfg.model.patch_size, cfg.seed ^ 0x5EED_0FF5)?),
        _ => None,
    };
    let mut model = Model::new(cfg.model.clone())?;
    let mut sampler_rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(0x5A17));
    let mut eval_rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(0xE7A1));
    let mut log = MetricsLog::default();
    let started = Instant::now();
    let mut final_loss = f64::NAN;
    let mut final_fpr95 = None;

    for step in 1..=cfg.steps {
        model.store.zero_grad();
        let mut tape = Tape::new();
        let loss_var = match model.config.architecture {
            Architecture::Ccn => {
                let pairs = sample_pairs(&store, cfg.batch_size, cfg.pos_fraction, &mut sampler_rng)?;
                let (stacked, labels) = store.gather_pairs(&pairs)?;
                let label_t = Tensor::from_fn(vec![labels.len()], |i| f64::from(labels[i]));
                let scores = model.ccn_forward(&mut tape, &stacked, true)?;
                mse_loss_graph(&mut tape, scores, &label_t)?
            }
            Architecture::Ctn => {
                let triplets = sample_triplets(&store, cfg.batch_size, &mut sampler_rng)?;
                let p1: Vec<usize> = triplets.iter().map(|t| t.p1).collect();
                let p2: Vec<usize> = triplets.iter().map(|t| t.p2).collect();
                let nn: Vec<usize> = triplets.iter().map(|t| t.n).collect();
                let (t1, t2, t3) = (store.gather(&p1)?, store.gather(&p2)?, store.gather(&nn)?);
                let (f1, f2, f3) = model.ctn_forward_train(&mut tape, &t1, &t2, &t3)?;
                softpn_loss_graph(&mut tape, f1, f2, f3, model.config.distance_mode, model.config.loss_form)?
            }
        };
        let loss = tape.value(loss_var).item()?;
        if !loss.is_finite() {
            return Err(Error::contract(
                "cmd_train",
                format!("non-finite loss {loss} at step {step}; aborting"),
            ));
        }
        let grads = tape.backward(loss_var)?;
        model.store.accumulate_grads(&tape, &grads)?;
        drop(tape);
        adam_step(&mut model.store, &model.config.optimizer, step)?;
        final_loss = loss;

        let evaluate_now = cfg.eval_every > 0 && step % cfg.eval_every == 0;
        let mut fpr = None;
        if evaluate_now {
            let est = eval_store.as_ref().unwrap_or(&store);
            let pairs = sample_pairs(est, cfg.eval_pairs, 0.5, &mut eval_rng)?;
            let (v, _) = eval_fpr95(&mut model, est, &pairs, cfg.batch_size)?;
            fpr = Some(v);
            final_fpr95 = Some(v);
        }
        log.append(MetricsRow {
            step,
            loss,
            lr: model.config.optimizer.lr,
            wall_time: started.elapsed().as_secs_f64(),
            fpr95: fpr,
        })?;
        if evaluate_now || step % 200 == 0 || step == cfg.steps {
            println!(
                "step={step} loss={loss:.6}{}",
                fpr.map(|v| format!(" fpr95={v}")).unwrap_or_default()
            );
        }
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != cfg.steps {
            model.save(&cfg.out_dir.join(format!("checkpoint_{step}.cxck")), step)?;
        }
    }

    let checkpoint = cfg.out_dir.join("checkpoint.cxck");
    model.save(&checkpoint, cfg.steps)?;
    let metrics = cfg.out_dir.join("metrics.csv");
    log.write_csv(&metrics)?;
    Ok(TrainOutcome { checkpoint, metrics, final_loss, final_fpr95 })
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub data: &'a DataDescriptor,
    /// m50-style match file (Photo-Tour layout); otherwise pairs are sampled.
    pub pairs_file: Option<&'a Path>,
    pub eval_pairs: usize,
    pub pos_fraction: f64,
    pub seed: u64,
    pub batch: usize,
    pub out_dir: &'a Path,
}

/// Evaluate FPR95 for a checkpoint; writes `roc.csv` and prints the final
/// `fpr95=<value>` line on stdout.
pub fn cmd_eval(args: &EvalArgs) -> Result<f64> {
    std::fs::create_dir_all(args.out_dir)?;
    let (mut model, _step) = Model::load(args.checkpoint)?;
    let store = load_store(args.data, model.config.patch_size, args.seed)?;
    if store.patch_size() != model.config.patch_size {
        return Err(Error::contract(
            "cmd_eval",
            format!(
                "dataset patch size {} does not match model patch size {}",
                store.patch_size(),
                model.config.patch_size
            ),
        ));
    }
    let pairs = match args.pairs_file {
        Some(path) => load_match_file(path, &store)?,
        None => {
            let mut rng = ChaCha12Rng::seed_from_u64(args.seed.wrapping_add(0xE7A1));
            sample_pairs(&store, args.eval_pairs, args.pos_fraction, &mut rng)?
        }
    };
    let (value, curve) = eval_fpr95(&mut model, &store, &pairs, args.batch)?;
    let mut roc = std::io::BufWriter::new(std::fs::File::create(args.out_dir.join("roc.csv"))?);
    write_roc_csv(&mut roc, &curve)?;
    roc.flush()?;
    println!("fpr95={value}");
    Ok(value)
}

/// Export complex descriptors for every patch of a dataset (CTN only):
/// a tensor container plus a plain-text row index.
pub fn cmd_describe(checkpoint: &Path, data: &DataDescriptor, out_dir: &Path, batch: usize, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let (mut model, _) = Model::load(checkpoint)?;
    if !model.is_ctn() {
        return Err(Error::contract(
            "cmd_describe",
            "checkpoint is a CCN, which scores pairs and has no descriptor output",
        ));
    }
    let store = load_store(data, model.config.patch_size, seed)?;
    let descriptors: ComplexTensor = model.describe(store.patches(), batch)?;
    let out_path = out_dir.join("descriptors.cxt");
    tio::save_complex(&out_path, &descriptors)?;
    let mut idx = std::io::BufWriter::new(std::fs::File::create(out_dir.join("descriptors.idx.txt"))?);
    writeln!(idx, "row\tpatch\tpoint_id")?;
    for (i, pid) in store.point_ids().iter().enumerate() {
        writeln!(idx, "{i}\t{i}\t{pid}")?;
    }
    idx.flush()?;
    Ok(out_path)
}

/// Run the built-in oracle suites and print one line per suite.
/// Returns whether every suite passed.
pub fn cmd_verify(seed: u64) -> bool {
    let reports = verify::run_all(seed);
    let mut all = true;
    for r in &reports {
        println!("{}", r.line());
        all &= r.passed;
    }
    println!("verify: {}", if all { "all suites passed" } else { "FAILURES PRESENT" });
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_synth() -> DataDescriptor {
        DataDescriptor::Synthetic { num_ids: 4, patches_per_id: 4, noise_sigma: 0.02, max_shift: 1 }
    }

    #[test]
    fn run_config_validation() {
        let mut cfg = RunConfig {
            model: ModelConfig::ctn(),
            data: tiny_synth(),
            batch_size: 1,
            steps: 5,
            eval_every: 0,
            eval_pairs: 16,
            pos_fraction: 0.5,
            checkpoint_every: 0,
            seed: 1,
            out_dir: PathBuf::from("/tmp/na"),
        };
        assert!(cfg.validate().is_err(), "batch 1 must be rejected");
        cfg.batch_size = 2;
        assert!(cfg.validate().is_ok());
        cfg.steps = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn metrics_log_rejects_non_increasing_steps() {
        let mut log = MetricsLog::default();
        let row = |step| MetricsRow { step, loss: 1.0, lr: 1e-3, wall_time: 0.0, fpr95: None };
        log.append(row(1)).unwrap();
        log.append(row(2)).unwrap();
        assert!(log.append(row(2)).is_err());
    }

    #[test]
    fn synthetic_store_loading_is_seed_deterministic() {
        let desc = tiny_synth();
        let a = load_store(&desc, 32, 5).unwrap();
        let b = load_store(&desc, 32, 5).unwrap();
        assert_eq!(a.patches().data(), b.patches().data());
        let c = load_store(&desc, 32, 6).unwrap();
        assert_ne!(a.patches().data(), c.patches().data());
    }
}
