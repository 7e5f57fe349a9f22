use cxnet::cli::{cmd_train, load_store, score_store_pairs, DataDescriptor, RunConfig};
use cxnet::data::sample_pairs;
use cxnet::models::{Architecture, Model, ModelConfig};
use cxnet::objectives::fpr95;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn main() {
    let arch = std::env::args().nth(1).unwrap_or_else(|| "ctn".into());
    let steps: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let batch: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(4);
    let desc = DataDescriptor::Synthetic { num_ids: 64, patches_per_id: 8, noise_sigma: 0.05, max_shift: 2 };
    let mut model_cfg = ModelConfig::new(if arch == "ccn" { Architecture::Ccn } else { Architecture::Ctn });
    model_cfg.seed = 11;
    let cfg = RunConfig {
        model: model_cfg.clone(),
        data: desc.clone(),
        batch_size: batch,
        steps,
        eval_every: 0,
        eval_pairs: 512,
        pos_fraction: 0.5,
        checkpoint_every: 0,
        seed: 11,
        out_dir: std::path::PathBuf::from("/tmp/proxy_bench_out"),
    };
    // Untrained baseline on label-shuffled pairs.
    let held_out = load_store(&desc, 32, 11 ^ 0x5EED_0FF5).unwrap();
    let mut eval_rng = ChaCha12Rng::seed_from_u64(999);
    let mut pairs = sample_pairs(&held_out, 1024, 0.5, &mut eval_rng).unwrap();
    {
        let mut untrained = Model::new(model_cfg).unwrap();
        let mut shuffled = pairs.clone();
        let mut labels: Vec<bool> = shuffled.iter().map(|p| p.label).collect();
        labels.shuffle(&mut eval_rng);
        for (p, l) in shuffled.iter_mut().zip(labels) { p.label = l; }
        let t = Instant::now();
        let (scores, labels, pol) = score_store_pairs(&mut untrained, &held_out, &shuffled, 64).unwrap();
        let base = fpr95(&scores, &labels, pol).unwrap();
        println!("untrained random-label fpr95={base:.4} ({:.0}s)", t.elapsed().as_secs_f64());
    }
    let t = Instant::now();
    let outcome = cmd_train(&cfg).unwrap();
    let train_time = t.elapsed().as_secs_f64();
    println!("train {} steps batch {}: {:.1}s ({:.3}s/step), final loss {:.5}", steps, batch, train_time, train_time / steps as f64, outcome.final_loss);
    let (mut model, _) = Model::load(&outcome.checkpoint).unwrap();
    let t = Instant::now();
    let (scores, labels, pol) = score_store_pairs(&mut model, &held_out, &pairs, 64).unwrap();
    let v = fpr95(&scores, &labels, pol).unwrap();
    println!("held-out fpr95={v:.4} (eval {:.0}s)", t.elapsed().as_secs_f64());
    let _ = &mut pairs;
}
