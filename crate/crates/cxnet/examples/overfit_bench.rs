use cxnet::autograd::{adam_step, Tape};
use cxnet::cli::{load_store, DataDescriptor};
use cxnet::data::sample_triplets;
use cxnet::models::{Model, ModelConfig};
use cxnet::objectives::softpn_loss_graph;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn main() {
    let desc = DataDescriptor::Synthetic { num_ids: 16, patches_per_id: 4, noise_sigma: 0.05, max_shift: 2 };
    let store = load_store(&desc, 32, 42).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let triplets = sample_triplets(&store, 32, &mut rng).unwrap();
    let p1: Vec<usize> = triplets.iter().map(|t| t.p1).collect();
    let p2: Vec<usize> = triplets.iter().map(|t| t.p2).collect();
    let nn: Vec<usize> = triplets.iter().map(|t| t.n).collect();
    let (t1, t2, t3) = (store.gather(&p1).unwrap(), store.gather(&p2).unwrap(), store.gather(&nn).unwrap());

    let mut cfg = ModelConfig::ctn();
    cfg.seed = 42;
    let mut model = Model::new(cfg).unwrap();
    let started = Instant::now();
    for step in 1..=500u64 {
        model.store.zero_grad();
        let mut tape = Tape::new();
        let (f1, f2, f3) = model.ctn_forward_train(&mut tape, &t1, &t2, &t3).unwrap();
        let loss_var = softpn_loss_graph(&mut tape, f1, f2, f3, model.config.distance_mode, model.config.loss_form).unwrap();
        let loss = tape.value(loss_var).item().unwrap();
        let grads = tape.backward(loss_var).unwrap();
        model.store.accumulate_grads(&tape, &grads).unwrap();
        drop(tape);
        adam_step(&mut model.store, &model.config.optimizer, step).unwrap();
        if step % 10 == 0 || step <= 5 {
            println!("step={step} loss={loss:.5} elapsed={:.1}s", started.elapsed().as_secs_f64());
        }
        if loss < 0.05 {
            println!("CONVERGED step={step} loss={loss:.5} elapsed={:.1}s", started.elapsed().as_secs_f64());
            return;
        }
    }
    println!("DID NOT CONVERGE in 500 steps; elapsed={:.1}s", started.elapsed().as_secs_f64());
}
