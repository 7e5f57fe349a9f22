//! The decision module: the real and imaginary parts of the feature vector
//! pass through a three-layer fully-connected trunk (shared weights in
//! siamese mode, independent in pseudo-siamese mode); the two outputs are
//! concatenated into a single sigmoid unit.

use rand::Rng;

use crate::autograd::{CVar, ParamStore, Tape, Var};
use crate::error::Result;
use crate::layers::{cl2_norm, RealLinear};

use super::config::DecisionMode;

pub const TRUNK_WIDTH: usize = 4096;
const TRUNK_DEPTH: usize = 3;

pub struct DecisionModule {
    pub mode: DecisionMode,
    trunk: Vec<RealLinear>,
    /// Imaginary-branch trunk, present only in pseudo-siamese mode.
    trunk_im: Vec<RealLinear>,
    head: RealLinear,
}

fn build_trunk(prefix: &str, in_dim: usize) -> Vec<RealLinear> {
    let mut layers = Vec::with_capacity(TRUNK_DEPTH);
    let mut d = in_dim;
    for i in 0..TRUNK_DEPTH {
        layers.push(RealLinear::new(format!("{prefix}.fc{}", i + 1), d, TRUNK_WIDTH));
        d = TRUNK_WIDTH;
    }
    layers
}

impl DecisionModule {
    pub fn new(in_dim: usize, mode: DecisionMode) -> Self {
        let trunk = build_trunk("decision.trunk", in_dim);
        let trunk_im = match mode {
            DecisionMode::Siamese => Vec::new(),
            DecisionMode::PseudoSiamese => build_trunk("decision.trunk_im", in_dim),
        };
        let head = RealLinear::new("decision.head", 2 * TRUNK_WIDTH, 1);
        DecisionModule { mode, trunk, trunk_im, head }
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        for l in &self.trunk {
            l.register(store, rng)?;
        }
        for l in &self.trunk_im {
            l.register(store, rng)?;
        }
        self.head.register(store, rng)
    }

    fn run_trunk(&self, tape: &mut Tape, store: &ParamStore, layers: &[RealLinear], mut x: Var) -> Result<Var> {
        for l in layers {
            x = l.forward(tape, store, x)?;
            x = tape.relu(x);
        }
        Ok(x)
    }

    /// (N, D) real and imaginary feature vectors -> (N,) match scores in (0,1).
    ///
    /// Each part is L2-normalized per sample first: the residual stream
    /// behind the unnormalized spectral conversion spans orders of magnitude
    /// across samples, and raw magnitudes saturate the sigmoid head. In
    /// siamese mode the shared trunk runs both parts as one stacked batch.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, re: Var, im: Var) -> Result<Var> {
        let n = tape.value(re).dims()[0];
        let normed = cl2_norm(tape, CVar { re, im })?;
        let (re_out, im_out) = match self.mode {
            DecisionMode::Siamese => {
                let both = tape.concat_rows(normed.re, normed.im)?;
                let out = self.run_trunk(tape, store, &self.trunk, both)?;
                (tape.slice_rows(out, 0, n)?, tape.slice_rows(out, n, 2 * n)?)
            }
            DecisionMode::PseudoSiamese => (
                self.run_trunk(tape, store, &self.trunk, normed.re)?,
                self.run_trunk(tape, store, &self.trunk_im, normed.im)?,
            ),
        };
        let joined = tape.concat_cols(re_out, im_out)?;
        let logit = self.head.forward(tape, store, joined)?;
        let score = tape.sigmoid(logit);
        tape.reshape(score, vec![n])
    }
}
