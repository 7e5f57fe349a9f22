//! The metric module: one complex fully-connected reduction to the
//! descriptor dimension followed by complex L2 normalization.

use rand::Rng;

use crate::autograd::{CVar, ParamStore, Tape};
use crate::error::Result;
use crate::layers::{cl2_norm, ComplexLinear, InitScheme};

pub struct MetricModule {
    pub fc: ComplexLinear,
}

impl MetricModule {
    pub fn new(in_dim: usize, descriptor_dim: usize) -> Self {
        MetricModule { fc: ComplexLinear::new("metric.fc", in_dim, descriptor_dim) }
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, scheme: InitScheme, rng: &mut R) -> Result<()> {
        self.fc.register(store, scheme, rng)
    }

    /// (N, Din) complex feature vectors -> (N, D) normalized descriptors
    /// with unit real-part and imaginary-part norms.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: CVar) -> Result<CVar> {
        let z = self.fc.forward(tape, store, x)?;
        cl2_norm(tape, z)
    }
}
