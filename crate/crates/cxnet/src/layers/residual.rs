//! Pre-activation complex residual block:
//! BN -> CRelu -> Conv -> BN -> CRelu -> Conv, plus the skip connection.
//! A 1x1 complex convolution projects the skip path when the channel count
//! changes.

use rand::Rng;

use crate::autograd::{CVar, ParamStore, Tape};
use crate::error::Result;

use super::bn::{BnMode, ComplexBatchNorm};
use super::conv::ComplexConv2d;
use super::init::InitScheme;
use super::ops::crelu;

pub struct ComplexResidualBlock {
    pub bn1: ComplexBatchNorm,
    pub conv1: ComplexConv2d,
    pub bn2: ComplexBatchNorm,
    pub conv2: ComplexConv2d,
    pub projection: Option<ComplexConv2d>,
}

impl ComplexResidualBlock {
    pub fn new(base: &str, in_ch: usize, out_ch: usize, bn_mode: BnMode) -> Result<Self> {
        Ok(ComplexResidualBlock {
            bn1: ComplexBatchNorm::new(format!("{base}.bn1"), in_ch, bn_mode),
            conv1: ComplexConv2d::new(format!("{base}.conv1"), in_ch, out_ch, 3, 1)?,
            bn2: ComplexBatchNorm::new(format!("{base}.bn2"), out_ch, bn_mode),
            conv2: ComplexConv2d::new(format!("{base}.conv2"), out_ch, out_ch, 3, 1)?,
            projection: if in_ch != out_ch {
                Some(ComplexConv2d::new(format!("{base}.proj"), in_ch, out_ch, 1, 0)?)
            } else {
                None
            },
        })
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, scheme: InitScheme, rng: &mut R) -> Result<()> {
        self.bn1.register(store)?;
        self.conv1.register(store, scheme, rng)?;
        self.bn2.register(store)?;
        self.conv2.register(store, scheme, rng)?;
        if let Some(proj) = &self.projection {
            proj.register(store, scheme, rng)?;
        }
        Ok(())
    }

    pub fn forward(&self, tape: &mut Tape, store: &mut ParamStore, x: CVar, training: bool) -> Result<CVar> {
        let h = self.bn1.forward(tape, store, x, training)?;
        let h = crelu(tape, h);
        let h = self.conv1.forward(tape, store, h)?;
        let h = self.bn2.forward(tape, store, h, training)?;
        let h = crelu(tape, h);
        let h = self.conv2.forward(tape, store, h)?;
        let skip = match &self.projection {
            Some(proj) => proj.forward(tape, store, x)?,
            None => x,
        };
        tape.cadd(h, skip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Value;
    use crate::ctensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn zero_convs(store: &mut ParamStore, names: &[&str]) {
        for n in names {
            let p = store.get_mut(n).unwrap();
            let dims = p.value.dims().to_vec();
            p.value = Value::Real(Tensor::zeros(dims));
        }
    }

    #[test]
    fn zeroed_residual_function_is_identity() {
        let block = ComplexResidualBlock::new("blk", 4, 4, BnMode::PerComponent).unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        block.register(&mut store, InitScheme::RayleighPhase, &mut rng).unwrap();
        zero_convs(&mut store, &["blk.conv1.A", "blk.conv1.B", "blk.conv2.A", "blk.conv2.B"]);
        let mut tape = Tape::new();
        let x = CVar {
            re: tape.leaf(Tensor::from_fn(vec![2, 4, 4, 4], |i| (i as f64).sin())),
            im: tape.leaf(Tensor::from_fn(vec![2, 4, 4, 4], |i| (i as f64).cos())),
        };
        let y = block.forward(&mut tape, &mut store, x, true).unwrap();
        for (a, b) in tape.value(y.re).data().iter().zip(tape.value(x.re).data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in tape.value(y.im).data().iter().zip(tape.value(x.im).data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_doubling_uses_projection() {
        let block = ComplexResidualBlock::new("blk", 4, 8, BnMode::PerComponent).unwrap();
        assert!(block.projection.is_some());
        let mut store = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        block.register(&mut store, InitScheme::RayleighPhase, &mut rng).unwrap();
        let mut tape = Tape::new();
        let x = CVar {
            re: tape.leaf(Tensor::from_fn(vec![2, 4, 4, 4], |i| 0.1 * i as f64)),
            im: tape.leaf(Tensor::zeros(vec![2, 4, 4, 4])),
        };
        let y = block.forward(&mut tape, &mut store, x, true).unwrap();
        assert_eq!(tape.value(y.re).dims(), &[2, 8, 4, 4]);
    }
}
