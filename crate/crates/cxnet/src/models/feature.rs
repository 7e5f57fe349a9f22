//! The complex feature module: real stem convolution, real-to-complex input
//! conversion, and three pooled complex residual blocks (channel plan
//! 32 -> 32 -> 64 -> 128).

use rand::Rng;

use crate::autograd::{CVar, ParamStore, Tape, Var};
use crate::ctensor::Tensor;
use crate::error::Result;
use crate::layers::{complex_pool2, BnMode, ComplexResidualBlock, InitScheme, RealConv2d};

use super::config::InputConversion;

pub const STEM_CHANNELS: usize = 32;
pub const BLOCK_CHANNELS: [usize; 3] = [32, 64, 128];

pub struct FeatureModule {
    pub stem: RealConv2d,
    pub conversion: InputConversion,
    pub blocks: Vec<ComplexResidualBlock>,
}

impl FeatureModule {
    pub fn new(in_channels: usize, conversion: InputConversion, bn_mode: BnMode) -> Result<Self> {
        let stem = RealConv2d::new("stem.conv", in_channels, STEM_CHANNELS, 3, 1)?;
        let mut blocks = Vec::with_capacity(3);
        let mut ch = STEM_CHANNELS;
        for (i, &out_ch) in BLOCK_CHANNELS.iter().enumerate() {
            blocks.push(ComplexResidualBlock::new(&format!("feature.block{}", i + 1), ch, out_ch, bn_mode)?);
            ch = out_ch;
        }
        Ok(FeatureModule { stem, conversion, blocks })
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, scheme: InitScheme, rng: &mut R) -> Result<()> {
        self.stem.register(store, rng)?;
        for b in &self.blocks {
            b.register(store, scheme, rng)?;
        }
        Ok(())
    }

    /// Stem convolution + relu, then conversion to a complex feature map.
    pub fn stem_and_convert(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<CVar> {
        let s = self.stem.forward(tape, store, x)?;
        let s = tape.relu(s);
        match self.conversion {
            InputConversion::Dft => Ok(CVar { re: tape.dft2d_re(s)?, im: tape.dft2d_im(s)? }),
            InputConversion::ZeroImag => {
                let zeros = Tensor::zeros(tape.value(s).dims().to_vec());
                let im = tape.leaf(zeros);
                Ok(CVar { re: s, im })
            }
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &mut ParamStore, x: Var, training: bool) -> Result<CVar> {
        let mut h = self.stem_and_convert(tape, store, x)?;
        for block in &self.blocks {
            h = block.forward(tape, store, h, training)?;
            h = complex_pool2(tape, h)?;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn output_shape_for_32x32_input() {
        let fm = FeatureModule::new(1, InputConversion::Dft, BnMode::PerComponent).unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        fm.register(&mut store, InitScheme::RayleighPhase, &mut rng).unwrap();
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_fn(vec![2, 1, 32, 32], |i| ((i % 97) as f64) / 97.0));
        let h = fm.forward(&mut tape, &mut store, x, true).unwrap();
        assert_eq!(tape.value(h.re).dims(), &[2, 128, 4, 4]);
        assert_eq!(tape.value(h.im).dims(), &[2, 128, 4, 4]);
        assert!(tape.value(h.re).is_all_finite());
    }

    #[test]
    fn zero_imag_conversion_keeps_imaginary_empty_at_entry() {
        let fm = FeatureModule::new(1, InputConversion::ZeroImag, BnMode::PerComponent).unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        fm.register(&mut store, InitScheme::RayleighPhase, &mut rng).unwrap();
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_fn(vec![2, 1, 16, 16], |i| (i as f64).cos()));
        let h = fm.stem_and_convert(&mut tape, &store, x).unwrap();
        assert!(tape.value(h.im).data().iter().all(|&v| v == 0.0));
    }
}
