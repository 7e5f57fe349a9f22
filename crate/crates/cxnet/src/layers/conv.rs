//! Real and complex convolution layers (cross-correlation, zero padding).

use rand::Rng;

use crate::autograd::{CVar, ParamStore, Tape, Var};
use crate::ctensor::{ComplexTensor, Tensor};
use crate::error::{Error, Result};

use super::init::{init_complex_pair, init_real_glorot, InitScheme};

fn check_odd_for_same(base: &str, k: usize, pad: usize) -> Result<()> {
    // "same" geometry only works out for odd kernels; 1x1/3x3 are the only
    // sizes used here.
    if pad > 0 && k % 2 == 0 {
        return Err(Error::contract(
            "conv layer",
            format!("{base}: even kernel {k} cannot use same padding"),
        ));
    }
    Ok(())
}

/// Plain real convolution with bias (the stem layer).
pub struct RealConv2d {
    pub base: String,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub pad: usize,
    pub stride: usize,
}

impl RealConv2d {
    pub fn new(base: impl Into<String>, in_ch: usize, out_ch: usize, k: usize, pad: usize) -> Result<Self> {
        let base = base.into();
        check_odd_for_same(&base, k, pad)?;
        Ok(RealConv2d { base, in_ch, out_ch, k, pad, stride: 1 })
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        let fan_in = self.in_ch * self.k * self.k;
        let fan_out = self.out_ch * self.k * self.k;
        let w = init_real_glorot(&[self.out_ch, self.in_ch, self.k, self.k], fan_in, fan_out, rng);
        store.register_real(&format!("{}.W", self.base), w, true)?;
        store.register_real(&format!("{}.bias", self.base), Tensor::zeros(vec![self.out_ch]), true)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = store.bind_real(tape, &format!("{}.W", self.base))?;
        let b = store.bind_real(tape, &format!("{}.bias", self.base))?;
        let y = tape.conv2d(x, w, self.pad, self.stride)?;
        tape.shift_channels(y, b)
    }
}

/// Complex convolution W = A + iB over h = x + iy:
/// out = (Ax - By) + i(Bx + Ay), with a complex bias per output channel.
///
/// The imaginary part is evaluated through the three-product identity
/// (A+B)(x+y) - Ax - By, which shares two products with the real part; the
/// expansion is algebraically identical to the four-product form.
pub struct ComplexConv2d {
    pub base: String,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub pad: usize,
    pub stride: usize,
}

impl ComplexConv2d {
    pub fn new(base: impl Into<String>, in_ch: usize, out_ch: usize, k: usize, pad: usize) -> Result<Self> {
        let base = base.into();
        check_odd_for_same(&base, k, pad)?;
        Ok(ComplexConv2d { base, in_ch, out_ch, k, pad, stride: 1 })
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, scheme: InitScheme, rng: &mut R) -> Result<()> {
        let fan_in = self.in_ch * self.k * self.k;
        let fan_out = self.out_ch * self.k * self.k;
        let (a, b) = init_complex_pair(&[self.out_ch, self.in_ch, self.k, self.k], fan_in, fan_out, scheme, rng);
        store.register_real(&format!("{}.A", self.base), a, true)?;
        store.register_real(&format!("{}.B", self.base), b, true)?;
        store.register_complex(&format!("{}.bias", self.base), ComplexTensor::zeros(vec![self.out_ch]), true)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, h: CVar) -> Result<CVar> {
        let in_ch = tape.value(h.re).dims().get(1).copied().unwrap_or(0);
        if in_ch != self.in_ch {
            return Err(Error::shape(
                "complex_conv_forward",
                format!("{}: input has {} channels, layer expects {}", self.base, in_ch, self.in_ch),
            ));
        }
        let a = store.bind_real(tape, &format!("{}.A", self.base))?;
        let b = store.bind_real(tape, &format!("{}.B", self.base))?;
        let bias = store.bind_complex(tape, &format!("{}.bias", self.base))?;

        let t_re = tape.conv2d(h.re, a, self.pad, self.stride)?; // A x
        let t_im = tape.conv2d(h.im, b, self.pad, self.stride)?; // B y
        let apb = tape.add(a, b)?;
        let xpy = tape.add(h.re, h.im)?;
        let t_mix = tape.conv2d(xpy, apb, self.pad, self.stride)?; // (A+B)(x+y)

        let re = tape.sub(t_re, t_im)?;
        let part = tape.sub(t_mix, t_re)?;
        let im = tape.sub(part, t_im)?;

        Ok(CVar {
            re: tape.shift_channels(re, bias.re)?,
            im: tape.shift_channels(im, bias.im)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn complex_leaf(tape: &mut Tape, re: Tensor, im: Tensor) -> CVar {
        CVar { re: tape.leaf(re), im: tape.leaf(im) }
    }

    fn conv_with_kernel(a: f64, b: f64, re: Tensor, im: Tensor) -> (Tensor, Tensor) {
        let mut store = ParamStore::new();
        let layer = ComplexConv2d::new("l", 1, 1, 1, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        layer.register(&mut store, InitScheme::RayleighPhase, &mut rng).unwrap();
        store.get_mut("l.A").unwrap().value = crate::autograd::Value::Real(Tensor::from_vec(vec![1, 1, 1, 1], vec![a]).unwrap());
        store.get_mut("l.B").unwrap().value = crate::autograd::Value::Real(Tensor::from_vec(vec![1, 1, 1, 1], vec![b]).unwrap());
        let mut tape = Tape::new();
        let h = complex_leaf(&mut tape, re, im);
        let y = layer.forward(&mut tape, &store, h).unwrap();
        (tape.value(y.re).clone(), tape.value(y.im).clone())
    }

    #[test]
    fn one_by_one_identity_kernel() {
        let re = Tensor::from_fn(vec![1, 1, 2, 2], |i| i as f64 - 1.5);
        let im = Tensor::from_fn(vec![1, 1, 2, 2], |i| 0.5 * i as f64);
        let (yr, yi) = conv_with_kernel(1.0, 0.0, re.clone(), im.clone());
        for i in 0..4 {
            assert!((yr.data()[i] - re.data()[i]).abs() < 1e-12);
            assert!((yi.data()[i] - im.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn one_by_one_multiplication_by_i() {
        // A=0, B=1: (x + iy) -> -y + ix
        let re = Tensor::from_fn(vec![1, 1, 2, 2], |i| i as f64 + 1.0);
        let im = Tensor::from_fn(vec![1, 1, 2, 2], |i| 2.0 * i as f64 - 3.0);
        let (yr, yi) = conv_with_kernel(0.0, 1.0, re.clone(), im.clone());
        for i in 0..4 {
            assert!((yr.data()[i] + im.data()[i]).abs() < 1e-12);
            assert!((yi.data()[i] - re.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let mut store = ParamStore::new();
        let layer = ComplexConv2d::new("l", 3, 4, 3, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        layer.register(&mut store, InitScheme::RayleighPhase, &mut rng).unwrap();
        let mut tape = Tape::new();
        let h = complex_leaf(&mut tape, Tensor::zeros(vec![1, 2, 4, 4]), Tensor::zeros(vec![1, 2, 4, 4]));
        assert!(layer.forward(&mut tape, &store, h).is_err());
    }
}
