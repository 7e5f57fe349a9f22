//! Real and complex fully-connected layers.

use rand::Rng;

use crate::autograd::{CVar, ParamStore, Tape, Var};
use crate::ctensor::{ComplexTensor, Tensor};
use crate::error::{Error, Result};

use super::init::{init_complex_pair, init_real_glorot, InitScheme};

pub struct RealLinear {
    pub base: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl RealLinear {
    pub fn new(base: impl Into<String>, in_dim: usize, out_dim: usize) -> Self {
        RealLinear { base: base.into(), in_dim, out_dim }
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        let w = init_real_glorot(&[self.out_dim, self.in_dim], self.in_dim, self.out_dim, rng);
        store.register_real(&format!("{}.W", self.base), w, true)?;
        store.register_real(&format!("{}.bias", self.base), Tensor::zeros(vec![self.out_dim]), true)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = store.bind_real(tape, &format!("{}.W", self.base))?;
        let b = store.bind_real(tape, &format!("{}.bias", self.base))?;
        let y = tape.linear(x, w)?;
        tape.add_bias_row(y, b)
    }
}

/// Complex fully connected: the matrix form of the complex convolution rule,
/// (Ax - By) + i(Bx + Ay), with a complex bias.
pub struct ComplexLinear {
    pub base: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl ComplexLinear {
    pub fn new(base: impl Into<String>, in_dim: usize, out_dim: usize) -> Self {
        ComplexLinear { base: base.into(), in_dim, out_dim }
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, scheme: InitScheme, rng: &mut R) -> Result<()> {
        let (a, b) = init_complex_pair(&[self.out_dim, self.in_dim], self.in_dim, self.out_dim, scheme, rng);
        store.register_real(&format!("{}.A", self.base), a, true)?;
        store.register_real(&format!("{}.B", self.base), b, true)?;
        store.register_complex(&format!("{}.bias", self.base), ComplexTensor::zeros(vec![self.out_dim]), true)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, h: CVar) -> Result<CVar> {
        let in_dim = tape.value(h.re).dims().get(1).copied().unwrap_or(0);
        if in_dim != self.in_dim {
            return Err(Error::shape(
                "complex_fc_forward",
                format!("{}: input dim {}, layer expects {}", self.base, in_dim, self.in_dim),
            ));
        }
        let a = store.bind_real(tape, &format!("{}.A", self.base))?;
        let b = store.bind_real(tape, &format!("{}.B", self.base))?;
        let bias = store.bind_complex(tape, &format!("{}.bias", self.base))?;

        let t_re = tape.linear(h.re, a)?;
        let t_im = tape.linear(h.im, b)?;
        let apb = tape.add(a, b)?;
        let xpy = tape.add(h.re, h.im)?;
        let t_mix = tape.linear(xpy, apb)?;

        let re = tape.sub(t_re, t_im)?;
        let part = tape.sub(t_mix, t_re)?;
        let im = tape.sub(part, t_im)?;

        Ok(CVar {
            re: tape.add_bias_row(re, bias.re)?,
            im: tape.add_bias_row(im, bias.im)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Value;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn set_real(store: &mut ParamStore, name: &str, dims: Vec<usize>, data: Vec<f64>) {
        store.get_mut(name).unwrap().value = Value::Real(Tensor::from_vec(dims, data).unwrap());
    }

    fn run_fc(a: Vec<f64>, b: Vec<f64>, xr: Vec<f64>, xi: Vec<f64>, d: usize) -> (Vec<f64>, Vec<f64>) {
        let mut store = ParamStore::new();
        let layer = ComplexLinear::new("fc", d, d);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        layer.register(&mut store, InitScheme::GlorotUniform, &mut rng).unwrap();
        set_real(&mut store, "fc.A", vec![d, d], a);
        set_real(&mut store, "fc.B", vec![d, d], b);
        let mut tape = Tape::new();
        let h = CVar {
            re: tape.leaf(Tensor::from_vec(vec![1, d], xr).unwrap()),
            im: tape.leaf(Tensor::from_vec(vec![1, d], xi).unwrap()),
        };
        let y = layer.forward(&mut tape, &store, h).unwrap();
        (tape.value(y.re).data().to_vec(), tape.value(y.im).data().to_vec())
    }

    #[test]
    fn identity_matrix_passes_through() {
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        let zero = vec![0.0; 4];
        let (yr, yi) = run_fc(eye, zero, vec![2.0, -3.0], vec![0.5, 1.5], 2);
        assert!((yr[0] - 2.0).abs() < 1e-12 && (yr[1] + 3.0).abs() < 1e-12);
        assert!((yi[0] - 0.5).abs() < 1e-12 && (yi[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn b_identity_rotates_by_i() {
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        let zero = vec![0.0; 4];
        let (yr, yi) = run_fc(zero, eye, vec![2.0, -3.0], vec![0.5, 1.5], 2);
        // i * (x + iy) = -y + ix
        assert!((yr[0] + 0.5).abs() < 1e-12 && (yr[1] + 1.5).abs() < 1e-12);
        assert!((yi[0] - 2.0).abs() < 1e-12 && (yi[1] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let mut store = ParamStore::new();
        let layer = ComplexLinear::new("fc", 4, 3);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        layer.register(&mut store, InitScheme::GlorotUniform, &mut rng).unwrap();
        let mut tape = Tape::new();
        let h = CVar {
            re: tape.leaf(Tensor::zeros(vec![2, 5])),
            im: tape.leaf(Tensor::zeros(vec![2, 5])),
        };
        assert!(layer.forward(&mut tape, &store, h).is_err());
    }
}
