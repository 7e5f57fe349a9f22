//! Complex batch normalization, in two variants:
//!
//! - per-component: ordinary BN applied independently to the real and
//!   imaginary channels;
//! - covariance: per channel, the (re, im) pair is whitened by the inverse
//!   square root of its 2x2 covariance matrix (regularized by eps*I).
//!
//! Both variants keep per-channel running statistics for inference, updated
//! as `running = momentum * running + (1 - momentum) * batch`.

use serde::{Deserialize, Serialize};

use crate::autograd::{CVar, ParamStore, Tape, Var};
use crate::ctensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum BnMode {
    #[default]
    PerComponent,
    Covariance,
}

pub struct ComplexBatchNorm {
    pub base: String,
    pub channels: usize,
    pub mode: BnMode,
    pub momentum: f64,
    pub eps: f64,
}

impl ComplexBatchNorm {
    pub fn new(base: impl Into<String>, channels: usize, mode: BnMode) -> Self {
        ComplexBatchNorm { base: base.into(), channels, mode, momentum: 0.9, eps: 1e-5 }
    }

    pub fn register(&self, store: &mut ParamStore) -> Result<()> {
        let c = self.channels;
        let name = |leaf: &str| format!("{}.{leaf}", self.base);
        store.register_real(&name("gamma_r"), Tensor::full(vec![c], 1.0), true)?;
        store.register_real(&name("gamma_i"), Tensor::full(vec![c], 1.0), true)?;
        store.register_real(&name("beta_r"), Tensor::zeros(vec![c]), true)?;
        store.register_real(&name("beta_i"), Tensor::zeros(vec![c]), true)?;
        store.register_real(&name("running_mean_r"), Tensor::zeros(vec![c]), false)?;
        store.register_real(&name("running_mean_i"), Tensor::zeros(vec![c]), false)?;
        match self.mode {
            BnMode::PerComponent => {
                store.register_real(&name("running_var_r"), Tensor::full(vec![c], 1.0), false)?;
                store.register_real(&name("running_var_i"), Tensor::full(vec![c], 1.0), false)?;
            }
            BnMode::Covariance => {
                store.register_real(&name("running_vrr"), Tensor::full(vec![c], 1.0), false)?;
                store.register_real(&name("running_vri"), Tensor::zeros(vec![c]), false)?;
                store.register_real(&name("running_vii"), Tensor::full(vec![c], 1.0), false)?;
            }
        }
        Ok(())
    }

    fn check_input(&self, tape: &Tape, x: CVar, training: bool) -> Result<()> {
        let dims = tape.value(x.re).dims().to_vec();
        if dims.len() != 4 || dims[1] != self.channels {
            return Err(Error::shape(
                "complex_bn_forward",
                format!("{}: expected (N,{},H,W), got {dims:?}", self.base, self.channels),
            ));
        }
        if training && dims[0] < 2 {
            return Err(Error::contract(
                "complex_bn_forward",
                format!("{}: training mode needs batch size >= 2, got {}", self.base, dims[0]),
            ));
        }
        Ok(())
    }

    /// Overwrite a running statistic with the momentum-blended batch value.
    fn blend_running(&self, store: &mut ParamStore, leaf: &str, batch: &Tensor) -> Result<()> {
        let p = store.get_mut(&format!("{}.{leaf}", self.base))?;
        let old = p.value.as_real()?;
        let blended = old
            .zip_map(batch, |o, b| self.momentum * o + (1.0 - self.momentum) * b)
            .expect("running stat shape");
        p.value = crate::autograd::Value::Real(blended);
        Ok(())
    }

    pub fn forward(&self, tape: &mut Tape, store: &mut ParamStore, x: CVar, training: bool) -> Result<CVar> {
        self.check_input(tape, x, training)?;
        let name = |leaf: &str| format!("{}.{leaf}", self.base);
        let (xhat_r, xhat_i) = match self.mode {
            BnMode::PerComponent => {
                let (mu_r, var_r) = if training {
                    let mu = tape.mean_channels(x.re)?;
                    let neg = tape.neg(mu);
                    let centered = tape.shift_channels(x.re, neg)?;
                    let sq = tape.square(centered);
                    let var = tape.mean_channels(sq)?;
                    self.blend_running(store, "running_mean_r", tape.value(mu))?;
                    self.blend_running(store, "running_var_r", tape.value(var))?;
                    (mu, var)
                } else {
                    (
                        store.bind_real(tape, &name("running_mean_r"))?,
                        store.bind_real(tape, &name("running_var_r"))?,
                    )
                };
                let (mu_i, var_i) = if training {
                    let mu = tape.mean_channels(x.im)?;
                    let neg = tape.neg(mu);
                    let centered = tape.shift_channels(x.im, neg)?;
                    let sq = tape.square(centered);
                    let var = tape.mean_channels(sq)?;
                    self.blend_running(store, "running_mean_i", tape.value(mu))?;
                    self.blend_running(store, "running_var_i", tape.value(var))?;
                    (mu, var)
                } else {
                    (
                        store.bind_real(tape, &name("running_mean_i"))?,
                        store.bind_real(tape, &name("running_var_i"))?,
                    )
                };
                let norm_part = |tape: &mut Tape, part: Var, mu: Var, var: Var| -> Result<Var> {
                    let neg = tape.neg(mu);
                    let centered = tape.shift_channels(part, neg)?;
                    let shifted = tape.add_const(var, self.eps);
                    let std = tape.sqrt(shifted);
                    let inv = tape.recip(std);
                    tape.scale_channels(centered, inv)
                };
                (
                    norm_part(tape, x.re, mu_r, var_r)?,
                    norm_part(tape, x.im, mu_i, var_i)?,
                )
            }
            BnMode::Covariance => {
                let (mu_r, mu_i, vrr, vri, vii) = if training {
                    let mu_r = tape.mean_channels(x.re)?;
                    let mu_i = tape.mean_channels(x.im)?;
                    let neg_r = tape.neg(mu_r);
                    let neg_i = tape.neg(mu_i);
                    let cr = tape.shift_channels(x.re, neg_r)?;
                    let ci = tape.shift_channels(x.im, neg_i)?;
                    let cr2 = tape.square(cr);
                    let ci2 = tape.square(ci);
                    let cri = tape.mul(cr, ci)?;
                    let vrr = tape.mean_channels(cr2)?;
                    let vii = tape.mean_channels(ci2)?;
                    let vri = tape.mean_channels(cri)?;
                    self.blend_running(store, "running_mean_r", tape.value(mu_r))?;
                    self.blend_running(store, "running_mean_i", tape.value(mu_i))?;
                    self.blend_running(store, "running_vrr", tape.value(vrr))?;
                    self.blend_running(store, "running_vri", tape.value(vri))?;
                    self.blend_running(store, "running_vii", tape.value(vii))?;
                    (mu_r, mu_i, vrr, vri, vii)
                } else {
                    (
                        store.bind_real(tape, &name("running_mean_r"))?,
                        store.bind_real(tape, &name("running_mean_i"))?,
                        store.bind_real(tape, &name("running_vrr"))?,
                        store.bind_real(tape, &name("running_vri"))?,
                        store.bind_real(tape, &name("running_vii"))?,
                    )
                };
                // Closed-form inverse square root of the 2x2 SPD matrix
                // M = V + eps*I: with s = sqrt(det M), t = sqrt(tr M + 2s),
                // M^{-1/2} = [[m22 + s, -m12], [-m12, m11 + s]] / (s * t).
                let m11 = tape.add_const(vrr, self.eps);
                let m22 = tape.add_const(vii, self.eps);
                let m12 = vri;
                let m11m22 = tape.mul(m11, m22)?;
                let m12sq = tape.square(m12);
                let det = tape.sub(m11m22, m12sq)?;
                let s = tape.sqrt(det);
                let tr = tape.add(m11, m22)?;
                let two_s = tape.mul_const(s, 2.0);
                let tr2s = tape.add(tr, two_s)?;
                let t = tape.sqrt(tr2s);
                let st = tape.mul(s, t)?;
                let inv_st = tape.recip(st);
                let m22s = tape.add(m22, s)?;
                let m11s = tape.add(m11, s)?;
                let w11 = tape.mul(m22s, inv_st)?;
                let w22 = tape.mul(m11s, inv_st)?;
                let m12i = tape.mul(m12, inv_st)?;
                let w12 = tape.neg(m12i);

                let neg_r = tape.neg(mu_r);
                let neg_i = tape.neg(mu_i);
                let cr = tape.shift_channels(x.re, neg_r)?;
                let ci = tape.shift_channels(x.im, neg_i)?;
                let r11 = tape.scale_channels(cr, w11)?;
                let r12 = tape.scale_channels(ci, w12)?;
                let i21 = tape.scale_channels(cr, w12)?;
                let i22 = tape.scale_channels(ci, w22)?;
                (tape.add(r11, r12)?, tape.add(i21, i22)?)
            }
        };
        let gamma_r = store.bind_real(tape, &name("gamma_r"))?;
        let gamma_i = store.bind_real(tape, &name("gamma_i"))?;
        let beta_r = store.bind_real(tape, &name("beta_r"))?;
        let beta_i = store.bind_real(tape, &name("beta_i"))?;
        let sr = tape.scale_channels(xhat_r, gamma_r)?;
        let si = tape.scale_channels(xhat_i, gamma_i)?;
        Ok(CVar {
            re: tape.shift_channels(sr, beta_r)?,
            im: tape.shift_channels(si, beta_i)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Value;

    /// Batch with per-channel mean exactly 0 and biased variance exactly 1.
    fn standardized_input(n: usize, c: usize, h: usize, w: usize) -> Tensor {
        salted_standardized_input(n, c, h, w, 0)
    }

    fn salted_standardized_input(n: usize, c: usize, h: usize, w: usize, salt: usize) -> Tensor {
        let plane = h * w;
        let mut data = vec![0.0; n * c * plane];
        // Deterministic pseudo-random fill, then standardize per channel.
        for (i, v) in data.iter_mut().enumerate() {
            *v = ((((i + 131 * salt + 1) * 2654435761) % 1000) as f64) / 250.0 - 2.0;
        }
        for ci in 0..c {
            let mut vals = Vec::new();
            for ni in 0..n {
                let base = (ni * c + ci) * plane;
                vals.extend_from_slice(&data[base..base + plane]);
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
            let s = var.sqrt();
            for ni in 0..n {
                let base = (ni * c + ci) * plane;
                for v in &mut data[base..base + plane] {
                    *v = (*v - m) / s;
                }
            }
        }
        Tensor::from_vec(vec![n, c, h, w], data).unwrap()
    }

    fn bn_fixture(mode: BnMode) -> (ComplexBatchNorm, ParamStore) {
        let bn = ComplexBatchNorm::new("bn", 3, mode);
        let mut store = ParamStore::new();
        bn.register(&mut store).unwrap();
        (bn, store)
    }

    #[test]
    fn standardized_batch_is_a_fixed_point_up_to_eps() {
        let (bn, mut store) = bn_fixture(BnMode::PerComponent);
        let x = standardized_input(4, 3, 4, 4);
        let mut tape = Tape::new();
        let h = CVar { re: tape.leaf(x.clone()), im: tape.leaf(standardized_input(4, 3, 4, 4)) };
        let y = bn.forward(&mut tape, &mut store, h, true).unwrap();
        let factor = 1.0 / (1.0 + bn.eps).sqrt();
        for (o, i) in tape.value(y.re).data().iter().zip(x.data()) {
            assert!((o - i * factor).abs() < 1e-9, "{o} vs {}", i * factor);
        }
    }

    #[test]
    fn constant_batch_collapses_to_beta() {
        let (bn, mut store) = bn_fixture(BnMode::PerComponent);
        store.get_mut("bn.beta_r").unwrap().value = Value::Real(Tensor::full(vec![3], 0.25));
        store.get_mut("bn.beta_i").unwrap().value = Value::Real(Tensor::full(vec![3], -1.5));
        let mut tape = Tape::new();
        let h = CVar {
            re: tape.leaf(Tensor::full(vec![2, 3, 2, 2], 7.0)),
            im: tape.leaf(Tensor::full(vec![2, 3, 2, 2], -4.0)),
        };
        let y = bn.forward(&mut tape, &mut store, h, true).unwrap();
        assert!(tape.value(y.re).data().iter().all(|v| (v - 0.25).abs() < 1e-12));
        assert!(tape.value(y.im).data().iter().all(|v| (v + 1.5).abs() < 1e-12));
    }

    #[test]
    fn batch_of_one_is_rejected_in_training() {
        let (bn, mut store) = bn_fixture(BnMode::PerComponent);
        let mut tape = Tape::new();
        let h = CVar {
            re: tape.leaf(Tensor::zeros(vec![1, 3, 2, 2])),
            im: tape.leaf(Tensor::zeros(vec![1, 3, 2, 2])),
        };
        assert!(bn.forward(&mut tape, &mut store, h, true).is_err());
        // Inference mode accepts a single sample.
        let h2 = CVar {
            re: tape.leaf(Tensor::zeros(vec![1, 3, 2, 2])),
            im: tape.leaf(Tensor::zeros(vec![1, 3, 2, 2])),
        };
        assert!(bn.forward(&mut tape, &mut store, h2, false).is_ok());
    }

    #[test]
    fn covariance_mode_whitens_to_identity() {
        let (bn, mut store) = bn_fixture(BnMode::Covariance);
        // Correlated parts with large variance so the eps*I regularizer is
        // negligible against the batch covariance.
        let n = 8;
        let base_r = salted_standardized_input(n, 3, 4, 4, 1);
        let base_i = salted_standardized_input(n, 3, 4, 4, 2);
        let re = base_r.scale(20.0);
        let im = base_r
            .zip_map(&base_i, |r, i| 8.0 * r + 12.0 * i)
            .unwrap();
        let mut tape = Tape::new();
        let h = CVar { re: tape.leaf(re), im: tape.leaf(im) };
        let y = bn.forward(&mut tape, &mut store, h, true).unwrap();
        let (yr, yi) = (tape.value(y.re), tape.value(y.im));
        let plane = 16;
        for c in 0..3 {
            let (mut srr, mut sri, mut sii, mut mr, mut mi) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let mut count = 0.0;
            for ni in 0..n {
                let b = (ni * 3 + c) * plane;
                for k in 0..plane {
                    mr += yr.data()[b + k];
                    mi += yi.data()[b + k];
                    count += 1.0;
                }
            }
            mr /= count;
            mi /= count;
            for ni in 0..n {
                let b = (ni * 3 + c) * plane;
                for k in 0..plane {
                    let (r, i) = (yr.data()[b + k] - mr, yi.data()[b + k] - mi);
                    srr += r * r;
                    sri += r * i;
                    sii += i * i;
                }
            }
            srr /= count;
            sri /= count;
            sii /= count;
            assert!((srr - 1.0).abs() < 1e-6, "channel {c}: vrr {srr}");
            assert!((sii - 1.0).abs() < 1e-6, "channel {c}: vii {sii}");
            assert!(sri.abs() < 1e-6, "channel {c}: vri {sri}");
        }
    }

    #[test]
    fn inference_uses_running_stats() {
        let (mut bn, mut store) = bn_fixture(BnMode::PerComponent);
        bn.momentum = 0.0; // adopt the batch statistics wholesale
        let x_re = standardized_input(4, 3, 4, 4).scale(3.0);
        let x_im = standardized_input(4, 3, 4, 4).scale(0.5);
        let mut tape = Tape::new();
        let h = CVar { re: tape.leaf(x_re.clone()), im: tape.leaf(x_im.clone()) };
        let y_train = bn.forward(&mut tape, &mut store, h, true).unwrap();
        let h2 = CVar { re: tape.leaf(x_re), im: tape.leaf(x_im) };
        let y_inf = bn.forward(&mut tape, &mut store, h2, false).unwrap();
        for (a, b) in tape.value(y_train.re).data().iter().zip(tape.value(y_inf.re).data()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in tape.value(y_train.im).data().iter().zip(tape.value(y_inf.im).data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
