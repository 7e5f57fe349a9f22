//! Unnormalized 2D discrete Fourier transform over the spatial axes of an
//! NCHW tensor, one transform per (sample, channel) plane.
//!
//! Power-of-two lengths use an iterative radix-2 FFT; other lengths fall back
//! to a table-driven O(n^2) transform. No normalization factor is applied in
//! either direction, so `sum(|F|^2) = H*W * sum(x^2)` (Parseval).

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::complex::ComplexTensor;
use super::tensor::Tensor;

/// Plan for one 1D transform length. `sign = -1` is the forward convention.
struct Plan {
    n: usize,
    sign: f64,
    // e^{sign * 2*pi*i * j / n} for j in 0..n
    tw_re: Vec<f64>,
    tw_im: Vec<f64>,
    bitrev: Option<Vec<usize>>,
}

impl Plan {
    fn new(n: usize, sign: f64) -> Plan {
        let step = sign * 2.0 * std::f64::consts::PI / n as f64;
        let tw_re = (0..n).map(|j| (step * j as f64).cos()).collect();
        let tw_im = (0..n).map(|j| (step * j as f64).sin()).collect();
        let bitrev = if n.is_power_of_two() && n > 1 {
            let bits = n.trailing_zeros();
            Some((0..n).map(|i| (i.reverse_bits() >> (usize::BITS - bits)) as usize).collect())
        } else {
            None
        };
        Plan { n, sign, tw_re, tw_im, bitrev }
    }

    fn run(&self, re: &mut [f64], im: &mut [f64]) {
        debug_assert_eq!(re.len(), self.n);
        if self.n == 1 {
            return;
        }
        match &self.bitrev {
            Some(rev) => self.radix2(re, im, rev),
            None => self.naive(re, im),
        }
    }

    fn radix2(&self, re: &mut [f64], im: &mut [f64], rev: &[usize]) {
        let n = self.n;
        for i in 0..n {
            let j = rev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let (wr, wi) = (self.tw_re[k * stride], self.tw_im[k * stride]);
                    let (i, j) = (start + k, start + k + half);
                    let tr = wr * re[j] - wi * im[j];
                    let ti = wr * im[j] + wi * re[j];
                    re[j] = re[i] - tr;
                    im[j] = im[i] - ti;
                    re[i] += tr;
                    im[i] += ti;
                }
            }
            len *= 2;
        }
        let _ = self.sign;
    }

    fn naive(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        let mut out_re = vec![0.0; n];
        let mut out_im = vec![0.0; n];
        for (k, (or, oi)) in out_re.iter_mut().zip(out_im.iter_mut()).enumerate() {
            let mut sr = 0.0;
            let mut si = 0.0;
            for j in 0..n {
                let idx = (k * j) % n;
                let (wr, wi) = (self.tw_re[idx], self.tw_im[idx]);
                sr += re[j] * wr - im[j] * wi;
                si += re[j] * wi + im[j] * wr;
            }
            *or = sr;
            *oi = si;
        }
        re.copy_from_slice(&out_re);
        im.copy_from_slice(&out_im);
    }
}

/// Transform every H x W plane of a planar complex buffer, in place.
fn transform_planes(re: &mut [f64], im: &mut [f64], planes: usize, h: usize, w: usize, sign: f64) {
    let row_plan = Plan::new(w, sign);
    let col_plan = Plan::new(h, sign);
    let plane = h * w;
    re.par_chunks_mut(plane)
        .zip(im.par_chunks_mut(plane))
        .for_each(|(pre, pim)| {
            for r in 0..h {
                row_plan.run(&mut pre[r * w..(r + 1) * w], &mut pim[r * w..(r + 1) * w]);
            }
            let mut cr = vec![0.0; h];
            let mut ci = vec![0.0; h];
            for c in 0..w {
                for r in 0..h {
                    cr[r] = pre[r * w + c];
                    ci[r] = pim[r * w + c];
                }
                col_plan.run(&mut cr, &mut ci);
                for r in 0..h {
                    pre[r * w + c] = cr[r];
                    pim[r * w + c] = ci[r];
                }
            }
        });
    debug_assert_eq!(planes * plane, re.len());
}

fn spatial_dims(op: &'static str, dims: &[usize]) -> Result<(usize, usize, usize)> {
    if dims.len() != 4 {
        return Err(Error::shape(op, format!("expected NCHW, got {dims:?}")));
    }
    Ok((dims[0] * dims[1], dims[2], dims[3]))
}

/// Per-channel unnormalized forward 2D DFT of a real NCHW tensor.
pub fn dft2d(x: &Tensor) -> Result<ComplexTensor> {
    let (planes, h, w) = spatial_dims("dft2d", x.dims())?;
    let mut re = x.data().to_vec();
    let mut im = vec![0.0; re.len()];
    transform_planes(&mut re, &mut im, planes, h, w, -1.0);
    ComplexTensor::new(
        Tensor::from_vec(x.dims().to_vec(), re)?,
        Tensor::from_vec(x.dims().to_vec(), im)?,
    )
}

/// Adjoint of [`dft2d`] as a real-linear map: given upstream gradients for the
/// real and imaginary outputs, returns the gradient with respect to the real
/// input. Equals the real part of the conjugate-sign transform of `g`.
pub(crate) fn dft2d_adjoint(g_re: &Tensor, g_im: &Tensor) -> Result<Tensor> {
    if g_re.shape() != g_im.shape() {
        return Err(Error::shape("dft2d_adjoint", "gradient parts differ in shape"));
    }
    let (planes, h, w) = spatial_dims("dft2d_adjoint", g_re.dims())?;
    let mut re = g_re.data().to_vec();
    let mut im = g_im.data().to_vec();
    transform_planes(&mut re, &mut im, planes, h, w, 1.0);
    Tensor::from_vec(g_re.dims().to_vec(), re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_is_dc_only() {
        let c = 2.5;
        let x = Tensor::full(vec![1, 1, 2, 2], c);
        let f = dft2d(&x).unwrap();
        assert!((f.re().data()[0] - 4.0 * c).abs() < 1e-12);
        for i in 1..4 {
            assert!(f.re().data()[i].abs() < 1e-12);
        }
        for i in 0..4 {
            assert!(f.im().data()[i].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_map_transforms_to_zero() {
        let x = Tensor::zeros(vec![2, 3, 4, 4]);
        let f = dft2d(&x).unwrap();
        assert!(f.re().data().iter().all(|&v| v == 0.0));
        assert!(f.im().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_nchw() {
        assert!(dft2d(&Tensor::zeros(vec![4, 4])).is_err());
    }

    #[test]
    fn single_frequency_round_trip_structure() {
        // x[h,w] = cos(2*pi*h/H) has energy only in bins (1,0) and (H-1,0).
        let (h, w) = (8, 8);
        let x = Tensor::from_fn(vec![1, 1, h, w], |i| {
            let row = i / w;
            (2.0 * std::f64::consts::PI * row as f64 / h as f64).cos()
        });
        let f = dft2d(&x).unwrap();
        let hw = (h * w) as f64;
        let energy: f64 = f
            .re()
            .data()
            .iter()
            .zip(f.im().data())
            .map(|(r, i)| r * r + i * i)
            .sum();
        let input_energy: f64 = x.data().iter().map(|v| v * v).sum();
        assert!((energy - hw * input_energy).abs() / (hw * input_energy) < 1e-12);
        let bin = |r: usize, c: usize| f.re().data()[r * w + c];
        assert!(bin(1, 0) > 1.0);
        assert!(bin(7, 0) > 1.0);
        assert!(bin(0, 0).abs() < 1e-9);
    }
}
