//! Independent reference implementations used to check the production code
//! paths. These deliberately use direct loops and per-candidate recounting
//! rather than the optimized algorithms they verify.

use crate::ctensor::{ComplexTensor, Tensor};
use crate::error::Result;
use crate::objectives::Polarity;

/// O(H^2 W^2) double-loop 2D DFT, one plane at a time.
pub fn naive_dft2d(x: &Tensor) -> Result<ComplexTensor> {
    let d = x.dims();
    assert_eq!(d.len(), 4, "naive_dft2d expects NCHW");
    let (planes, h, w) = (d[0] * d[1], d[2], d[3]);
    let mut re = vec![0.0; x.numel()];
    let mut im = vec![0.0; x.numel()];
    for p in 0..planes {
        let base = p * h * w;
        for u in 0..h {
            for v in 0..w {
                let mut sr = 0.0;
                let mut si = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        let angle = -2.0
                            * std::f64::consts::PI
                            * ((u * y) as f64 / h as f64 + (v * xx) as f64 / w as f64);
                        let val = x.data()[base + y * w + xx];
                        sr += val * angle.cos();
                        si += val * angle.sin();
                    }
                }
                re[base + u * w + v] = sr;
                im[base + u * w + v] = si;
            }
        }
    }
    ComplexTensor::new(
        Tensor::from_vec(d.to_vec(), re)?,
        Tensor::from_vec(d.to_vec(), im)?,
    )
}

/// Direct-loop real cross-correlation.
pub fn naive_real_conv(x: &Tensor, w: &Tensor, pad: usize, stride: usize) -> Result<Tensor> {
    let xd = x.dims();
    let wd = w.dims();
    let (n, cin, h, ww) = (xd[0], xd[1], xd[2], xd[3]);
    let (cout, kh, kw) = (wd[0], wd[2], wd[3]);
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (ww + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * cout * ho * wo];
    for ni in 0..n {
        for co in 0..cout {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= ww as isize {
                                    continue;
                                }
                                let xv = x.data()[((ni * cin + ci) * h + iy as usize) * ww + ix as usize];
                                let wv = w.data()[((co * cin + ci) * kh + ky) * kw + kx];
                                acc += xv * wv;
                            }
                        }
                    }
                    out[((ni * cout + co) * ho + oy) * wo + ox] = acc;
                }
            }
        }
    }
    Tensor::from_vec(vec![n, cout, ho, wo], out)
}

/// Scalar complex multiply-accumulate convolution: every output coordinate
/// accumulates (A + iB)(x + iy) products one tap at a time.
pub fn naive_complex_conv(
    h_re: &Tensor,
    h_im: &Tensor,
    a: &Tensor,
    b: &Tensor,
    pad: usize,
) -> Result<(Tensor, Tensor)> {
    let xd = h_re.dims();
    let wd = a.dims();
    let (n, cin, h, w) = (xd[0], xd[1], xd[2], xd[3]);
    let (cout, kh, kw) = (wd[0], wd[2], wd[3]);
    let ho = h + 2 * pad - kh + 1;
    let wo = w + 2 * pad - kw + 1;
    let mut out_re = vec![0.0; n * cout * ho * wo];
    let mut out_im = vec![0.0; n * cout * ho * wo];
    for ni in 0..n {
        for co in 0..cout {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc_re = 0.0;
                    let mut acc_im = 0.0;
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy + ky) as isize - pad as isize;
                                let ix = (ox + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let xi = ((ni * cin + ci) * h + iy as usize) * w + ix as usize;
                                let wi = ((co * cin + ci) * kh + ky) * kw + kx;
                                let (xr, xim) = (h_re.data()[xi], h_im.data()[xi]);
                                let (ar, br) = (a.data()[wi], b.data()[wi]);
                                // (ar + i br)(xr + i xim)
                                acc_re += ar * xr - br * xim;
                                acc_im += br * xr + ar * xim;
                            }
                        }
                    }
                    let oi = ((ni * cout + co) * ho + oy) * wo + ox;
                    out_re[oi] = acc_re;
                    out_im[oi] = acc_im;
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(vec![n, cout, ho, wo], out_re)?,
        Tensor::from_vec(vec![n, cout, ho, wo], out_im)?,
    ))
}

/// Brute-force FPR95: enumerate every candidate cut (each distinct score,
/// positives-first within a tie group), recount TP/FP from scratch, and take
/// the loosest feasible cut.
pub fn brute_fpr95(scores: &[f64], labels: &[bool], polarity: Polarity) -> f64 {
    let eff: Vec<f64> = scores
        .iter()
        .map(|&s| match polarity {
            Polarity::HigherIsMatch => s,
            Polarity::LowerIsMatch => -s,
        })
        .collect();
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    let mut thresholds: Vec<f64> = eff.clone();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    for &t in &thresholds {
        // TPR can only cross 95% on a positive, and positives sort before
        // negatives at equal scores, so the deciding cut is always "every
        // item above t plus the positives at t".
        let tp: usize = (0..labels.len()).filter(|&i| labels[i] && eff[i] >= t).count();
        if 20 * tp >= 19 * pos {
            let fp: usize = (0..labels.len()).filter(|&i| !labels[i] && eff[i] > t).count();
            return fp as f64 / neg as f64;
        }
    }
    1.0
}

/// Per-channel 2x2 sample covariance of the (re, im) pair over (N, H, W).
pub fn channel_covariance(re: &Tensor, im: &Tensor) -> Vec<(f64, f64, f64)> {
    let d = re.dims();
    let (n, c, plane) = (d[0], d[1], d[2] * d[3]);
    let mut out = Vec::with_capacity(c);
    for ci in 0..c {
        let mut vals_r = Vec::with_capacity(n * plane);
        let mut vals_i = Vec::with_capacity(n * plane);
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            vals_r.extend_from_slice(&re.data()[base..base + plane]);
            vals_i.extend_from_slice(&im.data()[base..base + plane]);
        }
        let count = vals_r.len() as f64;
        let mr = vals_r.iter().sum::<f64>() / count;
        let mi = vals_i.iter().sum::<f64>() / count;
        let mut vrr = 0.0;
        let mut vri = 0.0;
        let mut vii = 0.0;
        for (r, i) in vals_r.iter().zip(&vals_i) {
            vrr += (r - mr) * (r - mr);
            vri += (r - mr) * (i - mi);
            vii += (i - mi) * (i - mi);
        }
        out.push((vrr / count, vri / count, vii / count));
    }
    out
}
