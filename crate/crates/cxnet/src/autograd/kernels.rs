//! Dense compute kernels behind the tape operations: GEMM-backed convolution
//! (im2col), max-pooling, and the fully-connected products.
//!
//! Parallel reductions use a fixed chunk count so results are bit-identical
//! regardless of how many worker threads rayon happens to use.

use rayon::prelude::*;

use crate::ctensor::Tensor;
use crate::error::{Error, Result};

/// Fixed partition width for deterministic parallel accumulation.
const REDUCE_CHUNKS: usize = 8;

/// C = alpha * op(A) * op(B) + beta * C with row-major buffers.
#[allow(clippy::too_many_arguments)]
fn dgemm_strided(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// C (m,n) = A (m,k) * B (k,n) [+ C if beta=1]
pub(crate) fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    dgemm_strided(m, k, n, a, k as isize, 1, b, n as isize, 1, beta, c);
}

/// C (m,n) = A (m,k) * B^T where B is (n,k) row-major
pub(crate) fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    dgemm_strided(m, k, n, a, k as isize, 1, b, 1, k as isize, beta, c);
}

/// C (m,n) = A^T * B where A is (k,m) row-major and B is (k,n) row-major
pub(crate) fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    dgemm_strided(m, k, n, a, 1, m as isize, b, n as isize, 1, beta, c);
}

/// Output spatial size for one axis.
fn conv_out(len: usize, k: usize, pad: usize, stride: usize) -> Result<usize> {
    let padded = len + 2 * pad;
    if padded < k {
        return Err(Error::shape("conv2d", format!("kernel {k} exceeds padded extent {padded}")));
    }
    Ok((padded - k) / stride + 1)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad: usize,
    pub stride: usize,
    pub ho: usize,
    pub wo: usize,
}

pub(crate) fn conv_geometry(x: &Tensor, weight: &Tensor, pad: usize, stride: usize) -> Result<ConvGeom> {
    let xd = x.dims();
    let wd = weight.dims();
    if xd.len() != 4 || wd.len() != 4 {
        return Err(Error::shape("conv2d", format!("expected NCHW input and OIHW kernel, got {xd:?} / {wd:?}")));
    }
    if xd[1] != wd[1] {
        return Err(Error::shape("conv2d", format!("input channels {} != kernel channels {}", xd[1], wd[1])));
    }
    if stride == 0 {
        return Err(Error::contract("conv2d", "stride must be >= 1"));
    }
    Ok(ConvGeom {
        n: xd[0],
        cin: xd[1],
        h: xd[2],
        w: xd[3],
        cout: wd[0],
        kh: wd[2],
        kw: wd[3],
        pad,
        stride,
        ho: conv_out(xd[2], wd[2], pad, stride)?,
        wo: conv_out(xd[3], wd[3], pad, stride)?,
    })
}

/// Expand one sample into column form: rows indexed by (cin, kh, kw), columns
/// by output position. `cols` must be zero-filled (padding regions stay zero).
fn im2col(g: &ConvGeom, x: &[f64], cols: &mut [f64]) {
    let owo = g.ho * g.wo;
    for ci in 0..g.cin {
        let xc = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for kh in 0..g.kh {
            for kw in 0..g.kw {
                let row = (ci * g.kh + kh) * g.kw + kw;
                let dst_row = &mut cols[row * owo..(row + 1) * owo];
                for ho in 0..g.ho {
                    let hi = (ho * g.stride + kh) as isize - g.pad as isize;
                    if hi < 0 || hi >= g.h as isize {
                        continue;
                    }
                    let hi = hi as usize;
                    if g.stride == 1 {
                        // valid wo range: 0 <= wo + kw - pad < w
                        let lo = g.pad.saturating_sub(kw);
                        let hi_w = (g.w + g.pad - kw).min(g.wo);
                        if lo < hi_w {
                            let src = &xc[hi * g.w + lo + kw - g.pad..hi * g.w + hi_w + kw - g.pad];
                            dst_row[ho * g.wo + lo..ho * g.wo + hi_w].copy_from_slice(src);
                        }
                    } else {
                        for wo in 0..g.wo {
                            let wi = (wo * g.stride + kw) as isize - g.pad as isize;
                            if wi >= 0 && wi < g.w as isize {
                                dst_row[ho * g.wo + wo] = xc[hi * g.w + wi as usize];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add the column form back onto an input-shaped buffer.
fn col2im(g: &ConvGeom, cols: &[f64], x: &mut [f64]) {
    let owo = g.ho * g.wo;
    for ci in 0..g.cin {
        let xc = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for kh in 0..g.kh {
            for kw in 0..g.kw {
                let row = (ci * g.kh + kh) * g.kw + kw;
                let src_row = &cols[row * owo..(row + 1) * owo];
                for ho in 0..g.ho {
                    let hi = (ho * g.stride + kh) as isize - g.pad as isize;
                    if hi < 0 || hi >= g.h as isize {
                        continue;
                    }
                    let hi = hi as usize;
                    for wo in 0..g.wo {
                        let wi = (wo * g.stride + kw) as isize - g.pad as isize;
                        if wi >= 0 && wi < g.w as isize {
                            xc[hi * g.w + wi as usize] += src_row[ho * g.wo + wo];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation (no kernel flip) of NCHW input with OIHW kernel.
pub(crate) fn conv2d_forward(x: &Tensor, weight: &Tensor, pad: usize, stride: usize) -> Result<Tensor> {
    let g = conv_geometry(x, weight, pad, stride)?;
    let kk = g.cin * g.kh * g.kw;
    let owo = g.ho * g.wo;
    let mut out = vec![0.0; g.n * g.cout * owo];
    let xs = x.data();
    let ws = weight.data();
    out.par_chunks_mut(g.cout * owo).enumerate().for_each(|(n, out_n)| {
        let mut cols = vec![0.0; kk * owo];
        im2col(&g, &xs[n * g.cin * g.h * g.w..(n + 1) * g.cin * g.h * g.w], &mut cols);
        gemm_nn(g.cout, kk, owo, ws, &cols, 0.0, out_n);
    });
    Tensor::from_vec(vec![g.n, g.cout, g.ho, g.wo], out)
}

/// Gradient with respect to the input.
pub(crate) fn conv2d_grad_x(grad_out: &Tensor, weight: &Tensor, g: &ConvGeom) -> Tensor {
    let kk = g.cin * g.kh * g.kw;
    let owo = g.ho * g.wo;
    let mut gx = vec![0.0; g.n * g.cin * g.h * g.w];
    let gs = grad_out.data();
    let ws = weight.data();
    gx.par_chunks_mut(g.cin * g.h * g.w).enumerate().for_each(|(n, gx_n)| {
        let mut gcols = vec![0.0; kk * owo];
        gemm_tn(kk, g.cout, owo, ws, &gs[n * g.cout * owo..(n + 1) * g.cout * owo], 0.0, &mut gcols);
        col2im(&g.clone(), &gcols, gx_n);
    });
    Tensor::from_vec(vec![g.n, g.cin, g.h, g.w], gx).expect("conv grad shape")
}

/// Gradient with respect to the kernel, accumulated deterministically.
pub(crate) fn conv2d_grad_w(x: &Tensor, grad_out: &Tensor, g: &ConvGeom) -> Tensor {
    let kk = g.cin * g.kh * g.kw;
    let owo = g.ho * g.wo;
    let xs = x.data();
    let gs = grad_out.data();
    let chunk = g.n.div_ceil(REDUCE_CHUNKS).max(1);
    let partials: Vec<Vec<f64>> = (0..g.n)
        .collect::<Vec<_>>()
        .par_chunks(chunk)
        .map(|samples| {
            let mut gw = vec![0.0; g.cout * kk];
            let mut cols = vec![0.0; kk * owo];
            for &n in samples {
                cols.iter_mut().for_each(|v| *v = 0.0);
                im2col(&g.clone(), &xs[n * g.cin * g.h * g.w..(n + 1) * g.cin * g.h * g.w], &mut cols);
                gemm_nt(g.cout, owo, kk, &gs[n * g.cout * owo..(n + 1) * g.cout * owo], &cols, 1.0, &mut gw);
            }
            gw
        })
        .collect();
    let mut gw = vec![0.0; g.cout * kk];
    for p in partials {
        for (d, s) in gw.iter_mut().zip(p) {
            *d += s;
        }
    }
    Tensor::from_vec(vec![g.cout, g.cin, g.kh, g.kw], gw).expect("conv grad_w shape")
}

/// 2x2 stride-2 max pooling; returns the pooled map and the flat index of
/// each selected element (first maximal position in row-major window order).
pub(crate) fn maxpool2_forward(x: &Tensor) -> Result<(Tensor, Vec<u32>)> {
    let d = x.dims();
    if d.len() != 4 {
        return Err(Error::shape("maxpool2", format!("expected NCHW, got {d:?}")));
    }
    let (n, c, h, w) = (d[0], d[1], d[2], d[3]);
    if h < 2 || w < 2 {
        return Err(Error::shape("maxpool2", format!("window 2x2 larger than map {h}x{w}")));
    }
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape("maxpool2", format!("spatial dims {h}x{w} not divisible by 2")));
    }
    let (ho, wo) = (h / 2, w / 2);
    let xs = x.data();
    let mut out = vec![0.0; n * c * ho * wo];
    let mut arg = vec![0u32; n * c * ho * wo];
    out.par_chunks_mut(ho * wo)
        .zip(arg.par_chunks_mut(ho * wo))
        .enumerate()
        .for_each(|(plane, (out_p, arg_p))| {
            let base = plane * h * w;
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut best_idx = base + (2 * oh) * w + 2 * ow;
                    let mut best = xs[best_idx];
                    for (dh, dw) in [(0usize, 1usize), (1, 0), (1, 1)] {
                        let idx = base + (2 * oh + dh) * w + 2 * ow + dw;
                        if xs[idx] > best {
                            best = xs[idx];
                            best_idx = idx;
                        }
                    }
                    out_p[oh * wo + ow] = best;
                    arg_p[oh * wo + ow] = best_idx as u32;
                }
            }
        });
    Ok((Tensor::from_vec(vec![n, c, ho, wo], out)?, arg))
}

pub(crate) fn maxpool2_backward(grad_out: &Tensor, arg: &[u32], in_dims: &[usize]) -> Tensor {
    let mut gx = vec![0.0; in_dims.iter().product()];
    for (g, &idx) in grad_out.data().iter().zip(arg.iter()) {
        gx[idx as usize] += g;
    }
    Tensor::from_vec(in_dims.to_vec(), gx).expect("pool grad shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_small_identity() {
        // A = [[1,2],[3,4]], B = I
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![1.0, 0.0, 0.0, 1.0];
        let mut c = vec![0.0; 4];
        gemm_nn(2, 2, 2, &a, &b, 0.0, &mut c);
        assert_eq!(c, a);
        let mut ct = vec![0.0; 4];
        gemm_nt(2, 2, 2, &a, &b, 0.0, &mut ct);
        assert_eq!(ct, a);
    }

    #[test]
    fn conv_identity_kernel() {
        let x = Tensor::from_fn(vec![1, 1, 3, 3], |i| i as f64);
        let w = Tensor::from_vec(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let y = conv2d_forward(&x, &w, 0, 1).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_same_padding_shape() {
        let x = Tensor::zeros(vec![2, 3, 8, 8]);
        let w = Tensor::zeros(vec![5, 3, 3, 3]);
        let y = conv2d_forward(&x, &w, 1, 1).unwrap();
        assert_eq!(y.dims(), &[2, 5, 8, 8]);
    }

    #[test]
    fn conv_channel_mismatch_errors() {
        let x = Tensor::zeros(vec![1, 3, 4, 4]);
        let w = Tensor::zeros(vec![2, 4, 3, 3]);
        assert!(conv2d_forward(&x, &w, 1, 1).is_err());
    }

    #[test]
    fn pool_picks_first_max_and_routes() {
        // Window values 4,4,1,1: first max (row-major) must win.
        let x = Tensor::from_vec(vec![1, 1, 2, 2], vec![4.0, 4.0, 1.0, 1.0]).unwrap();
        let (y, arg) = maxpool2_forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(arg, vec![0]);
        let g = Tensor::from_vec(vec![1, 1, 1, 1], vec![2.0]).unwrap();
        let gx = maxpool2_backward(&g, &arg, &[1, 1, 2, 2]);
        assert_eq!(gx.data(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pool_rejects_bad_dims() {
        assert!(maxpool2_forward(&Tensor::zeros(vec![1, 1, 1, 4])).is_err());
        assert!(maxpool2_forward(&Tensor::zeros(vec![1, 1, 3, 4])).is_err());
    }
}
