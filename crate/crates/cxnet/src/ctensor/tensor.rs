//! Dense real tensor with shared, immutable storage.
//!
//! All public operations produce new tensors; storage is behind an `Arc`, so
//! clones are cheap and values are safe to share across threads.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Elementwise work below this size is not worth a thread hand-off.
const PAR_THRESHOLD: usize = 1 << 16;

/// Ordered list of dimensions. Every dimension is at least 1; rank 0 denotes
/// a scalar (one element).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::shape("Shape::new", format!("zero dim in {dims:?}")));
        }
        let mut prod: usize = 1;
        for &d in &dims {
            prod = prod
                .checked_mul(d)
                .ok_or_else(|| Error::shape("Shape::new", format!("overflow in {dims:?}")))?;
        }
        Ok(Shape(dims))
    }

    pub fn scalar() -> Self {
        Shape(Vec::new())
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.0.len()];
        for i in (0..self.0.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.0[i + 1];
        }
        s
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Dense row-major real tensor (64-bit elements).
#[derive(Clone)]
pub struct Tensor {
    data: Arc<Vec<f64>>,
    shape: Shape,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor(shape={}, numel={})", self.shape, self.numel())
    }
}

impl Tensor {
    pub fn from_vec(dims: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != data.len() {
            return Err(Error::shape(
                "Tensor::from_vec",
                format!("shape {} needs {} elements, got {}", shape, shape.numel(), data.len()),
            ));
        }
        Ok(Tensor { data: Arc::new(data), shape })
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Self {
        let shape = Shape::new(dims).expect("zeros: invalid shape");
        let n = shape.numel();
        Tensor { data: Arc::new(vec![0.0; n]), shape }
    }

    pub fn full(dims: impl Into<Vec<usize>>, value: f64) -> Self {
        let shape = Shape::new(dims).expect("full: invalid shape");
        let n = shape.numel();
        Tensor { data: Arc::new(vec![value; n]), shape }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { data: Arc::new(vec![value]), shape: Shape::scalar() }
    }

    pub fn from_fn(dims: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> f64) -> Self {
        let shape = Shape::new(dims).expect("from_fn: invalid shape");
        let n = shape.numel();
        let data = (0..n).map(|i| f(i)).collect();
        Tensor { data: Arc::new(data), shape }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    pub fn numel(&self) -> usize {
        self.shape.numel()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Scalar extraction; errors unless the tensor has exactly one element.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::contract("Tensor::item", format!("numel {} != 1", self.numel())));
        }
        Ok(self.data[0])
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Tensor {
        let data = if self.numel() >= PAR_THRESHOLD {
            self.data.par_iter().map(|&x| f(x)).collect()
        } else {
            self.data.iter().map(|&x| f(x)).collect()
        };
        Tensor { data: Arc::new(data), shape: self.shape.clone() }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Tensor> {
        if !self.same_shape(other) {
            return Err(Error::shape(
                "Tensor::zip_map",
                format!("{} vs {}", self.shape, other.shape),
            ));
        }
        let data = if self.numel() >= PAR_THRESHOLD {
            self.data
                .par_iter()
                .zip(other.data.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect()
        } else {
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect()
        };
        Ok(Tensor { data: Arc::new(data), shape: self.shape.clone() })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Same elements, new dims; element count must be conserved.
    pub fn reshape(&self, dims: impl Into<Vec<usize>>) -> Result<Tensor> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.numel() {
            return Err(Error::shape(
                "Tensor::reshape",
                format!("{} -> {} changes element count", self.shape, shape),
            ));
        }
        Ok(Tensor { data: Arc::clone(&self.data), shape })
    }

    /// Permute axes; `perm` must be a permutation of `0..rank`.
    pub fn transpose(&self, perm: &[usize]) -> Result<Tensor> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::shape(
                "Tensor::transpose",
                format!("invalid permutation {perm:?} for rank {rank}"),
            ));
        }
        let old_dims = self.dims();
        let old_strides = self.shape.strides();
        let new_dims: Vec<usize> = perm.iter().map(|&p| old_dims[p]).collect();
        let mapped_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let out_shape = Shape::new(new_dims.clone())?;
        let n = out_shape.numel();
        let mut out = vec![0.0; n];
        let mut idx = vec![0usize; rank];
        let src = &self.data;
        for slot in out.iter_mut() {
            let mut off = 0;
            for (i, &ix) in idx.iter().enumerate() {
                off += ix * mapped_strides[i];
            }
            *slot = src[off];
            for d in (0..rank).rev() {
                idx[d] += 1;
                if idx[d] < new_dims[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Tensor { data: Arc::new(out), shape: out_shape })
    }

    /// Concatenate along `axis`; all other dims must agree.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::contract("Tensor::concat", "no inputs"));
        }
        let rank = parts[0].rank();
        if axis >= rank {
            return Err(Error::shape("Tensor::concat", format!("axis {axis} out of rank {rank}")));
        }
        let mut cat_dim = 0usize;
        for p in parts {
            if p.rank() != rank {
                return Err(Error::shape("Tensor::concat", "rank mismatch"));
            }
            for d in 0..rank {
                if d != axis && p.dims()[d] != parts[0].dims()[d] {
                    return Err(Error::shape(
                        "Tensor::concat",
                        format!("dim {d}: {} vs {}", p.dims()[d], parts[0].dims()[d]),
                    ));
                }
            }
            cat_dim += p.dims()[axis];
        }
        let mut dims = parts[0].dims().to_vec();
        dims[axis] = cat_dim;
        let out_shape = Shape::new(dims)?;
        // Copy in (outer, axis, inner) blocks.
        let outer: usize = parts[0].dims()[..axis].iter().product();
        let inner: usize = parts[0].dims()[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(out_shape.numel());
        for o in 0..outer {
            for p in parts {
                let block = p.dims()[axis] * inner;
                out.extend_from_slice(&p.data[o * block..(o + 1) * block]);
            }
        }
        Ok(Tensor { data: Arc::new(out), shape: out_shape })
    }

    /// Contiguous sub-range `start..end` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, end: usize) -> Result<Tensor> {
        let rank = self.rank();
        if axis >= rank {
            return Err(Error::shape("Tensor::slice", format!("axis {axis} out of rank {rank}")));
        }
        let len = self.dims()[axis];
        if start >= end || end > len {
            return Err(Error::shape(
                "Tensor::slice",
                format!("range {start}..{end} invalid for axis of length {len}"),
            ));
        }
        let outer: usize = self.dims()[..axis].iter().product();
        let inner: usize = self.dims()[axis + 1..].iter().product();
        let mut dims = self.dims().to_vec();
        dims[axis] = end - start;
        let out_shape = Shape::new(dims)?;
        let mut out = Vec::with_capacity(out_shape.numel());
        for o in 0..outer {
            let base = o * len * inner;
            out.extend_from_slice(&self.data[base + start * inner..base + end * inner]);
        }
        Ok(Tensor { data: Arc::new(out), shape: out_shape })
    }

    // Arithmetic conveniences used throughout; strict shapes.

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|x| x * c)
    }

    /// In-place accumulation (`self += other`), used on gradient buffers.
    pub(crate) fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::shape(
                "Tensor::add_assign",
                format!("{} vs {}", self.shape, other.shape),
            ));
        }
        let dst = Arc::make_mut(&mut self.data);
        if dst.len() >= PAR_THRESHOLD {
            dst.par_iter_mut()
                .zip(other.data.par_iter())
                .for_each(|(d, &s)| *d += s);
        } else {
            for (d, &s) in dst.iter_mut().zip(other.data.iter()) {
                *d += s;
            }
        }
        Ok(())
    }

    /// Mutable access to the underlying buffer (copy-on-write).
    pub(crate) fn make_mut(&mut self) -> &mut [f64] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_rejects_zero_dims() {
        assert!(Shape::new(vec![2, 0, 3]).is_err());
        assert!(Shape::new(vec![2, 3]).is_ok());
    }

    #[test]
    fn reshape_preserves_row_major_order() {
        let t = Tensor::from_vec(vec![2, 3], (0..6).map(|i| i as f64).collect()).unwrap();
        let r = t.reshape(vec![6]).unwrap();
        assert_eq!(r.data(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(t.reshape(vec![4]).is_err());
    }

    #[test]
    fn transpose_2d() {
        let t = Tensor::from_vec(vec![2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let tt = t.transpose(&[1, 0]).unwrap();
        assert_eq!(tt.dims(), &[3, 2]);
        assert_eq!(tt.data(), &[1., 4., 2., 5., 3., 6.]);
    }

    #[test]
    fn slice_concat_round_trip() {
        let t = Tensor::from_vec(vec![2, 4], (0..8).map(|i| i as f64).collect()).unwrap();
        let a = t.slice(1, 0, 2).unwrap();
        let b = t.slice(1, 2, 4).unwrap();
        let back = Tensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(back.data(), t.data());
        assert_eq!(back.dims(), t.dims());
    }

    #[test]
    fn concat_shape_checks() {
        let a = Tensor::zeros(vec![2, 4]);
        let b = Tensor::zeros(vec![3, 4]);
        assert!(Tensor::concat(&[&a, &b], 0).is_ok());
        assert!(Tensor::concat(&[&a, &b], 1).is_err());
    }
}
