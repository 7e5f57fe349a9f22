//! Tape-based reverse-mode automatic differentiation.
//!
//! The tape is an append-only, topologically ordered record of operations on
//! real tensors. Complex values differentiate as pairs of real nodes ([`CVar`]),
//! which is exact here because every loss is a real-valued function of the
//! real and imaginary parts.
//!
//! Forward evaluation is eager: each builder computes its value immediately
//! and registers a backward rule mapping the upstream gradient to per-input
//! gradients. [`Tape::backward`] runs one reverse sweep from a scalar root,
//! accumulating additively where a node feeds several consumers.

use crate::ctensor::{dft2d, dft2d_adjoint, Tensor};
use crate::error::{Error, Result};

use super::kernels;

pub type NodeId = usize;

/// Handle to a real-valued node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) NodeId);

impl Var {
    pub fn id(&self) -> NodeId {
        self.0
    }
}

/// Handle to a complex value: a pair of real nodes.
#[derive(Clone, Copy, Debug)]
pub struct CVar {
    pub re: Var,
    pub im: Var,
}

/// Backward rule: upstream gradient plus a per-input "is this gradient
/// needed" mask, returning one optional gradient per input (same order).
pub type BackwardFn = Box<dyn Fn(&Tensor, &[bool]) -> Vec<Option<Tensor>>>;

pub struct Node {
    pub op: &'static str,
    pub inputs: Vec<NodeId>,
    pub value: Tensor,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

/// Identifies which part of a named parameter a leaf node carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Real,
    Re,
    Im,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bindings: Vec<(NodeId, String, Part)>,
}

/// Result of a backward sweep: per-node gradients for grad-requiring leaves.
pub struct Grads {
    grads: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub(crate) fn bindings(&self) -> &[(NodeId, String, Part)] {
        &self.bindings
    }

    pub(crate) fn register_binding(&mut self, node: Var, name: &str, part: Part) {
        self.bindings.push((node.0, name.to_string(), part));
    }

    fn push(&mut self, op: &'static str, inputs: Vec<NodeId>, value: Tensor, backward: Option<BackwardFn>) -> Var {
        let requires_grad = backward.is_some() && inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.nodes.push(Node { op, inputs, value, backward, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf: no gradient is tracked through it.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push("leaf", Vec::new(), value, None)
    }

    /// Leaf whose gradient is wanted (parameters, gradient-check inputs).
    pub fn leaf_grad(&mut self, value: Tensor) -> Var {
        let v = self.push("leaf", Vec::new(), value, None);
        self.nodes[v.0].requires_grad = true;
        v
    }

    /// Record an operation with an externally supplied backward rule. The
    /// inputs must already exist on the tape.
    pub fn record(&mut self, op: &'static str, inputs: &[Var], value: Tensor, backward: BackwardFn) -> Result<Var> {
        for v in inputs {
            if v.0 >= self.nodes.len() {
                return Err(Error::Graph(format!("op {op}: input node {} does not exist", v.0)));
            }
        }
        Ok(self.push(op, inputs.iter().map(|v| v.0).collect(), value, Some(backward)))
    }

    fn val(&self, v: Var) -> Tensor {
        self.nodes[v.0].value.clone()
    }

    fn check_same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa} vs {sb}")));
        }
        Ok(())
    }

    // ---- elementwise binary ----

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("add", a, b)?;
        let value = self.val(a).add(&self.val(b))?;
        Ok(self.push(
            "add",
            vec![a.0, b.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.clone()),
                    need[1].then(|| g.clone()),
                ]
            })),
        ))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("sub", a, b)?;
        let value = self.val(a).sub(&self.val(b))?;
        Ok(self.push(
            "sub",
            vec![a.0, b.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.clone()),
                    need[1].then(|| g.map(|x| -x)),
                ]
            })),
        ))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("mul", a, b)?;
        let (va, vb) = (self.val(a), self.val(b));
        let value = va.mul(&vb)?;
        Ok(self.push(
            "mul",
            vec![a.0, b.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.mul(&vb).expect("mul grad shape")),
                    need[1].then(|| g.mul(&va).expect("mul grad shape")),
                ]
            })),
        ))
    }

    /// Elementwise minimum; ties route the gradient to the first input.
    pub fn min_elem(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("min_elem", a, b)?;
        let (va, vb) = (self.val(a), self.val(b));
        let value = va.zip_map(&vb, f64::min)?;
        Ok(self.push(
            "min_elem",
            vec![a.0, b.0],
            value,
            Some(Box::new(move |g, need| {
                let mask_a = va.zip_map(&vb, |x, y| if x <= y { 1.0 } else { 0.0 }).unwrap();
                vec![
                    need[0].then(|| g.mul(&mask_a).unwrap()),
                    need[1].then(|| g.zip_map(&mask_a, |gv, m| gv * (1.0 - m)).unwrap()),
                ]
            })),
        ))
    }

    // ---- elementwise unary ----

    pub fn neg(&mut self, a: Var) -> Var {
        let value = self.val(a).map(|x| -x);
        self.push(
            "neg",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| vec![need[0].then(|| g.map(|x| -x))])),
        )
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let va = self.val(a);
        let value = va.map(|x| x.max(0.0));
        self.push(
            "relu",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| g.zip_map(&va, |gv, x| if x > 0.0 { gv } else { 0.0 }).unwrap())]
            })),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.val(a).map(stable_sigmoid);
        let y = value.clone();
        self.push(
            "sigmoid",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| g.zip_map(&y, |gv, s| gv * s * (1.0 - s)).unwrap())]
            })),
        )
    }

    /// Square root; the subgradient at and below zero is defined as 0.
    pub fn sqrt(&mut self, a: Var) -> Var {
        let va = self.val(a);
        let value = va.map(f64::sqrt);
        let y = value.clone();
        self.push(
            "sqrt",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| {
                    g.zip_map(&va, |gv, x| if x > 0.0 { gv } else { 0.0 })
                        .unwrap()
                        .zip_map(&y, |gv, s| if s > 0.0 { gv * 0.5 / s } else { 0.0 })
                        .unwrap()
                })]
            })),
        )
    }

    pub fn square(&mut self, a: Var) -> Var {
        let va = self.val(a);
        let value = va.map(|x| x * x);
        self.push(
            "square",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| g.zip_map(&va, |gv, x| gv * 2.0 * x).unwrap())]
            })),
        )
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let value = self.val(a).map(|x| 1.0 / x);
        let y = value.clone();
        self.push(
            "recip",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| g.zip_map(&y, |gv, s| -gv * s * s).unwrap())]
            })),
        )
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.val(a).map(|x| x + c);
        self.push(
            "add_const",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| vec![need[0].then(|| g.clone())])),
        )
    }

    pub fn mul_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.val(a).scale(c);
        self.push(
            "mul_const",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| vec![need[0].then(|| g.scale(c))])),
        )
    }

    // ---- reductions and broadcasts ----

    pub fn sum_all(&mut self, a: Var) -> Var {
        let va = self.val(a);
        let dims = va.dims().to_vec();
        let value = Tensor::scalar(va.sum());
        self.push(
            "sum_all",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| {
                let g0 = g.data()[0];
                vec![need[0].then(|| Tensor::full(dims.clone(), g0))]
            })),
        )
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let va = self.val(a);
        let n = va.numel() as f64;
        let dims = va.dims().to_vec();
        let value = Tensor::scalar(va.sum() / n);
        self.push(
            "mean_all",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| {
                let g0 = g.data()[0] / n;
                vec![need[0].then(|| Tensor::full(dims.clone(), g0))]
            })),
        )
    }

    /// Row sums of an (N, D) tensor -> (N,).
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let va = self.val(a);
        if va.rank() != 2 {
            return Err(Error::shape("sum_rows", format!("expected rank 2, got {}", va.shape())));
        }
        let (n, d) = (va.dims()[0], va.dims()[1]);
        let sums: Vec<f64> = va.data().chunks_exact(d).map(|r| r.iter().sum()).collect();
        let value = Tensor::from_vec(vec![n], sums)?;
        Ok(self.push(
            "sum_rows",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| {
                    let mut out = Vec::with_capacity(n * d);
                    for &gv in g.data() {
                        out.extend(std::iter::repeat(gv).take(d));
                    }
                    Tensor::from_vec(vec![n, d], out).unwrap()
                })]
            })),
        ))
    }

    /// Per-channel mean of an NCHW tensor over (N, H, W) -> (C,).
    pub fn mean_channels(&mut self, a: Var) -> Result<Var> {
        let va = self.val(a);
        if va.rank() != 4 {
            return Err(Error::shape("mean_channels", format!("expected NCHW, got {}", va.shape())));
        }
        let [n, c, h, w] = [va.dims()[0], va.dims()[1], va.dims()[2], va.dims()[3]];
        let plane = h * w;
        let count = (n * plane) as f64;
        let mut sums = vec![0.0; c];
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * plane;
                sums[ci] += va.data()[base..base + plane].iter().sum::<f64>();
            }
        }
        for s in sums.iter_mut() {
            *s /= count;
        }
        let value = Tensor::from_vec(vec![c], sums)?;
        Ok(self.push(
            "mean_channels",
            vec![a.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| {
                    let mut out = vec![0.0; n * c * plane];
                    for ni in 0..n {
                        for ci in 0..c {
                            let gv = g.data()[ci] / count;
                            let base = (ni * c + ci) * plane;
                            out[base..base + plane].iter_mut().for_each(|v| *v = gv);
                        }
                    }
                    Tensor::from_vec(vec![n, c, plane / w, w], out).unwrap()
                })]
            })),
        ))
    }

    /// y[n,c,h,w] = x[n,c,h,w] * s[c]
    pub fn scale_channels(&mut self, x: Var, s: Var) -> Result<Var> {
        let (vx, vs) = (self.val(x), self.val(s));
        channel_op_check("scale_channels", &vx, &vs)?;
        let value = apply_per_channel(&vx, &vs, |xv, sv| xv * sv);
        Ok(self.push(
            "scale_channels",
            vec![x.0, s.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| apply_per_channel(g, &vs, |gv, sv| gv * sv)),
                    need[1].then(|| reduce_per_channel(g, Some(&vx))),
                ]
            })),
        ))
    }

    /// y[n,c,h,w] = x[n,c,h,w] + s[c]
    pub fn shift_channels(&mut self, x: Var, s: Var) -> Result<Var> {
        let (vx, vs) = (self.val(x), self.val(s));
        channel_op_check("shift_channels", &vx, &vs)?;
        let value = apply_per_channel(&vx, &vs, |xv, sv| xv + sv);
        Ok(self.push(
            "shift_channels",
            vec![x.0, s.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.clone()),
                    need[1].then(|| reduce_per_channel(g, None)),
                ]
            })),
        ))
    }

    /// y[n,d] = x[n,d] * s[n]
    pub fn scale_rows(&mut self, x: Var, s: Var) -> Result<Var> {
        let (vx, vs) = (self.val(x), self.val(s));
        if vx.rank() != 2 || vs.rank() != 1 || vs.dims()[0] != vx.dims()[0] {
            return Err(Error::shape(
                "scale_rows",
                format!("expected (N,D) and (N,), got {} and {}", vx.shape(), vs.shape()),
            ));
        }
        let d = vx.dims()[1];
        let value = row_scale(&vx, &vs);
        Ok(self.push(
            "scale_rows",
            vec![x.0, s.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| row_scale(g, &vs)),
                    need[1].then(|| {
                        let sums: Vec<f64> = g
                            .data()
                            .chunks_exact(d)
                            .zip(vx.data().chunks_exact(d))
                            .map(|(gr, xr)| gr.iter().zip(xr).map(|(a, b)| a * b).sum())
                            .collect();
                        Tensor::from_vec(vec![sums.len()], sums).unwrap()
                    }),
                ]
            })),
        ))
    }

    // ---- linear algebra ----

    /// y (N,M) = x (N,K) * w (M,K)^T
    pub fn linear(&mut self, x: Var, w: Var) -> Result<Var> {
        let (vx, vw) = (self.val(x), self.val(w));
        if vx.rank() != 2 || vw.rank() != 2 || vx.dims()[1] != vw.dims()[1] {
            return Err(Error::shape(
                "linear",
                format!("expected (N,K) x (M,K), got {} and {}", vx.shape(), vw.shape()),
            ));
        }
        let (n, k) = (vx.dims()[0], vx.dims()[1]);
        let m = vw.dims()[0];
        let mut out = vec![0.0; n * m];
        kernels::gemm_nt(n, k, m, vx.data(), vw.data(), 0.0, &mut out);
        let value = Tensor::from_vec(vec![n, m], out)?;
        Ok(self.push(
            "linear",
            vec![x.0, w.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| {
                        let mut gx = vec![0.0; n * k];
                        kernels::gemm_nn(n, m, k, g.data(), vw.data(), 0.0, &mut gx);
                        Tensor::from_vec(vec![n, k], gx).unwrap()
                    }),
                    need[1].then(|| {
                        let mut gw = vec![0.0; m * k];
                        kernels::gemm_tn(m, n, k, g.data(), vx.data(), 0.0, &mut gw);
                        Tensor::from_vec(vec![m, k], gw).unwrap()
                    }),
                ]
            })),
        ))
    }

    /// y[n,m] = x[n,m] + b[m]
    pub fn add_bias_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (vx, vb) = (self.val(x), self.val(b));
        if vx.rank() != 2 || vb.rank() != 1 || vb.dims()[0] != vx.dims()[1] {
            return Err(Error::shape(
                "add_bias_row",
                format!("expected (N,M) and (M,), got {} and {}", vx.shape(), vb.shape()),
            ));
        }
        let m = vx.dims()[1];
        let mut out = vx.data().to_vec();
        for row in out.chunks_exact_mut(m) {
            for (o, bv) in row.iter_mut().zip(vb.data()) {
                *o += bv;
            }
        }
        let value = Tensor::from_vec(vx.dims().to_vec(), out)?;
        Ok(self.push(
            "add_bias_row",
            vec![x.0, b.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.clone()),
                    need[1].then(|| {
                        let mut sums = vec![0.0; m];
                        for row in g.data().chunks_exact(m) {
                            for (s, gv) in sums.iter_mut().zip(row) {
                                *s += gv;
                            }
                        }
                        Tensor::from_vec(vec![m], sums).unwrap()
                    }),
                ]
            })),
        ))
    }

    /// Cross-correlation of NCHW input with OIHW kernel ("same" via pad).
    pub fn conv2d(&mut self, x: Var, w: Var, pad: usize, stride: usize) -> Result<Var> {
        let (vx, vw) = (self.val(x), self.val(w));
        let geom = kernels::conv_geometry(&vx, &vw, pad, stride)?;
        let value = kernels::conv2d_forward(&vx, &vw, pad, stride)?;
        Ok(self.push(
            "conv2d",
            vec![x.0, w.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| kernels::conv2d_grad_x(g, &vw, &geom)),
                    need[1].then(|| kernels::conv2d_grad_w(&vx, g, &geom)),
                ]
            })),
        ))
    }

    /// 2x2 stride-2 max pooling over NCHW maps.
    pub fn maxpool2(&mut self, x: Var) -> Result<Var> {
        let vx = self.val(x);
        let in_dims = vx.dims().to_vec();
        let (value, arg) = kernels::maxpool2_forward(&vx)?;
        Ok(self.push(
            "maxpool2",
            vec![x.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| kernels::maxpool2_backward(g, &arg, &in_dims))]
            })),
        ))
    }

    // ---- shape ----

    pub fn reshape(&mut self, x: Var, dims: Vec<usize>) -> Result<Var> {
        let vx = self.val(x);
        let old = vx.dims().to_vec();
        let value = vx.reshape(dims)?;
        Ok(self.push(
            "reshape",
            vec![x.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| g.reshape(old.clone()).unwrap())]
            })),
        ))
    }

    /// Concatenate two (N, *) tensors along axis 1.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.val(a), self.val(b));
        if va.rank() != 2 || vb.rank() != 2 || va.dims()[0] != vb.dims()[0] {
            return Err(Error::shape(
                "concat_cols",
                format!("expected matching row counts, got {} and {}", va.shape(), vb.shape()),
            ));
        }
        let split = va.dims()[1];
        let total = split + vb.dims()[1];
        let value = Tensor::concat(&[&va, &vb], 1)?;
        Ok(self.push(
            "concat_cols",
            vec![a.0, b.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.slice(1, 0, split).unwrap()),
                    need[1].then(|| g.slice(1, split, total).unwrap()),
                ]
            })),
        ))
    }

    /// Concatenate two tensors along axis 0 (all trailing dims must agree).
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.val(a), self.val(b));
        if va.rank() != vb.rank() || va.dims()[1..] != vb.dims()[1..] {
            return Err(Error::shape(
                "concat_rows",
                format!("{} vs {}", va.shape(), vb.shape()),
            ));
        }
        let split = va.dims()[0];
        let total = split + vb.dims()[0];
        let value = Tensor::concat(&[&va, &vb], 0)?;
        Ok(self.push(
            "concat_rows",
            vec![a.0, b.0],
            value,
            Some(Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.slice(0, 0, split).unwrap()),
                    need[1].then(|| g.slice(0, split, total).unwrap()),
                ]
            })),
        ))
    }

    /// Rows `r0..r1` along axis 0; backward zero-fills the complement.
    pub fn slice_rows(&mut self, x: Var, r0: usize, r1: usize) -> Result<Var> {
        let vx = self.val(x);
        let dims = vx.dims().to_vec();
        let value = vx.slice(0, r0, r1)?;
        Ok(self.push(
            "slice_rows",
            vec![x.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| {
                    let inner: usize = dims[1..].iter().product();
                    let mut out = vec![0.0; dims.iter().product()];
                    out[r0 * inner..r1 * inner].copy_from_slice(g.data());
                    Tensor::from_vec(dims.clone(), out).unwrap()
                })]
            })),
        ))
    }

    // ---- spectral ----

    /// Real part of the per-channel unnormalized forward 2D DFT.
    pub fn dft2d_re(&mut self, x: Var) -> Result<Var> {
        let vx = self.val(x);
        let value = dft2d(&vx)?.into_parts().0;
        let zero_dims = vx.dims().to_vec();
        Ok(self.push(
            "dft2d_re",
            vec![x.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| {
                    let zi = Tensor::zeros(zero_dims.clone());
                    dft2d_adjoint(g, &zi).unwrap()
                })]
            })),
        ))
    }

    /// Imaginary part of the per-channel unnormalized forward 2D DFT.
    pub fn dft2d_im(&mut self, x: Var) -> Result<Var> {
        let vx = self.val(x);
        let value = dft2d(&vx)?.into_parts().1;
        let zero_dims = vx.dims().to_vec();
        Ok(self.push(
            "dft2d_im",
            vec![x.0],
            value,
            Some(Box::new(move |g, need| {
                vec![need[0].then(|| {
                    let zr = Tensor::zeros(zero_dims.clone());
                    dft2d_adjoint(&zr, g).unwrap()
                })]
            })),
        ))
    }

    // ---- complex composites ----

    pub fn cadd(&mut self, a: CVar, b: CVar) -> Result<CVar> {
        Ok(CVar { re: self.add(a.re, b.re)?, im: self.add(a.im, b.im)? })
    }

    pub fn csub(&mut self, a: CVar, b: CVar) -> Result<CVar> {
        Ok(CVar { re: self.sub(a.re, b.re)?, im: self.sub(a.im, b.im)? })
    }

    pub fn cmul(&mut self, a: CVar, b: CVar) -> Result<CVar> {
        let rr = self.mul(a.re, b.re)?;
        let ii = self.mul(a.im, b.im)?;
        let ri = self.mul(a.re, b.im)?;
        let ir = self.mul(a.im, b.re)?;
        Ok(CVar { re: self.sub(rr, ii)?, im: self.add(ri, ir)? })
    }

    /// Elementwise complex modulus sqrt(re^2 + im^2) as a real node.
    pub fn cmodulus(&mut self, a: CVar) -> Result<Var> {
        let r2 = self.square(a.re);
        let i2 = self.square(a.im);
        let s = self.add(r2, i2)?;
        Ok(self.sqrt(s))
    }

    // ---- backward ----

    /// Reverse sweep from a scalar root. Returns gradients for every
    /// grad-requiring leaf; intermediate gradients are discarded after use.
    pub fn backward(&self, root: Var) -> Result<Grads> {
        let root_node = self
            .nodes
            .get(root.0)
            .ok_or_else(|| Error::Graph(format!("backward root {} does not exist", root.0)))?;
        if root_node.value.numel() != 1 {
            return Err(Error::contract(
                "backward",
                format!("root must be scalar, got shape {}", root_node.value.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::from_vec(root_node.value.dims().to_vec(), vec![1.0])?);
        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            let Some(backward) = &node.backward else {
                continue; // leaf: keep any accumulated gradient
            };
            let Some(g) = grads[id].take() else {
                continue; // not on a path between the root and a grad leaf
            };
            let need: Vec<bool> = node.inputs.iter().map(|&i| self.nodes[i].requires_grad).collect();
            let input_grads = backward(&g, &need);
            if input_grads.len() != node.inputs.len() {
                return Err(Error::Graph(format!(
                    "op {}: backward returned {} gradients for {} inputs",
                    node.op,
                    input_grads.len(),
                    node.inputs.len()
                )));
            }
            for (&input, maybe_grad) in node.inputs.iter().zip(input_grads) {
                let Some(grad) = maybe_grad else { continue };
                if grad.shape() != self.nodes[input].value.shape() {
                    return Err(Error::Graph(format!(
                        "op {}: gradient shape {} != input shape {}",
                        node.op,
                        grad.shape(),
                        self.nodes[input].value.shape()
                    )));
                }
                match &mut grads[input] {
                    Some(acc) => acc.add_assign(&grad)?,
                    slot @ None => *slot = Some(grad),
                }
            }
        }
        // Drop anything that is not a grad-requiring leaf.
        for (id, slot) in grads.iter_mut().enumerate() {
            let node = &self.nodes[id];
            if !(node.backward.is_none() && node.requires_grad) {
                *slot = None;
            }
        }
        Ok(Grads { grads })
    }
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn channel_op_check(op: &'static str, x: &Tensor, s: &Tensor) -> Result<()> {
    if x.rank() != 4 || s.rank() != 1 || s.dims()[0] != x.dims()[1] {
        return Err(Error::shape(
            op,
            format!("expected NCHW and (C,), got {} and {}", x.shape(), s.shape()),
        ));
    }
    Ok(())
}

fn apply_per_channel(x: &Tensor, s: &Tensor, f: impl Fn(f64, f64) -> f64 + Sync) -> Tensor {
    let [n, c, h, w] = [x.dims()[0], x.dims()[1], x.dims()[2], x.dims()[3]];
    let plane = h * w;
    let mut out = x.data().to_vec();
    let sv = s.data();
    use rayon::prelude::*;
    out.par_chunks_mut(plane).enumerate().for_each(|(i, chunk)| {
        let cv = sv[i % c];
        for v in chunk.iter_mut() {
            *v = f(*v, cv);
        }
    });
    let _ = n;
    Tensor::from_vec(x.dims().to_vec(), out).unwrap()
}

/// Per-channel reduction of g (optionally weighted by x) over (N, H, W).
fn reduce_per_channel(g: &Tensor, x: Option<&Tensor>) -> Tensor {
    let [n, c, h, w] = [g.dims()[0], g.dims()[1], g.dims()[2], g.dims()[3]];
    let plane = h * w;
    let mut sums = vec![0.0; c];
    for ni in 0..n {
        for ci in 0..c {
            let base = (ni * c + ci) * plane;
            let gs = &g.data()[base..base + plane];
            sums[ci] += match x {
                Some(xv) => gs.iter().zip(&xv.data()[base..base + plane]).map(|(a, b)| a * b).sum::<f64>(),
                None => gs.iter().sum::<f64>(),
            };
        }
    }
    Tensor::from_vec(vec![c], sums).unwrap()
}

fn row_scale(x: &Tensor, s: &Tensor) -> Tensor {
    let d = x.dims()[1];
    let mut out = x.data().to_vec();
    for (row, &sv) in out.chunks_exact_mut(d).zip(s.data()) {
        for v in row.iter_mut() {
            *v *= sv;
        }
    }
    Tensor::from_vec(x.dims().to_vec(), out).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_backward_is_ones() {
        let mut tape = Tape::new();
        let a = tape.leaf_grad(Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let b = tape.leaf_grad(Tensor::from_vec(vec![3], vec![4.0, 5.0, 6.0]).unwrap());
        let s = tape.add(a, b).unwrap();
        let loss = tape.sum_all(s);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(a).unwrap().data(), &[1.0, 1.0, 1.0]);
        assert_eq!(grads.get(b).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn record_rejects_dangling_input() {
        let mut tape = Tape::new();
        let bad = Var(17);
        let err = tape.record("custom", &[bad], Tensor::scalar(0.0), Box::new(|_, _| vec![None]));
        assert!(err.is_err());
    }

    #[test]
    fn diamond_graph_accumulates() {
        // loss = sum(a*a) => grad a = 2a via two consumers of `a`.
        let mut tape = Tape::new();
        let a = tape.leaf_grad(Tensor::from_vec(vec![2], vec![3.0, -2.0]).unwrap());
        let p = tape.mul(a, a).unwrap();
        let loss = tape.sum_all(p);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(a).unwrap().data(), &[6.0, -4.0]);
    }

    #[test]
    fn fan_out_k_consumers_scales_gradient() {
        let k = 4;
        let run = |copies: usize| -> f64 {
            let mut tape = Tape::new();
            let a = tape.leaf_grad(Tensor::scalar(1.5));
            let mut acc = tape.mul_const(a, 2.0);
            for _ in 1..copies {
                let t = tape.mul_const(a, 2.0);
                acc = tape.add(acc, t).unwrap();
            }
            let grads = tape.backward(acc).unwrap();
            grads.get(a).unwrap().data()[0]
        };
        assert_eq!(run(k), k as f64 * run(1));
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut tape = Tape::new();
        let a = tape.leaf_grad(Tensor::zeros(vec![2, 2]));
        let r = tape.relu(a);
        assert!(tape.backward(r).is_err());
    }

    #[test]
    fn complex_product_real_part_gradients() {
        // loss = Re(w * x) with x = 1 + 0i, w = a + bi: dloss/da = 1, dloss/db = 0.
        let mut tape = Tape::new();
        let a = tape.leaf_grad(Tensor::scalar(0.7));
        let b = tape.leaf_grad(Tensor::scalar(-0.3));
        let w = CVar { re: a, im: b };
        let xr = tape.leaf(Tensor::scalar(1.0));
        let xi = tape.leaf(Tensor::scalar(0.0));
        let x = CVar { re: xr, im: xi };
        let p = tape.cmul(w, x).unwrap();
        let loss = tape.sum_all(p.re);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(a).unwrap().data()[0], 1.0);
        assert_eq!(grads.get(b).unwrap().data()[0], 0.0);
    }

    #[test]
    fn modulus_times_parameter() {
        // loss = |3+4i| * k => grad k = 5.
        let mut tape = Tape::new();
        let zr = tape.leaf(Tensor::scalar(3.0));
        let zi = tape.leaf(Tensor::scalar(4.0));
        let k = tape.leaf_grad(Tensor::scalar(2.0));
        let m = tape.cmodulus(CVar { re: zr, im: zi }).unwrap();
        let loss = tape.mul(m, k).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!((grads.get(k).unwrap().data()[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn min_elem_routes_to_smaller_and_first_on_tie() {
        let mut tape = Tape::new();
        let a = tape.leaf_grad(Tensor::from_vec(vec![3], vec![1.0, 5.0, 2.0]).unwrap());
        let b = tape.leaf_grad(Tensor::from_vec(vec![3], vec![2.0, 3.0, 2.0]).unwrap());
        let m = tape.min_elem(a, b).unwrap();
        let loss = tape.sum_all(m);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(a).unwrap().data(), &[1.0, 0.0, 1.0]);
        assert_eq!(grads.get(b).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn determinism_bit_identical() {
        let run = || {
            let mut tape = Tape::new();
            let x = tape.leaf_grad(Tensor::from_fn(vec![2, 3, 4, 4], |i| ((i * 31 % 17) as f64) / 7.0 - 1.0));
            let w = tape.leaf_grad(Tensor::from_fn(vec![2, 3, 3, 3], |i| ((i * 13 % 11) as f64) / 5.0 - 1.0));
            let y = tape.conv2d(x, w, 1, 1).unwrap();
            let r = tape.relu(y);
            let loss = tape.mean_all(r);
            let grads = tape.backward(loss).unwrap();
            (
                tape.value(loss).data()[0].to_bits(),
                grads.get(w).unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }
}
