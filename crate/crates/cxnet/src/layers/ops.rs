//! Stateless complex layer operations: CRelu, complex max-pooling, complex
//! L2 normalization, and flattening.

use crate::autograd::{CVar, Tape};
use crate::error::Result;

/// Norm guard for the L2 normalizer.
pub const CL2_EPS: f64 = 1e-12;

/// Relu applied independently to the real and imaginary parts.
pub fn crelu(tape: &mut Tape, x: CVar) -> CVar {
    CVar { re: tape.relu(x.re), im: tape.relu(x.im) }
}

/// 2x2 stride-2 max pooling applied independently per part; the selected
/// index may differ between the parts.
pub fn complex_pool2(tape: &mut Tape, x: CVar) -> Result<CVar> {
    Ok(CVar { re: tape.maxpool2(x.re)?, im: tape.maxpool2(x.im)? })
}

/// Per-sample L2 normalization of each part of an (N, D) complex batch:
/// each part is divided by its own Euclidean norm (plus a small guard).
pub fn cl2_norm(tape: &mut Tape, x: CVar) -> Result<CVar> {
    let normalize = |tape: &mut Tape, part| -> Result<_> {
        let sq = tape.square(part);
        let sums = tape.sum_rows(sq)?;
        let norm = tape.sqrt(sums);
        let guarded = tape.add_const(norm, CL2_EPS);
        let inv = tape.recip(guarded);
        tape.scale_rows(part, inv)
    };
    Ok(CVar { re: normalize(tape, x.re)?, im: normalize(tape, x.im)? })
}

/// (N, C, H, W) -> (N, C*H*W), both parts flattened identically (row-major).
pub fn flatten(tape: &mut Tape, x: CVar) -> Result<CVar> {
    let dims = tape.value(x.re).dims().to_vec();
    let n = dims[0];
    let rest: usize = dims[1..].iter().product();
    Ok(CVar {
        re: tape.reshape(x.re, vec![n, rest])?,
        im: tape.reshape(x.im, vec![n, rest])?,
    })
}
