//! Distance between complex descriptor vectors.
//!
//! Two readings of the per-coordinate root are provided:
//!
//! - `ModulusSum` (default): sum over coordinates of
//!   sqrt((d_re)^2 + (d_im)^2) — the sum of complex moduli of the
//!   elementwise difference. Non-negative, symmetric, satisfies the
//!   triangle inequality.
//! - `LiteralClamped`: sum of sqrt(max(0, (d_re)^2 - (d_im)^2)), which keeps
//!   the printed minus sign but clamps the radicand at zero so the result
//!   stays real. Subgradient at the clamp boundary is 0.

use serde::{Deserialize, Serialize};

use crate::autograd::{CVar, Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    #[default]
    ModulusSum,
    LiteralClamped,
}

/// Distance between two descriptor vectors of equal dimension.
pub fn complex_distance(f1: &ComplexTensor, f2: &ComplexTensor, mode: DistanceMode) -> Result<f64> {
    if f1.dims() != f2.dims() {
        return Err(Error::shape(
            "complex_distance",
            format!("{:?} vs {:?}", f1.dims(), f2.dims()),
        ));
    }
    let mut total = 0.0;
    for i in 0..f1.numel() {
        let dr = f1.re().data()[i] - f2.re().data()[i];
        let di = f1.im().data()[i] - f2.im().data()[i];
        total += match mode {
            DistanceMode::ModulusSum => (dr * dr + di * di).sqrt(),
            DistanceMode::LiteralClamped => (dr * dr - di * di).max(0.0).sqrt(),
        };
    }
    Ok(total)
}

/// Row-wise distances between two (N, D) descriptor batches.
pub fn complex_distance_rows(f1: &ComplexTensor, f2: &ComplexTensor, mode: DistanceMode) -> Result<Vec<f64>> {
    if f1.dims() != f2.dims() || f1.dims().len() != 2 {
        return Err(Error::shape(
            "complex_distance_rows",
            format!("{:?} vs {:?}", f1.dims(), f2.dims()),
        ));
    }
    let (n, d) = (f1.dims()[0], f1.dims()[1]);
    let mut out = Vec::with_capacity(n);
    for r in 0..n {
        let row1 = f1.slice(0, r, r + 1)?.reshape(vec![d])?;
        let row2 = f2.slice(0, r, r + 1)?.reshape(vec![d])?;
        out.push(complex_distance(&row1, &row2, mode)?);
    }
    Ok(out)
}

/// Differentiable row-wise distance: (N, D) complex pairs -> (N,) real.
pub fn complex_distance_graph(tape: &mut Tape, f1: CVar, f2: CVar, mode: DistanceMode) -> Result<Var> {
    let dr = tape.sub(f1.re, f2.re)?;
    let di = tape.sub(f1.im, f2.im)?;
    let dr2 = tape.square(dr);
    let di2 = tape.square(di);
    let radicand = match mode {
        DistanceMode::ModulusSum => tape.add(dr2, di2)?,
        DistanceMode::LiteralClamped => {
            let diff = tape.sub(dr2, di2)?;
            tape.relu(diff)
        }
    };
    let roots = tape.sqrt(radicand);
    tape.sum_rows(roots)
}
