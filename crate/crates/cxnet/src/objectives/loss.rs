//! Training losses: the complexified SoftPN triplet loss and the MSE pair
//! loss.
//!
//! With s = e^{Dpos} / (e^{Dpos} + e^{D*}), the two SoftPN forms are
//!
//! - `Literal`:   L = s^2 + (1 - s)^2   (minimum 0.5 at Dpos = D*)
//! - `Corrected`: L = 2 s^2             (decreasing in D*, increasing in Dpos)
//!
//! s is evaluated as sigmoid(Dpos - D*), which is the max-subtracted form of
//! the softmax ratio and cannot overflow.

use serde::{Deserialize, Serialize};

use crate::autograd::{CVar, Tape, Var};
use crate::ctensor::Tensor;
use crate::error::{Error, Result};

use super::distance::{complex_distance_graph, DistanceMode};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    #[default]
    Corrected,
    Literal,
}

/// Scalar SoftPN value from precomputed distances.
pub fn softpn_from_distances(d_pos: f64, d_star: f64, form: LossForm) -> f64 {
    let z = d_pos - d_star;
    let s = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { let e = z.exp(); e / (1.0 + e) };
    match form {
        LossForm::Literal => s * s + (1.0 - s) * (1.0 - s),
        LossForm::Corrected => 2.0 * s * s,
    }
}

/// Batch SoftPN loss over three (N, D) descriptor sets: the positive pair
/// (f1, f2) and the negative fn. D* is the rowwise minimum of the two
/// negative distances; the loss is averaged over the batch.
pub fn softpn_loss_graph(
    tape: &mut Tape,
    f1: CVar,
    f2: CVar,
    f_neg: CVar,
    dist: DistanceMode,
    form: LossForm,
) -> Result<Var> {
    let d_pos = complex_distance_graph(tape, f1, f2, dist)?;
    let d_n1 = complex_distance_graph(tape, f1, f_neg, dist)?;
    let d_n2 = complex_distance_graph(tape, f2, f_neg, dist)?;
    let d_star = tape.min_elem(d_n1, d_n2)?;
    let z = tape.sub(d_pos, d_star)?;
    let s = tape.sigmoid(z);
    let per_triplet = match form {
        LossForm::Corrected => {
            let s2 = tape.square(s);
            tape.mul_const(s2, 2.0)
        }
        LossForm::Literal => {
            let s2 = tape.square(s);
            let neg_s = tape.neg(s);
            let one_minus = tape.add_const(neg_s, 1.0);
            let om2 = tape.square(one_minus);
            tape.add(s2, om2)?
        }
    };
    Ok(tape.mean_all(per_triplet))
}

/// Mean squared error between similarity scores and {0,1} labels.
pub fn mse_loss_graph(tape: &mut Tape, scores: Var, labels: &Tensor) -> Result<Var> {
    if tape.value(scores).dims() != labels.dims() {
        return Err(Error::shape(
            "mse_pair_loss",
            format!("scores {:?} vs labels {:?}", tape.value(scores).dims(), labels.dims()),
        ));
    }
    let lab = tape.leaf(labels.clone());
    let diff = tape.sub(scores, lab)?;
    let sq = tape.square(diff);
    Ok(tape.mean_all(sq))
}

pub fn mse_loss_value(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            "mse_pair_loss",
            format!("{} scores vs {} labels", scores.len(), labels.len()),
        ));
    }
    let n = scores.len() as f64;
    Ok(scores.iter().zip(labels).map(|(s, l)| (s - l) * (s - l)).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctensor::ComplexTensor;

    #[test]
    fn equal_distances_give_half_in_both_forms() {
        for form in [LossForm::Literal, LossForm::Corrected] {
            assert!((softpn_from_distances(1.7, 1.7, form) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_point() {
        // Dpos = 1, D* = 2: s = 1/(1+e).
        let s = 1.0 / (1.0 + std::f64::consts::E);
        let lit = softpn_from_distances(1.0, 2.0, LossForm::Literal);
        let cor = softpn_from_distances(1.0, 2.0, LossForm::Corrected);
        assert!((lit - (s * s + (1.0 - s) * (1.0 - s))).abs() < 1e-15);
        assert!((cor - 2.0 * s * s).abs() < 1e-15);
        assert!((lit - 0.60677).abs() < 1e-4);
        assert!((cor - 0.14466).abs() < 1e-4);
    }

    #[test]
    fn distant_negative_limits() {
        // D* -> inf at fixed Dpos: corrected -> 0, literal -> 1.
        let cor = softpn_from_distances(1.0, 800.0, LossForm::Corrected);
        let lit = softpn_from_distances(1.0, 800.0, LossForm::Literal);
        assert!(cor < 1e-12);
        assert!((lit - 1.0).abs() < 1e-12);
        // Both stay within their stated ranges.
        for (dp, ds) in [(0.0, 0.0), (3.0, 0.1), (0.1, 3.0), (10.0, 10.0)] {
            let l = softpn_from_distances(dp, ds, LossForm::Literal);
            let c = softpn_from_distances(dp, ds, LossForm::Corrected);
            assert!(l > 0.0 && l <= 1.0);
            assert!(c > 0.0 && c < 2.0);
        }
    }

    #[test]
    fn graph_loss_is_half_when_all_descriptors_equal() {
        let d = 4;
        let desc = ComplexTensor::new(
            crate::ctensor::Tensor::from_fn(vec![2, d], |i| (i as f64) * 0.1),
            crate::ctensor::Tensor::from_fn(vec![2, d], |i| 1.0 - (i as f64) * 0.05),
        )
        .unwrap();
        let mut tape = Tape::new();
        let mk = |tape: &mut Tape| CVar {
            re: tape.leaf(desc.re().clone()),
            im: tape.leaf(desc.im().clone()),
        };
        let f1 = mk(&mut tape);
        let f2 = mk(&mut tape);
        let f3 = mk(&mut tape);
        for form in [LossForm::Literal, LossForm::Corrected] {
            let loss = softpn_loss_graph(&mut tape, f1, f2, f3, DistanceMode::ModulusSum, form).unwrap();
            assert!((tape.value(loss).data()[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse_loss_value(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(mse_loss_value(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.25);
        assert!(mse_loss_value(&[0.5], &[1.0, 0.0]).is_err());
    }
}
