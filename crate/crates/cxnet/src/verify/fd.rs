//! Central finite-difference gradient checking.
//!
//! The loss closure maps a set of input tensors to a scalar loss and the
//! analytic gradient per input (zeros where no path exists). The checker
//! perturbs every coordinate by +/- eps and compares
//! |analytic - fd| / max(1, |analytic|) against the tolerance.

use crate::ctensor::Tensor;
use crate::error::Result;

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Default)]
pub struct FdReport {
    pub coords: usize,
    pub max_rel_err: f64,
}

impl FdReport {
    pub fn merge(&mut self, other: FdReport) {
        self.coords += other.coords;
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Check the analytic gradients of `loss_fn` at `inputs`.
pub fn check_gradient<F>(loss_fn: F, inputs: &[Tensor], eps: f64) -> Result<FdReport>
where
    F: Fn(&[Tensor]) -> Result<(f64, Vec<Tensor>)>,
{
    let (_, grads) = loss_fn(inputs)?;
    assert_eq!(grads.len(), inputs.len(), "one gradient per input");
    let mut report = FdReport::default();
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        assert_eq!(grads[i].dims(), input.dims(), "gradient shape mismatch");
        for j in 0..input.numel() {
            let x = input.data()[j];
            let mut plus = input.data().to_vec();
            plus[j] = x + eps;
            work[i] = Tensor::from_vec(input.dims().to_vec(), plus)?;
            let (f_plus, _) = loss_fn(&work)?;
            let mut minus = input.data().to_vec();
            minus[j] = x - eps;
            work[i] = Tensor::from_vec(input.dims().to_vec(), minus)?;
            let (f_minus, _) = loss_fn(&work)?;
            work[i] = input.clone();
            let fd = (f_plus - f_minus) / (2.0 * eps);
            let a = grads[i].data()[j];
            let rel = (a - fd).abs() / a.abs().max(1.0);
            report.coords += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Tape;

    #[test]
    fn quadratic_gradient_checks_out() {
        let loss_fn = |inputs: &[Tensor]| -> Result<(f64, Vec<Tensor>)> {
            let mut tape = Tape::new();
            let x = tape.leaf_grad(inputs[0].clone());
            let sq = tape.square(x);
            let loss = tape.sum_all(sq);
            let grads = tape.backward(loss)?;
            Ok((tape.value(loss).item()?, vec![grads.get(x).unwrap().clone()]))
        };
        let input = Tensor::from_vec(vec![3], vec![0.5, -1.25, 2.0]).unwrap();
        let report = check_gradient(loss_fn, &[input], FD_EPS).unwrap();
        assert!(report.passed(FD_TOL), "max err {}", report.max_rel_err);
        assert_eq!(report.coords, 3);
    }

    #[test]
    fn corrupted_backward_rule_is_caught() {
        // A custom node whose backward reports twice the true gradient must
        // fail the finite-difference check (negative control).
        let loss_fn = |inputs: &[Tensor]| -> Result<(f64, Vec<Tensor>)> {
            let mut tape = Tape::new();
            let x = tape.leaf_grad(inputs[0].clone());
            let v = tape.value(x).map(|t| t * t);
            let bad = tape.record(
                "bad_square",
                &[x],
                v,
                Box::new({
                    let x_val = inputs[0].clone();
                    move |g, _need| vec![Some(g.zip_map(&x_val, |gv, xv| gv * 4.0 * xv).unwrap())]
                }),
            )?;
            let loss = tape.sum_all(bad);
            let grads = tape.backward(loss)?;
            Ok((tape.value(loss).item()?, vec![grads.get(x).unwrap().clone()]))
        };
        let input = Tensor::from_vec(vec![2], vec![1.0, -2.0]).unwrap();
        let report = check_gradient(loss_fn, &[input], FD_EPS).unwrap();
        assert!(!report.passed(FD_TOL), "corrupted rule slipped through");
    }
}
