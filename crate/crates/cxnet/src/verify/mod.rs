//! Independent verification: finite-difference gradient checks, naive
//! reference implementations, and the oracle suites used by both the test
//! harness and `cxnet verify`.

mod fd;
pub mod oracles;
mod suites;

pub use fd::{check_gradient, FdReport, FD_EPS, FD_TOL};
pub use suites::{
    run_all, run_bn_suite, run_conv_structural_suite, run_dft_suite, run_fpr95_suite,
    run_gradient_suite, run_loss_distance_suite, SuiteReport,
};
