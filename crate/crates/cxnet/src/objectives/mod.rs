//! Objectives and evaluation: complex-vector distance, SoftPN triplet loss,
//! MSE pair loss, and the FPR95/ROC verification metrics.

mod distance;
mod loss;
mod metrics;

pub use distance::{complex_distance, complex_distance_graph, complex_distance_rows, DistanceMode};
pub use loss::{mse_loss_graph, mse_loss_value, softpn_from_distances, softpn_loss_graph, LossForm};
pub use metrics::{auc, fpr95, roc_curve, write_roc_csv, Polarity, RocPoint};
