//! Network layers: complex convolution, complex batch normalization (two
//! variants), CRelu, complex pooling, complex/real fully-connected layers,
//! complex L2 normalization, and the complex residual block.

mod bn;
mod conv;
mod fc;
mod init;
mod ops;
mod residual;

pub use bn::{BnMode, ComplexBatchNorm};
pub use conv::{ComplexConv2d, RealConv2d};
pub use fc::{ComplexLinear, RealLinear};
pub use init::{init_complex_pair, init_real_glorot, rayleigh_sigma, InitScheme};
pub use ops::{cl2_norm, complex_pool2, crelu, flatten, CL2_EPS};
pub use residual::ComplexResidualBlock;
