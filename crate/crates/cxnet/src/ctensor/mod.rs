//! Complex tensor value type: planar real/imaginary storage, elementwise
//! arithmetic, shape ops, the spatial 2D DFT, and the binary container format.

mod complex;
mod dft;
pub mod io;
mod tensor;

pub use complex::ComplexTensor;
pub use dft::dft2d;
pub(crate) use dft::dft2d_adjoint;
pub use tensor::{Shape, Tensor};
