//! Reverse-mode automatic differentiation over small two-dimensional
//! tensors, with support for differentiating through a gradient.
//!
//! ```
//! use unlearnprobe_autodiff::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.param(Tensor::scalar(2.0));
//! let y = x.pow(3.0).unwrap();
//! let dy = tape.grad(y, &[x], true).unwrap().values[0];
//! let d2y = tape.grad(dy, &[x], false).unwrap().values[0];
//! assert_eq!(dy.item(), 12.0);
//! assert_eq!(d2y.item(), 12.0);
//! ```

mod check;
mod error;
mod gradvec;
mod tape;
mod tensor;

pub use check::finite_diff_check;
pub use error::{AutodiffError, Result};
pub use gradvec::GradientVector;
pub use tape::{Grads, Tape, Var};
pub use tensor::{Csr, SparseConst, Tensor};
