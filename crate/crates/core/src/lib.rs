//! Desk-scale laboratory for processes `X_t = I_n(f_t)` living in a fixed
//! Wiener chaos: simulation, Malliavin derivatives, checks of the kernel
//! non-degeneracy conditions, Young SDEs driven by such processes, and density
//! diagnostics.

pub mod assumptions;
pub mod chaos;
pub mod error;
pub mod kernels;
pub mod nondegen;
pub mod stats;
pub mod tensor;
pub mod young;

pub use error::{Error, Result};
