//! Extended-precision evaluation of the q^-1-Hermite polynomials and the dual
//! discrete q-ultraspherical polynomials, with numerical verification of their
//! discrete orthogonality measures and connecting identities.

pub mod error;
pub mod families;
pub mod identities;
pub mod kernel;
pub mod measures;
pub mod report;
pub mod sweep;

pub use error::{Error, Result};
pub use kernel::{PrecisionContext, QParam, QReal};
