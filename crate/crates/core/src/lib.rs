pub mod error;
pub mod expm;
pub mod generators;
pub mod io;
pub mod magnus;
pub mod matrix;
pub mod parallel;
pub mod pseudospectra;
pub mod quadrature;
pub mod stochastic;

pub use dashu_int::IBig;
pub use error::{Error, ErrorKind, Result};
