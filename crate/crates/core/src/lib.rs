//! Numerical evaluation and verification of bilateral basic hypergeometric
//! series, their theta-function factorizations and related identities.

pub mod classical;
pub mod elliptic;
pub mod error;
pub mod factorize;
pub mod linalg;
pub mod qcore;
pub mod quad;
pub mod roots;
pub mod series;
pub mod thetaspaces;
pub mod verify;
pub mod vwp;
pub mod wronskian;

pub use error::{QError, Result};
pub use qcore::{QContext, C64};
