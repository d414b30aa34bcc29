//! Output-normal canonical forms for linear time-invariant output pairs.
//!
//! The crate normalizes an output pair `(A, C)` so that `AᵀA + CᵀC = I`,
//! reduces it to Hessenberg-observer, observer-triangular or ordered real
//! Schur form, and represents the result as a product of Givens rotations
//! with a minimal set of angles. The stack `[C; A]` and its angle
//! derivatives can be applied in `O(nd)` operations without forming the
//! matrices.

pub mod canonical;
pub mod error;
pub mod fast_apply;
pub mod grammians;
pub mod hoon;
pub mod io;
pub mod linalg;
pub mod normal_form;
pub mod otson;
pub mod pair;
pub mod rotations;
pub mod schur;

pub use error::{Error, Result};
pub use pair::OutputPair;
