//! Exact-plus-numerical library for structured Hilbert-space operators:
//! scalar + compact-diagonal + finite-rank models on ℓ², 2×2 blocks of them,
//! and membership decisions for the absolutely norm-attaining (AN),
//! absolutely minimum-attaining (AM), and norm-closure-of-AN classes, with
//! witness decompositions and finite-truncation cross checks.

pub mod dense;
pub mod error;
pub mod operators;
pub mod spectra;
pub mod classify;
pub mod truncation;

pub use error::{Error, Result};
