//! Sparse random Khatri-Rao product (SRKRP) codes.
//!
//! A master node wants `C = AᵀB` but only has access to `N` workers, `S` of
//! which straggle (their results are erased). `A` is split column-wise into
//! `m` blocks and `B` into `n` blocks; worker `l` receives one random sparse
//! combination of the `A` blocks and one of the `B` blocks and returns their
//! product. The `K = mn` block products are recovered by solving a linear
//! system whose coefficient matrix is the row-wise Khatri-Rao product of the
//! two coding matrices.
//!
//! This crate is the pure algorithmic core and builds without `std`:
//!
//! * [`weights`]: weight distributions and coefficient sampling,
//! * [`linalg`]: small dense/sparse real matrix kernel (products, SVD rank,
//!   pivoted-QR least squares),
//! * [`codec`]: coding vectors, generator assembly, encoding and decoding,
//! * [`analysis`]: closed-form approximations, cost model and Monte-Carlo
//!   campaigns.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod codec;
mod error;
pub mod linalg;
pub mod weights;

pub use error::{Error, Result};
