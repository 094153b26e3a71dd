//! Numerical core for differential angular imaging.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds without `std`: hand-written forward/backward tensor operations,
//! affine photometric alignment, the two-stream / multiview network family,
//! a seeded synthetic material renderer with the data pipeline around it,
//! and the staged trainer. File formats, directory trees and the command line
//! live in the `dain` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dait;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod gradsuite;
pub mod imaging;
pub mod net;
pub mod ops;
pub mod param;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use param::{sgd_momentum_step, Parameter};
pub use rng::Rng;
pub use scalar::Real;
pub use tensor::Tensor;
