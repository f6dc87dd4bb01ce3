//! Command-conditioned models of prepare-and-measure key distribution,
//! the enveloping construction that shrinks signal overlaps while leaving
//! every stated probability intact, and seeded simulators for the attacks
//! and clock-synchronization schemes that exploit or defend against it.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::approx_constant))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attacks;
pub mod discrimination;
pub mod envelope;
pub mod error;
pub mod hilbert;
pub mod models;
pub mod random;
pub mod records;
pub mod rng;
pub mod sync;

pub use error::{Error, Result};
pub use hilbert::{COp, CVec, Povm, C64, TOL};
pub use models::{ClassicalModel, CpcModel, MeasurementModel, ProbeModel};
