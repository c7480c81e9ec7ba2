//! Simulation and estimation toolkit for spin-to-charge conversion readout
//! of NV centres in diamond.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod excited_state;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod photon;
pub mod protocol;
pub mod rate;
pub mod spin_hamiltonian;

pub use error::{Error, Result};
