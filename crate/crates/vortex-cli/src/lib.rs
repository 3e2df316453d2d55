//! Library surface of the command-line driver; the binary in `main.rs` is a
//! thin dispatcher over these modules.

// NaN-rejecting guards, as in vortex-core.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod verify;
