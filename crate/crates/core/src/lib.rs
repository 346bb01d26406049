//! Cooperative relative localization of a small UWB network.
//!
//! The pipeline mirrors a four-node deployment: tags range to anchors with
//! double-sided two-way ranging ([`twr`]), measurements are corrected with
//! per-pair linear models ([`calibration`]), shipped as binary frames over a
//! socket onto a topic bus ([`bus`]), and turned into node positions in a
//! relative frame ([`solver`]). [`harness`] runs whole campaigns and scores
//! them.

pub mod bus;
pub mod calibration;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod solver;
pub mod twr;

pub use error::{Error, Result};
