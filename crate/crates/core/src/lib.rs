//! Design-automation toolkit for current references built around
//! two-transistor ultra-low-power voltage references.
//!
//! The crate models two reference families in closed form: a nA-range
//! PTAT reference that buffers a PTAT voltage onto a self-cascode MOSFET
//! load, and a uA-range constant-with-temperature reference that buffers a
//! threshold-difference voltage onto a polysilicon resistor with a matched
//! temperature coefficient. On top of the device and circuit models sit
//! the sizing methodologies, design-space exploration maps, and PVT
//! analysis (supply/temperature sweeps with box-method metric extraction,
//! Monte-Carlo threshold mismatch, process corners, TC calibration-code
//! selection).
//!
//! Modules:
//! - [`device`]: compact MOSFET/resistor models and temperature laws
//! - [`circuits`]: the 2T reference, PTAT/CWT designs, sensitivities
//! - [`sizing`]: sizing algorithms and exploration grids
//! - [`analysis`]: sweeps, box metrics, Monte-Carlo, corners
//! - [`techdata`]: deck/design file formats and result serialization

// `!(x > 0.0)`-style guards are deliberate: they reject NaN together with
// the out-of-domain values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod circuits;
pub mod device;
pub mod error;
pub mod numeric;
pub mod sizing;
pub mod techdata;

pub use error::{Error, Result};
