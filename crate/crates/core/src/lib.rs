//! Instance segmentation as an annotation problem: encode instance masks
//! into center-of-mass displacement fields, annotate encoder grids with
//! block classes, decode fields back into masks, compute the clipped
//! regression loss, and score everything with the AP/accuracy protocols.
//!
//! The pipeline composes as
//! [`synth`] -> [`grid`] (annotate) -> [`codec`] (encode/decode) ->
//! [`eval`], with [`io`] carrying each stage's on-disk format and [`viz`]
//! rendering magnitude and class maps. The `dcme` binary exposes the same
//! steps as subcommands.

pub mod codec;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod loss;
pub mod synth;
pub mod types;
pub mod viz;

pub use error::{Error, Result};
