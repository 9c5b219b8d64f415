//! Spatial token toolkit: grid/offset token geometry and text format, greedy
//! mask-to-token conversion, offset-supervised dataset construction and the
//! reward suite used to score grounding rollouts.

pub mod codec;
pub mod error;
pub mod geometry;
pub mod mask_io;
pub mod offset;
pub mod reward;
pub mod synth;
pub mod vocab;

pub use error::{Error, Result};
