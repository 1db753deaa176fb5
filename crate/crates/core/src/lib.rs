//! Tell-tale watermarks: reference pattern synthesis, parameterised
//! transformation chains, extraction channels and explanatory reasoning that
//! recovers which chain was applied to an image.

pub mod channel;
pub mod cli;
pub mod color;
pub mod error;
pub mod filter;
pub mod harness;
pub mod image;
pub mod io;
pub mod metrics;
pub mod patterns;
pub mod reasoner;
pub mod transforms;

pub use error::{Error, Result};
pub use image::Image;
