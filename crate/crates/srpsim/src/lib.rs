//! Subband-to-RB precoder upsampling simulator.
//!
//! A gNB-side study of codebook precoder feedback (Type I/II/eType II), the
//! UL-CSI-assisted super-resolution upsampler (SRPNet) with its deterministic
//! delay-domain core, and a PDP-based switch between the upsampler and plain
//! linear interpolation, evaluated on a synthetic FDD multipath channel
//! generator.

pub mod channel;
pub mod codebook;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod switch;
pub mod upsample;

pub use error::{Result, SimError};
