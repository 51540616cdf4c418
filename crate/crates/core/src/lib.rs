//! Motor-imagery EEG decoding and robot control.
//!
//! The crate covers the whole path from a 14-channel EEG window to a
//! simulated robot pose:
//!
//! * [`signal`]: window type, band table, zero-phase Butterworth band-pass,
//!   z-score normalization and amplitude gating.
//! * [`features`]: Welch band powers, sliding-window statistics and
//!   Daubechies wavelet energies packed into a 182-slot [`features::FeatureVector`].
//! * [`synth`]: deterministic five-class synthetic generator, datasets and
//!   stratified splits.
//! * [`model`]: small transformer classifier with hand-written backprop and Adam.
//! * [`command`]: leaky-integrator trigger and combo resolution.
//! * [`robot`]: waypoint trajectories driven through first-order servos.
//! * [`pipeline`]: training stage, decode loop, session logs and the
//!   line-delimited JSON control service.

pub mod command;
pub mod error;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod robot;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
