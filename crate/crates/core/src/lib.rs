//! Own-voice enhancement for a head-worn five-microphone array with a
//! dynamically occluded microphone.
//!
//! The crate provides the full processing chain needed to study occlusion
//! mitigation for MVDR beamforming:
//!
//! - [`wola`]: weighted overlap-add STFT analysis/synthesis,
//! - [`scene`]: synthetic acoustic scenes (nearfield own-voice propagation,
//!   diffuse noise from plane-wave superposition, occlusion imposition,
//!   SNR-controlled mixing),
//! - [`detect`]: oracle voice-activity and occlusion-detection flags plus
//!   controlled VAD corruption,
//! - [`estimation`]: VAD-gated recursive covariance tracking (single-state and
//!   occlusion-switched dual-state) and GEVD power-iteration RTF estimation,
//! - [`beamform`]: MVDR weights and the three processing strategies
//!   (adaptive, switching, hybrid switching-adaptive),
//! - [`metrics`]: SNR improvement and own-voice distortion on time-domain
//!   signals during speech activity.
//!
//! With the default `parallel` feature, per-bin and per-scene loops run on
//! rayon; without it everything falls back to sequential iteration with
//! identical results.

pub mod beamform;
pub mod detect;
pub mod error;
mod exec;
pub mod estimation;
pub mod linalg;
pub mod metrics;
pub mod scene;
pub mod wav;
pub mod wola;

pub use error::{Error, Result};
