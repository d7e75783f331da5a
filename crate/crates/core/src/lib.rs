//! Multi-sensor sit-to-stand (STS) motion analysis.
//!
//! The crate turns skeleton streams (radar-derived or depth-camera) and
//! wearable gyroscope streams into sagittal joint angles, segments STS
//! repetitions, extracts six kinematic features per repetition and measures
//! cross-sensor agreement (ICC, Bland–Altman). A point-scatterer FMCW radar
//! simulator and a synthetic STS motion generator serve as verification
//! oracles.
//!
//! Module map:
//!
//! - [`model`]: joint set, hierarchy, T-pose, timestamped containers
//! - [`fmcw`]: FMCW chirp synthesis, range/Doppler/angle processing, CFAR
//! - [`kinematics`]: Rodrigues IK, Z-X-Y Euler decomposition, forward kinematics
//! - [`dsp`]: Butterworth filtfilt, Whittaker smoothing, resampling, derivatives
//! - [`sync`]: wearable timestamp reconstruction and cross-correlation lag
//! - [`sts`]: analysis signals, peak detection, segmentation, features, matching
//! - [`stats`]: Z-score outliers, two-way ICC, Bland–Altman, agreement tables
//! - [`synth`]: deterministic synthetic STS recordings with ground truth
//! - [`io`] and [`pipeline`]: file formats and the batch driver

pub mod dsp;
pub mod error;
pub mod fmcw;
pub mod io;
pub mod kinematics;
pub mod model;
pub mod pipeline;
pub mod stats;
pub mod sts;
pub mod synth;
pub mod sync;

pub use error::{Result, StsError};
