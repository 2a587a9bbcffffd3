//! Non-contact neonatal vital-sign estimation.
//!
//! This crate turns per-frame RGB-D region measurements into heart rate,
//! respiratory rate, oxygen saturation, tidal volume and flow-volume loops,
//! together with the agreement statistics used to compare the estimates
//! against reference monitors. The stages are:
//!
//! 1. **frame** – per-frame work: skin segmentation, mask refinement,
//!    depth-histogram inlier selection, quadrant averaging and the
//!    pinhole pixel→world projection producing [`model::FrameSummary`] records.
//! 2. **dsp** – reusable kernels: zero-phase Butterworth bandpass, singular
//!    spectrum analysis, windowed spectral rate estimation with Gaussian
//!    priors, peak detection, constant-velocity Kalman smoothing,
//!    differentiation/integration.
//! 3. **respiration / cardio / oximetry** – the per-vital estimators.
//! 4. **evaluation** – MAE/MSE/coverage probability/Bland–Altman and the
//!    Mann–Whitney U test.
//! 5. **synth** – a deterministic physiological generator with exact labels,
//!    used as the verification oracle.
//!
//! All series processing operates on [`model::SampledSeries`], a uniformly
//! sampled series with first-class missing samples.

pub mod cardio;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod frame;
pub mod model;
pub mod oximetry;
pub mod pipeline;
pub mod respiration;
pub mod synth;

pub use error::{Error, Result};
