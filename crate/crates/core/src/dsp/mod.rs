//! Reusable signal kernels.

pub mod bandpass;
pub mod calculus;
pub mod kalman;
pub mod peaks;
pub mod spectral;
pub mod ssa;

pub use bandpass::{bandpass_zero_phase, BandpassSpec};
pub use calculus::{differentiate, integrate};
pub use kalman::kalman_smooth;
pub use peaks::{detect_peaks, PeakTrain};
pub use spectral::{adapt_prior, spectral_rate, RateEstimate, SpectralOptions};
pub use ssa::{ssa_denoise, SsaSpec};
