//! Windowed Fourier rate estimation with a Gaussian prior.
//!
//! Each window is mean-subtracted, Hamming-tapered and zero-padded to at
//! least 0.5/min frequency resolution. The magnitude spectrum acts as the
//! likelihood: bins in the physiological band whose magnitude reaches a
//! fraction of the in-band maximum are candidate peaks, and the posterior
//! argmax over candidates (magnitude × prior density) picks the rate. The
//! candidate gate keeps a distant spectral peak from losing to prior-scaled
//! noise while preserving the prior's tie-breaking role between comparable
//! peaks. Windows with an essentially flat spectrum (max below a multiple
//! of the in-band median) fall back to the prior mean, flagged
//! low-confidence.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{hz_to_per_min, per_min_to_hz, GaussianPrior, SampledSeries};

/// One windowed rate estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    /// Window end time, seconds.
    pub time: f64,
    /// Per-minute rate.
    pub rate: f64,
    /// In-band max/median magnitude ratio; 0 for degenerate windows.
    pub posterior_peak: f64,
    /// True when the spectrum was degenerate and the prior mean was used.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub window_s: f64,
    pub stride_s: f64,
    /// Search band in per-minute units (lo, hi).
    pub band_per_min: (f64, f64),
    /// Zero-padding target for the frequency grid, per-minute.
    pub resolution_per_min: f64,
    /// Candidate gate: bins with magnitude >= fraction * in-band max.
    pub gate_fraction: f64,
    /// Degenerate when in-band max < ratio * in-band median.
    pub degenerate_ratio: f64,
    /// Windows with more than this fraction missing are degenerate.
    pub max_missing: f64,
}

impl SpectralOptions {
    pub fn new(window_s: f64, stride_s: f64, band_per_min: (f64, f64)) -> Self {
        Self {
            window_s,
            stride_s,
            band_per_min,
            resolution_per_min: 0.5,
            gate_fraction: 1.0 / 3.0,
            degenerate_ratio: 3.0,
            max_missing: 0.25,
        }
    }
}

/// Rate estimates with a fixed prior.
pub fn spectral_rate(
    s: &SampledSeries,
    opts: &SpectralOptions,
    prior: GaussianPrior,
) -> Result<Vec<RateEstimate>> {
    spectral_rate_per_window(s, opts, |_| prior)
}

/// Rate estimates with a per-window prior (window index → prior).
pub fn spectral_rate_per_window(
    s: &SampledSeries,
    opts: &SpectralOptions,
    mut prior_for: impl FnMut(usize) -> GaussianPrior,
) -> Result<Vec<RateEstimate>> {
    let rate = s.rate;
    let w = (opts.window_s * rate).round() as usize;
    if w < 64 {
        return Err(Error::InvalidParam(format!(
            "spectral window must span >= 64 samples, got {w}"
        )));
    }
    if w > s.len() {
        return Err(Error::TooShort {
            need: w,
            have: s.len(),
        });
    }
    let stride = ((opts.stride_s * rate).round() as usize).max(1);

    let res_hz = per_min_to_hz(opts.resolution_per_min);
    let min_nfft = (rate / res_hz).ceil() as usize;
    let nfft = w.max(min_nfft).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(nfft);

    let (lo_hz, hi_hz) = (
        per_min_to_hz(opts.band_per_min.0),
        per_min_to_hz(opts.band_per_min.1),
    );
    let bin_hz = rate / nfft as f64;
    let bin_lo = (lo_hz / bin_hz).ceil() as usize;
    let bin_hi = ((hi_hz / bin_hz).floor() as usize).min(nfft / 2);
    if bin_lo >= bin_hi {
        return Err(Error::InvalidParam("empty spectral band".into()));
    }

    let hamming: Vec<f64> = (0..w)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (w - 1) as f64).cos())
        .collect();

    let mut out = Vec::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut window_index = 0usize;
    let mut start = 0usize;
    while start + w <= s.len() {
        let prior = prior_for(window_index);
        let time = s.start_time + (start + w) as f64 / rate;
        let segment = &s.values[start..start + w];
        let missing = segment.iter().filter(|v| v.is_none()).count();
        if (missing as f64) > opts.max_missing * w as f64 {
            out.push(RateEstimate {
                time,
                rate: prior.mean,
                posterior_peak: 0.0,
                low_confidence: true,
            });
        } else {
            let present: Vec<f64> = segment.iter().filter_map(|v| *v).collect();
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            for (i, v) in segment.iter().enumerate() {
                let x = v.unwrap_or(mean) - mean;
                buf[i] = Complex64::new(x * hamming[i], 0.0);
            }
            for v in buf.iter_mut().skip(w) {
                *v = Complex64::new(0.0, 0.0);
            }
            fft.process(&mut buf);

            let mags: Vec<f64> = (bin_lo..=bin_hi).map(|i| buf[i].norm()).collect();
            let max = mags.iter().copied().fold(0.0f64, f64::max);
            let mut sorted = mags.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = sorted[sorted.len() / 2];

            if max <= 0.0 || max < opts.degenerate_ratio * median {
                out.push(RateEstimate {
                    time,
                    rate: prior.mean,
                    posterior_peak: if median > 0.0 { max / median } else { 0.0 },
                    low_confidence: true,
                });
            } else {
                let gate = opts.gate_fraction * max;
                let mut best = f64::MIN;
                let mut best_bin = bin_lo;
                for (off, &mag) in mags.iter().enumerate() {
                    if mag < gate {
                        continue;
                    }
                    let f_hz = (bin_lo + off) as f64 * bin_hz;
                    let posterior = mag * prior.density(hz_to_per_min(f_hz));
                    if posterior > best {
                        best = posterior;
                        best_bin = bin_lo + off;
                    }
                }
                out.push(RateEstimate {
                    time,
                    rate: hz_to_per_min(best_bin as f64 * bin_hz),
                    posterior_peak: max / median.max(f64::MIN_POSITIVE),
                    low_confidence: false,
                });
            }
        }
        window_index += 1;
        start += stride;
    }
    Ok(out)
}

/// Quantisation floor for the history std: raw estimates land on the
/// spectral grid, so identical readings would otherwise collapse the prior.
const HISTORY_STD_FLOOR_PER_MIN: f64 = 0.5;

/// Sharpen a prior with the sample statistics of at least ten raw rate
/// measurements: the product of the two Gaussian densities, renormalised.
/// With fewer than ten measurements the prior is returned unchanged and
/// the flag is false.
pub fn adapt_prior(prior: GaussianPrior, history: &[f64]) -> (GaussianPrior, bool) {
    if history.len() < 10 {
        return (prior, false);
    }
    let n = history.len() as f64;
    let mean = history.iter().sum::<f64>() / n;
    let var = history.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt().max(HISTORY_STD_FLOOR_PER_MIN);

    if prior.std.is_infinite() {
        return (GaussianPrior { mean, std }, true);
    }
    let v1 = prior.std * prior.std;
    let v2 = std * std;
    let post_mean = (prior.mean * v2 + mean * v1) / (v1 + v2);
    let post_var = v1 * v2 / (v1 + v2);
    (
        GaussianPrior {
            mean: post_mean,
            std: post_var.sqrt(),
        },
        true,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Unit;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sine_series(freq_hz: f64, rate: f64, n: usize) -> SampledSeries {
        let vals = (0..n)
            .map(|i| (2.0 * PI * freq_hz * i as f64 / rate).sin())
            .collect();
        SampledSeries::from_values(0.0, rate, vals, Unit::Millimeters)
    }

    #[test]
    fn pure_tone_recovered() {
        let s = sine_series(1.0, 30.0, 30 * 120);
        let opts = SpectralOptions::new(60.0, 1.0, (15.0, 150.0));
        let prior = GaussianPrior::new(50.0, 15.0).unwrap();
        let est = spectral_rate(&s, &opts, prior).unwrap();
        assert!(!est.is_empty());
        for e in &est {
            assert!(!e.low_confidence);
            assert!((e.rate - 60.0).abs() <= 0.5, "rate {}", e.rate);
        }
    }

    #[test]
    fn prior_breaks_tie_between_equal_tones() {
        // 50/min and 120/min with equal magnitude; prior N(50, 15) prefers
        // the near-mean tone since the likelihoods match.
        let rate = 30.0;
        let n = 30 * 90;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                (2.0 * PI * 50.0 / 60.0 * t).sin() + (2.0 * PI * 120.0 / 60.0 * t).sin()
            })
            .collect();
        let s = SampledSeries::from_values(0.0, rate, vals, Unit::Millimeters);
        let opts = SpectralOptions::new(60.0, 5.0, (15.0, 150.0));
        let prior = GaussianPrior::new(50.0, 15.0).unwrap();
        for e in spectral_rate(&s, &opts, prior).unwrap() {
            assert!((e.rate - 50.0).abs() <= 1.0, "rate {}", e.rate);
        }
    }

    #[test]
    fn constant_series_falls_back_to_prior_mean() {
        let s = SampledSeries::from_values(0.0, 30.0, vec![2.0; 30 * 70], Unit::Millimeters);
        let opts = SpectralOptions::new(60.0, 1.0, (15.0, 150.0));
        let prior = GaussianPrior::new(50.0, 15.0).unwrap();
        for e in spectral_rate(&s, &opts, prior).unwrap() {
            assert!(e.low_confidence);
            assert_eq!(e.rate, 50.0);
        }
    }

    #[test]
    fn uniform_prior_equals_raw_argmax() {
        let rate = 30.0;
        let n = 30 * 80;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                (2.0 * PI * 1.8 * t).sin() + 0.6 * (2.0 * PI * 0.7 * t).sin()
            })
            .collect();
        let s = SampledSeries::from_values(0.0, rate, vals, Unit::Millimeters);
        let opts = SpectralOptions::new(60.0, 2.0, (15.0, 150.0));
        let uniform = GaussianPrior::uniform(50.0);
        // The dominant tone is 1.8 Hz = 108/min; a neutral prior must not
        // drag the estimate toward its mean.
        for e in spectral_rate(&s, &opts, uniform).unwrap() {
            assert!((e.rate - 108.0).abs() <= 0.5, "rate {}", e.rate);
        }
    }

    #[test]
    fn window_longer_than_series_errors() {
        let s = sine_series(1.0, 30.0, 100);
        let opts = SpectralOptions::new(60.0, 1.0, (15.0, 150.0));
        assert!(matches!(
            spectral_rate(&s, &opts, GaussianPrior::uniform(50.0)),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn adapt_prior_matches_gaussian_product_oracle() {
        let prior = GaussianPrior::new(50.0, 15.0).unwrap();
        // History drawn to have sample mean 80, sample std 5 exactly:
        // symmetric values around 80.
        let history: Vec<f64> = vec![
            75.0, 85.0, 76.0, 84.0, 77.0, 83.0, 78.0, 82.0, 74.551, 85.449,
        ];
        let n = history.len() as f64;
        let mu2 = history.iter().sum::<f64>() / n;
        let s2 = (history.iter().map(|x| (x - mu2).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let (post, adapted) = adapt_prior(prior, &history);
        assert!(adapted);
        let v1 = 15.0f64.powi(2);
        let v2 = s2 * s2;
        assert_relative_eq!(post.mean, (50.0 * v2 + mu2 * v1) / (v1 + v2), epsilon = 1e-12);
        assert_relative_eq!(post.std, (v1 * v2 / (v1 + v2)).sqrt(), epsilon = 1e-12);
        assert!(post.mean > 50.0 && post.mean < mu2 + 1.0);
        assert!((post.mean - mu2).abs() < (post.mean - 50.0).abs());
    }

    #[test]
    fn adapt_prior_centered_history_shrinks_std() {
        let prior = GaussianPrior::new(50.0, 15.0).unwrap();
        let history = vec![50.0; 12];
        let (post, adapted) = adapt_prior(prior, &history);
        assert!(adapted);
        assert_relative_eq!(post.mean, 50.0, epsilon = 1e-9);
        assert!(post.std < prior.std);
    }

    #[test]
    fn adapt_prior_requires_ten_measurements() {
        let prior = GaussianPrior::new(50.0, 15.0).unwrap();
        let history = vec![80.0; 9];
        let (post, adapted) = adapt_prior(prior, &history);
        assert!(!adapted);
        assert_eq!(post, prior);
    }

    #[test]
    fn adapt_prior_never_increases_std() {
        let prior = GaussianPrior::new(50.0, 15.0).unwrap();
        for spread in [0.1, 1.0, 5.0, 30.0, 200.0] {
            let history: Vec<f64> = (0..20).map(|i| 60.0 + spread * (i as f64 - 9.5)).collect();
            let (post, _) = adapt_prior(prior, &history);
            assert!(post.std <= prior.std + 1e-12, "spread {spread}: {}", post.std);
        }
    }
}
