//! Respiratory rate, tidal volume, quadrant fusion, regional volumes and
//! flow-volume loops from depth-derived series.
//!
//! Each ROI quadrant is bandpassed to the physiological band, denoised with
//! SSA, and judged valid per time point by its local peak-to-valley
//! displacement; the valid quadrants are averaged into the fused
//! respiratory signal. The volume signal multiplies the fused inlier depth
//! by the projected ROI area (area from a windowed mean depth, so the
//! area factor carries no breathing content of its own) and runs through
//! the same bandpass + SSA chain.

mod loops;

pub use loops::{flow_volume_loops, BreathSegment, ExclusionReason, LoopAnalysis, LoopConfig, RejectedBreath};

use crate::dsp::bandpass::{bandpass_zero_phase, BandpassSpec};
use crate::dsp::kalman::kalman_smooth;
use crate::dsp::peaks::{detect_peaks, PeakTrain};
use crate::dsp::spectral::{adapt_prior, spectral_rate, spectral_rate_per_window, RateEstimate, SpectralOptions};
use crate::dsp::ssa::{ssa_denoise_dense, SsaSpec};
use crate::error::{Error, Result};
use crate::model::{per_min_to_hz, CameraIntrinsics, GaussianPrior, KalmanParams, RoiGeometry, SampledSeries, Unit};

/// Four aligned per-quadrant depth streams (mm), missing where a quadrant
/// had no valid depth pixels.
#[derive(Debug, Clone)]
pub struct QuadrantStreams {
    pub start_time: f64,
    pub rate: f64,
    pub depth_mm: [Vec<Option<f64>>; 4],
}

impl QuadrantStreams {
    pub fn new(start_time: f64, rate: f64, depth_mm: [Vec<Option<f64>>; 4]) -> Result<Self> {
        let n = depth_mm[0].len();
        if depth_mm.iter().any(|q| q.len() != n) {
            return Err(Error::DimensionMismatch(
                "quadrant streams must share length".into(),
            ));
        }
        if !(rate > 0.0) {
            return Err(Error::InvalidParam("rate must be > 0".into()));
        }
        Ok(Self {
            start_time,
            rate,
            depth_mm,
        })
    }

    pub fn len(&self) -> usize {
        self.depth_mm[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn quadrant_series(&self, q: usize) -> SampledSeries {
        SampledSeries::new(
            self.start_time,
            self.rate,
            self.depth_mm[q].clone(),
            Unit::Millimeters,
        )
    }
}

/// Exclusion thresholds for breath qualification. Breaths above
/// `max(hard_max_ml, median_factor * median)` or below `min_ml` are left
/// out of the spread statistics; a peak qualifies when its amplitude is
/// within `qualify_sigmas` standard deviations of the median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreathExclusions {
    pub hard_max_ml: f64,
    pub median_factor: f64,
    pub min_ml: f64,
    pub qualify_sigmas: f64,
}

impl Default for BreathExclusions {
    fn default() -> Self {
        Self {
            hard_max_ml: 7.5,
            median_factor: 1.5,
            min_ml: 2.0,
            qualify_sigmas: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RespirationConfig {
    /// Bandpass corners, per-minute (the full neonatal range).
    pub band_per_min: (f64, f64),
    pub filter_order: usize,
    /// SSA components kept for the rate signal; higher harmonics carry the
    /// sharper parts of the breath shape.
    pub rate_ssa_components: usize,
    /// SSA components kept for the volume signal. The fundamental needs a
    /// sin/cos pair, so fewer than 2 halves the oscillation.
    pub volume_ssa_components: usize,
    /// SSA embedding window, seconds.
    pub ssa_window_s: f64,
    /// Physiological displacement range for quadrant validity (mm
    /// peak-to-valley, inside `validity_window_s`).
    pub validity_range_mm: (f64, f64),
    pub validity_window_s: f64,
    /// Estimation window and stride, seconds.
    pub window_s: f64,
    pub stride_s: f64,
    pub prior: GaussianPrior,
    pub adaptive_prior: bool,
    /// Kalman observation noise for the rate stream, breaths/min.
    pub kalman_r_per_min: f64,
    /// Kalman observation noise for tidal volume, ml.
    pub kalman_r_ml: f64,
    /// Window for the mean depth feeding the projected-area factor, s.
    pub area_window_s: f64,
    /// Peak detection on the displacement signal (mm).
    pub signal_prominence_mm: f64,
    /// Peak detection on the volume signal (ml).
    pub volume_prominence_ml: f64,
    pub min_peak_separation_s: f64,
    pub exclusions: BreathExclusions,
}

impl Default for RespirationConfig {
    fn default() -> Self {
        Self {
            band_per_min: (15.0, 150.0),
            filter_order: 7,
            rate_ssa_components: 5,
            volume_ssa_components: 2,
            ssa_window_s: 3.0,
            validity_range_mm: (0.05, 25.0),
            validity_window_s: 3.0,
            window_s: 60.0,
            stride_s: 1.0,
            prior: GaussianPrior {
                mean: 50.0,
                std: 15.0,
            },
            adaptive_prior: true,
            kalman_r_per_min: 20.0,
            kalman_r_ml: 2.0,
            area_window_s: 60.0,
            signal_prominence_mm: 0.02,
            volume_prominence_ml: 0.5,
            min_peak_separation_s: 0.3,
            exclusions: BreathExclusions::default(),
        }
    }
}

impl RespirationConfig {
    fn bandpass_spec(&self, rate: f64) -> Result<BandpassSpec> {
        BandpassSpec::new(
            self.filter_order,
            per_min_to_hz(self.band_per_min.0),
            per_min_to_hz(self.band_per_min.1),
            rate,
        )
    }

    fn rate_kalman(&self) -> KalmanParams {
        KalmanParams::with_paper_q(self.kalman_r_per_min, self.stride_s).expect("valid params")
    }

    fn volume_kalman(&self) -> KalmanParams {
        KalmanParams::with_paper_q(self.kalman_r_ml, self.stride_s).expect("valid params")
    }
}

/// Per-quadrant processing results: filtered displacement, validity and
/// the original raw depths.
#[derive(Debug, Clone)]
pub(crate) struct ProcessedQuadrants {
    pub start_time: f64,
    pub rate: f64,
    pub n: usize,
    pub filtered: [Option<Vec<f64>>; 4],
    pub valid: [Vec<bool>; 4],
}

pub(crate) fn process_quadrants(
    q: &QuadrantStreams,
    cfg: &RespirationConfig,
) -> Result<ProcessedQuadrants> {
    let n = q.len();
    let spec = cfg.bandpass_spec(q.rate)?;
    let ssa_window = ((cfg.ssa_window_s * q.rate).round() as usize).clamp(2, (n / 2).max(2));
    let validity_w = ((cfg.validity_window_s * q.rate).round() as usize).max(2);

    let mut filtered: [Option<Vec<f64>>; 4] = [None, None, None, None];
    let mut valid: [Vec<bool>; 4] = std::array::from_fn(|_| vec![false; n]);
    let mut any = false;

    for qi in 0..4 {
        let series = q.quadrant_series(qi);
        if series.present_count() == 0 {
            continue;
        }
        let (dense, was_missing) = series.fill_gaps()?;
        let dense_series =
            SampledSeries::from_values(q.start_time, q.rate, dense, Unit::Millimeters);
        let banded = bandpass_zero_phase(&dense_series, &spec)?;
        let banded_vals: Vec<f64> = banded.values.iter().map(|v| v.unwrap()).collect();
        let ssa_spec = SsaSpec::new(ssa_window, cfg.rate_ssa_components.min(ssa_window));
        let smooth = ssa_denoise_dense(&banded_vals, &ssa_spec)?;

        // Local peak-to-valley displacement within the validity window.
        let half = validity_w / 2;
        for i in 0..n {
            if was_missing[i] {
                continue;
            }
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let mut min = f64::MAX;
            let mut max = f64::MIN;
            for &v in &smooth[lo..hi] {
                min = min.min(v);
                max = max.max(v);
            }
            let range = max - min;
            valid[qi][i] = range >= cfg.validity_range_mm.0 && range <= cfg.validity_range_mm.1;
        }
        filtered[qi] = Some(smooth);
        any = true;
    }
    if !any {
        return Err(Error::NotEnoughData("all quadrants empty".into()));
    }
    Ok(ProcessedQuadrants {
        start_time: q.start_time,
        rate: q.rate,
        n,
        filtered,
        valid,
    })
}

/// Fused respiratory displacement signal (mm): per time point, the mean of
/// the quadrants judged valid; missing when none is.
pub fn respiratory_signal(q: &QuadrantStreams, cfg: &RespirationConfig) -> Result<SampledSeries> {
    let processed = process_quadrants(q, cfg)?;
    Ok(fuse_processed(&processed))
}

pub(crate) fn fuse_processed(p: &ProcessedQuadrants) -> SampledSeries {
    let mut out = Vec::with_capacity(p.n);
    for i in 0..p.n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for qi in 0..4 {
            if p.valid[qi][i] {
                if let Some(f) = &p.filtered[qi] {
                    sum += f[i];
                    count += 1;
                }
            }
        }
        out.push((count > 0).then(|| sum / count as f64));
    }
    SampledSeries::new(p.start_time, p.rate, out, Unit::Millimeters)
}

/// Mean of the valid quadrants' raw depths per time point (absolute mm).
fn fused_raw_depth(q: &QuadrantStreams, p: &ProcessedQuadrants) -> Vec<Option<f64>> {
    (0..p.n)
        .map(|i| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for qi in 0..4 {
                if p.valid[qi][i] {
                    if let Some(d) = q.depth_mm[qi][i] {
                        sum += d;
                        count += 1;
                    }
                }
            }
            (count > 0).then(|| sum / count as f64)
        })
        .collect()
}

/// Centered moving mean over present values; `None` when the window holds
/// nothing.
fn moving_mean(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let n = values.len();
    let half = window / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let mut sum = 0.0;
            let mut count = 0usize;
            for v in &values[lo..hi] {
                if let Some(x) = v {
                    sum += x;
                    count += 1;
                }
            }
            (count > 0).then(|| sum / count as f64)
        })
        .collect()
}

fn volume_from_depth(
    depth: &[Option<f64>],
    rect: &RoiGeometry,
    k: &CameraIntrinsics,
    start_time: f64,
    rate: f64,
    cfg: &RespirationConfig,
) -> Result<SampledSeries> {
    let n = depth.len();
    let area_window = ((cfg.area_window_s * rate).round() as usize).max(1);
    let smooth_z = moving_mean(depth, area_window);

    // V = Z (X2-X1)(Y2-Y1): corners projected at the windowed mean depth so
    // the area factor is breathing-free, the Z factor carries the motion.
    let mut raw_volume: Vec<Option<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        raw_volume.push(match (depth[i], smooth_z[i]) {
            (Some(z), Some(zbar)) => {
                let x1 = zbar * (rect.x1 as f64 - k.px) / k.fx;
                let x2 = zbar * (rect.x2 as f64 - k.px) / k.fx;
                let y1 = zbar * (rect.y1 as f64 - k.py) / k.fy;
                let y2 = zbar * (rect.y2 as f64 - k.py) / k.fy;
                let area = (x2 - x1) * (y2 - y1);
                Some(z * area / 1000.0) // mm^3 -> ml
            }
            _ => None,
        });
    }

    let series = SampledSeries::new(start_time, rate, raw_volume, Unit::Milliliters);
    let (dense, was_missing) = series.fill_gaps()?;
    let dense_series = SampledSeries::from_values(start_time, rate, dense, Unit::Milliliters);
    let banded = bandpass_zero_phase(&dense_series, &cfg.bandpass_spec(rate)?)?;
    let banded_vals: Vec<f64> = banded.values.iter().map(|v| v.unwrap()).collect();
    let window = ((cfg.ssa_window_s * rate).round() as usize).clamp(2, (n / 2).max(2));
    let ssa_spec = SsaSpec::new(window, cfg.volume_ssa_components.min(window));
    let smooth = ssa_denoise_dense(&banded_vals, &ssa_spec)?;
    let values = smooth
        .into_iter()
        .zip(was_missing)
        .map(|(v, miss)| (!miss).then_some(v))
        .collect();
    Ok(SampledSeries::new(start_time, rate, values, Unit::Milliliters))
}

/// Volume signal over the full ROI (ml, zero-mean after the bandpass).
pub fn volume_signal(
    q: &QuadrantStreams,
    roi: &RoiGeometry,
    k: &CameraIntrinsics,
    cfg: &RespirationConfig,
) -> Result<SampledSeries> {
    let processed = process_quadrants(q, cfg)?;
    let depth = fused_raw_depth(q, &processed);
    volume_from_depth(&depth, roi, k, q.start_time, q.rate, cfg)
}

/// Volume signal restricted to one quadrant's depth and projected area.
pub fn regional_volume_signal(
    q: &QuadrantStreams,
    region: usize,
    roi: &RoiGeometry,
    k: &CameraIntrinsics,
    cfg: &RespirationConfig,
) -> Result<SampledSeries> {
    if region >= 4 {
        return Err(Error::InvalidParam(format!("quadrant id {region} out of range")));
    }
    let processed = process_quadrants(q, cfg)?;
    let depth: Vec<Option<f64>> = (0..processed.n)
        .map(|i| {
            if processed.valid[region][i] {
                q.depth_mm[region][i]
            } else {
                None
            }
        })
        .collect();
    if depth.iter().all(|d| d.is_none()) {
        return Err(Error::NotEnoughData(format!(
            "quadrant {region} has no valid samples"
        )));
    }
    let rect = roi.quadrants()[region];
    volume_from_depth(&depth, &rect, k, q.start_time, q.rate, cfg)
}

/// Per-peak amplitudes: each peak paired with its adjacent valleys on the
/// amplitude series (`amps[i]` evaluated at the peak/valley indices found
/// on the detection series). A peak without any adjacent valley has no
/// defined amplitude and is dropped.
fn breath_amplitudes(train: &PeakTrain, amps: &SampledSeries) -> Vec<(usize, f64)> {
    #[derive(Clone, Copy)]
    enum Ev {
        Peak(usize),
        Valley(usize),
    }
    let mut events: Vec<Ev> = train
        .peaks
        .iter()
        .map(|&i| Ev::Peak(i))
        .chain(train.valleys.iter().map(|&i| Ev::Valley(i)))
        .collect();
    events.sort_by_key(|e| match e {
        Ev::Peak(i) | Ev::Valley(i) => *i,
    });

    let mut out = Vec::new();
    for (pos, ev) in events.iter().enumerate() {
        let Ev::Peak(p) = ev else { continue };
        let Some(peak_val) = amps.values.get(*p).copied().flatten() else {
            continue;
        };
        let mut drops = Vec::new();
        if pos > 0 {
            if let Ev::Valley(v) = events[pos - 1] {
                if let Some(val) = amps.values.get(v).copied().flatten() {
                    drops.push(peak_val - val);
                }
            }
        }
        if pos + 1 < events.len() {
            if let Ev::Valley(v) = events[pos + 1] {
                if let Some(val) = amps.values.get(v).copied().flatten() {
                    drops.push(peak_val - val);
                }
            }
        }
        if !drops.is_empty() {
            let amp = drops.iter().sum::<f64>() / drops.len() as f64;
            out.push((*p, amp));
        }
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Qualify breaths per the exclusion rules: amplitudes outside
/// `[min_ml, max(hard_max, factor * median)]` are excluded from the spread
/// estimate, and a peak counts when its amplitude lies within
/// `qualify_sigmas` standard deviations of the median.
fn qualified_breaths(breaths: &[(usize, f64)], ex: &BreathExclusions) -> Vec<(usize, f64)> {
    if breaths.is_empty() {
        return Vec::new();
    }
    let mut amps: Vec<f64> = breaths.iter().map(|(_, a)| *a).collect();
    let med = median(&mut amps);
    let upper = ex.hard_max_ml.max(ex.median_factor * med);
    let included: Vec<f64> = breaths
        .iter()
        .map(|(_, a)| *a)
        .filter(|&a| a >= ex.min_ml && a <= upper)
        .collect();
    if included.is_empty() {
        return Vec::new();
    }
    let mean = included.iter().sum::<f64>() / included.len() as f64;
    let std = if included.len() > 1 {
        (included.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (included.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    breaths
        .iter()
        .copied()
        .filter(|(_, a)| {
            *a >= ex.min_ml && *a <= upper && (*a - med).abs() <= ex.qualify_sigmas * std
        })
        .collect()
}

fn windowed<T>(
    n: usize,
    rate: f64,
    start_time: f64,
    window_s: f64,
    stride_s: f64,
    mut f: impl FnMut(usize, usize) -> Option<T>,
) -> (f64, f64, Vec<Option<T>>) {
    let wn = (window_s * rate).round() as usize;
    let stride = ((stride_s * rate).round() as usize).max(1);
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + wn <= n {
        out.push(f(start, start + wn));
        start += stride;
    }
    (start_time + window_s, rate / stride as f64, out)
}

/// Respiratory rate by counting qualifying peaks per window.
///
/// Peaks and valleys are found on the respiratory signal `s`; each peak's
/// tidal volume is measured on the aligned volume series `tv_context`, and
/// the stated exclusion rules decide which peaks count.
pub fn rate_by_peaks(
    s: &SampledSeries,
    tv_context: &SampledSeries,
    cfg: &RespirationConfig,
) -> Result<SampledSeries> {
    if s.len() != tv_context.len() || (s.rate - tv_context.rate).abs() > 1e-9 {
        return Err(Error::DimensionMismatch(
            "respiratory signal and volume context must be aligned".into(),
        ));
    }
    let train = detect_peaks(s, cfg.signal_prominence_mm, cfg.min_peak_separation_s);
    let breaths = breath_amplitudes(&train, tv_context);
    let qualified = qualified_breaths(&breaths, &cfg.exclusions);
    let (start, rate, values) = windowed(
        s.len(),
        s.rate,
        s.start_time,
        cfg.window_s,
        cfg.stride_s,
        |lo, hi| {
            let count = qualified.iter().filter(|(i, _)| *i >= lo && *i < hi).count();
            Some(count as f64 * 60.0 / cfg.window_s)
        },
    );
    Ok(SampledSeries::new(start, rate, values, Unit::BreathsPerMinute))
}

/// A rate estimate stream: the per-window estimates, the same values as a
/// series, and the Kalman-smoothed series.
#[derive(Debug, Clone)]
pub struct RateSeries {
    pub estimates: Vec<RateEstimate>,
    pub raw: SampledSeries,
    pub smoothed: SampledSeries,
}

pub(crate) fn estimates_to_series(
    estimates: &[RateEstimate],
    stride_s: f64,
    unit: Unit,
) -> SampledSeries {
    let start = estimates.first().map(|e| e.time).unwrap_or(0.0);
    SampledSeries::new(
        start,
        1.0 / stride_s,
        estimates.iter().map(|e| Some(e.rate)).collect(),
        unit,
    )
}

/// Respiratory rate via the windowed Fourier spectrum with an adaptive
/// Gaussian prior, Kalman-smoothed.
///
/// Raw (prior-free) window estimates feed the prior adaptation; once ten
/// raw measurements exist, every window — including the first ten,
/// re-estimated — uses the sharpened prior.
pub fn rate_by_fourier(s: &SampledSeries, cfg: &RespirationConfig) -> Result<RateSeries> {
    let opts = SpectralOptions::new(cfg.window_s, cfg.stride_s, cfg.band_per_min);
    let estimates = if cfg.adaptive_prior {
        let raw = spectral_rate(s, &opts, GaussianPrior::uniform(cfg.prior.mean))?;
        let valid: Vec<(usize, f64)> = raw
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.low_confidence)
            .map(|(i, e)| (i, e.rate))
            .collect();
        let total_valid = valid.len();
        spectral_rate_per_window(s, &opts, |w| {
            let upto: Vec<f64> = valid
                .iter()
                .filter(|(i, _)| *i < w)
                .map(|(_, r)| *r)
                .collect();
            let history: Vec<f64> = if upto.len() >= 10 {
                upto
            } else if total_valid >= 10 {
                // Warm start: the first windows reuse the earliest ten raw
                // measurements rather than running with the base prior.
                valid.iter().take(10).map(|(_, r)| *r).collect()
            } else {
                Vec::new()
            };
            adapt_prior(cfg.prior, &history).0
        })?
    } else {
        spectral_rate(s, &opts, cfg.prior)?
    };
    let raw = estimates_to_series(&estimates, cfg.stride_s, Unit::BreathsPerMinute);
    let smoothed = kalman_smooth(&raw, &cfg.rate_kalman());
    Ok(RateSeries {
        estimates,
        raw,
        smoothed,
    })
}

/// Tidal volume stream: per-window mean of qualifying peak-to-valley
/// amplitudes, raw and Kalman-smoothed.
#[derive(Debug, Clone)]
pub struct TidalVolumeSeries {
    pub raw: SampledSeries,
    pub smoothed: SampledSeries,
}

/// Mean qualifying peak-to-valley amplitude per window; windows without a
/// qualifying peak are missing and bridged by the Kalman stage.
pub fn tidal_volume(v: &SampledSeries, cfg: &RespirationConfig) -> Result<TidalVolumeSeries> {
    if v.is_empty() {
        return Err(Error::NotEnoughData("empty volume series".into()));
    }
    let train = detect_peaks(v, cfg.volume_prominence_ml, cfg.min_peak_separation_s);
    let breaths = breath_amplitudes(&train, v);
    let qualified = qualified_breaths(&breaths, &cfg.exclusions);
    let (start, rate, values) = windowed(
        v.len(),
        v.rate,
        v.start_time,
        cfg.window_s,
        cfg.stride_s,
        |lo, hi| {
            let amps: Vec<f64> = qualified
                .iter()
                .filter(|(i, _)| *i >= lo && *i < hi)
                .map(|(_, a)| *a)
                .collect();
            if amps.is_empty() {
                None
            } else {
                Some(amps.iter().sum::<f64>() / amps.len() as f64)
            }
        },
    );
    let raw = SampledSeries::new(start, rate, values, Unit::Milliliters);
    let smoothed = kalman_smooth(&raw, &cfg.volume_kalman());
    Ok(TidalVolumeSeries { raw, smoothed })
}

/// Regional tidal volume: the same pipeline restricted to one quadrant.
pub fn regional_tidal_volume(
    q: &QuadrantStreams,
    region: usize,
    roi: &RoiGeometry,
    k: &CameraIntrinsics,
    cfg: &RespirationConfig,
) -> Result<TidalVolumeSeries> {
    let v = regional_volume_signal(q, region, roi, k, cfg)?;
    tidal_volume(&v, cfg)
}
