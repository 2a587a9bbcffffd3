//! Shared domain types, units and validation.
//!
//! Sampling rates are stored in Hz everywhere inside the crate; per-minute
//! quantities (breaths/min, bpm) appear only as series *values* and at I/O
//! boundaries, converted through [`per_min_to_hz`]/[`hz_to_per_min`].
//! Missing samples are first-class: a sample is `None` rather than a
//! sentinel value, because skin masks can legitimately be empty (e.g. under
//! phototherapy) and depth quadrants can be occluded.

use crate::error::{Error, Result};

/// Physical unit carried by a [`SampledSeries`]. Operations declare their
/// output unit; a unit never changes silently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Millimeters,
    Milliliters,
    MillilitersPerSecond,
    BeatsPerMinute,
    BreathsPerMinute,
    Percent,
    Dimensionless,
}

impl Unit {
    pub fn label(self) -> &'static str {
        match self {
            Unit::Millimeters => "mm",
            Unit::Milliliters => "ml",
            Unit::MillilitersPerSecond => "ml/s",
            Unit::BeatsPerMinute => "bpm",
            Unit::BreathsPerMinute => "breaths/min",
            Unit::Percent => "%",
            Unit::Dimensionless => "a.u.",
        }
    }
}

pub fn per_min_to_hz(per_min: f64) -> f64 {
    per_min / 60.0
}

pub fn hz_to_per_min(hz: f64) -> f64 {
    hz * 60.0
}

/// Uniformly sampled scalar time series. The universal DSP currency.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    /// Epoch-relative start time in seconds.
    pub start_time: f64,
    /// Samples per second, > 0.
    pub rate: f64,
    /// Samples; `None` marks an explicitly missing sample.
    pub values: Vec<Option<f64>>,
    pub unit: Unit,
}

impl SampledSeries {
    pub fn new(start_time: f64, rate: f64, values: Vec<Option<f64>>, unit: Unit) -> Self {
        Self {
            start_time,
            rate,
            values,
            unit,
        }
    }

    /// Series with no missing samples.
    pub fn from_values(start_time: f64, rate: f64, values: Vec<f64>, unit: Unit) -> Self {
        Self::new(start_time, rate, values.into_iter().map(Some).collect(), unit)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.rate
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.rate
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Dense copy of the values; `None` if any sample is missing.
    pub fn dense(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }

    /// Dense copy with gaps filled by linear interpolation between the
    /// nearest present neighbours (edges held constant), plus a mask of
    /// which samples were filled. Errors when no sample is present.
    pub fn fill_gaps(&self) -> Result<(Vec<f64>, Vec<bool>)> {
        let n = self.values.len();
        let mut out = vec![0.0; n];
        let mut filled = vec![false; n];
        let mut last: Option<(usize, f64)> = None;
        let mut any = false;
        for i in 0..n {
            if let Some(v) = self.values[i] {
                out[i] = v;
                any = true;
                if let Some((j, prev)) = last {
                    if i > j + 1 {
                        let span = (i - j) as f64;
                        for k in j + 1..i {
                            let t = (k - j) as f64 / span;
                            out[k] = prev + (v - prev) * t;
                            filled[k] = true;
                        }
                    }
                }
                last = Some((i, v));
            }
        }
        if !any {
            return Err(Error::InvalidSeries("all samples missing".into()));
        }
        // Hold edges.
        let first = out
            .iter()
            .zip(&self.values)
            .find(|(_, v)| v.is_some())
            .map(|(o, _)| *o)
            .unwrap();
        for i in 0..n {
            if self.values[i].is_some() {
                break;
            }
            out[i] = first;
            filled[i] = true;
        }
        if let Some((j, v)) = last {
            for k in j + 1..n {
                out[k] = v;
                filled[k] = true;
            }
        }
        Ok((out, filled))
    }

    /// Contiguous gap-free runs as `(start_index, values)`.
    pub fn present_runs(&self) -> Vec<(usize, Vec<f64>)> {
        let mut runs = Vec::new();
        let mut current: Option<(usize, Vec<f64>)> = None;
        for (i, v) in self.values.iter().enumerate() {
            match (v, current.as_mut()) {
                (Some(x), Some((_, vals))) => vals.push(*x),
                (Some(x), None) => current = Some((i, vec![*x])),
                (None, Some(_)) => runs.push(current.take().unwrap()),
                (None, None) => {}
            }
        }
        if let Some(run) = current {
            runs.push(run);
        }
        runs
    }

    /// Same shape and timing, new values and unit.
    pub fn with_values(&self, values: Vec<Option<f64>>, unit: Unit) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            start_time: self.start_time,
            rate: self.rate,
            values,
            unit,
        }
    }
}

/// Diagnostic check of the [`SampledSeries`] invariants. Returns an empty
/// list iff they all hold; each violation names the field and reason.
pub fn validate_series(s: &SampledSeries) -> Vec<String> {
    let mut violations = Vec::new();
    if !(s.rate > 0.0) || !s.rate.is_finite() {
        violations.push("rate must be > 0".to_string());
    }
    if !s.start_time.is_finite() {
        violations.push("start_time must be finite".to_string());
    }
    for (i, v) in s.values.iter().enumerate() {
        if let Some(x) = v {
            if !x.is_finite() {
                violations.push(format!(
                    "values[{i}] is non-finite without being flagged missing"
                ));
            }
        }
    }
    violations
}

/// Block-average `s` down to `target_rate`. Each output sample is the mean
/// of the source samples falling in its period; missing samples are
/// excluded from the mean and a fully-missing period yields a missing
/// sample. Only complete periods are emitted. Output unit is unchanged.
pub fn resample_mean(s: &SampledSeries, target_rate: f64) -> Result<SampledSeries> {
    if !(target_rate > 0.0) {
        return Err(Error::InvalidParam("target rate must be > 0".into()));
    }
    if target_rate > s.rate {
        return Err(Error::Upsampling {
            source_rate: s.rate,
            target_rate,
        });
    }
    let ratio = s.rate / target_rate;
    let out_len = (s.values.len() as f64 / ratio).floor() as usize;
    let mut out = Vec::with_capacity(out_len);
    for block in 0..out_len {
        // Source sample i belongs to block floor(i / ratio).
        let lo = (block as f64 * ratio).ceil() as usize;
        let hi = (((block + 1) as f64 * ratio).ceil() as usize).min(s.values.len());
        let mut sum = 0.0;
        let mut count = 0usize;
        for v in &s.values[lo..hi] {
            if let Some(x) = v {
                sum += x;
                count += 1;
            }
        }
        out.push(if count > 0 { Some(sum / count as f64) } else { None });
    }
    Ok(SampledSeries::new(s.start_time, target_rate, out, s.unit))
}

/// Axis-aligned region of interest in pixel coordinates.
/// `x2`/`y2` are exclusive, so `x2 - x1` is the width in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiGeometry {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl RoiGeometry {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self> {
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::InvalidParam(format!(
                "ROI must satisfy x1 < x2 and y1 < y2, got ({x1},{y1})..({x2},{y2})"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    pub fn pixel_area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x1 && x < self.x2 && y >= self.y1 && y < self.y2
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.x2 <= width && self.y2 <= height
    }

    /// Two axis-aligned bisections. Odd dimensions give the extra
    /// column/row to the right/lower quadrants. Order:
    /// `[top-left, top-right, bottom-left, bottom-right]`.
    pub fn quadrants(&self) -> [RoiGeometry; 4] {
        let mx = self.x1 + self.width() / 2;
        let my = self.y1 + self.height() / 2;
        [
            RoiGeometry { x1: self.x1, y1: self.y1, x2: mx, y2: my },
            RoiGeometry { x1: mx, y1: self.y1, x2: self.x2, y2: my },
            RoiGeometry { x1: self.x1, y1: my, x2: mx, y2: self.y2 },
            RoiGeometry { x1: mx, y1: my, x2: self.x2, y2: self.y2 },
        ]
    }
}

/// Pinhole camera calibration parameters (pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub px: f64,
    pub py: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, px: f64, py: f64) -> Result<Self> {
        if !(fx > 0.0) || !(fy > 0.0) {
            return Err(Error::InvalidParam("focal lengths must be > 0".into()));
        }
        Ok(Self { fx, fy, px, py })
    }
}

/// One frame's spatially averaged measurements. Channel means are taken
/// over the skin mask inside the ROI and are `None` when no skin pixel was
/// found; depth fields are independent of the colour path.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSummary {
    /// Seconds, epoch-relative.
    pub timestamp: f64,
    pub roi: RoiGeometry,
    /// Mean inlier depth per quadrant (mm); `None` when the quadrant has no
    /// valid depth pixel.
    pub quadrant_depth_mm: [Option<f64>; 4],
    pub quadrant_valid_count: [u32; 4],
    pub mean_r: Option<f64>,
    pub mean_g: Option<f64>,
    pub mean_b: Option<f64>,
    pub mean_ir: Option<f64>,
    /// ROI-wide inlier depth mean (mm).
    pub mean_depth_mm: Option<f64>,
}

impl FrameSummary {
    /// Contract check mirroring the type invariants.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for q in 0..4 {
            match (self.quadrant_depth_mm[q], self.quadrant_valid_count[q]) {
                (Some(d), c) if c > 0 => {
                    if !(d > 0.0) {
                        v.push(format!("quadrant {q}: depth mean must be positive"));
                    }
                }
                (Some(_), 0) => v.push(format!("quadrant {q}: depth mean with zero count")),
                (None, c) if c > 0 => {
                    v.push(format!("quadrant {q}: count > 0 but depth missing"))
                }
                _ => {}
            }
        }
        v
    }
}

/// Gaussian prior over a physiological rate, in per-minute units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrior {
    pub mean: f64,
    pub std: f64,
}

impl GaussianPrior {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(Error::InvalidParam("prior std must be > 0".into()));
        }
        Ok(Self { mean, std })
    }

    /// Uninformative prior: constant density over the whole axis.
    pub fn uniform(mean: f64) -> Self {
        Self {
            mean,
            std: f64::INFINITY,
        }
    }

    /// Unnormalised density. An infinite std yields 1 everywhere, which
    /// makes the posterior argmax collapse to the raw likelihood argmax.
    pub fn density(&self, x: f64) -> f64 {
        if self.std.is_infinite() {
            1.0
        } else {
            let z = (x - self.mean) / self.std;
            (-0.5 * z * z).exp()
        }
    }
}

/// Constant-velocity Kalman filter parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    /// 2×2 process-noise matrix, (unit/step)².
    pub q: [[f64; 2]; 2],
    /// Observation-noise standard deviation in output units.
    pub r_std: f64,
    /// Step seconds.
    pub dt: f64,
}

impl KalmanParams {
    pub fn new(q: [[f64; 2]; 2], r_std: f64, dt: f64) -> Result<Self> {
        if (q[0][1] - q[1][0]).abs() > 1e-12 {
            return Err(Error::InvalidParam("Q must be symmetric".into()));
        }
        // PSD for a symmetric 2×2: nonnegative diagonal and determinant.
        if q[0][0] < 0.0 || q[1][1] < 0.0 || q[0][0] * q[1][1] - q[0][1] * q[1][0] < -1e-12 {
            return Err(Error::InvalidParam("Q must be positive semidefinite".into()));
        }
        if !(r_std > 0.0) {
            return Err(Error::InvalidParam("r_std must be > 0".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParam("dt must be > 0".into()));
        }
        Ok(Self { q, r_std, dt })
    }

    /// The process noise used throughout the pipeline.
    pub fn with_paper_q(r_std: f64, dt: f64) -> Result<Self> {
        Self::new([[1e-4, 0.0], [0.0, 1e-5]], r_std, dt)
    }
}
