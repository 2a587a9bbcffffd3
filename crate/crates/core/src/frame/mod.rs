//! Per-frame stages: skin segmentation, mask refinement, depth inlier
//! selection, quadrant averaging and pixel→world projection.
//!
//! All operations are pure per-frame functions; frames may be processed in
//! parallel and re-ordered by timestamp before the time-series stages.

mod morphology;
mod skin;

pub use morphology::refine_mask;
pub use skin::{skin_mask_colorspace, ColorSpace, SkinThresholds};

use crate::error::{Error, Result};
use crate::model::{CameraIntrinsics, FrameSummary, RoiGeometry};

/// One RGB-D frame. Depth and infrared are optional 16-bit planes sharing
/// the RGB dimensions; a depth of 0 means "no infrared return" and is
/// treated as invalid everywhere.
#[derive(Debug, Clone)]
pub struct RasterFrame {
    pub width: u32,
    pub height: u32,
    pub r: Vec<u8>,
    pub g: Vec<u8>,
    pub b: Vec<u8>,
    pub ir: Option<Vec<u16>>,
    /// Millimetres; 0 = invalid.
    pub depth: Option<Vec<u16>>,
}

impl RasterFrame {
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pixel_count();
        for (name, len) in [("r", self.r.len()), ("g", self.g.len()), ("b", self.b.len())] {
            if len != n {
                return Err(Error::DimensionMismatch(format!(
                    "channel {name} has {len} pixels, frame is {}x{}",
                    self.width, self.height
                )));
            }
        }
        for (name, plane) in [("ir", &self.ir), ("depth", &self.depth)] {
            if let Some(p) = plane {
                if p.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "plane {name} has {} pixels, frame is {}x{}",
                        p.len(),
                        self.width,
                        self.height
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-pixel binary mask matching a frame's dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[(y * self.width + x) as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// A point in camera-centred world coordinates, millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Pinhole back-projection of a pixel at depth `z_mm`:
/// `X = Z (x - px) / fx`, `Y = Z (y - py) / fy`.
pub fn project_to_world(
    x: f64,
    y: f64,
    z_mm: f64,
    k: &CameraIntrinsics,
) -> Result<WorldPoint> {
    if !(z_mm > 0.0) {
        return Err(Error::NonPositiveDepth(z_mm));
    }
    Ok(WorldPoint {
        x: z_mm * (x - k.px) / k.fx,
        y: z_mm * (y - k.py) / k.fy,
        z: z_mm,
    })
}

/// Histogram bin width for the depth mode (mm).
pub const DEPTH_BIN_MM: f64 = 5.0;

/// Default tolerance around the modal depth (mm).
pub const DEPTH_TOLERANCE_MM: f64 = 25.0;

/// Select ROI pixels whose depth lies within `tol_mm` of the modal depth.
///
/// Nonzero ROI depths are histogrammed in [`DEPTH_BIN_MM`] bins; pixels
/// deviating more than `tol_mm` from the modal bin centre (echoing blankets,
/// equipment or limbs rather than the torso) are excluded, as are all
/// zero-depth pixels. Errors with [`Error::EmptyRoi`] when the ROI has no
/// nonzero depth at all, which callers flag as a missing frame.
pub fn depth_inliers(frame: &RasterFrame, roi: &RoiGeometry, tol_mm: f64) -> Result<BinaryMask> {
    let depth = frame
        .depth
        .as_ref()
        .ok_or_else(|| Error::InvalidParam("frame has no depth plane".into()))?;
    if !roi.fits_in(frame.width, frame.height) {
        return Err(Error::DimensionMismatch(format!(
            "ROI ({},{})..({},{}) outside {}x{} frame",
            roi.x1, roi.y1, roi.x2, roi.y2, frame.width, frame.height
        )));
    }

    let mut histogram: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    for y in roi.y1..roi.y2 {
        for x in roi.x1..roi.x2 {
            let d = depth[frame.index(x, y)];
            if d > 0 {
                *histogram.entry((d as f64 / DEPTH_BIN_MM) as u32).or_insert(0) += 1;
            }
        }
    }
    let modal_bin = histogram
        .iter()
        .max_by_key(|(bin, count)| (**count, std::cmp::Reverse(**bin)))
        .map(|(bin, _)| *bin)
        .ok_or(Error::EmptyRoi)?;
    let modal_centre = (modal_bin as f64 + 0.5) * DEPTH_BIN_MM;

    let mut mask = BinaryMask::new(frame.width, frame.height);
    for y in roi.y1..roi.y2 {
        for x in roi.x1..roi.x2 {
            let d = depth[frame.index(x, y)];
            if d > 0 && (d as f64 - modal_centre).abs() <= tol_mm {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

/// Spatially average a frame into a [`FrameSummary`].
///
/// Channel means run over `skin ∩ ROI` and are missing when that set is
/// empty; depth means run over the inlier mask, split into the ROI's four
/// quadrants. The colour and depth paths are independent.
pub fn summarize_frame(
    frame: &RasterFrame,
    roi: &RoiGeometry,
    skin: &BinaryMask,
    depth_in: &BinaryMask,
    timestamp: f64,
) -> Result<FrameSummary> {
    frame.validate()?;
    if skin.width != frame.width
        || skin.height != frame.height
        || depth_in.width != frame.width
        || depth_in.height != frame.height
    {
        return Err(Error::DimensionMismatch(
            "masks must match frame dimensions".into(),
        ));
    }

    let mut sum = [0.0f64; 4]; // r, g, b, ir
    let mut n_color = 0u64;
    let mut n_ir = 0u64;
    for y in roi.y1..roi.y2 {
        for x in roi.x1..roi.x2 {
            if !skin.get(x, y) {
                continue;
            }
            let i = frame.index(x, y);
            sum[0] += frame.r[i] as f64;
            sum[1] += frame.g[i] as f64;
            sum[2] += frame.b[i] as f64;
            n_color += 1;
            if let Some(ir) = &frame.ir {
                sum[3] += ir[i] as f64;
                n_ir += 1;
            }
        }
    }

    let mut quadrant_depth_mm = [None; 4];
    let mut quadrant_valid_count = [0u32; 4];
    let mut roi_sum = 0.0f64;
    let mut roi_count = 0u64;
    if let Some(depth) = &frame.depth {
        for (q, rect) in roi.quadrants().iter().enumerate() {
            let mut acc = 0.0f64;
            let mut count = 0u32;
            for y in rect.y1..rect.y2 {
                for x in rect.x1..rect.x2 {
                    if depth_in.get(x, y) {
                        let d = depth[frame.index(x, y)] as f64;
                        acc += d;
                        count += 1;
                    }
                }
            }
            quadrant_valid_count[q] = count;
            if count > 0 {
                quadrant_depth_mm[q] = Some(acc / count as f64);
                roi_sum += acc;
                roi_count += count as u64;
            }
        }
    }

    Ok(FrameSummary {
        timestamp,
        roi: *roi,
        quadrant_depth_mm,
        quadrant_valid_count,
        mean_r: (n_color > 0).then(|| sum[0] / n_color as f64),
        mean_g: (n_color > 0).then(|| sum[1] / n_color as f64),
        mean_b: (n_color > 0).then(|| sum[2] / n_color as f64),
        mean_ir: (n_ir > 0).then(|| sum[3] / n_ir as f64),
        mean_depth_mm: (roi_count > 0).then(|| roi_sum / roi_count as f64),
    })
}
