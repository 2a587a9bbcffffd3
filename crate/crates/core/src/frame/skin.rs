//! Colour-space skin classification.
//!
//! A pixel is skin when it falls inside the configured box in the chosen
//! colour space. The pipeline intersects a YCbCr mask and an HSV mask and
//! then refines the result morphologically (see
//! [`refine_mask`](super::refine_mask)).

use super::{BinaryMask, RasterFrame};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    YCbCr,
    Hsv,
}

/// Threshold boxes for both colour spaces. The defaults are widely used
/// skin ranges; every bound is configurable because lighting conditions
/// shift them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkinThresholds {
    /// Minimum luma (0–255).
    pub y_min: f64,
    /// Blue-difference chroma range (0–255).
    pub cb: (f64, f64),
    /// Red-difference chroma range (0–255).
    pub cr: (f64, f64),
    /// Hue range, degrees.
    pub hue: (f64, f64),
    /// Saturation range (0–1).
    pub sat: (f64, f64),
    /// Minimum value/brightness (0–1).
    pub val_min: f64,
}

impl Default for SkinThresholds {
    fn default() -> Self {
        Self {
            y_min: 16.0,
            cb: (77.0, 127.0),
            cr: (133.0, 173.0),
            hue: (0.0, 50.0),
            sat: (0.18, 0.68),
            val_min: 0.35,
        }
    }
}

/// BT.601 full-range RGB → (Y, Cb, Cr), all on the 0–255 scale.
pub fn rgb_to_ycbcr(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    (y, cb, cr)
}

/// RGB → (hue degrees, saturation 0–1, value 0–1).
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

/// Per-pixel threshold test in the named colour space.
pub fn skin_mask_colorspace(
    frame: &RasterFrame,
    space: ColorSpace,
    thresholds: &SkinThresholds,
) -> Result<BinaryMask> {
    frame.validate()?;
    let mut mask = BinaryMask::new(frame.width, frame.height);
    for i in 0..frame.pixel_count() {
        let (r, g, b) = (frame.r[i], frame.g[i], frame.b[i]);
        let skin = match space {
            ColorSpace::YCbCr => {
                let (y, cb, cr) = rgb_to_ycbcr(r, g, b);
                y >= thresholds.y_min
                    && cb >= thresholds.cb.0
                    && cb <= thresholds.cb.1
                    && cr >= thresholds.cr.0
                    && cr <= thresholds.cr.1
            }
            ColorSpace::Hsv => {
                let (h, s, v) = rgb_to_hsv(r, g, b);
                h >= thresholds.hue.0
                    && h <= thresholds.hue.1
                    && s >= thresholds.sat.0
                    && s <= thresholds.sat.1
                    && v >= thresholds.val_min
            }
        };
        mask.bits[i] = skin;
    }
    Ok(mask)
}
