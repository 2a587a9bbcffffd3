//! Binary morphology and the mask-refinement chain.
//!
//! Pixels outside the frame are treated as unset. Kernels are given as
//! offset ranges around the anchor: a 3×3 kernel spans `-1..=1`, the 4×4
//! kernel spans `-1..=2` (anchor at the upper-left of centre). Erosion
//! tests `p + o` for every offset `o`; dilation tests `p - o`, which keeps
//! the opening anti-extensive for asymmetric kernels.

use super::BinaryMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Kernel {
    lo: i32,
    hi: i32,
}

const KERNEL_3: Kernel = Kernel { lo: -1, hi: 1 };
const KERNEL_4: Kernel = Kernel { lo: -1, hi: 2 };

fn erode(mask: &BinaryMask, k: Kernel) -> BinaryMask {
    let (w, h) = (mask.width as i32, mask.height as i32);
    let mut out = BinaryMask::new(mask.width, mask.height);
    for y in 0..h {
        'pixel: for x in 0..w {
            for dy in k.lo..=k.hi {
                for dx in k.lo..=k.hi {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h || !mask.get(nx as u32, ny as u32) {
                        continue 'pixel;
                    }
                }
            }
            out.set(x as u32, y as u32, true);
        }
    }
    out
}

fn dilate(mask: &BinaryMask, k: Kernel) -> BinaryMask {
    let (w, h) = (mask.width as i32, mask.height as i32);
    let mut out = BinaryMask::new(mask.width, mask.height);
    for y in 0..h {
        'pixel: for x in 0..w {
            for dy in k.lo..=k.hi {
                for dx in k.lo..=k.hi {
                    let (nx, ny) = (x - dx, y - dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h && mask.get(nx as u32, ny as u32) {
                        out.set(x as u32, y as u32, true);
                        continue 'pixel;
                    }
                }
            }
        }
    }
    out
}

fn opening(mask: &BinaryMask, k: Kernel) -> BinaryMask {
    dilate(&erode(mask, k), k)
}

/// 3×3 binary median: set iff at least 5 of the 9 window pixels are set
/// (outside counts as unset).
fn median3(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width as i32, mask.height as i32);
    let mut out = BinaryMask::new(mask.width, mask.height);
    for y in 0..h {
        for x in 0..w {
            let mut count = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h && mask.get(nx as u32, ny as u32) {
                        count += 1;
                    }
                }
            }
            out.set(x as u32, y as u32, count >= 5);
        }
    }
    out
}

fn intersect(masks: &[BinaryMask]) -> BinaryMask {
    let mut out = masks[0].clone();
    for m in &masks[1..] {
        for (o, b) in out.bits.iter_mut().zip(&m.bits) {
            *o &= b;
        }
    }
    out
}

/// Refine per-colour-space skin masks: 3×3 opening of each mask, their
/// intersection, a 3×3 median, then a 4×4 opening — exactly in that order.
pub fn refine_mask(masks: &[BinaryMask]) -> Result<BinaryMask> {
    let first = masks
        .first()
        .ok_or_else(|| Error::InvalidParam("refine_mask needs at least one mask".into()))?;
    if masks.iter().any(|m| !m.same_shape(first)) {
        return Err(Error::DimensionMismatch(
            "refine_mask inputs must share dimensions".into(),
        ));
    }
    let opened: Vec<BinaryMask> = masks.iter().map(|m| opening(m, KERNEL_3)).collect();
    let combined = intersect(&opened);
    let smoothed = median3(&combined);
    Ok(opening(&smoothed, KERNEL_4))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_pixel_is_cleared() {
        let mut m = BinaryMask::new(16, 16);
        m.set(8, 8, true);
        let out = refine_mask(&[m]).unwrap();
        assert_eq!(out.count(), 0);
    }

    #[test]
    fn all_set_masks_survive_up_to_border_erosion() {
        // Brute-force expectation on a 16×16 grid: a full mask is stable
        // under opening (erosion shrinks the border, dilation restores it),
        // but the binary median clears the four frame corners, where only
        // 4 of the 9 window pixels are in-frame.
        let m = BinaryMask::filled(16, 16);
        let out = refine_mask(&[m.clone(), m.clone()]).unwrap();
        for y in 0..16u32 {
            for x in 0..16u32 {
                let corner = (x == 0 || x == 15) && (y == 0 || y == 15);
                assert_eq!(out.get(x, y), !corner, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn disjoint_masks_intersect_to_empty() {
        let mut a = BinaryMask::new(16, 16);
        let mut b = BinaryMask::new(16, 16);
        for y in 0..16 {
            for x in 0..8 {
                a.set(x, y, true);
                b.set(x + 8, y, true);
            }
        }
        let out = refine_mask(&[a, b]).unwrap();
        assert_eq!(out.count(), 0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = BinaryMask::new(8, 8);
        let b = BinaryMask::new(9, 8);
        assert!(refine_mask(&[a, b]).is_err());
    }

    #[test]
    fn opening_is_anti_extensive_even_with_4x4_kernel() {
        // Deterministic pseudo-random masks.
        for seed in 0..10u64 {
            let mut m = BinaryMask::new(20, 20);
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            for i in 0..400 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                m.bits[i] = (state >> 62) & 1 == 1;
            }
            let opened = opening(&m, KERNEL_4);
            for (o, i) in opened.bits.iter().zip(&m.bits) {
                assert!(!o || *i, "opening added a pixel");
            }
        }
    }

    #[test]
    fn output_within_dilated_intersection() {
        // The median can fill interior holes, so the output is contained in
        // the 1-dilation of the intersection rather than the intersection
        // itself; pixels added beyond it never appear.
        for seed in 0..20u64 {
            let mut a = BinaryMask::new(18, 18);
            let mut b = BinaryMask::new(18, 18);
            let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            for i in 0..324 {
                state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
                a.bits[i] = (state >> 61) & 3 != 0; // dense mask
                state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
                b.bits[i] = (state >> 61) & 3 != 0;
            }
            let inter = intersect(&[opening(&a, KERNEL_3), opening(&b, KERNEL_3)]);
            let dilated = dilate(&inter, KERNEL_3);
            let out = refine_mask(&[a, b]).unwrap();
            for (i, (&o, &d)) in out.bits.iter().zip(&dilated.bits).enumerate() {
                assert!(!o || d, "seed {seed}: pixel {i} outside dilated intersection");
            }
            // Any pixel gained over the intersection must be a median fill:
            // at least 5 of its 3x3 window set in the intersection.
            for y in 0..18i32 {
                for x in 0..18i32 {
                    let idx = (y * 18 + x) as usize;
                    if out.bits[idx] && !inter.bits[idx] {
                        let mut count = 0;
                        for dy in -1..=1 {
                            for dx in -1..=1 {
                                let (nx, ny) = (x + dx, y + dy);
                                if nx >= 0
                                    && ny >= 0
                                    && nx < 18
                                    && ny < 18
                                    && inter.get(nx as u32, ny as u32)
                                {
                                    count += 1;
                                }
                            }
                        }
                        assert!(count >= 5, "seed {seed}: non-median fill at ({x},{y})");
                    }
                }
            }
        }
    }
}
