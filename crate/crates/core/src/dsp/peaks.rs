//! Prominence-based peak and valley detection.

use crate::model::SampledSeries;

/// Indices of detected peaks and the interleaved valleys (the minimum
/// between each pair of consecutive peaks).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PeakTrain {
    pub peaks: Vec<usize>,
    pub valleys: Vec<usize>,
}

/// Local maxima whose prominence reaches `min_prominence`, thinned so that
/// surviving peaks are at least `min_separation_s` apart (higher peaks
/// win). Missing samples split the series; indices are global.
pub fn detect_peaks(s: &SampledSeries, min_prominence: f64, min_separation_s: f64) -> PeakTrain {
    let min_sep = (min_separation_s * s.rate).round() as usize;
    let mut train = PeakTrain::default();
    for (offset, run) in s.present_runs() {
        let local = detect_peaks_dense(&run, min_prominence, min_sep);
        train
            .peaks
            .extend(local.peaks.into_iter().map(|i| i + offset));
        train
            .valleys
            .extend(local.valleys.into_iter().map(|i| i + offset));
    }
    train
}

pub(crate) fn detect_peaks_dense(x: &[f64], min_prominence: f64, min_sep: usize) -> PeakTrain {
    let n = x.len();
    if n < 3 {
        return PeakTrain::default();
    }

    // Strict local maxima; plateaus resolve to their midpoint.
    let mut candidates = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                candidates.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    // Prominence: drop to the lowest point between the peak and the nearest
    // higher ground on each side (or the series edge).
    let mut prominent: Vec<usize> = candidates
        .into_iter()
        .filter(|&p| {
            let h = x[p];
            let mut left_min = h;
            let mut k = p;
            while k > 0 {
                k -= 1;
                if x[k] > h {
                    break;
                }
                left_min = left_min.min(x[k]);
            }
            let mut right_min = h;
            let mut k = p;
            while k + 1 < n {
                k += 1;
                if x[k] > h {
                    break;
                }
                right_min = right_min.min(x[k]);
            }
            h - left_min.max(right_min) >= min_prominence
        })
        .collect();

    // Distance constraint: keep the highest peaks first.
    if min_sep > 1 && prominent.len() > 1 {
        let mut order: Vec<usize> = (0..prominent.len()).collect();
        order.sort_by(|&a, &b| {
            x[prominent[b]]
                .partial_cmp(&x[prominent[a]])
                .unwrap()
                .then(prominent[a].cmp(&prominent[b]))
        });
        let mut keep = vec![true; prominent.len()];
        for &idx in &order {
            if !keep[idx] {
                continue;
            }
            for (other, k) in keep.iter_mut().enumerate() {
                if other != idx
                    && *k
                    && prominent[other].abs_diff(prominent[idx]) < min_sep
                    && x[prominent[other]] <= x[prominent[idx]]
                {
                    *k = false;
                }
            }
        }
        prominent = prominent
            .into_iter()
            .zip(keep)
            .filter_map(|(p, k)| k.then_some(p))
            .collect();
    }
    prominent.sort_unstable();

    let valleys = prominent
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            (a + 1..b)
                .min_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap())
                .unwrap_or(a)
        })
        .collect();

    PeakTrain {
        peaks: prominent,
        valleys,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Unit;
    use std::f64::consts::PI;

    #[test]
    fn sinusoid_peak_and_valley_count() {
        // Period 2 s over 10 s: 5 maxima, 4 interior minima.
        let rate = 30.0;
        let n = 300;
        let vals: Vec<f64> = (0..n).map(|i| (PI * i as f64 / rate).sin()).collect();
        let s = SampledSeries::from_values(0.0, rate, vals, Unit::Millimeters);
        let train = detect_peaks(&s, 0.5, 1.0);
        assert_eq!(train.peaks.len(), 5);
        assert!(train.valleys.len() == 4 || train.valleys.len() == 5);
    }

    #[test]
    fn monotone_series_has_no_peaks() {
        let vals: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let s = SampledSeries::from_values(0.0, 1.0, vals, Unit::Millimeters);
        assert!(detect_peaks(&s, 0.0, 0.0).peaks.is_empty());
    }

    #[test]
    fn prominence_above_amplitude_finds_nothing() {
        let vals: Vec<f64> = (0..200).map(|i| (i as f64 * 0.3).sin()).collect();
        let s = SampledSeries::from_values(0.0, 10.0, vals, Unit::Millimeters);
        assert!(detect_peaks(&s, 5.0, 0.0).peaks.is_empty());
    }

    #[test]
    fn separation_keeps_higher_peak() {
        let mut vals = vec![0.0; 40];
        vals[10] = 1.0;
        vals[14] = 2.0;
        vals[30] = 1.5;
        let s = SampledSeries::from_values(0.0, 1.0, vals, Unit::Millimeters);
        let train = detect_peaks(&s, 0.1, 8.0);
        assert_eq!(train.peaks, vec![14, 30]);
    }

    #[test]
    fn missing_samples_split_runs() {
        let mut vals: Vec<Option<f64>> = (0..60)
            .map(|i| Some((PI * i as f64 / 10.0).sin()))
            .collect();
        for v in vals.iter_mut().take(35).skip(25) {
            *v = None;
        }
        let s = SampledSeries::new(0.0, 10.0, vals, Unit::Millimeters);
        let train = detect_peaks(&s, 0.5, 0.5);
        assert!(!train.peaks.is_empty());
        for &p in &train.peaks {
            assert!(s.values[p].is_some());
        }
    }

    #[test]
    fn plateau_resolves_to_midpoint() {
        let vals = vec![0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0];
        let s = SampledSeries::from_values(0.0, 1.0, vals, Unit::Millimeters);
        let train = detect_peaks(&s, 0.5, 0.0);
        assert_eq!(train.peaks, vec![3]);
    }
}
