//! Numerical differentiation and integration of sampled series.

use crate::error::{Error, Result};
use crate::model::{SampledSeries, Unit};

fn derivative_unit(u: Unit) -> Unit {
    match u {
        Unit::Milliliters => Unit::MillilitersPerSecond,
        _ => Unit::Dimensionless,
    }
}

fn integral_unit(u: Unit) -> Unit {
    match u {
        Unit::MillilitersPerSecond => Unit::Milliliters,
        _ => Unit::Dimensionless,
    }
}

/// Central differences scaled by the sampling rate; one-sided at the
/// endpoints. A missing sample in the stencil yields a missing output.
pub fn differentiate(s: &SampledSeries) -> Result<SampledSeries> {
    let n = s.len();
    if n < 3 {
        return Err(Error::TooShort { need: 3, have: n });
    }
    let v = &s.values;
    let rate = s.rate;
    let mut out = Vec::with_capacity(n);
    out.push(match (v[0], v[1]) {
        (Some(a), Some(b)) => Some((b - a) * rate),
        _ => None,
    });
    for i in 1..n - 1 {
        out.push(match (v[i - 1], v[i + 1]) {
            (Some(a), Some(b)) => Some((b - a) * rate / 2.0),
            _ => None,
        });
    }
    out.push(match (v[n - 2], v[n - 1]) {
        (Some(a), Some(b)) => Some((b - a) * rate),
        _ => None,
    });
    Ok(s.with_values(out, derivative_unit(s.unit)))
}

/// Trapezoidal cumulative integral scaled by `1/rate`, starting at zero.
/// Steps with a missing endpoint emit a missing sample and contribute no
/// area; the accumulator resumes after the gap.
pub fn integrate(s: &SampledSeries) -> Result<SampledSeries> {
    let n = s.len();
    if n < 3 {
        return Err(Error::TooShort { need: 3, have: n });
    }
    let v = &s.values;
    let dt = 1.0 / s.rate;
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(if v[0].is_some() { Some(0.0) } else { None });
    for i in 1..n {
        match (v[i - 1], v[i]) {
            (Some(a), Some(b)) => {
                acc += (a + b) * dt / 2.0;
                out.push(Some(acc));
            }
            (_, Some(_)) => out.push(Some(acc)),
            _ => out.push(None),
        }
    }
    Ok(s.with_values(out, integral_unit(s.unit)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_derivative_matches_analytic() {
        // >= 40 samples per period keeps central-difference error below 1%.
        let rate = 50.0;
        let omega = 2.0 * PI * 1.0;
        let amp = 4.0;
        let n = 500;
        let vals: Vec<f64> = (0..n).map(|i| amp * (omega * i as f64 / rate).sin()).collect();
        let s = SampledSeries::from_values(0.0, rate, vals, Unit::Milliliters);
        let d = differentiate(&s).unwrap();
        assert_eq!(d.unit, Unit::MillilitersPerSecond);
        let mut max_err = 0.0f64;
        for i in 1..n - 1 {
            let expect = amp * omega * (omega * i as f64 / rate).cos();
            max_err = max_err.max((d.values[i].unwrap() - expect).abs());
        }
        assert!(max_err / (amp * omega) < 0.01, "relative error {}", max_err / (amp * omega));
    }

    #[test]
    fn integrate_then_differentiate_is_identity_up_to_constant() {
        let rate = 40.0;
        let n = 400;
        let vals: Vec<f64> = (0..n)
            .map(|i| (i as f64 * 0.05).sin() + 0.5 * (i as f64 * 0.013).cos())
            .collect();
        let s = SampledSeries::from_values(0.0, rate, vals.clone(), Unit::Milliliters);
        let d = differentiate(&s).unwrap();
        let back = integrate(&d).unwrap();
        // integrate(differentiate(s)) - s should be constant.
        let offsets: Vec<f64> = (1..n - 1)
            .map(|i| back.values[i].unwrap() - vals[i])
            .collect();
        let first = offsets[0];
        for o in offsets {
            assert!((o - first).abs() < 2e-3, "offset drift {}", (o - first).abs());
        }
    }

    #[test]
    fn constant_series_has_zero_derivative() {
        let s = SampledSeries::from_values(0.0, 10.0, vec![7.0; 50], Unit::Milliliters);
        let d = differentiate(&s).unwrap();
        for v in d.values {
            assert_eq!(v.unwrap(), 0.0);
        }
    }

    #[test]
    fn too_short_errors() {
        let s = SampledSeries::from_values(0.0, 10.0, vec![1.0, 2.0], Unit::Milliliters);
        assert!(differentiate(&s).is_err());
        assert!(integrate(&s).is_err());
    }

    #[test]
    fn missing_stencil_propagates() {
        let vals = vec![Some(1.0), Some(2.0), None, Some(4.0), Some(5.0)];
        let s = SampledSeries::new(0.0, 1.0, vals, Unit::Milliliters);
        let d = differentiate(&s).unwrap();
        assert!(d.values[1].is_none()); // central stencil hits the gap
        assert!(d.values[3].is_none());
        assert!(d.values[0].is_some());
    }
}
