//! Constant-velocity Kalman smoothing of estimate streams.
//!
//! State is `[level, trend]` with transition `[[1, dt], [0, 1]]` and a
//! scalar observation of the level. Missing samples trigger prediction-only
//! steps, so gaps in an estimate stream are bridged by the model.

use crate::model::{KalmanParams, SampledSeries};

/// Filtered level per sample. Samples before the first observation stay
/// missing; afterwards gaps are filled with predictions.
pub fn kalman_smooth(s: &SampledSeries, p: &KalmanParams) -> SampledSeries {
    let r = p.r_std * p.r_std;
    let dt = p.dt;
    let q = p.q;

    let mut out = Vec::with_capacity(s.len());
    // State and covariance (p11, p12, p22), set on first observation.
    let mut state: Option<([f64; 2], [f64; 3])> = None;

    for v in &s.values {
        match state.as_mut() {
            None => match v {
                Some(z) => {
                    state = Some(([*z, 0.0], [r, 0.0, r]));
                    out.push(Some(*z));
                }
                None => out.push(None),
            },
            Some((x, cov)) => {
                // Predict.
                x[0] += dt * x[1];
                let (p11, p12, p22) = (cov[0], cov[1], cov[2]);
                let n11 = p11 + dt * (p12 + p12 + dt * p22) + q[0][0];
                let n12 = p12 + dt * p22 + q[0][1];
                let n22 = p22 + q[1][1];
                *cov = [n11, n12, n22];

                // Update when observed.
                if let Some(z) = v {
                    let s_innov = cov[0] + r;
                    let k0 = cov[0] / s_innov;
                    let k1 = cov[1] / s_innov;
                    let innov = z - x[0];
                    x[0] += k0 * innov;
                    x[1] += k1 * innov;
                    let (p11, p12, p22) = (cov[0], cov[1], cov[2]);
                    *cov = [
                        (1.0 - k0) * p11,
                        (1.0 - k0) * p12,
                        p22 - k1 * p12,
                    ];
                }
                out.push(Some(x[0]));
            }
        }
    }
    s.with_values(out, s.unit)
}
