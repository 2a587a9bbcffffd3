//! Singular spectrum analysis denoising.
//!
//! The series is embedded into a Hankel matrix `H` with `H[i][j] = x[i+j]`
//! (window `l` rows, `k = n - l + 1` columns), truncated to the leading
//! singular components, and recovered by averaging the anti-diagonals.
//! The decomposition runs on the small-side covariance `H Hᵀ` so only
//! `min(l, k)²` eigenwork is needed; reconstruction is a per-component
//! correlation + convolution and never materialises `H`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::SampledSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsaSpec {
    /// Embedding window length `l`, samples.
    pub window: usize,
    /// Number of singular components retained (>= 1). An oscillation needs
    /// two components (a sin/cos pair) to survive truncation intact.
    pub components: usize,
}

impl SsaSpec {
    pub fn new(window: usize, components: usize) -> Self {
        Self { window, components }
    }

    /// Default window: `min(n/2, 3 s of samples)` — long enough to embed
    /// several breath cycles at neonatal rates.
    pub fn default_window(n: usize, rate: f64) -> usize {
        let three_s = (3.0 * rate).round() as usize;
        (n / 2).min(three_s).max(2)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n < self.window + 1 {
            return Err(Error::TooShort {
                need: self.window + 1,
                have: n,
            });
        }
        if self.window < 2 {
            return Err(Error::InvalidParam("SSA window must be >= 2".into()));
        }
        if self.components < 1 || self.components > self.window {
            return Err(Error::InvalidParam(format!(
                "SSA components must be in 1..={}, got {}",
                self.window, self.components
            )));
        }
        Ok(())
    }
}

/// Rank-truncated SSA reconstruction of a gap-free series.
pub fn ssa_denoise(s: &SampledSeries, spec: &SsaSpec) -> Result<SampledSeries> {
    let x = s
        .dense()
        .ok_or_else(|| Error::InvalidSeries("SSA input has missing samples".into()))?;
    let y = ssa_denoise_dense(&x, spec)?;
    Ok(s.with_values(y.into_iter().map(Some).collect(), s.unit))
}

pub(crate) fn ssa_denoise_dense(x: &[f64], spec: &SsaSpec) -> Result<Vec<f64>> {
    let n = x.len();
    spec.validate(n)?;
    let l = spec.window;
    let k = n - l + 1;
    // The Hankel entry only depends on i + j, so H and Hᵀ share the same
    // formula; work with the smaller embedding side.
    let m = l.min(k);
    let big = l.max(k);
    let c = spec.components.min(m);

    // Covariance C[a][b] = sum_j x[a+j] x[b+j], built per diagonal with a
    // sliding update: C[a+1][b+1] = C[a][b] - x[a] x[b] + x[a+big] x[b+big].
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for d in 0..m {
        let mut acc = 0.0;
        for j in 0..big {
            acc += x[j] * x[d + j];
        }
        cov[(0, d)] = acc;
        cov[(d, 0)] = acc;
        for a in 1..m - d {
            acc += x[a - 1 + big] * x[a - 1 + d + big] - x[a - 1] * x[a - 1 + d];
            cov[(a, a + d)] = acc;
            cov[(a + d, a)] = acc;
        }
    }

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    // Accumulate anti-diagonal sums of sum_i u_i (u_iᵀ H); the (i+j)-indexed
    // sums of an outer product are exactly the convolution u_i * v_i.
    let mut diag_sum = vec![0.0f64; n];
    for &idx in order.iter().take(c) {
        let u: DVector<f64> = eig.eigenvectors.column(idx).into();
        // v = Hᵀ u without materialising H.
        let mut v = vec![0.0f64; big];
        for (j, vj) in v.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..m {
                acc += u[a] * x[a + j];
            }
            *vj = acc;
        }
        for a in 0..m {
            let ua = u[a];
            for (j, vj) in v.iter().enumerate() {
                diag_sum[a + j] += ua * vj;
            }
        }
    }

    let out = diag_sum
        .iter()
        .enumerate()
        .map(|(t, &sum)| {
            let count = (t + 1).min(m).min(big).min(n - t);
            sum / count as f64
        })
        .collect();
    Ok(out)
}
