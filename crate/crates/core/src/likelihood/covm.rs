use nalgebra::{DMatrix, DVector};

use super::{FilterSums, SampledSeries};
use crate::ar::CovarianceSpec;
use crate::error::{Error, Result};

/// Default observation-count guard of the dense engine.
pub const COVM_MAX_OBS: usize = 2000;
/// Relative diagonal jitter tried when the plain factorization fails.
const COVM_NUGGET: f64 = 1e-10;

/// `-1/2 log|K| - 1/2 y^T K^-1 y - (n_a/2) log 2 pi` with
/// `K_ij = r(|n_i - n_j|)`.
pub fn covm_loglik(cov: &CovarianceSpec, series: &SampledSeries) -> Result<f64> {
    covm_loglik_with_limit(cov, series, COVM_MAX_OBS)
}

pub fn covm_loglik_with_limit(
    cov: &CovarianceSpec,
    series: &SampledSeries,
    limit: usize,
) -> Result<f64> {
    Ok(covm_sums(cov, series, limit)?.loglik())
}

pub(crate) fn covm_sums(
    cov: &CovarianceSpec,
    series: &SampledSeries,
    limit: usize,
) -> Result<FilterSums> {
    let n = series.n_a();
    if n > limit {
        return Err(Error::TooLarge { n_a: n, limit });
    }
    if n == 0 {
        return Ok(FilterSums::default());
    }
    let r = cov.regularized(series.span())?;
    let idx = series.indices();
    let mut k = DMatrix::from_fn(n, n, |i, j| r[idx[i].abs_diff(idx[j])]);
    let chol = match k.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = COVM_NUGGET * r[0];
            for i in 0..n {
                k[(i, i)] += jitter;
            }
            k.cholesky().ok_or_else(|| {
                Error::NotPositiveDefinite("covariance matrix factorization failed".into())
            })?
        }
    };
    let l = chol.l_dirty();
    let log_det: f64 = (0..n).map(|i| 2.0 * l[(i, i)].ln()).sum();
    let y = DVector::from_column_slice(series.values());
    let alpha = l
        .solve_lower_triangular(&y)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    Ok(FilterSums { n, sum_log_s: log_det, sum_norm_sq: alpha.dot(&alpha) })
}
