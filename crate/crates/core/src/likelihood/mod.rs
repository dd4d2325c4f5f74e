//! Exact Gaussian log-likelihood of gridded observations with missing
//! samples.
//!
//! Four engines compute the same quantity:
//!
//! * [`covm_loglik`]: dense covariance factorization, `O(n_a^3)`.
//! * [`kalman_loglik`]: Kalman filter predicting at every grid point, `O(N)`.
//! * [`prekal_loglik`]: Kalman filter with per-gap prediction operators
//!   from a [`GapCache`], `O(n_a)` after the cache build.
//! * [`diag_prekal_loglik`]: the same on the eigenbasis of `A`, where the
//!   prediction step is a pair of Hadamard products.
//!
//! Every engine includes the `-(n_a / 2) log 2 pi` constant and starts the
//! filter at the first observation with the stationary covariance.

mod covm;
mod diag;
mod kalman;
mod series;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use covm::{covm_loglik, covm_loglik_with_limit, COVM_MAX_OBS};
pub use diag::{build_diag_gap_cache, diag_prekal_loglik, DiagGapCache};
pub use kalman::{build_gap_cache, kalman_loglik, prekal_loglik, FilterState, GapCache};
pub use series::{round_to_grid, CollisionMode, SampledSeries};

use covm::covm_sums;
use diag::diag_prekal_sums;
use kalman::{kalman_sums, prekal_sums};

use crate::ar::{ar_autocovariance, ArModel, CovarianceSpec};
use crate::error::{Error, Result};
use crate::statespace::{ar_to_ss, diagonalize, ss_covariance, StateSpaceModel};

const LN_2PI: f64 = 1.8378770664093453;
/// Innovation variances at or below this raise [`Error::SingularInnovation`].
pub const MIN_INNOVATION: f64 = 1e-300;
/// `auto` picks the eigenbasis engine from this state dimension on.
pub const AUTO_DIAG_MIN_STATE: usize = 8;

/// Likelihood engine selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Covm,
    Kal,
    PreKal,
    DiagPreKal,
    #[default]
    Auto,
}

impl Engine {
    pub const ALL: [Engine; 4] = [Engine::Covm, Engine::Kal, Engine::PreKal, Engine::DiagPreKal];

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Covm => "covm",
            Engine::Kal => "kal",
            Engine::PreKal => "prekal",
            Engine::DiagPreKal => "diagprekal",
            Engine::Auto => "auto",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "covm" => Ok(Engine::Covm),
            "kal" => Ok(Engine::Kal),
            "prekal" | "pre-kal" => Ok(Engine::PreKal),
            "diagprekal" | "diag-pre-kal" => Ok(Engine::DiagPreKal),
            "auto" => Ok(Engine::Auto),
            other => Err(Error::InvalidInput(format!("unknown engine '{other}'"))),
        }
    }
}

/// Sufficient statistics of a filter pass: the log-likelihood is
/// `-(n log 2 pi + sum_log_s + sum_norm_sq) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterSums {
    pub n: usize,
    pub sum_log_s: f64,
    pub sum_norm_sq: f64,
}

impl FilterSums {
    pub fn loglik(&self) -> f64 {
        -0.5 * (self.n as f64 * LN_2PI + self.sum_log_s + self.sum_norm_sq)
    }

    /// Log-likelihood after multiplying all noise covariances by `scale`.
    /// Exact when the observation noise is zero or scales alike.
    pub fn loglik_scaled(&self, scale: f64) -> f64 {
        let n = self.n as f64;
        -0.5 * (n * LN_2PI + self.sum_log_s + n * scale.ln() + self.sum_norm_sq / scale)
    }

    #[inline]
    pub(crate) fn push(&mut self, innovation: f64, s: f64) -> Result<()> {
        if !(s > MIN_INNOVATION) || !s.is_finite() {
            return Err(Error::SingularInnovation(s));
        }
        self.n += 1;
        self.sum_log_s += s.ln();
        self.sum_norm_sq += innovation * innovation / s;
        Ok(())
    }
}

/// Log-likelihood of `series` under `ss` with the chosen engine. Caches
/// are built on the fly.
pub fn loglik(ss: &StateSpaceModel, series: &SampledSeries, engine: Engine) -> Result<f64> {
    Ok(loglik_sums(ss, series, &series.gaps(), engine)?.loglik())
}

/// Filter sums of `series` under `ss`; `gaps` must cover every gap of the
/// series for the cached engines.
pub fn loglik_sums(
    ss: &StateSpaceModel,
    series: &SampledSeries,
    gaps: &[usize],
    engine: Engine,
) -> Result<FilterSums> {
    if series.n_a() == 0 {
        return Ok(FilterSums::default());
    }
    match engine {
        Engine::Covm => {
            let max_lag = series.span();
            let r = match &ss.companion {
                Some(a) if ss.r == 0.0 => {
                    ar_autocovariance(&ArModel::new(a.clone(), ss.q[(0, 0)]), max_lag)?
                }
                _ => ss_covariance(ss, max_lag)?,
            };
            covm_sums(&CovarianceSpec::Tabulated { r }, series, COVM_MAX_OBS)
        }
        Engine::Kal => kalman_sums(ss, series),
        Engine::PreKal => prekal_sums(ss, series, &build_gap_cache(ss, gaps)),
        Engine::DiagPreKal => {
            let dss = diagonalize(ss)?;
            diag_prekal_sums(&dss, series, &build_diag_gap_cache(&dss, gaps))
        }
        Engine::Auto => {
            if ss.state_dim() >= AUTO_DIAG_MIN_STATE {
                if let Ok(dss) = diagonalize(ss) {
                    return diag_prekal_sums(&dss, series, &build_diag_gap_cache(&dss, gaps));
                }
            }
            prekal_sums(ss, series, &build_gap_cache(ss, gaps))
        }
    }
}

/// Log-likelihood under an AR model; order zero is white noise.
pub fn ar_loglik(model: &ArModel, series: &SampledSeries, engine: Engine) -> Result<f64> {
    if model.order() == 0 {
        return white_noise_loglik(model.sigma_v2, series);
    }
    loglik(&ar_to_ss(model)?, series, engine)
}

pub(crate) fn white_noise_loglik(sigma_v2: f64, series: &SampledSeries) -> Result<f64> {
    Ok(white_noise_sums(series).loglik_scaled(sigma_v2))
}

/// Unit-variance white-noise sums.
pub fn white_noise_sums(series: &SampledSeries) -> FilterSums {
    FilterSums {
        n: series.n_a(),
        sum_log_s: 0.0,
        sum_norm_sq: series.values().iter().map(|y| y * y).sum(),
    }
}

/// Sum of the likelihoods of the `t_a_ratio` interleaved subseries: the
/// observation at grid index `n` belongs to segment `n mod t_a_ratio` and is
/// re-indexed to `n / t_a_ratio`. `ss` is a model at the coarse spacing.
pub fn segmented_loglik(
    ss: &StateSpaceModel,
    series: &SampledSeries,
    t_a_ratio: usize,
    engine: Engine,
) -> Result<f64> {
    if t_a_ratio == 0 {
        return Err(Error::InvalidInput("t_a_ratio must be >= 1".into()));
    }
    let mut total = 0.0;
    for seg in series.segments(t_a_ratio) {
        total += loglik(ss, &seg, engine)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ar1() -> StateSpaceModel {
        ar_to_ss(&ArModel::new(vec![0.5], 1.0)).unwrap()
    }

    #[test]
    fn engine_names_round_trip() {
        for e in Engine::ALL.iter().chain([Engine::Auto].iter()) {
            assert_eq!(e.name().parse::<Engine>().unwrap(), *e);
        }
        assert!("fast".parse::<Engine>().is_err());
    }

    #[test]
    fn single_observation_all_engines() {
        let series = SampledSeries::new(1.0, 1, vec![0], vec![1.0]).unwrap();
        let expect = -0.5 * (2.0 * std::f64::consts::PI * 4.0 / 3.0).ln() - 0.5 * 0.75;
        assert_abs_diff_eq!(expect, -1.43776, epsilon = 1e-4);
        for e in Engine::ALL {
            assert_abs_diff_eq!(loglik(&ar1(), &series, e).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_series_is_zero() {
        let series = SampledSeries::new(1.0, 10, vec![], vec![]).unwrap();
        for e in Engine::ALL {
            assert_eq!(loglik(&ar1(), &series, e).unwrap(), 0.0);
        }
    }

    #[test]
    fn segmented_ratio_one_is_plain() {
        let series = SampledSeries::new(1.0, 6, vec![0, 1, 3, 5], vec![0.3, -0.2, 1.0, 0.4]).unwrap();
        let plain = loglik(&ar1(), &series, Engine::Kal).unwrap();
        let seg = segmented_loglik(&ar1(), &series, 1, Engine::Kal).unwrap();
        assert_abs_diff_eq!(plain, seg, epsilon = 1e-14);
    }

    #[test]
    fn segmented_even_only_is_decimated() {
        let series = SampledSeries::new(1.0, 7, vec![0, 2, 6], vec![0.3, -0.2, 1.0]).unwrap();
        let decimated = SampledSeries::new(2.0, 4, vec![0, 1, 3], vec![0.3, -0.2, 1.0]).unwrap();
        let seg = segmented_loglik(&ar1(), &series, 2, Engine::PreKal).unwrap();
        let plain = loglik(&ar1(), &decimated, Engine::PreKal).unwrap();
        assert_abs_diff_eq!(seg, plain, epsilon = 1e-13);
    }

    #[test]
    fn segmented_mixed_parity_sums_covm() {
        let series =
            SampledSeries::new(1.0, 8, vec![0, 1, 2, 5, 7], vec![0.3, -0.2, 1.0, 0.1, -0.7]).unwrap();
        let r = ar_autocovariance(&ArModel::new(vec![0.5], 1.0), 10).unwrap();
        let spec = CovarianceSpec::Tabulated { r };
        let even = SampledSeries::new(2.0, 4, vec![0, 1], vec![0.3, 1.0]).unwrap();
        let odd = SampledSeries::new(2.0, 4, vec![0, 2, 3], vec![-0.2, 0.1, -0.7]).unwrap();
        let expect = covm_loglik(&spec, &even).unwrap() + covm_loglik(&spec, &odd).unwrap();
        let seg = segmented_loglik(&ar1(), &series, 2, Engine::Kal).unwrap();
        assert_abs_diff_eq!(seg, expect, epsilon = 1e-10);
    }

    #[test]
    fn white_noise_ar_loglik() {
        let series = SampledSeries::new(1.0, 3, vec![0, 2], vec![1.0, -1.0]).unwrap();
        let v = ar_loglik(&ArModel::white_noise(2.0), &series, Engine::Auto).unwrap();
        let expect = -(2.0 * std::f64::consts::PI * 2.0).ln() - 0.5;
        assert_abs_diff_eq!(v, expect, epsilon = 1e-14);
    }

    #[test]
    fn filter_sums_scaling() {
        let series = SampledSeries::new(1.0, 9, vec![0, 3, 4, 8], vec![0.5, 1.0, -0.3, 0.2]).unwrap();
        let unit = ArModel::new(vec![0.6, -0.2], 1.0);
        let ss = ar_to_ss(&unit).unwrap();
        let sums = prekal_sums(&ss, &series, &build_gap_cache(&ss, &series.gaps())).unwrap();
        let scaled = ar_loglik(&ArModel::new(vec![0.6, -0.2], 2.5), &series, Engine::Kal).unwrap();
        assert_abs_diff_eq!(sums.loglik_scaled(2.5), scaled, epsilon = 1e-12);
    }
}
