use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ar::{ar_autocovariance, levinson, step_down, CovarianceSpec};
use crate::error::{Error, Result};
use crate::likelihood::SampledSeries;

/// Exact stationary Gaussian sampler for one truth and length.
///
/// The Toeplitz covariance is factorized through its partial correlations
/// (`y_n` is its optimal predictor from all previous samples plus an
/// independent innovation). For an AR(p) truth the partial correlations
/// vanish beyond order `p` and the recursion becomes the AR recursion.
#[derive(Debug, Clone)]
pub struct TruthSampler {
    phi: Vec<f64>,
    /// Innovation standard deviation at orders `0..=phi.len()`.
    sd: Vec<f64>,
    n_grid: usize,
}

impl TruthSampler {
    pub fn new(truth: &CovarianceSpec, n_grid: usize) -> Result<Self> {
        let (phi, variances) = match truth {
            CovarianceSpec::Ar { model } => {
                let pac = step_down(model)?;
                let r0 = ar_autocovariance(model, 0)?[0];
                let mut v = vec![r0];
                for k in &pac.phi {
                    let last = *v.last().unwrap();
                    v.push(last * (1.0 - k * k));
                }
                (pac.phi, v)
            }
            _ => {
                let order = n_grid.saturating_sub(1);
                let r = truth.regularized(order)?;
                let lev = levinson(&r, order)?;
                (lev.phi, lev.variances)
            }
        };
        if variances.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::NotPositiveDefinite("non-positive innovation variance".into()));
        }
        Ok(TruthSampler { phi, sd: variances.iter().map(|v| v.sqrt()).collect(), n_grid })
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n_grid;
        let p = self.phi.len();
        let mut y = Vec::with_capacity(n);
        let mut a: Vec<f64> = Vec::with_capacity(p.min(n));
        let mut prev: Vec<f64> = Vec::with_capacity(p.min(n));
        for t in 0..n {
            let m = a.len();
            let mut v = self.sd[m] * rng.sample::<f64, _>(StandardNormal);
            for (j, aj) in a.iter().enumerate() {
                v += aj * y[t - 1 - j];
            }
            y.push(v);
            if m < p {
                let k = self.phi[m];
                prev.clear();
                prev.extend_from_slice(&a);
                for j in 0..m {
                    a[j] = prev[j] - k * prev[m - 1 - j];
                }
                a.push(k);
            }
        }
        y
    }
}

/// One exact stationary draw of `n_grid` samples.
pub fn generate_series(truth: &CovarianceSpec, n_grid: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(TruthSampler::new(truth, n_grid)?.sample(seed))
}

/// Keeps every index independently with probability `1 / t_avg` and
/// re-indexes from the first kept sample.
pub fn subsample(dense: &[f64], t_avg: f64, seed: u64) -> Result<SampledSeries> {
    if !(t_avg >= 1.0) {
        return Err(Error::InvalidInput(format!("t_avg must be >= 1, got {t_avg}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 / t_avg;
    let kept: Vec<usize> = (0..dense.len()).filter(|_| rng.random::<f64>() < keep).collect();
    from_kept(dense, kept)
}

/// Keeps exactly `n_a` indices chosen uniformly without replacement.
pub fn subsample_exact(dense: &[f64], n_a: usize, seed: u64) -> Result<SampledSeries> {
    if n_a > dense.len() {
        return Err(Error::InvalidInput(format!(
            "cannot keep {n_a} of {} samples",
            dense.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = index::sample(&mut rng, dense.len(), n_a).into_vec();
    kept.sort_unstable();
    from_kept(dense, kept)
}

fn from_kept(dense: &[f64], kept: Vec<usize>) -> Result<SampledSeries> {
    if kept.len() < 2 {
        return Err(Error::Degenerate(kept.len()));
    }
    let first = kept[0];
    let span = kept[kept.len() - 1] - first + 1;
    let values = kept.iter().map(|&i| dense[i]).collect();
    let indices = kept.iter().map(|&i| i - first).collect();
    SampledSeries::new(1.0, span, indices, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::ArModel;

    fn var(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn deterministic() {
        let truth = CovarianceSpec::SquaredExponential { length_scale: 10.0 };
        assert_eq!(generate_series(&truth, 50, 3).unwrap(), generate_series(&truth, 50, 3).unwrap());
        assert_ne!(generate_series(&truth, 50, 3).unwrap(), generate_series(&truth, 50, 4).unwrap());
    }

    #[test]
    fn ar1_variance() {
        let truth = CovarianceSpec::Ar { model: ArModel::new(vec![0.5], 1.0) };
        let y = generate_series(&truth, 100_000, 1).unwrap();
        let v = var(&y);
        assert!((v / (4.0 / 3.0) - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn white_noise_lag_one() {
        let truth = CovarianceSpec::Ar { model: ArModel::white_noise(1.0) };
        let n = 20_000;
        let y = generate_series(&truth, n, 2).unwrap();
        let c1: f64 = y.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n as f64;
        let rho = c1 / var(&y);
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "{rho}");
    }

    #[test]
    fn kernel_draw_first_sample_has_unit_scale() {
        // the marginal of every sample is N(0, r(0))
        let truth = CovarianceSpec::Exponential { length_scale: 3.0 };
        let first: Vec<f64> = (0..4000).map(|s| generate_series(&truth, 5, s).unwrap()[4]).collect();
        let v = var(&first);
        assert!((v - 1.0).abs() < 0.08, "{v}");
    }

    #[test]
    fn subsample_examples() {
        let dense: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let all = subsample(&dense, 1.0, 1).unwrap();
        assert_eq!(all.n_a(), 50);
        assert_eq!(all.values(), &dense[..]);
        let a = subsample(&dense, 3.0, 9).unwrap();
        let b = subsample(&dense, 3.0, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.indices()[0], 0);
        assert!(subsample(&dense, 0.5, 1).is_err());
        assert!(matches!(subsample(&[1.0, 2.0], 1e9, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn subsample_keep_fraction() {
        let dense = vec![0.0; 1_000_000];
        let s = subsample(&dense, 5.0, 4).unwrap();
        let frac = s.n_a() as f64 / 1e6;
        assert!((frac - 0.2).abs() < 0.002, "{frac}");
    }

    #[test]
    fn exact_subsample_count() {
        let dense: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let s = subsample_exact(&dense, 200, 5).unwrap();
        assert_eq!(s.n_a(), 200);
        assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
    }
}
