use super::{FilterSums, SampledSeries};
use crate::ar::{ar_autocovariance, ArModel};
use crate::dense;
use crate::error::{Error, Result};
use crate::statespace::{stationary_covariance, StateSpaceModel};

/// Conditional state mean and covariance of a real-valued filter, plus the
/// running likelihood statistics.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub mu: Vec<f64>,
    /// Row-major `s x s`.
    pub sigma: Vec<f64>,
    pub sums: FilterSums,
    pc: Vec<f64>,
    next: Vec<f64>,
    tmp: Vec<f64>,
}

impl FilterState {
    /// Zero mean and the stationary covariance of `ss`.
    pub fn stationary(ss: &StateSpaceModel) -> Result<Self> {
        let s = ss.state_dim();
        let sigma = initial_covariance(ss)?;
        Ok(FilterState {
            mu: vec![0.0; s],
            sigma,
            sums: FilterSums::default(),
            pc: vec![0.0; s],
            next: vec![0.0; s * s],
            tmp: vec![0.0; s * s],
        })
    }

    /// `mu <- M mu`, `Sigma <- M Sigma M^T + add`.
    #[inline]
    pub(crate) fn predict(&mut self, m: &[f64], add: &[f64]) {
        let s = self.mu.len();
        for i in 0..s {
            self.pc[i] = m[i * s..(i + 1) * s].iter().zip(&self.mu).map(|(x, y)| x * y).sum();
        }
        self.mu.copy_from_slice(&self.pc);
        dense::sandwich_add(m, &self.sigma, add, &mut self.next, &mut self.tmp, s);
        std::mem::swap(&mut self.sigma, &mut self.next);
    }

    /// Measurement update with observation row `c` and noise variance `r`.
    #[inline]
    pub(crate) fn update(&mut self, c: &[f64], r: f64, y: f64) -> Result<()> {
        let s = self.mu.len();
        for i in 0..s {
            self.pc[i] = self.sigma[i * s..(i + 1) * s].iter().zip(c).map(|(x, y)| x * y).sum();
        }
        let var = c.iter().zip(&self.pc).map(|(x, y)| x * y).sum::<f64>() + r;
        let pred: f64 = c.iter().zip(&self.mu).map(|(x, y)| x * y).sum();
        let e = y - pred;
        self.sums.push(e, var)?;
        let inv = 1.0 / var;
        for i in 0..s {
            let ki = self.pc[i] * inv;
            self.mu[i] += ki * e;
            // write both triangles from the upper one to keep Sigma symmetric
            for j in i..s {
                let v = self.sigma[i * s + j] - ki * self.pc[j];
                self.sigma[i * s + j] = v;
                self.sigma[j * s + i] = v;
            }
        }
        Ok(())
    }
}

/// Flat stationary covariance; the Toeplitz autocovariance for companion
/// models, the Lyapunov solution otherwise.
pub(crate) fn initial_covariance(ss: &StateSpaceModel) -> Result<Vec<f64>> {
    let s = ss.state_dim();
    match &ss.companion {
        Some(a) if a.len() == s => {
            let r = ar_autocovariance(&ArModel::new(a.clone(), ss.q[(0, 0)]), s)?;
            let mut m = vec![0.0; s * s];
            for i in 0..s {
                for j in 0..s {
                    m[i * s + j] = r[i.abs_diff(j)];
                }
            }
            Ok(m)
        }
        _ => Ok(dense::from_nalgebra(&stationary_covariance(ss)?)),
    }
}

/// Kalman likelihood with a prediction step at every grid point between
/// observations.
pub fn kalman_loglik(ss: &StateSpaceModel, series: &SampledSeries) -> Result<f64> {
    Ok(kalman_sums(ss, series)?.loglik())
}

pub(crate) fn kalman_sums(ss: &StateSpaceModel, series: &SampledSeries) -> Result<FilterSums> {
    if series.n_a() == 0 {
        return Ok(FilterSums::default());
    }
    let a = dense::from_nalgebra(&ss.a);
    let q = dense::from_nalgebra(&ss.q);
    let c: Vec<f64> = ss.c.iter().copied().collect();
    let mut state = FilterState::stationary(ss)?;
    let mut cur = series.indices()[0];
    for (idx, y) in series.iter() {
        while cur < idx {
            state.predict(&a, &q);
            cur += 1;
        }
        state.update(&c, ss.r, y)?;
    }
    Ok(state.sums)
}

/// Per-gap prediction operators `A^k` and `G(k) = sum_{i<k} A^i Q A^iT`.
#[derive(Debug, Clone)]
pub struct GapCache {
    s: usize,
    slot: Vec<Option<usize>>,
    gaps: Vec<usize>,
    powers: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

impl GapCache {
    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn state_dim(&self) -> usize {
        self.s
    }

    /// Row-major `(A^k, G(k))`.
    pub fn get(&self, k: usize) -> Option<(&[f64], &[f64])> {
        let i = (*self.slot.get(k)?)?;
        Some((&self.powers[i], &self.g[i]))
    }
}

/// Builds `A^k` and `G(k)` for every requested gap in one ascending pass
/// using `g_i = A g_{i-1} A^T` and `G(k) = G(k-1) + g_{k-1}`.
pub fn build_gap_cache(ss: &StateSpaceModel, gaps: &[usize]) -> GapCache {
    let s = ss.state_dim();
    let max = gaps.iter().copied().max().unwrap_or(0);
    let mut slot = vec![None; max + 1];
    let mut wanted: Vec<usize> = gaps.iter().copied().filter(|&k| k >= 1).collect();
    wanted.sort_unstable();
    wanted.dedup();
    let a = dense::from_nalgebra(&ss.a);
    let zero = vec![0.0; s * s];
    let mut power = a.clone();
    let mut g_term = dense::from_nalgebra(&ss.q);
    let mut g_sum = g_term.clone();
    let mut powers = Vec::with_capacity(wanted.len());
    let mut g = Vec::with_capacity(wanted.len());
    let mut scratch = vec![0.0; s * s];
    let mut tmp = vec![0.0; s * s];
    let mut next = 0;
    for k in 1..=max {
        if k > 1 {
            dense::matmul(&a, &power, &mut scratch, s);
            std::mem::swap(&mut power, &mut scratch);
            dense::sandwich_add(&a, &g_term, &zero, &mut scratch, &mut tmp, s);
            std::mem::swap(&mut g_term, &mut scratch);
            for (x, y) in g_sum.iter_mut().zip(&g_term) {
                *x += y;
            }
        }
        if next < wanted.len() && wanted[next] == k {
            slot[k] = Some(powers.len());
            powers.push(power.clone());
            g.push(g_sum.clone());
            next += 1;
        }
    }
    GapCache { s, slot, gaps: wanted, powers, g }
}

pub(crate) fn prekal_sums(
    ss: &StateSpaceModel,
    series: &SampledSeries,
    cache: &GapCache,
) -> Result<FilterSums> {
    if series.n_a() == 0 {
        return Ok(FilterSums::default());
    }
    let c: Vec<f64> = ss.c.iter().copied().collect();
    let mut state = FilterState::stationary(ss)?;
    let mut prev = series.indices()[0];
    for (idx, y) in series.iter() {
        if idx > prev {
            let k = idx - prev;
            let (ak, gk) = cache.get(k).ok_or(Error::MissingGap(k))?;
            state.predict(ak, gk);
        }
        state.update(&c, ss.r, y)?;
        prev = idx;
    }
    Ok(state.sums)
}

/// Kalman likelihood using one cached prediction per observation gap.
pub fn prekal_loglik(ss: &StateSpaceModel, series: &SampledSeries, cache: &GapCache) -> Result<f64> {
    Ok(prekal_sums(ss, series, cache)?.loglik())
}
