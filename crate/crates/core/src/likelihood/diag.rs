use num_complex::Complex64;

use super::{FilterSums, SampledSeries};
use crate::error::{Error, Result};
use crate::statespace::{stationary_covariance_diag, DiagStateSpace};

const GEOMETRIC_GUARD: f64 = 1e-14;

/// Per-gap eigenbasis operators: `Lambda^k`, `F_p(k)[i,j] = (l_i l_j*)^k`
/// and `G_p(k)[i,j] = (1 - (l_i l_j*)^k) / (1 - l_i l_j*)`.
#[derive(Debug, Clone)]
pub struct DiagGapCache {
    s: usize,
    slot: Vec<Option<usize>>,
    gaps: Vec<usize>,
    lambda_pow: Vec<Vec<Complex64>>,
    fp: Vec<Vec<Complex64>>,
    gp: Vec<Vec<Complex64>>,
    /// `G_p(k) o Qe`.
    gq: Vec<Vec<Complex64>>,
}

/// Borrowed view of one cached gap.
pub struct DiagGap<'a> {
    pub lambda_pow: &'a [Complex64],
    pub fp: &'a [Complex64],
    pub gp: &'a [Complex64],
    pub gq: &'a [Complex64],
}

impl DiagGapCache {
    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn state_dim(&self) -> usize {
        self.s
    }

    pub fn get(&self, k: usize) -> Option<DiagGap<'_>> {
        let i = (*self.slot.get(k)?)?;
        Some(DiagGap {
            lambda_pow: &self.lambda_pow[i],
            fp: &self.fp[i],
            gp: &self.gp[i],
            gq: &self.gq[i],
        })
    }
}

/// Closed-form gap operators, exponentiating by squaring.
pub fn build_diag_gap_cache(dss: &DiagStateSpace, gaps: &[usize]) -> DiagGapCache {
    let s = dss.state_dim();
    let mut wanted: Vec<usize> = gaps.iter().copied().filter(|&k| k >= 1).collect();
    wanted.sort_unstable();
    wanted.dedup();
    let max = wanted.last().copied().unwrap_or(0);
    let mut slot = vec![None; max + 1];
    let one = Complex64::new(1.0, 0.0);
    let prod: Vec<Complex64> = (0..s * s)
        .map(|ij| dss.lambda[ij / s] * dss.lambda[ij % s].conj())
        .collect();
    let mut cache = DiagGapCache {
        s,
        slot: Vec::new(),
        gaps: wanted.clone(),
        lambda_pow: Vec::with_capacity(wanted.len()),
        fp: Vec::with_capacity(wanted.len()),
        gp: Vec::with_capacity(wanted.len()),
        gq: Vec::with_capacity(wanted.len()),
    };
    for (n, &k) in wanted.iter().enumerate() {
        slot[k] = Some(n);
        let kk = k as u32;
        cache.lambda_pow.push(dss.lambda.iter().map(|l| l.powu(kk)).collect());
        let fp: Vec<Complex64> = prod.iter().map(|w| w.powu(kk)).collect();
        let gp: Vec<Complex64> = prod
            .iter()
            .zip(&fp)
            .map(|(&w, &wk)| {
                let den = one - w;
                if den.norm() > GEOMETRIC_GUARD {
                    (one - wk) / den
                } else {
                    // explicit sum of the k geometric terms
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut term = one;
                    for _ in 0..k {
                        acc += term;
                        term *= w;
                    }
                    acc
                }
            })
            .collect();
        let gq: Vec<Complex64> = (0..s * s).map(|ij| gp[ij] * dss.qe[(ij / s, ij % s)]).collect();
        cache.fp.push(fp);
        cache.gp.push(gp);
        cache.gq.push(gq);
    }
    cache.slot = slot;
    cache
}

pub(crate) fn diag_prekal_sums(
    dss: &DiagStateSpace,
    series: &SampledSeries,
    cache: &DiagGapCache,
) -> Result<FilterSums> {
    let mut sums = FilterSums::default();
    if series.n_a() == 0 {
        return Ok(sums);
    }
    let s = dss.state_dim();
    let init = stationary_covariance_diag(dss);
    let mut sigma: Vec<Complex64> = (0..s * s).map(|ij| init[(ij / s, ij % s)]).collect();
    let mut mu = vec![Complex64::new(0.0, 0.0); s];
    let mut u = vec![Complex64::new(0.0, 0.0); s];
    let ce = &dss.ce;
    let mut prev = series.indices()[0];
    for (idx, y) in series.iter() {
        if idx > prev {
            let k = idx - prev;
            let gap = cache.get(k).ok_or(Error::MissingGap(k))?;
            for (m, l) in mu.iter_mut().zip(gap.lambda_pow) {
                *m *= l;
            }
            for ((x, f), g) in sigma.iter_mut().zip(gap.fp).zip(gap.gq) {
                *x = *x * f + g;
            }
        }
        // u = Sigma Ce^H
        for i in 0..s {
            let row = &sigma[i * s..(i + 1) * s];
            u[i] = row.iter().zip(ce).map(|(x, c)| x * c.conj()).sum();
        }
        let var = ce.iter().zip(&u).map(|(c, x)| c * x).sum::<Complex64>().re + dss.r;
        let pred = ce.iter().zip(&mu).map(|(c, m)| c * m).sum::<Complex64>().re;
        let e = y - pred;
        sums.push(e, var)?;
        let inv = 1.0 / var;
        for i in 0..s {
            let ki = u[i] * inv;
            mu[i] += ki * e;
            sigma[i * s + i] = Complex64::new(sigma[i * s + i].re - (ki * u[i].conj()).re, 0.0);
            for j in (i + 1)..s {
                let v = sigma[i * s + j] - ki * u[j].conj();
                sigma[i * s + j] = v;
                sigma[j * s + i] = v.conj();
            }
        }
        prev = idx;
    }
    Ok(sums)
}

/// Kalman likelihood on the eigenbasis; the prediction over a gap is
/// `F_p o Sigma + G_p o Qe`.
pub fn diag_prekal_loglik(
    dss: &DiagStateSpace,
    series: &SampledSeries,
    cache: &DiagGapCache,
) -> Result<f64> {
    Ok(diag_prekal_sums(dss, series, cache)?.loglik())
}
