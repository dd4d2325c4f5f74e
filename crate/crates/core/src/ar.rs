//! Autoregressive model algebra.
//!
//! Conventions: `y_n = sum_i a_i y_{n-i} + v_n`, frequencies in cycles per
//! grid sample on `[0, 0.5]`, covariances evaluated on integer lags.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative nugget added to `r(0)` of squared-exponential covariances.
pub const SE_NUGGET: f64 = 1e-8;
/// Levinson order used for the innovation variance of non-AR kernels.
pub const TRUTH_LEVINSON_ORDER: usize = 200;
const TRUTH_CHECK_ORDER: usize = 150;
const TRUTH_CONVERGENCE_TOL: f64 = 1e-9;
const POLE_IMAG_TOL: f64 = 1e-12;

/// AR(p) model: prediction coefficients and innovation variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArModelRepr", into = "ArModelRepr")]
pub struct ArModel {
    pub a: Vec<f64>,
    pub sigma_v2: f64,
}

#[derive(Serialize, Deserialize)]
struct ArModelRepr {
    p: usize,
    a: Vec<f64>,
    sigma_v2: f64,
}

impl TryFrom<ArModelRepr> for ArModel {
    type Error = String;

    fn try_from(r: ArModelRepr) -> std::result::Result<Self, String> {
        if r.p != r.a.len() {
            return Err(format!("p = {} but {} coefficients given", r.p, r.a.len()));
        }
        if !(r.sigma_v2 > 0.0 && r.sigma_v2.is_finite()) {
            return Err(format!("sigma_v2 must be positive, got {}", r.sigma_v2));
        }
        if r.a.iter().any(|x| !x.is_finite()) {
            return Err("non-finite coefficient".into());
        }
        Ok(ArModel { a: r.a, sigma_v2: r.sigma_v2 })
    }
}

impl From<ArModel> for ArModelRepr {
    fn from(m: ArModel) -> Self {
        ArModelRepr { p: m.a.len(), a: m.a, sigma_v2: m.sigma_v2 }
    }
}

impl ArModel {
    pub fn new(a: Vec<f64>, sigma_v2: f64) -> Self {
        ArModel { a, sigma_v2 }
    }

    pub fn white_noise(sigma_v2: f64) -> Self {
        ArModel { a: Vec::new(), sigma_v2 }
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    pub fn is_stationary(&self) -> bool {
        step_down(self).is_ok()
    }

    /// Drops trailing coefficients with magnitude `<= tol`.
    pub fn trimmed(&self, tol: f64) -> ArModel {
        let mut a = self.a.clone();
        while a.last().is_some_and(|x| x.abs() <= tol) {
            a.pop();
        }
        ArModel { a, sigma_v2: self.sigma_v2 }
    }
}

/// Partial autocorrelation (reflection coefficient) parametrization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialAutocorr {
    pub phi: Vec<f64>,
    pub sigma_v2: f64,
}

impl PartialAutocorr {
    pub fn new(phi: Vec<f64>, sigma_v2: f64) -> Self {
        PartialAutocorr { phi, sigma_v2 }
    }
}

/// Stationary covariance on the integer grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceSpec {
    Ar { model: ArModel },
    Exponential { length_scale: f64 },
    SquaredExponential { length_scale: f64 },
    Tabulated { r: Vec<f64> },
}

/// Innovation variance of a truth covariance together with its convergence
/// status (only meaningful for non-AR kernels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthInnovation {
    pub sigma_v2: f64,
    pub converged: bool,
}

impl CovarianceSpec {
    /// Fraction of `r(0)` added to the zero lag before factorizations.
    pub fn nugget_fraction(&self) -> f64 {
        match self {
            CovarianceSpec::SquaredExponential { .. } => SE_NUGGET,
            _ => 0.0,
        }
    }

    /// Covariance at lags `0..=max_lag` with the nugget applied to lag 0.
    pub fn regularized(&self, max_lag: usize) -> Result<Vec<f64>> {
        let mut r = kernel_covariance(self, max_lag)?;
        r[0] *= 1.0 + self.nugget_fraction();
        Ok(r)
    }

    /// Innovation variance of the optimal one-step predictor for this
    /// covariance. Exact for AR truths; Levinson at order 200 otherwise.
    pub fn innovation(&self) -> Result<TruthInnovation> {
        match self {
            CovarianceSpec::Ar { model } => {
                step_down(model)?;
                Ok(TruthInnovation { sigma_v2: model.sigma_v2, converged: true })
            }
            CovarianceSpec::Tabulated { r } if r.len() <= TRUTH_LEVINSON_ORDER => {
                let lev = levinson(r, r.len() - 1)?;
                Ok(TruthInnovation { sigma_v2: lev.sigma2, converged: false })
            }
            _ => {
                let r = self.regularized(TRUTH_LEVINSON_ORDER)?;
                let lev = levinson(&r, TRUTH_LEVINSON_ORDER)?;
                let s_full = lev.sigma2;
                let s_check = lev.variances[TRUTH_CHECK_ORDER];
                let converged = ((s_full - s_check) / s_full).abs() < TRUTH_CONVERGENCE_TOL;
                Ok(TruthInnovation { sigma_v2: s_full, converged })
            }
        }
    }
}

/// One-step prediction error of an estimated model against a truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeReport {
    pub me: f64,
    pub pe: f64,
    pub sigma_v2_truth: f64,
    pub n_a: usize,
    /// False when the truth innovation variance did not converge in order.
    pub truth_converged: bool,
}

/// Levinson step-up: partial autocorrelations to prediction coefficients.
pub fn step_up(pac: &PartialAutocorr) -> Result<ArModel> {
    if let Some(bad) = pac.phi.iter().find(|f| !(f.abs() < 1.0)) {
        return Err(Error::NonStationary(format!("|phi| = {} >= 1", bad.abs())));
    }
    let mut a: Vec<f64> = Vec::with_capacity(pac.phi.len());
    let mut prev = Vec::with_capacity(pac.phi.len());
    for (m, &phi) in pac.phi.iter().enumerate() {
        prev.clear();
        prev.extend_from_slice(&a);
        for j in 0..m {
            a[j] = prev[j] - phi * prev[m - 1 - j];
        }
        a.push(phi);
    }
    Ok(ArModel { a, sigma_v2: pac.sigma_v2 })
}

/// Inverse of [`step_up`].
pub fn step_down(model: &ArModel) -> Result<PartialAutocorr> {
    let p = model.order();
    let mut phi = vec![0.0; p];
    let mut a = model.a.clone();
    for m in (0..p).rev() {
        let k = a[m];
        if !(k.abs() < 1.0) {
            return Err(Error::NonStationary(format!(
                "partial autocorrelation {} at order {} has magnitude >= 1",
                k,
                m + 1
            )));
        }
        phi[m] = k;
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (0..m).map(|j| (a[j] + k * a[m - 1 - j]) / denom).collect();
        a.truncate(m);
        a.copy_from_slice(&prev);
    }
    Ok(PartialAutocorr { phi, sigma_v2: model.sigma_v2 })
}

/// Step-down that clamps every partial autocorrelation to `|phi| <= limit`
/// instead of failing. Returns the clamped parameters and whether any clamp
/// was applied.
pub fn step_down_clamped(model: &ArModel, limit: f64) -> (PartialAutocorr, bool) {
    let p = model.order();
    let mut phi = vec![0.0; p];
    let mut a = model.a.clone();
    let mut clamped = false;
    for m in (0..p).rev() {
        let mut k = a[m];
        if !k.is_finite() {
            k = 0.0;
            clamped = true;
        } else if k.abs() > limit {
            k = limit.copysign(k);
            clamped = true;
        }
        phi[m] = k;
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (0..m).map(|j| (a[j] + k * a[m - 1 - j]) / denom).collect();
        a.truncate(m);
        a.copy_from_slice(&prev);
    }
    (PartialAutocorr { phi, sigma_v2: model.sigma_v2 }, clamped)
}

/// Builds the AR polynomial from its poles (reciprocal roots of
/// `1 - sum a_j z^-j`).
pub fn poles_to_ar(poles: &[Complex64], sigma_v2: f64) -> Result<ArModel> {
    if let Some(p) = poles.iter().find(|p| !(p.norm() < 1.0)) {
        return Err(Error::NonStationary(format!("pole {p} on or outside the unit circle")));
    }
    // coefficients of prod (1 - p_k z^-1) = 1 + sum c_i z^-i
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &pole in poles {
        let mut next = c.clone();
        next.push(Complex64::new(0.0, 0.0));
        for i in 0..c.len() {
            next[i + 1] -= pole * c[i];
        }
        c = next;
    }
    let mut a = Vec::with_capacity(poles.len());
    for ci in &c[1..] {
        if ci.im.abs() > POLE_IMAG_TOL * ci.norm().max(1.0) {
            return Err(Error::NotConjugateClosed);
        }
        a.push(-ci.re);
    }
    Ok(ArModel { a, sigma_v2 })
}

/// Exact autocovariance `r[0..=max_lag]` of a stationary AR model.
pub fn ar_autocovariance(model: &ArModel, max_lag: usize) -> Result<Vec<f64>> {
    let p = model.order();
    let pac = step_down(model)?;
    // intermediate coefficient vectors of the step-up recursion
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    stages.push(Vec::new());
    for m in 0..p {
        let prev = &stages[m];
        let phi = pac.phi[m];
        let mut a: Vec<f64> = (0..m).map(|j| prev[j] - phi * prev[m - 1 - j]).collect();
        a.push(phi);
        stages.push(a);
    }
    let r0 = pac.phi.iter().fold(model.sigma_v2, |acc, f| acc / (1.0 - f * f));
    let len = max_lag.max(p) + 1;
    let mut r = vec![0.0; len];
    r[0] = r0;
    let mut v = r0;
    for m in 1..=p {
        let prev = &stages[m - 1];
        let mut acc = pac.phi[m - 1] * v;
        for j in 1..m {
            acc += prev[j - 1] * r[m - j];
        }
        r[m] = acc;
        v *= 1.0 - pac.phi[m - 1] * pac.phi[m - 1];
    }
    for k in (p + 1)..len {
        r[k] = (1..=p).map(|j| model.a[j - 1] * r[k - j]).sum();
    }
    r.truncate(max_lag + 1);
    Ok(r)
}

/// Covariance at integer lags `0..=max_lag` (no nugget).
pub fn kernel_covariance(spec: &CovarianceSpec, max_lag: usize) -> Result<Vec<f64>> {
    match spec {
        CovarianceSpec::Ar { model } => ar_autocovariance(model, max_lag),
        CovarianceSpec::Exponential { length_scale } => {
            check_length_scale(*length_scale)?;
            Ok((0..=max_lag).map(|k| (-(k as f64) / length_scale).exp()).collect())
        }
        CovarianceSpec::SquaredExponential { length_scale } => {
            check_length_scale(*length_scale)?;
            Ok((0..=max_lag)
                .map(|k| {
                    let x = k as f64 / length_scale;
                    (-x * x).exp()
                })
                .collect())
        }
        CovarianceSpec::Tabulated { r } => {
            if max_lag >= r.len() {
                return Err(Error::LagOutOfRange { lag: max_lag, len: r.len() });
            }
            Ok(r[..=max_lag].to_vec())
        }
    }
}

fn check_length_scale(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("length scale must be positive, got {l}")))
    }
}

/// Output of the Levinson–Durbin recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct Levinson {
    /// Prediction coefficients of the final order.
    pub a: Vec<f64>,
    pub phi: Vec<f64>,
    /// Prediction-error variance at the final order.
    pub sigma2: f64,
    /// Prediction-error variance for orders `0..=order`.
    pub variances: Vec<f64>,
}

/// Levinson–Durbin recursion on `r[0..=order]`.
pub fn levinson(r: &[f64], order: usize) -> Result<Levinson> {
    if r.len() <= order {
        return Err(Error::InvalidInput(format!(
            "need {} covariance lags for order {order}, got {}",
            order + 1,
            r.len()
        )));
    }
    if !(r[0] > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("r(0) = {}", r[0])));
    }
    let mut a: Vec<f64> = Vec::with_capacity(order);
    let mut prev: Vec<f64> = Vec::with_capacity(order);
    let mut phi = Vec::with_capacity(order);
    let mut variances = Vec::with_capacity(order + 1);
    let mut v = r[0];
    variances.push(v);
    for m in 0..order {
        let mut num = r[m + 1];
        for j in 0..m {
            num -= a[j] * r[m - j];
        }
        let k = num / v;
        if !(k.abs() < 1.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "partial correlation {k} at order {}",
                m + 1
            )));
        }
        prev.clear();
        prev.extend_from_slice(&a);
        for j in 0..m {
            a[j] = prev[j] - k * prev[m - 1 - j];
        }
        a.push(k);
        phi.push(k);
        v *= 1.0 - k * k;
        variances.push(v);
    }
    Ok(Levinson { a, phi, sigma2: v, variances })
}

/// Prediction-error variance and partial correlations of the optimal
/// `max_order` predictor for covariance `r`.
pub fn innovation_variance(r: &[f64], max_order: usize) -> Result<(f64, Vec<f64>)> {
    let lev = levinson(r, max_order)?;
    Ok((lev.sigma2, lev.phi))
}

/// Power spectral density `sigma_v2 / |1 - sum a_j e^{-i 2 pi f j}|^2`.
pub fn ar_spectrum(model: &ArModel, freqs: &[f64]) -> Result<Vec<f64>> {
    step_down(model)?;
    freqs
        .iter()
        .map(|&f| {
            if !(0.0..=0.5).contains(&f) {
                return Err(Error::FreqOutOfRange(f));
            }
            let mut den = Complex64::new(1.0, 0.0);
            for (j, &aj) in model.a.iter().enumerate() {
                let w = -2.0 * std::f64::consts::PI * f * (j + 1) as f64;
                den -= aj * Complex64::from_polar(1.0, w);
            }
            Ok(model.sigma_v2 / den.norm_sqr())
        })
        .collect()
}

/// `n_a (PE / sigma_v2_truth - 1)` with PE the one-step prediction error of
/// `estimate` applied to the truth process.
pub fn model_error(estimate: &ArModel, truth: &CovarianceSpec, n_a: usize) -> Result<MeReport> {
    step_down(estimate)?;
    let p = estimate.order();
    let r = truth.regularized(p)?;
    let mut coef = Vec::with_capacity(p + 1);
    coef.push(1.0);
    coef.extend(estimate.a.iter().map(|x| -x));
    let mut pe = 0.0;
    for i in 0..=p {
        for j in 0..=p {
            pe += coef[i] * coef[j] * r[i.abs_diff(j)];
        }
    }
    let truth_inn = truth.innovation()?;
    Ok(MeReport {
        me: n_a as f64 * (pe / truth_inn.sigma_v2 - 1.0),
        pe,
        sigma_v2_truth: truth_inn.sigma_v2,
        n_a,
        truth_converged: truth_inn.converged,
    })
}

/// Quadratic-form model error `n_a (a_hat - a)^T R (a_hat - a) / sigma_v2`
/// for an AR truth, with `R` the covariance of `p` consecutive observations.
/// Orders are aligned by zero padding.
pub fn model_error_ar_quadratic(estimate: &ArModel, truth: &ArModel, n_a: usize) -> Result<f64> {
    let p = estimate.order().max(truth.order());
    let pad = |a: &[f64]| {
        let mut v = a.to_vec();
        v.resize(p, 0.0);
        v
    };
    let (ah, at) = (pad(&estimate.a), pad(&truth.a));
    let delta: Vec<f64> = ah.iter().zip(&at).map(|(x, y)| x - y).collect();
    let r = ar_autocovariance(truth, p)?;
    let mut q = 0.0;
    for i in 0..p {
        for j in 0..p {
            q += delta[i] * delta[j] * r[i.abs_diff(j)];
        }
    }
    Ok(n_a as f64 * q / truth.sigma_v2)
}
