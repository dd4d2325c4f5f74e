//! AR estimators over the partial-autocorrelation parametrization.
//!
//! Parameters live in an unconstrained space `theta_i = atanh(phi_i)` plus
//! `log sigma^2`, so every point maps to a stationary model. On top of the
//! objective in [`neg_log_posterior`] sit a multi-start maximum-likelihood
//! fit ([`ml_estimate`]) and an HMC posterior sampler ([`hmc_sample`])
//! whose draws are averaged in prediction-coefficient space
//! ([`posterior_mean_estimate`]).

mod hmc;
mod lbfgs;
mod ml;
mod objective;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use hmc::{
    hmc_sample, posterior_mean_estimate, posterior_mean_projected, HmcConfig, PosteriorSamples,
    PROJECTION_LIMIT,
};
pub use lbfgs::{minimize, LbfgsOptions, LbfgsOutcome, LbfgsStatus};
pub use ml::{ml_estimate, ml_estimate_with, MlFit, StartKind};
pub use objective::{gradient, log_jacobian_prior, neg_log_posterior, Objective};

use crate::ar::{step_up, ArModel, PartialAutocorr};
use crate::error::{Error, Result};
use crate::likelihood::SampledSeries;

/// Unconstrained coordinates: `theta_i = atanh(phi_i)` and `log sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedParams {
    pub theta: Vec<f64>,
    pub log_sigma2: f64,
}

/// Largest `|phi|` accepted when mapping into theta space.
const PHI_CLAMP: f64 = 1.0 - 1e-12;

impl UnconstrainedParams {
    pub fn new(theta: Vec<f64>, log_sigma2: f64) -> Self {
        UnconstrainedParams { theta, log_sigma2 }
    }

    pub fn white_noise(p: usize, sigma_v2: f64) -> Self {
        UnconstrainedParams { theta: vec![0.0; p], log_sigma2: sigma_v2.ln() }
    }

    pub fn from_pac(pac: &PartialAutocorr) -> Self {
        let theta = pac.phi.iter().map(|f| f.clamp(-PHI_CLAMP, PHI_CLAMP).atanh()).collect();
        UnconstrainedParams { theta, log_sigma2: pac.sigma_v2.ln() }
    }

    /// Flat `(theta_1, .., theta_p, log sigma^2)`.
    pub fn from_slice(x: &[f64]) -> Self {
        let (last, theta) = x.split_last().expect("at least the log sigma^2 coordinate");
        UnconstrainedParams { theta: theta.to_vec(), log_sigma2: *last }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = self.theta.clone();
        x.push(self.log_sigma2);
        x
    }

    pub fn order(&self) -> usize {
        self.theta.len()
    }

    pub fn phi(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.tanh()).collect()
    }

    pub fn sigma_v2(&self) -> f64 {
        self.log_sigma2.exp()
    }

    pub fn to_pac(&self) -> PartialAutocorr {
        PartialAutocorr::new(self.phi(), self.sigma_v2())
    }

    /// Fails only when `|theta|` is so large that `tanh` rounds to one.
    pub fn to_model(&self) -> Result<ArModel> {
        step_up(&self.to_pac())
    }
}

/// Prior on each partial autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// `p(phi) ~ (1 - phi^2)^(-1/2)`.
    Reference,
    /// Uniform on `(-1, 1)`.
    FlatPhi,
}

impl PriorKind {
    pub fn method_name(&self) -> &'static str {
        match self {
            PriorKind::Reference => "pmean",
            PriorKind::FlatPhi => "pmean-f",
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorKind::Reference => "reference",
            PriorKind::FlatPhi => "flat",
        })
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reference" | "ref" => Ok(PriorKind::Reference),
            "flat" | "flatphi" | "flat-phi" => Ok(PriorKind::FlatPhi),
            other => Err(Error::InvalidInput(format!("unknown prior '{other}'"))),
        }
    }
}

/// How missing grid points are handled when building a dense series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizeMode {
    Nearest,
    Linear,
    Compact,
}

/// Dense series from an irregular one. `Nearest` and `Linear` fill every
/// grid index between the first and last observation (nearest ties go to
/// the left neighbour); `Compact` drops the gaps.
pub fn regularize(series: &SampledSeries, mode: RegularizeMode) -> Result<Vec<f64>> {
    if series.n_a() < 2 {
        return Err(Error::TooFewSamples(format!(
            "regularization needs at least 2 observations, got {}",
            series.n_a()
        )));
    }
    let idx = series.indices();
    let val = series.values();
    if mode == RegularizeMode::Compact {
        return Ok(val.to_vec());
    }
    let mut out = Vec::with_capacity(series.span() + 1);
    for w in 0..idx.len() - 1 {
        let (i0, i1) = (idx[w], idx[w + 1]);
        let (y0, y1) = (val[w], val[w + 1]);
        let len = (i1 - i0) as f64;
        for g in i0..i1 {
            let d = (g - i0) as f64;
            out.push(match mode {
                RegularizeMode::Nearest => {
                    if d <= len - d {
                        y0
                    } else {
                        y1
                    }
                }
                _ => y0 + (y1 - y0) * d / len,
            });
        }
    }
    out.push(val[val.len() - 1]);
    Ok(out)
}

/// Burg's estimator: order-recursive reflection coefficients minimizing the
/// summed forward and backward residual power.
pub fn burg(x: &[f64], p: usize) -> Result<PartialAutocorr> {
    if x.len() <= p || x.is_empty() {
        return Err(Error::TooFewSamples(format!(
            "Burg order {p} needs more than {p} samples, got {}",
            x.len()
        )));
    }
    let mut power = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let mut f = x.to_vec();
    let mut b = x.to_vec();
    let mut phi = Vec::with_capacity(p);
    for m in 1..=p {
        let mut num = 0.0;
        let mut den = 0.0;
        for n in m..x.len() {
            num += f[n] * b[n - 1];
            den += f[n] * f[n] + b[n - 1] * b[n - 1];
        }
        let k = if den > 0.0 { (2.0 * num / den).clamp(-PHI_CLAMP, PHI_CLAMP) } else { 0.0 };
        for n in (m..x.len()).rev() {
            let fn_ = f[n];
            f[n] = fn_ - k * b[n - 1];
            b[n] = b[n - 1] - k * fn_;
        }
        power *= 1.0 - k * k;
        phi.push(k);
    }
    Ok(PartialAutocorr::new(phi, power))
}

impl fmt::Display for RegularizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegularizeMode::Nearest => "nearest",
            RegularizeMode::Linear => "linear",
            RegularizeMode::Compact => "compact",
        })
    }
}
