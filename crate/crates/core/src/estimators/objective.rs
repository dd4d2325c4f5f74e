use super::{PriorKind, UnconstrainedParams};
use crate::ar::{step_up, PartialAutocorr};
use crate::error::{Error, Result};
use crate::likelihood::{loglik_sums, white_noise_sums, Engine, FilterSums, SampledSeries};
use crate::statespace::ar_to_ss;

/// Relative central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// `log(1 - tanh(t)^2)`, stable for large `|t|`.
fn log_one_minus_tanh_sq(t: f64) -> f64 {
    let a = t.abs();
    -2.0 * (a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2)
}

/// Prior plus Jacobian addend on the log scale: `1/2 sum log(1 - phi^2)` for
/// the reference prior, `sum log(1 - phi^2)` for the flat one, zero without
/// a prior.
pub fn log_jacobian_prior(theta: &[f64], prior: Option<PriorKind>) -> f64 {
    let factor = match prior {
        None => return 0.0,
        Some(PriorKind::Reference) => 0.5,
        Some(PriorKind::FlatPhi) => 1.0,
    };
    factor * theta.iter().map(|&t| log_one_minus_tanh_sq(t)).sum::<f64>()
}

/// Negative log posterior (or negative log-likelihood when `prior` is
/// `None`) on the flat coordinates `(theta, log sigma^2)`.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    series: &'a SampledSeries,
    gaps: Vec<usize>,
    p: usize,
    prior: Option<PriorKind>,
    engine: Engine,
}

impl<'a> Objective<'a> {
    pub fn new(
        series: &'a SampledSeries,
        p: usize,
        prior: Option<PriorKind>,
        engine: Engine,
    ) -> Result<Self> {
        if series.n_a() == 0 {
            return Err(Error::TooFewSamples("objective needs a nonempty series".into()));
        }
        Ok(Objective { series, gaps: series.gaps(), p, prior, engine })
    }

    pub fn dim(&self) -> usize {
        self.p + 1
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn series(&self) -> &SampledSeries {
        self.series
    }

    /// Unit-variance filter sums for the partial autocorrelations
    /// `tanh(theta)`.
    pub fn sums(&self, theta: &[f64]) -> Result<FilterSums> {
        if theta.is_empty() {
            return Ok(white_noise_sums(self.series));
        }
        let phi = theta.iter().map(|t| t.tanh()).collect();
        let model = step_up(&PartialAutocorr::new(phi, 1.0))?;
        loglik_sums(&ar_to_ss(&model)?, self.series, &self.gaps, self.engine)
    }

    fn combine(&self, sums: &FilterSums, theta: &[f64], log_sigma2: f64) -> f64 {
        -(sums.loglik_scaled(log_sigma2.exp()) + log_jacobian_prior(theta, self.prior))
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let (theta, ls) = self.split(x);
        let v = self.combine(&self.sums(theta)?, theta, ls);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(x.to_vec()))
        }
    }

    /// Log-likelihood part only, at `x`.
    pub fn loglik(&self, x: &[f64]) -> Result<f64> {
        let (theta, ls) = self.split(x);
        Ok(self.sums(theta)?.loglik_scaled(ls.exp()))
    }

    /// Value and central-difference gradient with the default steps.
    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.value_and_gradient_scaled(x, 1.0)
    }

    /// As [`Objective::value_and_gradient`] with every step multiplied by
    /// `scale`.
    pub fn value_and_gradient_scaled(&self, x: &[f64], scale: f64) -> Result<(f64, Vec<f64>)> {
        let (theta, ls) = self.split(x);
        let center = self.sums(theta)?;
        let value = self.combine(&center, theta, ls);
        let mut grad = vec![0.0; x.len()];
        let mut probe = theta.to_vec();
        for i in 0..self.p {
            let h = FD_STEP * theta[i].abs().max(1.0) * scale;
            probe[i] = theta[i] + h;
            let up = self.combine(&self.sums(&probe)?, &probe, ls);
            probe[i] = theta[i] - h;
            let down = self.combine(&self.sums(&probe)?, &probe, ls);
            probe[i] = theta[i];
            grad[i] = (up - down) / (2.0 * h);
        }
        let h = FD_STEP * ls.abs().max(1.0) * scale;
        grad[self.p] =
            (self.combine(&center, theta, ls + h) - self.combine(&center, theta, ls - h)) / (2.0 * h);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(grad));
        }
        Ok((value, grad))
    }

    /// Log sigma^2 maximizing the likelihood for fixed `theta`.
    pub fn profile_log_sigma2(&self, theta: &[f64]) -> Result<f64> {
        let sums = self.sums(theta)?;
        let s2 = sums.sum_norm_sq / sums.n as f64;
        if s2 > 0.0 && s2.is_finite() {
            Ok(s2.ln())
        } else {
            Err(Error::NonFinite(theta.to_vec()))
        }
    }

    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], f64) {
        assert_eq!(x.len(), self.p + 1, "objective expects p + 1 coordinates");
        (&x[..self.p], x[self.p])
    }
}

/// `-[loglik + log prior + log |d phi / d theta|]`; without a prior the
/// Jacobian is left out and this is the negative log-likelihood.
pub fn neg_log_posterior(
    theta: &UnconstrainedParams,
    series: &SampledSeries,
    prior: Option<PriorKind>,
    engine: Engine,
) -> Result<f64> {
    Objective::new(series, theta.order(), prior, engine)?.value(&theta.to_vec())
}

/// Central-difference gradient of [`neg_log_posterior`], ordered as
/// `(theta_1, .., theta_p, log sigma^2)`.
pub fn gradient(
    theta: &UnconstrainedParams,
    series: &SampledSeries,
    prior: Option<PriorKind>,
    engine: Engine,
) -> Result<Vec<f64>> {
    let obj = Objective::new(series, theta.order(), prior, engine)?;
    Ok(obj.value_and_gradient(&theta.to_vec())?.1)
}
