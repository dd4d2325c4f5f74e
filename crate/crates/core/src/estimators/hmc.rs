use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ml::MlFit;
use super::objective::Objective;
use super::PriorKind;
use crate::ar::{step_down_clamped, step_up, ArModel, PartialAutocorr};
use crate::error::{Error, Result};
use crate::likelihood::{Engine, SampledSeries};

/// Partial autocorrelations of a non-stationary posterior mean are clamped
/// to this magnitude.
pub const PROJECTION_LIMIT: f64 = 1.0 - 1e-6;
/// Energy error beyond which a trajectory counts as divergent.
const DIVERGENCE_ENERGY: f64 = 1000.0;

/// Sampler settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcConfig {
    pub n_warmup: usize,
    pub n_samples: usize,
    /// Leapfrog steps per iteration are uniform on `1..=max_steps`.
    pub max_steps: usize,
    pub target_accept: f64,
    pub seed: u64,
    /// RNG stream; distinct chains with one seed are independent.
    pub chain: u64,
    /// Fail with [`Error::DivergedBadly`] above this divergence fraction.
    pub max_divergence_rate: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        HmcConfig {
            n_warmup: 500,
            n_samples: 1000,
            max_steps: 32,
            target_accept: 0.8,
            seed: 0,
            chain: 0,
            max_divergence_rate: 0.2,
        }
    }
}

/// Posterior draws of `(phi, sigma^2)` with sampler diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub p: usize,
    /// One vector of partial autocorrelations per draw.
    pub phi: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    /// Mean acceptance probability over the sampling iterations.
    pub accept_rate: f64,
    pub step_size: f64,
    /// Divergent sampling iterations.
    pub divergences: usize,
    /// Diagonal inverse mass matrix after adaptation.
    pub inv_metric: Vec<f64>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    /// Rows `(phi_1, .., phi_p, sigma2)`.
    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.phi.iter().zip(&self.sigma2).map(|(phi, s)| {
            let mut row = phi.clone();
            row.push(*s);
            row
        })
    }
}

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps_bar: f64,
    t: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        DualAveraging { mu: (10.0 * eps).ln(), h_bar: 0.0, log_eps_bar: eps.ln(), t: 0.0, target }
    }

    fn update(&mut self, accept: f64) -> f64 {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        let log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = eta * log_eps + (1.0 - eta) * self.log_eps_bar;
        log_eps.exp()
    }

    fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

#[derive(Default)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn push(&mut self, x: &[f64]) {
        if self.n == 0 {
            self.mean = vec![0.0; x.len()];
            self.m2 = vec![0.0; x.len()];
        }
        self.n += 1;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.n as f64;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Variance shrunk toward `1e-3` as in common HMC practice.
    fn regularized_variance(&self) -> Option<Vec<f64>> {
        if self.n < 3 {
            return None;
        }
        let n = self.n as f64;
        Some(
            self.m2
                .iter()
                .map(|m| (n / (n + 5.0)) * (m / (n - 1.0)) + 1e-3 * (5.0 / (n + 5.0)))
                .collect(),
        )
    }
}

struct Sampler<'a, 'b> {
    obj: &'b Objective<'a>,
    inv_metric: Vec<f64>,
    rng: ChaCha8Rng,
    q: Vec<f64>,
    u: f64,
    grad: Vec<f64>,
}

struct Transition {
    accept_prob: f64,
    divergent: bool,
}

impl Sampler<'_, '_> {
    fn kinetic(&self, r: &[f64]) -> f64 {
        0.5 * r.iter().zip(&self.inv_metric).map(|(r, m)| m * r * r).sum::<f64>()
    }

    fn momentum(&mut self) -> Vec<f64> {
        self.inv_metric
            .iter()
            .map(|m| self.rng.sample::<f64, _>(StandardNormal) / m.sqrt())
            .collect()
    }

    /// Leapfrog integration; `None` when an evaluation fails.
    fn leapfrog(&self, r: &mut [f64], eps: f64, steps: usize) -> Option<(Vec<f64>, f64, Vec<f64>)> {
        let mut q = self.q.clone();
        let mut g = self.grad.clone();
        let mut u = self.u;
        for (ri, gi) in r.iter_mut().zip(&g) {
            *ri -= 0.5 * eps * gi;
        }
        for step in 0..steps {
            for i in 0..q.len() {
                q[i] += eps * self.inv_metric[i] * r[i];
            }
            let (nu, ng) = self.obj.value_and_gradient(&q).ok()?;
            u = nu;
            g = ng;
            let f = if step + 1 == steps { 0.5 } else { 1.0 };
            for (ri, gi) in r.iter_mut().zip(&g) {
                *ri -= f * eps * gi;
            }
        }
        Some((q, u, g))
    }

    fn transition(&mut self, eps: f64, max_steps: usize) -> Transition {
        let steps = self.rng.random_range(1..=max_steps);
        let mut r = self.momentum();
        let h0 = self.u + self.kinetic(&r);
        let Some((q, u, g)) = self.leapfrog(&mut r, eps, steps) else {
            return Transition { accept_prob: 0.0, divergent: true };
        };
        let h1 = u + self.kinetic(&r);
        let delta = h1 - h0;
        if !delta.is_finite() || delta > DIVERGENCE_ENERGY {
            return Transition { accept_prob: 0.0, divergent: true };
        }
        let accept_prob = (-delta).exp().min(1.0);
        if self.rng.random::<f64>() < accept_prob {
            self.q = q;
            self.u = u;
            self.grad = g;
        }
        Transition { accept_prob, divergent: false }
    }

    /// Doubles or halves a trial step until the one-step acceptance
    /// crosses one half.
    fn initial_step_size(&mut self, mut eps: f64) -> f64 {
        let accept = |s: &mut Self, eps: f64| -> f64 {
            let mut r = s.momentum();
            let h0 = s.u + s.kinetic(&r);
            match s.leapfrog(&mut r, eps, 1) {
                Some((_, u, _)) => {
                    let d = h0 - u - s.kinetic(&r);
                    if d.is_finite() {
                        d.exp().min(1.0)
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            }
        };
        let up = accept(self, eps) > 0.5;
        for _ in 0..60 {
            let a = accept(self, eps);
            if up && a <= 0.5 {
                return eps * 0.5;
            }
            if !up && a > 0.5 {
                return eps;
            }
            eps = if up { eps * 2.0 } else { eps * 0.5 };
        }
        eps
    }
}

/// HMC over `(atanh phi, log sigma^2)` with a flat prior on `log sigma^2`.
///
/// Warmup adapts the step size by dual averaging throughout; draws from
/// the window `[n_warmup/2, 0.85 n_warmup)` set a diagonal mass matrix,
/// after which the step size is adapted afresh.
pub fn hmc_sample(
    series: &SampledSeries,
    p: usize,
    prior: PriorKind,
    config: &HmcConfig,
    engine: Engine,
    init: Option<&MlFit>,
) -> Result<PosteriorSamples> {
    let obj = Objective::new(series, p, Some(prior), engine)?;
    let q0 = match init {
        Some(fit) if fit.params.order() == p => fit.params.to_vec(),
        _ => {
            let mut x = vec![0.0; p];
            x.push(obj.profile_log_sigma2(&x)?);
            x
        }
    };
    let (u, grad) = obj.value_and_gradient(&q0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.chain);
    let mut sampler = Sampler { obj: &obj, inv_metric: vec![1.0; p + 1], rng, q: q0, u, grad };
    let max_steps = config.max_steps.max(1);

    let n = config.n_warmup;
    let metric_start = n / 2;
    let metric_end = (n as f64 * 0.85) as usize;
    let mut eps = sampler.initial_step_size(0.1);
    let mut da = DualAveraging::new(eps, config.target_accept);
    let mut window = Welford::default();
    let mut last_window_accept = (0.0, 0usize);
    for it in 0..n {
        if it == metric_end {
            if let Some(var) = window.regularized_variance() {
                sampler.inv_metric = var;
                eps = sampler.initial_step_size(eps);
            }
            da = DualAveraging::new(eps, config.target_accept);
        }
        let tr = sampler.transition(eps, max_steps);
        eps = da.update(tr.accept_prob);
        if (metric_start..metric_end).contains(&it) {
            window.push(&sampler.q);
        }
        if it >= metric_end {
            last_window_accept.0 += tr.accept_prob;
            last_window_accept.1 += 1;
        }
    }
    if n > 0 {
        eps = da.final_step();
    }

    let mut phi = Vec::with_capacity(config.n_samples);
    let mut sigma2 = Vec::with_capacity(config.n_samples);
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    for _ in 0..config.n_samples {
        let tr = sampler.transition(eps, max_steps);
        accept_sum += tr.accept_prob;
        divergences += tr.divergent as usize;
        phi.push(sampler.q[..p].iter().map(|t| t.tanh()).collect());
        sigma2.push(sampler.q[p].exp());
    }
    let accept_rate = if config.n_samples > 0 {
        accept_sum / config.n_samples as f64
    } else if last_window_accept.1 > 0 {
        last_window_accept.0 / last_window_accept.1 as f64
    } else {
        f64::NAN
    };
    if config.n_samples > 0
        && divergences as f64 > config.max_divergence_rate * config.n_samples as f64
    {
        return Err(Error::DivergedBadly { divergences, iterations: config.n_samples });
    }
    Ok(PosteriorSamples {
        p,
        phi,
        sigma2,
        accept_rate,
        step_size: eps,
        divergences,
        inv_metric: sampler.inv_metric,
    })
}

/// Posterior mean in prediction-coefficient space.
pub fn posterior_mean_estimate(samples: &PosteriorSamples) -> Result<ArModel> {
    Ok(posterior_mean_projected(samples)?.0)
}

/// As [`posterior_mean_estimate`], also reporting whether the average left
/// the stationary region and was projected back.
pub fn posterior_mean_projected(samples: &PosteriorSamples) -> Result<(ArModel, bool)> {
    if samples.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mut a = vec![0.0; samples.p];
    for phi in &samples.phi {
        let m = step_up(&PartialAutocorr::new(phi.clone(), 1.0))?;
        for (acc, v) in a.iter_mut().zip(&m.a) {
            *acc += v;
        }
    }
    let count = samples.len() as f64;
    a.iter_mut().for_each(|v| *v /= count);
    let sigma_v2 = samples.sigma2.iter().sum::<f64>() / count;
    let model = ArModel::new(a, sigma_v2);
    if model.is_stationary() {
        return Ok((model, false));
    }
    let (pac, _) = step_down_clamped(&model, PROJECTION_LIMIT);
    Ok((step_up(&pac)?, true))
}
