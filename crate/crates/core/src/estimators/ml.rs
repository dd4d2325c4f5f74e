use std::cell::Cell;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::lbfgs::{minimize, LbfgsOptions};
use super::objective::Objective;
use super::{burg, regularize, RegularizeMode, UnconstrainedParams};
use crate::ar::ArModel;
use crate::error::{Error, Result};
use crate::likelihood::{Engine, SampledSeries};

/// Starting point of one optimizer run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    BurgNearest,
    BurgLinear,
    BurgCompact,
    WhiteNoise,
}

impl StartKind {
    pub const ALL: [StartKind; 4] =
        [StartKind::BurgNearest, StartKind::BurgLinear, StartKind::BurgCompact, StartKind::WhiteNoise];

    pub fn name(&self) -> &'static str {
        match self {
            StartKind::BurgNearest => "burg-nearest",
            StartKind::BurgLinear => "burg-linear",
            StartKind::BurgCompact => "burg-compact",
            StartKind::WhiteNoise => "white-noise",
        }
    }

    fn regularization(&self) -> Option<RegularizeMode> {
        match self {
            StartKind::BurgNearest => Some(RegularizeMode::Nearest),
            StartKind::BurgLinear => Some(RegularizeMode::Linear),
            StartKind::BurgCompact => Some(RegularizeMode::Compact),
            StartKind::WhiteNoise => None,
        }
    }
}

impl fmt::Display for StartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of one start.
#[derive(Debug, Clone, Serialize)]
pub struct StartOutcome {
    pub start: StartKind,
    pub initial_loglik: f64,
    pub final_loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Maximum-likelihood AR fit.
#[derive(Debug, Clone)]
pub struct MlFit {
    pub model: ArModel,
    pub params: UnconstrainedParams,
    pub loglik: f64,
    pub start_used: StartKind,
    /// Objective-and-gradient evaluations summed over all starts.
    pub n_fn_evals: usize,
    /// The winning run met the gradient or function-change tolerance.
    pub converged: bool,
    /// Every start that produced a finite objective.
    pub starts: Vec<StartOutcome>,
}

fn start_point(obj: &Objective<'_>, kind: StartKind) -> Result<Vec<f64>> {
    let p = obj.order();
    let theta = match kind.regularization() {
        Some(mode) => {
            let dense = regularize(obj.series(), mode)?;
            UnconstrainedParams::from_pac(&burg(&dense, p)?).theta
        }
        None => vec![0.0; p],
    };
    let ls = obj.profile_log_sigma2(&theta)?;
    let mut x = theta;
    x.push(ls);
    Ok(x)
}

/// Multi-start fit with the default optimizer settings.
pub fn ml_estimate(series: &SampledSeries, p: usize, engine: Engine) -> Result<MlFit> {
    ml_estimate_with(series, p, engine, &LbfgsOptions::default())
}

/// Runs the optimizer from the three Burg starts and from white noise and
/// keeps the highest likelihood.
pub fn ml_estimate_with(
    series: &SampledSeries,
    p: usize,
    engine: Engine,
    opts: &LbfgsOptions,
) -> Result<MlFit> {
    if series.n_a() <= p + 1 {
        return Err(Error::TooFewSamples(format!(
            "ML of order {p} needs more than {} observations, got {}",
            p + 1,
            series.n_a()
        )));
    }
    let obj = Objective::new(series, p, None, engine)?;
    let runs: Vec<(StartKind, Result<(StartOutcome, Vec<f64>, usize)>)> = StartKind::ALL
        .par_iter()
        .map(|&kind| {
            let run = || {
                let x0 = start_point(&obj, kind)?;
                let initial = -obj.value(&x0)?;
                let evals = Cell::new(0usize);
                let out = minimize(
                    |x| {
                        evals.set(evals.get() + 1);
                        obj.value_and_gradient(x)
                    },
                    &x0,
                    opts,
                )?;
                UnconstrainedParams::from_slice(&out.x).to_model()?;
                let outcome = StartOutcome {
                    start: kind,
                    initial_loglik: initial,
                    final_loglik: -out.f,
                    converged: out.status.is_converged(),
                    iterations: out.iterations,
                };
                Ok((outcome, out.x, evals.get()))
            };
            (kind, run())
        })
        .collect();

    let n_fn_evals = runs.iter().map(|(_, r)| r.as_ref().map_or(0, |r| r.2)).sum();
    let mut best: Option<(StartOutcome, Vec<f64>)> = None;
    let mut starts = Vec::new();
    for (_, run) in runs {
        let Ok((outcome, x, _)) = run else { continue };
        starts.push(outcome.clone());
        if best.as_ref().is_none_or(|(b, _)| outcome.final_loglik > b.final_loglik) {
            best = Some((outcome, x));
        }
    }
    let (winner, x) = best.ok_or(Error::AllStartsFailed)?;
    let params = UnconstrainedParams::from_slice(&x);
    Ok(MlFit {
        model: params.to_model()?,
        params,
        loglik: winner.final_loglik,
        start_used: winner.start,
        n_fn_evals,
        converged: winner.converged,
        starts,
    })
}
