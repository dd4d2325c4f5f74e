use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::generate::{subsample, TruthSampler};
use super::{CaseSpec, EstimatorKind, SweepParam, SweepSpec, HMC_SEED_OFFSET, SUBSAMPLE_SEED_OFFSET};
use crate::ar::{model_error, ArModel, CovarianceSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    hmc_sample, ml_estimate, posterior_mean_projected, HmcConfig, MlFit, StartKind,
};
use crate::likelihood::{Engine, SampledSeries};

/// One successful estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub estimator: EstimatorKind,
    pub me: f64,
    pub n_a: usize,
    pub seconds: f64,
    pub stationary: bool,
    /// The posterior mean left the stationary region and was projected.
    pub projected: bool,
    pub start_used: Option<StartKind>,
    pub accept_rate: Option<f64>,
    pub divergences: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub run: usize,
    pub estimator: EstimatorKind,
    pub error: String,
}

/// Aggregate over the completed runs of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    /// Model errors in run order.
    pub me: Vec<f64>,
    pub mean_me: f64,
    pub std_err: f64,
    pub mean_seconds: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub summaries: Vec<EstimatorSummary>,
}

impl CaseResult {
    pub fn summary(&self, estimator: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }

    pub fn mean_me(&self, estimator: EstimatorKind) -> Option<f64> {
        self.summary(estimator).map(|s| s.mean_me)
    }

    pub fn nonstationary(&self) -> usize {
        self.records.iter().filter(|r| !r.stationary).count()
    }

    fn from_runs(name: &str, estimators: &[EstimatorKind], runs: Vec<Vec<RunOutcome>>) -> Self {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for outcome in runs.into_iter().flatten() {
            match outcome {
                Ok(r) => records.push(r),
                Err(f) => failures.push(f),
            }
        }
        let summaries = estimators
            .iter()
            .map(|&e| {
                let mine: Vec<&RunRecord> = records.iter().filter(|r| r.estimator == e).collect();
                let me: Vec<f64> = mine.iter().map(|r| r.me).collect();
                let n = me.len() as f64;
                let mean_me = me.iter().sum::<f64>() / n;
                let var = me.iter().map(|v| (v - mean_me).powi(2)).sum::<f64>() / (n - 1.0);
                let std_err = if me.len() > 1 { (var / n).sqrt() } else { f64::NAN };
                EstimatorSummary {
                    estimator: e,
                    mean_me,
                    std_err,
                    mean_seconds: mine.iter().map(|r| r.seconds).sum::<f64>() / n,
                    failures: failures.iter().filter(|f| f.estimator == e).count(),
                    me,
                }
            })
            .collect();
        CaseResult { name: name.to_string(), records, failures, summaries }
    }
}

type RunOutcome = std::result::Result<RunRecord, RunFailure>;

/// A point estimate with the sampler diagnostics that produced it.
pub(crate) struct Fitted {
    pub model: ArModel,
    pub seconds: f64,
    pub projected: bool,
    pub start_used: Option<StartKind>,
    pub accept_rate: Option<f64>,
    pub divergences: Option<usize>,
}

/// ML fits are cached in `ml` and reused as the HMC initialization; the
/// posterior-mean time includes the ML time.
pub(crate) fn fit(
    series: &SampledSeries,
    p: usize,
    engine: Engine,
    estimator: EstimatorKind,
    hmc: &HmcConfig,
    ml: &mut Option<(Result<MlFit>, f64)>,
) -> Result<Fitted> {
    let (ml_fit, ml_secs) = ml
        .get_or_insert_with(|| {
            let t = Instant::now();
            let fit = ml_estimate(series, p, engine);
            (fit, t.elapsed().as_secs_f64())
        })
        .clone();
    match estimator.prior() {
        None => {
            let fit = ml_fit?;
            Ok(Fitted {
                model: fit.model,
                seconds: ml_secs,
                projected: false,
                start_used: Some(fit.start_used),
                accept_rate: None,
                divergences: None,
            })
        }
        Some(prior) => {
            let t = Instant::now();
            let post = hmc_sample(series, p, prior, hmc, engine, ml_fit.as_ref().ok())?;
            let (model, projected) = posterior_mean_projected(&post)?;
            Ok(Fitted {
                model,
                seconds: ml_secs + t.elapsed().as_secs_f64(),
                projected,
                start_used: None,
                accept_rate: Some(post.accept_rate),
                divergences: Some(post.divergences),
            })
        }
    }
}

fn score(
    spec: &CaseSpec,
    run: usize,
    estimator: EstimatorKind,
    series: &SampledSeries,
    ml: &mut Option<(Result<MlFit>, f64)>,
) -> Result<RunRecord> {
    if spec.forced_failures.contains(&(run, estimator)) {
        return Err(Error::Injected(run));
    }
    let cfg = spec.hmc.config(spec.seed + HMC_SEED_OFFSET + run as u64);
    let f = fit(series, spec.p_est, spec.engine, estimator, &cfg, ml)?;
    let me = model_error(&f.model, &spec.truth, series.n_a())?;
    Ok(RunRecord {
        run,
        estimator,
        me: me.me,
        n_a: series.n_a(),
        seconds: f.seconds,
        stationary: f.model.is_stationary(),
        projected: f.projected,
        start_used: f.start_used,
        accept_rate: f.accept_rate,
        divergences: f.divergences,
    })
}

fn run_one(spec: &CaseSpec, sampler: &TruthSampler, run: usize) -> Vec<RunOutcome> {
    let dense = sampler.sample(spec.seed + run as u64);
    let series = subsample(&dense, spec.t_avg, spec.seed + SUBSAMPLE_SEED_OFFSET + run as u64);
    let mut ml = None;
    spec.estimators
        .iter()
        .map(|&estimator| {
            series
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|s| score(spec, run, estimator, s, &mut ml).map_err(|e| e.to_string()))
                .map_err(|error| RunFailure { run, estimator, error })
        })
        .collect()
}

/// Runs `1..=n_runs` in parallel on the current rayon pool. Run `r` draws
/// with seed `seed + r`, subsamples with `seed + 1e6 + r` and samples the
/// posterior with `seed + 2e6 + r`. Per-run errors are recorded as
/// failures.
pub fn run_case(spec: &CaseSpec) -> Result<CaseResult> {
    spec.validate()?;
    spec.truth.innovation()?;
    let sampler = TruthSampler::new(&spec.truth, spec.n_grid)?;
    let runs: Vec<Vec<RunOutcome>> =
        (1..=spec.n_runs).into_par_iter().map(|r| run_one(spec, &sampler, r)).collect();
    Ok(CaseResult::from_runs(&spec.name, &spec.estimators, runs))
}

/// The case for each swept value.
pub fn sweep_cases(spec: &SweepSpec) -> Result<Vec<CaseSpec>> {
    spec.values
        .iter()
        .map(|&v| {
            let mut case = spec.base.clone();
            case.name = format!("{}:{}={}", spec.base.name, spec.parameter, v);
            match spec.parameter {
                SweepParam::CorrelationLength => {
                    case.truth = match &spec.base.truth {
                        CovarianceSpec::Exponential { .. } => {
                            CovarianceSpec::Exponential { length_scale: v }
                        }
                        CovarianceSpec::SquaredExponential { .. } => {
                            CovarianceSpec::SquaredExponential { length_scale: v }
                        }
                        _ => {
                            return Err(Error::InvalidInput(
                                "correlation_length sweeps need a kernel truth".into(),
                            ))
                        }
                    }
                }
                SweepParam::TAvg => {
                    case.t_avg = v;
                    if spec.hold_n_a {
                        let n = spec.base.n_grid as f64 * v / spec.base.t_avg;
                        case.n_grid = n.round() as usize;
                    }
                }
                SweepParam::NGrid => case.n_grid = as_count(v)?,
                SweepParam::PEst => case.p_est = as_count(v)?,
            }
            Ok(case)
        })
        .collect()
}

fn as_count(v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidInput(format!("expected a non-negative integer, got {v}")))
    }
}

/// One [`CaseResult`] per swept value, in order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CaseResult>> {
    sweep_cases(spec)?.iter().map(run_case).collect()
}

/// `case,estimator,run,me,n_a,seconds`, one row per completed estimate.
pub fn write_runs_csv<W: Write>(w: W, results: &[CaseResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["case", "estimator", "run", "me", "n_a", "seconds"])?;
    for res in results {
        for r in &res.records {
            out.write_record([
                res.name.clone(),
                r.estimator.to_string(),
                r.run.to_string(),
                r.me.to_string(),
                r.n_a.to_string(),
                r.seconds.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Aggregate rows `case,estimator,n_runs,mean_me,std_err,mean_seconds,failures`.
pub fn write_summary_csv<W: Write>(w: W, results: &[CaseResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["case", "estimator", "n_runs", "mean_me", "std_err", "mean_seconds", "failures"])?;
    for res in results {
        for s in &res.summaries {
            out.write_record(summary_fields(&res.name, s))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Sweep aggregates with the swept parameter and value in front.
pub fn write_sweep_csv<W: Write>(w: W, spec: &SweepSpec, results: &[CaseResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "parameter",
        "value",
        "case",
        "estimator",
        "n_runs",
        "mean_me",
        "std_err",
        "mean_seconds",
        "failures",
    ])?;
    for (v, res) in spec.values.iter().zip(results) {
        for s in &res.summaries {
            let mut row = vec![spec.parameter.to_string(), v.to_string()];
            row.extend(summary_fields(&res.name, s));
            out.write_record(row)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn summary_fields(name: &str, s: &EstimatorSummary) -> Vec<String> {
    vec![
        name.to_string(),
        s.estimator.to_string(),
        s.me.len().to_string(),
        s.mean_me.to_string(),
        s.std_err.to_string(),
        s.mean_seconds.to_string(),
        s.failures.to_string(),
    ]
}
