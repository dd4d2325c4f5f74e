use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::case::fit;
use super::{EstimatorKind, HmcBudget, HMC_SEED_OFFSET, SUBSAMPLE_SEED_OFFSET};
use crate::ar::{model_error, ArModel, CovarianceSpec};
use crate::error::{Error, Result};
use crate::likelihood::{Engine, SampledSeries};

/// Repeated random thinning of one observed series, scored against models
/// fitted to the full series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub t_values: Vec<f64>,
    pub reps: usize,
    pub p_est: usize,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub hmc: HmcBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub t_avg: f64,
    pub rep: usize,
    pub estimator: EstimatorKind,
    pub me: f64,
    pub n_a: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyFailure {
    pub t_avg: f64,
    pub rep: usize,
    pub estimator: EstimatorKind,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    /// Full-data fit of every estimator, each the reference for its own
    /// thinned estimates.
    pub references: Vec<(EstimatorKind, ArModel)>,
    /// Model error of the second reference against the first, when two or
    /// more estimators are fitted.
    pub reference_me: Option<f64>,
    pub rows: Vec<StudyRow>,
    pub failures: Vec<StudyFailure>,
}

/// Keeps each observation with probability `1 / t_avg`, re-indexed from the
/// first kept one.
pub fn thin(series: &SampledSeries, t_avg: f64, seed: u64) -> Result<SampledSeries> {
    if !(t_avg >= 1.0) {
        return Err(Error::InvalidInput(format!("t_avg must be >= 1, got {t_avg}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 / t_avg;
    let kept: Vec<(usize, f64)> = series.iter().filter(|_| rng.random::<f64>() < keep).collect();
    if kept.len() < 2 {
        return Err(Error::Degenerate(kept.len()));
    }
    let first = kept[0].0;
    let (indices, values): (Vec<usize>, Vec<f64>) = kept.into_iter().map(|(i, v)| (i - first, v)).unzip();
    let n_grid = indices.last().unwrap() + 1;
    SampledSeries::new(series.t_g(), n_grid, indices, values)
}

/// Rep `k` (1-based, counted across all T values) thins with seed
/// `seed + 1e6 + k` and samples with `seed + 2e6 + k`; the references use
/// `seed + 2e6`. Fails only when a reference fit fails.
pub fn subsample_study(series: &SampledSeries, spec: &StudySpec) -> Result<StudyResult> {
    if spec.estimators.is_empty() {
        return Err(Error::InvalidInput("no estimators requested".into()));
    }
    if let Some(t) = spec.t_values.iter().find(|t| !(**t >= 1.0)) {
        return Err(Error::InvalidInput(format!("t_avg must be >= 1, got {t}")));
    }
    let cfg = spec.hmc.config(spec.seed + HMC_SEED_OFFSET);
    let mut ml = None;
    let references = spec
        .estimators
        .iter()
        .map(|&e| Ok((e, fit(series, spec.p_est, spec.engine, e, &cfg, &mut ml)?.model)))
        .collect::<Result<Vec<_>>>()?;
    let reference_me = match references.as_slice() {
        [(_, first), (_, second), ..] => {
            let truth = CovarianceSpec::Ar { model: first.clone() };
            Some(model_error(second, &truth, series.n_a())?.me)
        }
        _ => None,
    };
    let jobs: Vec<(f64, usize, usize)> = spec
        .t_values
        .iter()
        .enumerate()
        .flat_map(|(ti, &t)| (1..=spec.reps).map(move |rep| (t, rep, ti * spec.reps + rep)))
        .collect();
    let outcomes: Vec<Vec<std::result::Result<StudyRow, StudyFailure>>> = jobs
        .par_iter()
        .map(|&(t_avg, rep, k)| {
            let thinned = thin(series, t_avg, spec.seed + SUBSAMPLE_SEED_OFFSET + k as u64);
            let cfg = spec.hmc.config(spec.seed + HMC_SEED_OFFSET + k as u64);
            let mut ml = None;
            references
                .iter()
                .map(|(estimator, reference)| {
                    let scored = thinned.as_ref().map_err(Clone::clone).and_then(|s| {
                        let f = fit(s, spec.p_est, spec.engine, *estimator, &cfg, &mut ml)?;
                        let truth = CovarianceSpec::Ar { model: reference.clone() };
                        Ok(StudyRow {
                            t_avg,
                            rep,
                            estimator: *estimator,
                            me: model_error(&f.model, &truth, s.n_a())?.me,
                            n_a: s.n_a(),
                        })
                    });
                    scored.map_err(|e| StudyFailure { t_avg, rep, estimator: *estimator, error: e.to_string() })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes.into_iter().flatten() {
        match o {
            Ok(r) => rows.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(StudyResult { references, reference_me, rows, failures })
}

/// `t_avg,rep,estimator,me,n_a`.
pub fn write_study_csv<W: Write>(w: W, result: &StudyResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t_avg", "rep", "estimator", "me", "n_a"])?;
    for r in &result.rows {
        out.write_record([
            r.t_avg.to_string(),
            r.rep.to_string(),
            r.estimator.to_string(),
            r.me.to_string(),
            r.n_a.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
