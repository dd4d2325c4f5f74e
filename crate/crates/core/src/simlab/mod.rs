//! Simulation studies: exact draws from a truth covariance, random
//! subsampling, Monte Carlo case and sweep runners scored by model error,
//! and the likelihood timing benchmark.

mod bench;
mod case;
mod generate;
mod study;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bench::{benchmark_likelihood, random_stable_ar, write_bench_csv, BenchRow, BenchSpec};
pub use case::{
    run_case, run_sweep, sweep_cases, write_runs_csv, write_summary_csv, write_sweep_csv,
    CaseResult, EstimatorSummary, RunFailure, RunRecord,
};
pub use generate::{generate_series, subsample, subsample_exact, TruthSampler};
pub use study::{subsample_study, thin, write_study_csv, StudyFailure, StudyResult, StudyRow, StudySpec};

use crate::ar::{poles_to_ar, ArModel, CovarianceSpec};
use crate::error::{Error, Result};
use crate::estimators::{HmcConfig, PriorKind};
use crate::likelihood::Engine;

/// Runs per built-in case at desk scale.
pub const DESK_RUNS: usize = 50;
/// Runs per built-in case at paper scale.
pub const PAPER_RUNS: usize = 400;
/// Offset of the subsampling seed from the run seed.
pub const SUBSAMPLE_SEED_OFFSET: u64 = 1_000_000;
/// Offset of the HMC seed from the run seed.
pub const HMC_SEED_OFFSET: u64 = 2_000_000;

/// Point estimator evaluated in a case study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "ml")]
    Ml,
    #[serde(rename = "pmean")]
    Pmean,
    #[serde(rename = "pmean-f")]
    PmeanF,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Ml => "ml",
            EstimatorKind::Pmean => "pmean",
            EstimatorKind::PmeanF => "pmean-f",
        }
    }

    /// Prior of the posterior-mean estimators.
    pub fn prior(&self) -> Option<PriorKind> {
        match self {
            EstimatorKind::Ml => None,
            EstimatorKind::Pmean => Some(PriorKind::Reference),
            EstimatorKind::PmeanF => Some(PriorKind::FlatPhi),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(EstimatorKind::Ml),
            "pmean" => Ok(EstimatorKind::Pmean),
            "pmean-f" | "pmeanf" | "pmean_f" => Ok(EstimatorKind::PmeanF),
            other => Err(Error::InvalidInput(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Warmup and sampling iterations of the posterior-mean estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HmcBudget {
    pub n_warmup: usize,
    pub n_samples: usize,
}

impl HmcBudget {
    pub fn config(&self, seed: u64) -> HmcConfig {
        HmcConfig { n_warmup: self.n_warmup, n_samples: self.n_samples, seed, ..HmcConfig::default() }
    }
}

impl Default for HmcBudget {
    fn default() -> Self {
        let d = HmcConfig::default();
        HmcBudget { n_warmup: d.n_warmup, n_samples: d.n_samples }
    }
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Ml, EstimatorKind::Pmean]
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub truth: CovarianceSpec,
    pub n_grid: usize,
    pub t_avg: f64,
    pub p_est: usize,
    pub n_runs: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub hmc: HmcBudget,
    /// `(run, estimator)` pairs that fail on purpose.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forced_failures: Vec<(usize, EstimatorKind)>,
}

/// AR(4) with spectral peaks at `f = 0.05` and `f = 0.30`.
pub fn case_c_truth() -> ArModel {
    let tau = 2.0 * std::f64::consts::PI;
    let mut poles = Vec::with_capacity(4);
    for (damping, f) in [(0.02, 0.05), (0.10, 0.30)] {
        poles.push(Complex64::from_polar(f64::exp(-damping), tau * f));
        poles.push(Complex64::from_polar(f64::exp(-damping), -tau * f));
    }
    poles_to_ar(&poles, 1.0).expect("case C poles are stable and conjugate closed")
}

impl CaseSpec {
    /// Built-in cases `A`, `B` and `C` with [`DESK_RUNS`] runs.
    pub fn builtin(name: &str) -> Result<CaseSpec> {
        let (truth, p_est) = match name.trim().to_ascii_uppercase().as_str() {
            "A" => (CovarianceSpec::Exponential { length_scale: 200.0 }, 8),
            "B" => (CovarianceSpec::SquaredExponential { length_scale: 10.0 }, 8),
            "C" => (CovarianceSpec::Ar { model: case_c_truth() }, 4),
            other => return Err(Error::InvalidInput(format!("unknown built-in case '{other}'"))),
        };
        Ok(CaseSpec {
            name: name.trim().to_ascii_uppercase(),
            truth,
            n_grid: 1000,
            t_avg: 5.0,
            p_est,
            n_runs: DESK_RUNS,
            estimators: default_estimators(),
            seed: 0,
            engine: Engine::Auto,
            hmc: HmcBudget::default(),
            forced_failures: Vec::new(),
        })
    }

    /// Paper-scale number of runs.
    pub fn full(mut self) -> Self {
        self.n_runs = PAPER_RUNS;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_avg >= 1.0) {
            return Err(Error::InvalidInput(format!("t_avg must be >= 1, got {}", self.t_avg)));
        }
        if self.n_grid < 2 {
            return Err(Error::InvalidInput("n_grid must be at least 2".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidInput("no estimators requested".into()));
        }
        Ok(())
    }
}

/// Swept case parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    CorrelationLength,
    TAvg,
    NGrid,
    PEst,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::CorrelationLength => "correlation_length",
            SweepParam::TAvg => "t_avg",
            SweepParam::NGrid => "n_grid",
            SweepParam::PEst => "p_est",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "correlation_length" | "length_scale" => Ok(SweepParam::CorrelationLength),
            "t_avg" | "t" => Ok(SweepParam::TAvg),
            "n_grid" | "n" => Ok(SweepParam::NGrid),
            "p_est" | "p" | "order" => Ok(SweepParam::PEst),
            other => Err(Error::InvalidInput(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

fn default_hold() -> bool {
    true
}

/// A family of cases differing in one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub base: CaseSpec,
    /// When sweeping `t_avg`, scale `n_grid` with it so the expected number
    /// of observations stays fixed.
    #[serde(default = "default_hold")]
    pub hold_n_a: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        let a = CaseSpec::builtin("A").unwrap();
        assert_eq!(a.truth, CovarianceSpec::Exponential { length_scale: 200.0 });
        assert_eq!((a.n_grid, a.t_avg, a.p_est, a.n_runs), (1000, 5.0, 8, DESK_RUNS));
        let b = CaseSpec::builtin("b").unwrap();
        assert_eq!(b.truth, CovarianceSpec::SquaredExponential { length_scale: 10.0 });
        let c = CaseSpec::builtin("C").unwrap().full();
        assert_eq!((c.p_est, c.n_runs), (4, PAPER_RUNS));
        assert!(CaseSpec::builtin("D").is_err());
    }

    #[test]
    fn case_c_poles() {
        let m = case_c_truth();
        assert_eq!(m.order(), 4);
        assert!(m.is_stationary());
    }

    #[test]
    fn spec_json_round_trip() {
        let mut spec = CaseSpec::builtin("C").unwrap();
        spec.estimators = vec![EstimatorKind::Ml, EstimatorKind::PmeanF];
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"pmean-f\""));
        let back: CaseSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let minimal = r#"{"name":"x","truth":{"kind":"exponential","length_scale":50.0},
            "n_grid":100,"t_avg":2.0,"p_est":2,"n_runs":3}"#;
        let spec: CaseSpec = serde_json::from_str(minimal).unwrap();
        assert_eq!(spec.engine, Engine::Auto);
        assert_eq!(spec.estimators, default_estimators());
    }

    #[test]
    fn parse_names() {
        assert_eq!("pmean-f".parse::<EstimatorKind>().unwrap(), EstimatorKind::PmeanF);
        assert_eq!("t-avg".parse::<SweepParam>().unwrap(), SweepParam::TAvg);
        assert!("bayes".parse::<EstimatorKind>().is_err());
    }
}
