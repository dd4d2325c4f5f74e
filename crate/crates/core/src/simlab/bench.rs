use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generate::{generate_series, subsample, subsample_exact};
use crate::ar::{ArModel, CovarianceSpec};
use crate::error::{Error, Result};
use crate::likelihood::{
    build_diag_gap_cache, build_gap_cache, covm_loglik, diag_prekal_loglik, kalman_loglik,
    prekal_loglik, Engine, SampledSeries,
};
use crate::statespace::{ar_to_ss, diagonalize};

/// Timing grid. Every combination of `n_grid`, `t_avg` and `state_dim` is
/// one point; with `fixed_n_a` set, exactly that many samples are kept and
/// `t_avg` is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub n_grid: Vec<usize>,
    #[serde(default = "default_t_avg")]
    pub t_avg: Vec<f64>,
    pub state_dim: Vec<usize>,
    pub engines: Vec<Engine>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fixed_n_a: Option<usize>,
}

impl BenchSpec {
    fn validate_reps(&self) -> Result<()> {
        if self.reps < 5 {
            return Err(Error::InvalidInput(format!("reps must be >= 5, got {}", self.reps)));
        }
        Ok(())
    }
}

fn default_t_avg() -> Vec<f64> {
    vec![5.0]
}

fn default_reps() -> usize {
    9
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub engine: Engine,
    pub n_grid: usize,
    pub t_avg: f64,
    pub state_dim: usize,
    pub n_a: usize,
    /// Median over repetitions of the mean seconds per likelihood call,
    /// cache excluded. NaN when the engine failed on this point.
    pub median_s: f64,
    /// Median seconds to build the engine's cache (diagonalization included).
    pub cache_s: f64,
}

/// AR(s) with random stable poles spread over the frequency axis.
pub fn random_stable_ar(state_dim: usize, seed: u64) -> Result<ArModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = state_dim / 2;
    let slots = pairs + state_dim % 2;
    // 1 + sum c_i z^-i, multiplied out one real factor at a time
    let mut c = vec![1.0];
    let mut mul = |factor: &[f64]| {
        let mut next = vec![0.0; c.len() + factor.len()];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            for (j, &fj) in factor.iter().enumerate() {
                next[i + j + 1] += ci * fj;
            }
        }
        c = next;
    };
    for k in 0..pairs {
        let radius: f64 = rng.random_range(0.8..0.98);
        let angle = std::f64::consts::PI * (k as f64 + 0.5 + rng.random_range(-0.3..0.3)) / slots as f64;
        mul(&[-2.0 * radius * angle.cos(), radius * radius]);
    }
    if state_dim % 2 == 1 {
        mul(&[-rng.random_range(0.5..0.9)]);
    }
    let model = ArModel { a: c[1..].iter().map(|v| -v).collect(), sigma_v2: 1.0 };
    if !model.is_stationary() {
        return Err(Error::NonStationary(format!("random AR({state_dim})")));
    }
    Ok(model)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Shortest timed batch; faster calls are repeated until a batch lasts this
/// long and the per-call mean is reported.
const MIN_BATCH_S: f64 = 5e-3;

/// Seconds per call of `f`, after one untimed warmup call.
fn time_calls<T>(mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let t = Instant::now();
    std::hint::black_box(f()?);
    let first = t.elapsed().as_secs_f64();
    let batch = (MIN_BATCH_S / first.max(1e-9)).ceil().clamp(1.0, 1e5) as usize;
    let t = Instant::now();
    for _ in 0..batch {
        std::hint::black_box(f()?);
    }
    Ok(t.elapsed().as_secs_f64() / batch as f64)
}

/// `(call seconds, cache seconds)` of one repetition.
fn time_once(model: &ArModel, series: &SampledSeries, engine: Engine) -> Result<(f64, f64)> {
    let ss = ar_to_ss(model)?;
    let gaps = series.gaps();
    match engine {
        Engine::Covm => {
            let cov = CovarianceSpec::Ar { model: model.clone() };
            Ok((time_calls(|| covm_loglik(&cov, series))?, 0.0))
        }
        Engine::Kal => Ok((time_calls(|| kalman_loglik(&ss, series))?, 0.0)),
        Engine::PreKal => {
            let cache_s = time_calls(|| Ok(build_gap_cache(&ss, &gaps)))?;
            let cache = build_gap_cache(&ss, &gaps);
            Ok((time_calls(|| prekal_loglik(&ss, series, &cache))?, cache_s))
        }
        Engine::DiagPreKal | Engine::Auto => {
            let cache_s = time_calls(|| {
                let dss = diagonalize(&ss)?;
                Ok(build_diag_gap_cache(&dss, &gaps))
            })?;
            let dss = diagonalize(&ss)?;
            let cache = build_diag_gap_cache(&dss, &gaps);
            Ok((time_calls(|| diag_prekal_loglik(&dss, series, &cache))?, cache_s))
        }
    }
}

/// Median timings per engine and grid point, measured sequentially on the
/// calling thread. Repetitions cycle over all points so that a slow stretch
/// of the machine is spread across them.
pub fn benchmark_likelihood(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    spec.validate_reps()?;
    let t_values: Vec<Option<f64>> = match spec.fixed_n_a {
        Some(_) => vec![None],
        None => spec.t_avg.iter().map(|&t| Some(t)).collect(),
    };
    let mut points = Vec::new();
    for &s in &spec.state_dim {
        let model = random_stable_ar(s, spec.seed + s as u64)?;
        let truth = CovarianceSpec::Ar { model: model.clone() };
        for &n in &spec.n_grid {
            let dense = generate_series(&truth, n, spec.seed + n as u64)?;
            for &t in &t_values {
                let series = match (t, spec.fixed_n_a) {
                    (Some(t), _) => subsample(&dense, t, spec.seed + 1)?,
                    (None, Some(k)) => subsample_exact(&dense, k, spec.seed + 1)?,
                    (None, None) => unreachable!(),
                };
                let t_avg = t.unwrap_or(n as f64 / series.n_a() as f64);
                for &engine in &spec.engines {
                    points.push((model.clone(), series.clone(), engine, n, t_avg, s));
                }
            }
        }
    }
    let mut calls = vec![Vec::with_capacity(spec.reps); points.len()];
    let mut caches = vec![Vec::with_capacity(spec.reps); points.len()];
    let mut failed = vec![false; points.len()];
    for _ in 0..spec.reps {
        for (i, (model, series, engine, ..)) in points.iter().enumerate() {
            if failed[i] {
                continue;
            }
            match time_once(model, series, *engine) {
                Ok((c, k)) => {
                    calls[i].push(c);
                    caches[i].push(k);
                }
                Err(_) => failed[i] = true,
            }
        }
    }
    Ok(points
        .into_iter()
        .zip(calls.into_iter().zip(caches))
        .zip(failed)
        .map(|(((_, series, engine, n_grid, t_avg, state_dim), (c, k)), failed)| BenchRow {
            engine,
            n_grid,
            t_avg,
            state_dim,
            n_a: series.n_a(),
            median_s: if failed { f64::NAN } else { median(c) },
            cache_s: if failed { f64::NAN } else { median(k) },
        })
        .collect())
}

/// `engine,n_grid,t_avg,state_dim,median_s,cache_s`.
pub fn write_bench_csv<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["engine", "n_grid", "t_avg", "state_dim", "median_s", "cache_s"])?;
    for r in rows {
        out.write_record([
            r.engine.to_string(),
            r.n_grid.to_string(),
            r.t_avg.to_string(),
            r.state_dim.to_string(),
            r.median_s.to_string(),
            r.cache_s.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
