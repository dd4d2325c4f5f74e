use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Observations on a regular grid with missing samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    t_g: f64,
    n_grid: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SampledSeries {
    /// Validates strictly increasing indices inside `[0, n_grid)`.
    pub fn new(t_g: f64, n_grid: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if !(t_g > 0.0 && t_g.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing {t_g} must be positive")));
        }
        if indices.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("indices must be strictly increasing".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= n_grid {
                return Err(Error::InvalidInput(format!(
                    "index {last} outside grid of length {n_grid}"
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {v}")));
        }
        Ok(SampledSeries { t_g, n_grid, indices, values })
    }

    /// Fully observed series on a unit grid.
    pub fn dense(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        SampledSeries::new(1.0, n, (0..n).collect(), values)
    }

    pub fn t_g(&self) -> f64 {
        self.t_g
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn n_a(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Distance between first and last observation in grid steps.
    pub fn span(&self) -> usize {
        match (self.indices.first(), self.indices.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }

    /// Distinct gaps between consecutive observations, ascending.
    pub fn gaps(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.indices.windows(2).map(|w| w[1] - w[0]).collect();
        set.into_iter().collect()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    /// Copy with the sample mean removed.
    pub fn demeaned(&self) -> SampledSeries {
        let m = self.mean();
        SampledSeries { values: self.values.iter().map(|v| v - m).collect(), ..self.clone() }
    }

    /// Copy with every index moved by `offset`, growing the grid to fit.
    pub fn shifted(&self, offset: usize) -> SampledSeries {
        SampledSeries {
            t_g: self.t_g,
            n_grid: self.n_grid + offset,
            indices: self.indices.iter().map(|i| i + offset).collect(),
            values: self.values.clone(),
        }
    }

    /// Interleaved decimated subseries: segment `j` holds the observations at
    /// indices `n` with `n mod ratio == j`, re-indexed to `n / ratio`.
    pub fn segments(&self, ratio: usize) -> Vec<SampledSeries> {
        let n_grid = self.n_grid.div_ceil(ratio);
        (0..ratio)
            .map(|j| {
                let (indices, values) = self
                    .iter()
                    .filter(|(n, _)| n % ratio == j)
                    .map(|(n, v)| (n / ratio, v))
                    .unzip();
                SampledSeries { t_g: self.t_g * ratio as f64, n_grid, indices, values }
            })
            .collect()
    }
}

/// How [`round_to_grid`] treats samples that land on the same index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionMode {
    #[default]
    Error,
    Mean,
}

impl std::str::FromStr for CollisionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(CollisionMode::Error),
            "mean" => Ok(CollisionMode::Mean),
            other => Err(Error::InvalidInput(format!("unknown collision mode '{other}'"))),
        }
    }
}

/// Rounds continuous sample times onto a grid of spacing `t_g` anchored at
/// the earliest time.
pub fn round_to_grid(
    times: &[f64],
    values: &[f64],
    t_g: f64,
    mode: CollisionMode,
) -> Result<SampledSeries> {
    if times.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if !(t_g > 0.0 && t_g.is_finite()) {
        return Err(Error::InvalidInput(format!("grid spacing {t_g} must be positive")));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite time {t}")));
    }
    if times.is_empty() {
        return SampledSeries::new(t_g, 0, Vec::new(), Vec::new());
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
    let t_min = times[order[0]];
    let mut indices: Vec<usize> = Vec::new();
    let mut out: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut last_time = f64::NAN;
    for &i in &order {
        let idx = (times[i] / t_g - t_min / t_g).round() as usize;
        if indices.last() == Some(&idx) {
            match mode {
                CollisionMode::Error => {
                    return Err(Error::GridCollision { first: last_time, second: times[i], index: idx })
                }
                CollisionMode::Mean => {
                    *out.last_mut().unwrap() += values[i];
                    *counts.last_mut().unwrap() += 1;
                }
            }
        } else {
            indices.push(idx);
            out.push(values[i]);
            counts.push(1);
        }
        last_time = times[i];
    }
    for (v, c) in out.iter_mut().zip(&counts) {
        *v /= *c as f64;
    }
    let n_grid = indices.last().map_or(0, |l| l + 1);
    SampledSeries::new(t_g, n_grid, indices, out)
}
