use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Limited-memory BFGS settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    /// Number of stored curvature pairs.
    pub history: usize,
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Stop when an iteration lowers the objective by less than this
    /// fraction of `max(1, |f|)`.
    pub f_tol: f64,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { history: 10, grad_tol: 1e-7, max_iter: 500, f_tol: 1e-12, max_line_search: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStatus {
    Converged,
    /// The objective stopped decreasing within `f_tol`.
    FunctionTolerance,
    MaxIterations,
    /// No step along the search direction decreased the objective.
    LineSearchFailed,
}

impl LbfgsStatus {
    /// Gradient or function-change tolerance met.
    pub fn is_converged(&self) -> bool {
        matches!(self, LbfgsStatus::Converged | LbfgsStatus::FunctionTolerance)
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub n_evals: usize,
    pub status: LbfgsStatus,
}

const ARMIJO: f64 = 1e-4;
const CURVATURE: f64 = 0.9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the value and gradient. Evaluation errors
/// during a line search count as infinitely bad points; an error at `x0`
/// is returned.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut fx, mut g) = f(x0)?;
    if !fx.is_finite() {
        return Err(Error::NonFinite(x0.to_vec()));
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut n_evals = 1;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.history);
    let mut status = LbfgsStatus::MaxIterations;
    let mut iterations = 0;
    let mut alpha_buf = vec![0.0; opts.history];

    while iterations < opts.max_iter {
        if inf_norm(&g) < opts.grad_tol {
            status = LbfgsStatus::Converged;
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[k] = a;
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for (k, (s, y, rho)) in pairs.iter().enumerate() {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (alpha_buf[k] - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let init = if pairs.is_empty() { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };

        // weak Wolfe search by bracketing and bisection
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        let mut alpha = init;
        let mut best: Option<(f64, Vec<f64>, f64, Vec<f64>)> = None;
        let mut accepted = None;
        let mut trial = vec![0.0; n];
        for _ in 0..opts.max_line_search {
            for i in 0..n {
                trial[i] = x[i] + alpha * d[i];
            }
            n_evals += 1;
            match f(&trial) {
                Ok((ft, gt)) if ft.is_finite() && ft <= fx + ARMIJO * alpha * slope => {
                    let better = best.as_ref().is_none_or(|b| ft < b.2);
                    if dot(&gt, &d) >= CURVATURE * slope {
                        accepted = Some((alpha, trial.clone(), ft, gt));
                        break;
                    }
                    if better {
                        best = Some((alpha, trial.clone(), ft, gt));
                    }
                    lo = alpha;
                }
                _ => hi = alpha,
            }
            alpha = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * alpha };
            if hi.is_finite() && hi - lo <= 1e-16 * hi {
                break;
            }
        }
        let Some((_, x_new, f_new, g_new)) = accepted.or(best) else {
            status = LbfgsStatus::LineSearchFailed;
            break;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if pairs.len() == opts.history {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        iterations += 1;
        if decrease <= opts.f_tol * fx.abs().max(1.0) {
            status = if inf_norm(&g) < opts.grad_tol {
                LbfgsStatus::Converged
            } else {
                LbfgsStatus::FunctionTolerance
            };
            break;
        }
    }
    if status == LbfgsStatus::MaxIterations && inf_norm(&g) < opts.grad_tol {
        status = LbfgsStatus::Converged;
    }
    Ok(LbfgsOutcome { x, f: fx, grad: g, iterations, n_evals, status })
}
