//! Linear Gaussian state-space models, their eigenbasis form and stationary
//! initial covariances.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::ar::{step_down, ArModel};
use crate::error::{Error, Result};

/// Coefficients with magnitude at or below this are removed from the end of
/// an AR polynomial before diagonalization.
pub const TRAILING_ZERO_TOL: f64 = 1e-14;
/// Minimum eigenvalue separation accepted by [`diagonalize`].
pub const MIN_EIGEN_SEPARATION: f64 = 1e-8;
/// Maximum eigenvector condition number accepted by [`diagonalize`].
pub const MAX_EIGEN_CONDITION: f64 = 1e8;
const LYAPUNOV_TOL: f64 = 1e-14;
const SCHUR_ITER_PER_DIM: usize = 100;

/// `z_n = A z_{n-1} + e_n`, `y_n = C z_n + d_n`, `cov(e) = Q`, `var(d) = R`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    pub q: DMatrix<f64>,
    pub r: f64,
    /// AR coefficients when the model is in companion form.
    pub companion: Option<Vec<f64>>,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, c: DVector<f64>, q: DMatrix<f64>, r: f64) -> Result<Self> {
        let s = a.nrows();
        if a.ncols() != s || c.len() != s || q.nrows() != s || q.ncols() != s {
            return Err(Error::InvalidInput(format!(
                "inconsistent dimensions: A {}x{}, C {}, Q {}x{}",
                a.nrows(),
                a.ncols(),
                c.len(),
                q.nrows(),
                q.ncols()
            )));
        }
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("observation variance {r} < 0")));
        }
        Ok(StateSpaceModel { a, c, q, r, companion: None })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        match eigenvalues(&self.a) {
            Ok(l) => l.iter().map(|l| l.norm()).fold(0.0, f64::max),
            Err(_) => f64::NAN,
        }
    }

    /// Same dynamics with `Q` and `R` multiplied by `factor`.
    pub fn scaled_noise(&self, factor: f64) -> StateSpaceModel {
        StateSpaceModel {
            a: self.a.clone(),
            c: self.c.clone(),
            q: &self.q * factor,
            r: self.r * factor,
            companion: self.companion.clone(),
        }
    }
}

/// Companion-form embedding of an AR(p) model, `p >= 1`.
pub fn ar_to_ss(model: &ArModel) -> Result<StateSpaceModel> {
    let p = model.order();
    if p == 0 {
        return Err(Error::ZeroOrder);
    }
    step_down(model)?;
    let mut a = DMatrix::zeros(p, p);
    for (j, &aj) in model.a.iter().enumerate() {
        a[(0, j)] = aj;
    }
    for i in 1..p {
        a[(i, i - 1)] = 1.0;
    }
    let mut c = DVector::zeros(p);
    c[0] = 1.0;
    let mut q = DMatrix::zeros(p, p);
    q[(0, 0)] = model.sigma_v2;
    Ok(StateSpaceModel { a, c, q, r: 0.0, companion: Some(model.a.clone()) })
}

/// State-space model expressed on the eigenbasis of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagStateSpace {
    pub lambda: Vec<Complex64>,
    /// `C V`.
    pub ce: Vec<Complex64>,
    /// `V^-1 Q V^-H`, Hermitian.
    pub qe: DMatrix<Complex64>,
    pub r: f64,
    /// Eigenvector matrix `V` (columns, unit 2-norm).
    pub v: DMatrix<Complex64>,
    /// `||V||_1 ||V^-1||_1`.
    pub cond_v: f64,
    /// State dimension after trailing-zero order reduction.
    pub reduced_order: usize,
}

impl DiagStateSpace {
    pub fn state_dim(&self) -> usize {
        self.lambda.len()
    }
}

/// Diagnostic snapshot of a diagonalization.
#[derive(Debug, Clone, Serialize)]
pub struct DiagDiagnostics {
    pub a: Vec<Vec<f64>>,
    pub lambda_re: Vec<f64>,
    pub lambda_im: Vec<f64>,
    pub cond_v: f64,
    pub reduced_order: usize,
}

pub fn diagnostics(ss: &StateSpaceModel, dss: &DiagStateSpace) -> DiagDiagnostics {
    DiagDiagnostics {
        a: ss.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
        lambda_re: dss.lambda.iter().map(|l| l.re).collect(),
        lambda_im: dss.lambda.iter().map(|l| l.im).collect(),
        cond_v: dss.cond_v,
        reduced_order: dss.reduced_order,
    }
}

/// Eigen-decomposes `A`. Companion models first drop trailing zero
/// coefficients; near-defective matrices are rejected with
/// [`Error::NearDefective`].
pub fn diagonalize(ss: &StateSpaceModel) -> Result<DiagStateSpace> {
    match &ss.companion {
        Some(coeffs) => diagonalize_companion(coeffs, ss.q[(0, 0)], ss.r),
        None => diagonalize_general(ss),
    }
}

fn diagonalize_companion(coeffs: &[f64], sigma_v2: f64, r: f64) -> Result<DiagStateSpace> {
    let mut a = coeffs.to_vec();
    while a.last().is_some_and(|x| x.abs() <= TRAILING_ZERO_TOL) {
        a.pop();
    }
    let p = a.len();
    if p == 0 {
        // white noise: one state with zero dynamics
        let one = Complex64::new(1.0, 0.0);
        return Ok(DiagStateSpace {
            lambda: vec![Complex64::new(0.0, 0.0)],
            ce: vec![one],
            qe: DMatrix::from_element(1, 1, Complex64::new(sigma_v2, 0.0)),
            r,
            v: DMatrix::from_element(1, 1, one),
            cond_v: 1.0,
            reduced_order: 0,
        });
    }
    let mut comp = DMatrix::zeros(p, p);
    for j in 0..p {
        comp[(0, j)] = a[j];
    }
    for i in 1..p {
        comp[(i, i - 1)] = 1.0;
    }
    let mut lambda = eigenvalues(&comp)?;
    for l in lambda.iter_mut() {
        *l = polish_root(&a, *l);
    }
    sort_eigenvalues(&mut lambda);
    check_separation(&lambda)?;

    // eigenvector for lambda is (lambda^{p-1}, ..., lambda, 1)
    let mut v = DMatrix::from_element(p, p, Complex64::new(0.0, 0.0));
    for (k, &l) in lambda.iter().enumerate() {
        let mut x = Complex64::new(1.0, 0.0);
        for i in (0..p).rev() {
            v[(i, k)] = x;
            x *= l;
        }
        let norm = v.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..p {
            v[(i, k)] /= norm;
        }
    }
    let vinv = invert(&v)?;
    let cond_v = norm1(&v) * norm1(&vinv);
    check_condition(cond_v)?;
    let ce: Vec<Complex64> = (0..p).map(|k| v[(0, k)]).collect();
    // Q = sigma_v2 e1 e1^T, so Qe = sigma_v2 w w^H with w = V^-1 e1
    let w: Vec<Complex64> = (0..p).map(|i| vinv[(i, 0)]).collect();
    let qe = DMatrix::from_fn(p, p, |i, j| w[i] * w[j].conj() * sigma_v2);
    Ok(DiagStateSpace { lambda, ce, qe, r, v, cond_v, reduced_order: p })
}

fn diagonalize_general(ss: &StateSpaceModel) -> Result<DiagStateSpace> {
    let s = ss.state_dim();
    let ac = ss.a.map(|x| Complex64::new(x, 0.0));
    let mut lambda = eigenvalues(&ss.a)?;
    sort_eigenvalues(&mut lambda);
    check_separation(&lambda)?;
    let scale = ss.a.norm().max(1.0);
    let mut v = DMatrix::from_element(s, s, Complex64::new(0.0, 0.0));
    for (k, &l) in lambda.iter().enumerate() {
        // inverse iteration with a slightly shifted eigenvalue
        let shift = l + Complex64::new(1e-10 * scale, 1e-10 * scale);
        let mut shifted = ac.clone();
        for i in 0..s {
            shifted[(i, i)] -= shift;
        }
        let lu = shifted.lu();
        let mut x = nalgebra::DVector::from_fn(s, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.0));
        for _ in 0..3 {
            x = lu
                .solve(&x)
                .ok_or_else(|| Error::NearDefective("singular shifted matrix".into()))?;
            let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            x /= Complex64::new(norm, 0.0);
        }
        v.set_column(k, &x);
    }
    let vinv = invert(&v)?;
    let cond_v = norm1(&v) * norm1(&vinv);
    check_condition(cond_v)?;
    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone()));
    let recon = &v * lam * &vinv - &ac;
    let err = recon.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if err > 1e-8 * scale {
        return Err(Error::NearDefective(format!("reconstruction error {err:e}")));
    }
    let ce: Vec<Complex64> = (0..s)
        .map(|k| (0..s).map(|i| v[(i, k)] * ss.c[i]).sum())
        .collect();
    let qc = ss.q.map(|x| Complex64::new(x, 0.0));
    let mut qe = &vinv * qc * vinv.adjoint();
    hermitize(&mut qe);
    Ok(DiagStateSpace { lambda, ce, qe, r: ss.r, v, cond_v, reduced_order: s })
}

fn polish_root(a: &[f64], z0: Complex64) -> Complex64 {
    // Newton on P(z) = z^p - sum a_j z^{p-j}; a step is kept only if it
    // reduces |P|
    let eval = |z: Complex64| {
        let mut pz = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &aj in a {
            dp = dp * z + pz;
            pz = pz * z - aj;
        }
        (pz, dp)
    };
    let mut z = z0;
    let (mut pz, mut dp) = eval(z);
    for _ in 0..3 {
        if dp.norm() == 0.0 || pz.norm() == 0.0 {
            break;
        }
        let cand = z - pz / dp;
        let (pc, dc) = eval(cand);
        if !(pc.norm() < pz.norm()) {
            break;
        }
        (z, pz, dp) = (cand, pc, dc);
    }
    z
}

fn sort_eigenvalues(lambda: &mut [Complex64]) {
    lambda.sort_by(|x, y| {
        y.norm()
            .total_cmp(&x.norm())
            .then(y.im.total_cmp(&x.im))
            .then(y.re.total_cmp(&x.re))
    });
}

fn check_separation(lambda: &[Complex64]) -> Result<()> {
    for i in 0..lambda.len() {
        for j in (i + 1)..lambda.len() {
            let d = (lambda[i] - lambda[j]).norm();
            if d <= MIN_EIGEN_SEPARATION {
                return Err(Error::NearDefective(format!(
                    "eigenvalues {} and {} separated by {d:e}",
                    lambda[i], lambda[j]
                )));
            }
        }
    }
    Ok(())
}

fn check_condition(cond_v: f64) -> Result<()> {
    if cond_v.is_finite() && cond_v < MAX_EIGEN_CONDITION {
        Ok(())
    } else {
        Err(Error::NearDefective(format!("eigenvector condition {cond_v:e}")))
    }
}

/// Eigenvalues from a real Schur form with a bounded QR iteration count.
fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, SCHUR_ITER_PER_DIM * m.nrows().max(1))
        .ok_or_else(|| Error::NearDefective("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn invert(v: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    v.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NearDefective("singular eigenvector matrix".into()))
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn hermitize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Solves `S = A S A^T + Q` by the doubling iteration.
pub fn stationary_covariance(ss: &StateSpaceModel) -> Result<DMatrix<f64>> {
    let rho = ss.spectral_radius();
    if !(rho < 1.0) {
        return Err(Error::NonStationary(format!("spectral radius {rho}")));
    }
    let mut sigma = ss.q.clone();
    let mut ak = ss.a.clone();
    for _ in 0..100 {
        let upd = &ak * &sigma * ak.transpose();
        sigma += &upd;
        ak = &ak * &ak;
        let scale = sigma.norm();
        if upd.norm() <= LYAPUNOV_TOL * scale || scale == 0.0 {
            break;
        }
    }
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Stationary covariance on the eigenbasis: `Qe[i,j] / (1 - l_i conj(l_j))`.
pub fn stationary_covariance_diag(dss: &DiagStateSpace) -> DMatrix<Complex64> {
    let s = dss.state_dim();
    let mut m = DMatrix::from_fn(s, s, |i, j| {
        dss.qe[(i, j)] / (Complex64::new(1.0, 0.0) - dss.lambda[i] * dss.lambda[j].conj())
    });
    hermitize(&mut m);
    m
}

/// Observation covariance `r(k) = C A^k S C^T + R [k = 0]` for lags
/// `0..=max_lag`.
pub fn ss_covariance(ss: &StateSpaceModel, max_lag: usize) -> Result<Vec<f64>> {
    let sigma = stationary_covariance(ss)?;
    let mut x = &sigma * &ss.c;
    let mut r = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        if k > 0 {
            x = &ss.a * x;
        }
        r.push(ss.c.dot(&x));
    }
    r[0] += ss.r;
    Ok(r)
}
