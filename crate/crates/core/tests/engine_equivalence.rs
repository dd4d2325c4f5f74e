//! Randomized agreement between the four likelihood engines.

use gmproc::ar::{step_up, ArModel, PartialAutocorr};
use gmproc::likelihood::{
    build_diag_gap_cache, build_gap_cache, covm_loglik, diag_prekal_loglik, kalman_loglik,
    prekal_loglik, Engine, SampledSeries,
};
use gmproc::statespace::{ar_to_ss, diagonalize};
use gmproc::CovarianceSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_ar(rng: &mut ChaCha8Rng, p: usize) -> ArModel {
    let phi: Vec<f64> = (0..p).map(|_| rng.random_range(-0.9..0.9)).collect();
    step_up(&PartialAutocorr::new(phi, rng.random_range(0.5..2.0))).unwrap()
}

fn random_series(rng: &mut ChaCha8Rng, model: &ArModel, n: usize, t: usize) -> SampledSeries {
    let p = model.order();
    let burn = 500;
    let mut y = vec![0.0; n + burn];
    for i in 0..y.len() {
        let mut v = model.sigma_v2.sqrt() * rng.sample::<f64, _>(StandardNormal);
        for j in 1..=p.min(i) {
            v += model.a[j - 1] * y[i - j];
        }
        y[i] = v;
    }
    let (idx, vals): (Vec<usize>, Vec<f64>) = (0..n)
        .filter(|_| rng.random_range(0.0..1.0) < 1.0 / t as f64)
        .map(|i| (i, y[i + burn]))
        .unzip();
    SampledSeries::new(1.0, n, idx, vals).unwrap()
}

#[test]
fn four_engines_agree_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(20180101);
    let mut checked = 0;
    while checked < 200 {
        let p = rng.random_range(1..=10);
        let model = random_ar(&mut rng, p);
        let ss = ar_to_ss(&model).unwrap();
        let Ok(dss) = diagonalize(&ss) else { continue };
        let n = rng.random_range(50..=400);
        let t = rng.random_range(1..=10);
        let series = random_series(&mut rng, &model, n, t);
        if series.n_a() < 2 {
            continue;
        }
        let gaps = series.gaps();
        let covm = covm_loglik(&CovarianceSpec::Ar { model: model.clone() }, &series).unwrap();
        let kal = kalman_loglik(&ss, &series).unwrap();
        let pre = prekal_loglik(&ss, &series, &build_gap_cache(&ss, &gaps)).unwrap();
        let diag = diag_prekal_loglik(&dss, &series, &build_diag_gap_cache(&dss, &gaps)).unwrap();
        assert!((covm - kal).abs() < 1e-8, "covm {covm} kal {kal} for {model:?}");
        assert!((kal - pre).abs() < 1e-9, "kal {kal} prekal {pre}");
        let tol = 1e-7f64.max(1e-9 * dss.cond_v);
        assert!((pre - diag).abs() < tol, "prekal {pre} diag {diag} cond {}", dss.cond_v);
        checked += 1;
    }
}

#[test]
fn translation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let p = rng.random_range(1..=6);
        let model = random_ar(&mut rng, p);
        let ss = ar_to_ss(&model).unwrap();
        let series = random_series(&mut rng, &model, 200, 3);
        let shifted = series.shifted(rng.random_range(1..500));
        for engine in [Engine::Kal, Engine::PreKal, Engine::DiagPreKal] {
            let a = gmproc::likelihood::loglik(&ss, &series, engine).unwrap();
            let b = gmproc::likelihood::loglik(&ss, &shifted, engine).unwrap();
            assert!((a - b).abs() < 1e-9, "{engine}: {a} vs {b}");
        }
    }
}

#[test]
fn gap_cache_telescopes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let p = rng.random_range(1..=8);
        let ss = ar_to_ss(&random_ar(&mut rng, p)).unwrap();
        let gaps: Vec<usize> = (1..=60).collect();
        let cache = build_gap_cache(&ss, &gaps);
        let a = ss.a.clone();
        let q = ss.q.clone();
        for k in 2..=60 {
            let gk = nalgebra::DMatrix::from_row_slice(p, p, cache.get(k).unwrap().1);
            let gprev = nalgebra::DMatrix::from_row_slice(p, p, cache.get(k - 1).unwrap().1);
            let resid = gk - &a * gprev * a.transpose() - &q;
            assert!(resid.amax() < 1e-12, "k = {k}: {}", resid.amax());
        }
    }
}

#[test]
fn diag_engine_on_case_c_sparse_series() {
    use num_complex::Complex64;
    let tau = 2.0 * std::f64::consts::PI;
    let mut poles = Vec::new();
    for (d, f) in [(0.02f64, 0.05), (0.10f64, 0.30)] {
        poles.push(Complex64::from_polar((-d).exp(), tau * f));
        poles.push(Complex64::from_polar((-d).exp(), -tau * f));
    }
    let model = gmproc::ar::poles_to_ar(&poles, 1.0).unwrap();
    let ss = ar_to_ss(&model).unwrap();
    let dss = diagonalize(&ss).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let series = random_series(&mut rng, &model, 1000, 5);
    let gaps = series.gaps();
    let pre = prekal_loglik(&ss, &series, &build_gap_cache(&ss, &gaps)).unwrap();
    let diag = diag_prekal_loglik(&dss, &series, &build_diag_gap_cache(&dss, &gaps)).unwrap();
    assert!((pre - diag).abs() < 1e-7, "{pre} vs {diag}");
}
