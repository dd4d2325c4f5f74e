//! Algebraic and numerical invariants checked on random inputs.

use gmproc::ar::{
    ar_autocovariance, ar_spectrum, levinson, model_error, model_error_ar_quadratic, step_down,
    step_up, ArModel, PartialAutocorr,
};
use gmproc::estimators::{Objective, PriorKind, UnconstrainedParams};
use gmproc::likelihood::{Engine, SampledSeries};
use gmproc::simlab::generate_series;
use gmproc::statespace::{ar_to_ss, diagonalize, stationary_covariance, stationary_covariance_diag};
use gmproc::CovarianceSpec;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn pacs(max_p: usize, bound: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-bound..bound, 1..=max_p)
}

fn model_from(phi: Vec<f64>, sigma2: f64) -> ArModel {
    step_up(&PartialAutocorr::new(phi, sigma2)).unwrap()
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn levinson_round_trip(phi in pacs(12, 0.6), sigma2 in 0.1f64..10.0) {
        let back = step_down(&model_from(phi.clone(), sigma2)).unwrap();
        for (x, y) in phi.iter().zip(&back.phi) {
            prop_assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        prop_assert!((back.sigma_v2 - sigma2).abs() < 1e-12 * sigma2);
    }

    // near the unit circle the rounding of `a` itself limits the recovery
    #[test]
    fn levinson_round_trip_near_boundary(phi in pacs(12, 0.95)) {
        let back = step_down(&model_from(phi.clone(), 1.0)).unwrap();
        for (x, y) in phi.iter().zip(&back.phi) {
            prop_assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }
}

proptest! {
    #![proptest_config(config(300))]

    #[test]
    fn yule_walker_consistency(phi in pacs(10, 0.9), sigma2 in 0.1f64..10.0) {
        let m = model_from(phi.clone(), sigma2);
        let r = ar_autocovariance(&m, m.order()).unwrap();
        let lev = levinson(&r, m.order()).unwrap();
        prop_assert!((lev.sigma2 - sigma2).abs() < 1e-10 * sigma2);
        for (x, y) in phi.iter().zip(&lev.phi) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn spectrum_integrates_to_variance(phi in pacs(6, 0.8), sigma2 in 0.1f64..10.0) {
        let m = model_from(phi, sigma2);
        let n = 1usize << 14;
        let freqs: Vec<f64> = (0..=n).map(|k| 0.5 * k as f64 / n as f64).collect();
        let h = ar_spectrum(&m, &freqs).unwrap();
        let df = 0.5 / n as f64;
        let integral = df * (h.iter().sum::<f64>() - 0.5 * (h[0] + h[n]));
        let r0 = ar_autocovariance(&m, 0).unwrap()[0];
        prop_assert!((2.0 * integral - r0).abs() < 1e-6 * r0, "{} vs {r0}", 2.0 * integral);
    }

    #[test]
    fn model_error_is_non_negative(
        truth_phi in pacs(4, 0.9),
        est_phi in pacs(8, 0.9),
        n_a in 10usize..2000,
    ) {
        let truth = model_from(truth_phi.clone(), 1.0);
        let mut phi = est_phi;
        if phi.len() < truth_phi.len() {
            phi.resize(truth_phi.len(), 0.1);
        }
        let est = model_from(phi, 1.3);
        let me = model_error(&est, &CovarianceSpec::Ar { model: truth }, n_a).unwrap().me;
        prop_assert!(me >= -1e-9, "me = {me}");
    }

    #[test]
    fn quadratic_form_matches_prediction_error(
        truth_phi in pacs(6, 0.9),
        est_phi in pacs(8, 0.9),
        n_a in 10usize..2000,
    ) {
        let truth = model_from(truth_phi.clone(), 1.7);
        let mut phi = est_phi;
        if phi.len() < truth_phi.len() {
            phi.resize(truth_phi.len(), 0.0);
        }
        let est = model_from(phi, 0.8);
        let pe = model_error(&est, &CovarianceSpec::Ar { model: truth.clone() }, n_a).unwrap().me;
        let quad = model_error_ar_quadratic(&est, &truth, n_a).unwrap();
        prop_assert!((pe - quad).abs() <= 1e-9 * quad.abs().max(1e-6), "{pe} vs {quad}");
    }

    #[test]
    fn lyapunov_per_element_matches_doubling(phi in pacs(8, 0.9), sigma2 in 0.2f64..5.0) {
        let ss = ar_to_ss(&model_from(phi, sigma2)).unwrap();
        let dss = match diagonalize(&ss) {
            Ok(d) if d.reduced_order == ss.state_dim() => d,
            _ => return Ok(()),
        };
        let se = stationary_covariance_diag(&dss);
        let back = &dss.v * se * dss.v.adjoint();
        let doubling = stationary_covariance(&ss).unwrap().map(|x| Complex64::new(x, 0.0));
        let scale = doubling.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = (back - doubling).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8 * scale.max(1.0), "err {err}");
    }

    #[test]
    fn eigenbasis_noise_is_hermitian(phi in pacs(10, 0.95)) {
        let ss = ar_to_ss(&model_from(phi, 1.0)).unwrap();
        if let Ok(dss) = diagonalize(&ss) {
            let qe: &DMatrix<Complex64> = &dss.qe;
            let asym = (qe - qe.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(asym < 1e-12, "asym {asym}");
        }
    }
}

fn richardson_ratio(obj: &Objective, x: &[f64], coord: usize) -> f64 {
    let d = |scale: f64| obj.value_and_gradient_scaled(x, scale).unwrap().1[coord];
    let (d1, d2, d4) = (d(4000.0), d(2000.0), d(1000.0));
    (d1 - d2) / (d2 - d4)
}

#[test]
fn finite_differences_are_second_order() {
    let truth = CovarianceSpec::Ar { model: ArModel::new(vec![0.6, -0.2], 1.0) };
    let y = generate_series(&truth, 400, 8).unwrap();
    let series = SampledSeries::dense(y).unwrap();
    let obj = Objective::new(&series, 2, Some(PriorKind::Reference), Engine::Kal).unwrap();
    for (i, phi) in [[0.3, -0.1], [0.55, -0.25], [-0.2, 0.4]].iter().enumerate() {
        let x = UnconstrainedParams::from_pac(&PartialAutocorr::new(phi.to_vec(), 1.1)).to_vec();
        for coord in 0..2 {
            let ratio = richardson_ratio(&obj, &x, coord);
            assert!((3.5..=4.5).contains(&ratio), "point {i} coord {coord}: ratio {ratio}");
        }
    }
}
