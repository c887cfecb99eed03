use std::f64::consts::PI;

use legible::dataset::{synthesize_dataset, ActionLabel, SynthConfig};
use legible::trajgmm::{fit, fit_action_models, loglik, ActionModel, ActionModels, EmConfig, TrainingMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn two_blobs(n: usize, w: f64, seed: u64) -> TrainingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let (cx, cy) = if rng.random::<f64>() < w { (-4.0, 0.0) } else { (4.0, 1.0) };
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            vec![cx + 0.5 * a, cy + 0.3 * b]
        })
        .collect();
    TrainingMatrix::from_rows(rows)
}

fn direct_loglik(model: &legible::trajgmm::GmmModel, rows: &[Vec<f64>]) -> f64 {
    rows.iter()
        .map(|r| {
            let x = DVector::from_column_slice(r);
            let p: f64 = model
                .components
                .iter()
                .map(|c| {
                    let d = r.len() as f64;
                    let diff = &x - &c.mean;
                    let inv = c.covariance.clone().try_inverse().unwrap();
                    let q = (diff.transpose() * inv * &diff)[0];
                    c.prior * (-0.5 * q).exp()
                        / ((2.0 * PI).powf(d) * c.covariance.determinant()).sqrt()
                })
                .sum();
            p.ln()
        })
        .sum()
}

#[test]
fn separated_blobs_recover_weights() {
    let data = two_blobs(2000, 0.3, 5);
    let m = fit(&data, 2, &EmConfig::default(), 1).unwrap();
    assert!(m.fit_meta.converged);
    let mut comps = m.components.clone();
    comps.sort_by(|a, b| a.mean[0].total_cmp(&b.mean[0]));
    assert!((comps[0].prior - 0.3).abs() < 0.05, "{}", comps[0].prior);
    assert!((comps[0].mean[0] + 4.0).abs() < 0.1);
    assert!((comps[1].mean[1] - 1.0).abs() < 0.1);
    assert!((m.prior_sum() - 1.0).abs() < 1e-12);
}

#[test]
fn loglik_matches_direct_density() {
    let data = two_blobs(300, 0.5, 9);
    let m = fit(&data, 3, &EmConfig::default(), 2).unwrap();
    let ours = loglik(&m, &data).unwrap();
    let oracle = direct_loglik(&m, &data.rows);
    assert!((ours - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{ours} vs {oracle}");
}

#[test]
fn trace_never_drops_per_sample() {
    let data = two_blobs(500, 0.4, 21);
    let m = fit(&data, 3, &EmConfig::default(), 4).unwrap();
    let n = data.len() as f64;
    for w in m.fit_meta.loglik_trace.windows(2) {
        assert!((w[0] - w[1]) / n <= 1e-9, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn default_dataset_fits_eighteen_converged_models() {
    let d = synthesize_dataset(&SynthConfig::default()).unwrap();
    let models = fit_action_models(&d, &EmConfig::default()).unwrap();
    assert_eq!(models.model_count(), 18);
    for label in ActionLabel::ALL {
        let ActionModel::PerAxis(axes) = models.get(label).unwrap() else {
            panic!("expected per-axis models");
        };
        for m in axes.iter() {
            assert_eq!(m.k(), 4);
            assert_eq!(m.dim(), 2);
            assert!(m.fit_meta.converged, "{label}");
        }
    }

    // The trace is not persisted; everything else must survive exactly.
    let text = models.to_json();
    let back = ActionModels::from_json(&text).unwrap();
    assert_eq!(back.to_json(), text);
    for label in ActionLabel::ALL {
        for (a, b) in back.get(label).unwrap().gmms().into_iter().zip(models.get(label).unwrap().gmms()) {
            assert_eq!(a.components, b.components);
        }
    }
}

#[test]
fn joint_mode_gives_one_four_dimensional_model() {
    let mut cfg = SynthConfig::default();
    cfg.counts.0 = [4; 6];
    let d = synthesize_dataset(&cfg).unwrap();
    let em = EmConfig {
        joint: true,
        components: 2,
        ..EmConfig::default()
    };
    let models = fit_action_models(&d, &em).unwrap();
    assert_eq!(models.model_count(), 6);
    let ActionModel::Joint(m) = models.get(ActionLabel::ALL[0]).unwrap() else {
        panic!("expected a joint model");
    };
    assert_eq!(m.dim(), 4);
    assert_eq!(m.output_dims, vec![1, 2, 3]);
}

#[test]
fn too_few_rows() {
    let data = TrainingMatrix::from_rows(vec![vec![0.0, 1.0]; 2]);
    assert!(fit(&data, 3, &EmConfig::default(), 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn row_order_is_irrelevant(seed in 0u64..1000, shuffle in 0u64..1000) {
        let data = two_blobs(120, 0.5, seed);
        let mut rows = data.rows.clone();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let a = fit(&data, 2, &EmConfig::default(), 3).unwrap();
        let b = fit(&TrainingMatrix::from_rows(rows), 2, &EmConfig::default(), 3).unwrap();
        prop_assert_eq!(a.components, b.components);
        prop_assert_eq!(a.fit_meta.loglik_trace, b.fit_meta.loglik_trace);
    }

    #[test]
    fn translation_moves_means_only(seed in 0u64..1000, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let data = two_blobs(150, 0.5, seed);
        let shifted = TrainingMatrix::from_rows(
            data.rows.iter().map(|r| vec![r[0] + dx, r[1] + dy]).collect(),
        );
        let a = fit(&data, 2, &EmConfig::default(), 8).unwrap();
        let b = fit(&shifted, 2, &EmConfig::default(), 8).unwrap();
        for (ca, cb) in a.components.iter().zip(&b.components) {
            prop_assert!((ca.prior - cb.prior).abs() < 1e-6);
            let moved = &ca.mean + DVector::from_vec(vec![dx, dy]);
            prop_assert!((moved - &cb.mean).norm() < 1e-6);
            let dc: DMatrix<f64> = &ca.covariance - &cb.covariance;
            prop_assert!(dc.norm() < 1e-6);
        }
    }
}
