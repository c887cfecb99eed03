use std::sync::OnceLock;

use legible::anticipate::{
    anova_two_way, classify, run_gated_eval, AnticipateError, ArmPrefix, CueConfig, CueRegistry,
    EvalConfig, Gate, Observation, Priors,
};
use legible::dataset::{
    synthesize_dataset, Action, ActionLabel, Dataset, Direction, LabelCounts, SceneGeometry,
    SynthConfig, Trajectory,
};
use legible::gaze::{FixationTarget, TargetKind};
use legible::trajgmm::{fit_action_models, ActionModels, EmConfig};
use legible::trajgmr::CovarianceMode;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trained() -> &'static ActionModels {
    static MODELS: OnceLock<ActionModels> = OnceLock::new();
    MODELS.get_or_init(|| {
        let d = synthesize_dataset(&SynthConfig::default()).unwrap();
        fit_action_models(&d, &EmConfig::default()).unwrap()
    })
}

fn cues() -> CueRegistry {
    CueRegistry::from_config(&CueConfig::default()).unwrap()
}

fn test_set(seed: u64, per_label: usize) -> Dataset {
    synthesize_dataset(&SynthConfig {
        counts: LabelCounts([per_label; 6]),
        seed,
        first_trial_id: 10_000,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn blank_gaze_returns_the_training_tally() {
    let models = trained();
    let priors = Priors::for_mode(Default::default(), models).unwrap();
    let mut obs = Observation::new(SceneGeometry::default());
    obs.gaze_targets = Some(Vec::new());
    let post = classify(&obs, models, &priors, &cues()).unwrap();
    for (l, n) in ActionLabel::ALL.into_iter().zip(LabelCounts::RECORDED_TALLY.0) {
        assert!((post.get(l) - n as f64 / 120.0).abs() < 1e-12, "{l}");
    }
}

#[test]
fn nothing_observed_is_an_error() {
    let obs = Observation::new(SceneGeometry::default());
    let err = classify(&obs, trained(), &Priors::uniform(), &cues()).unwrap_err();
    assert!(matches!(err, AnticipateError::EmptyObservation));
}

#[test]
fn left_marker_fixation_points_to_place_left() {
    let scene = SceneGeometry::default();
    let mut obs = Observation::new(scene.clone());
    obs.gaze_targets = Some(vec![FixationTarget::in_scene(
        TargetKind::PlaceMarker(Direction::Left),
        &scene,
    )]);
    let post = classify(&obs, trained(), &Priors::uniform(), &cues()).unwrap();
    let pl = ActionLabel::new(Action::Place, Direction::Left);
    assert_eq!(post.argmax(), pl);
    assert!(post.get(pl) > 0.5, "{}", post.get(pl));
}

#[test]
fn full_mean_reach_is_recognized() {
    let models = trained();
    for l in ActionLabel::ALL {
        let rec = models.reconstruct(l, 40, CovarianceMode::MomentMatched).unwrap();
        let dur = models.reach_durations[&l];
        let onset = 1.0;
        let samples = Trajectory {
            times: rec.trajectory.times.iter().map(|t| onset + t * dur).collect(),
            points: rec.trajectory.points.clone(),
        };
        let mut obs = Observation::new(SceneGeometry::default());
        obs.arm = Some(ArmPrefix { onset, samples });
        let post = classify(&obs, models, &Priors::uniform(), &cues()).unwrap();
        assert_eq!(post.argmax(), l);
    }
}

#[test]
fn leaked_trials_are_refused() {
    let train = synthesize_dataset(&SynthConfig::default()).unwrap();
    let err = run_gated_eval(&train, trained(), &[Gate::G], &EvalConfig::default()).unwrap_err();
    let AnticipateError::Leakage(ids) = err else {
        panic!("expected leakage, got {err}");
    };
    assert_eq!(ids.len(), 120);
}

#[test]
fn marginal_accuracies_bound_overall() {
    let report = run_gated_eval(
        &test_set(77, 5),
        trained(),
        &[Gate::G, Gate::GH, Gate::GHA, Gate::GHAPlus],
        &EvalConfig::default(),
    )
    .unwrap();
    assert_eq!(report.gates.len(), 4);
    for g in &report.gates {
        assert_eq!(g.n, 30);
        assert!(g.direction_accuracy >= g.accuracy);
        assert!(g.action_accuracy >= g.accuracy);
        let total: usize = g.confusion.iter().flatten().sum();
        assert_eq!(total, 30);
    }
    let again = run_gated_eval(
        &test_set(77, 5),
        trained(),
        &[Gate::GHAPlus, Gate::G, Gate::GH, Gate::GHA],
        &EvalConfig::default(),
    )
    .unwrap();
    assert_eq!(again.to_json(), report.to_json());
}

#[test]
fn balanced_anova_partitions_total() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = Vec::new();
    for a in 0..4u8 {
        for b in 0..2u8 {
            for _ in 0..6 {
                rows.push((a, b, f64::from(a) * 0.3 - f64::from(b) + rng.random_range(-1.0..1.0)));
            }
        }
    }
    let t = anova_two_way(&rows).unwrap();
    let parts = t.factor_a.ss + t.factor_b.ss + t.interaction.ss + t.residual.ss;
    assert!((parts - t.total_ss).abs() < 1e-10 * t.total_ss);
    assert_eq!(t.factor_a.df + t.factor_b.df + t.interaction.df + t.residual.df, t.n - 1);
    assert!((0.0..=1.0).contains(&t.factor_a.p));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_is_a_distribution(
        raw in prop::array::uniform6(0.01f64..1.0),
        kinds in prop::collection::vec(0usize..10, 0..4),
        head in prop::array::uniform3(-1.0f64..1.0),
    ) {
        prop_assume!(head.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let s: f64 = raw.iter().sum();
        let priors = Priors(ActionLabel::ALL.into_iter().zip(raw.map(|p| p / s)).collect());
        let scene = SceneGeometry::default();
        let all = TargetKind::all();
        let mut obs = Observation::new(scene.clone());
        obs.gaze_targets = Some(kinds.iter().map(|k| FixationTarget::in_scene(all[*k], &scene)).collect());
        obs.head_direction = Some(head);
        let post = classify(&obs, trained(), &priors, &cues()).unwrap();
        let total: f64 = post.probs.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!(post.probs.values().all(|p| *p >= 0.0));
        // Priors enter multiplicatively: reweighting the uniform-prior posterior gives the same answer.
        let flat = classify(&obs, trained(), &Priors::uniform(), &cues()).unwrap();
        let z: f64 = ActionLabel::ALL.iter().map(|l| flat.get(*l) * priors.get(*l)).sum();
        for l in ActionLabel::ALL {
            prop_assert!((flat.get(l) * priors.get(l) / z - post.get(l)).abs() < 1e-9);
        }
    }
}
