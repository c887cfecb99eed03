use std::collections::BTreeMap;

use legible::dataset::{
    load_dataset, parse_trial, serialize_trial, synthesize_dataset, validate_dataset,
    write_dataset, ActionLabel, Dataset, LabelCounts, Stream, SynthConfig, Warning, HAND_STREAM,
};
use proptest::prelude::*;

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        counts: LabelCounts([1; 6]),
        seed,
        ..SynthConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthesized_trials_round_trip(seed in 0u64..10_000, first in 1u32..5000) {
        let cfg = SynthConfig { first_trial_id: first, ..small(seed) };
        for trial in synthesize_dataset(&cfg).unwrap().trials {
            let text = serialize_trial(&trial);
            let back = parse_trial(&text).unwrap();
            prop_assert_eq!(&back, &trial);
            prop_assert_eq!(serialize_trial(&back), text);
        }
    }
}

#[test]
fn directory_round_trip_keeps_manifest_order_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let d = synthesize_dataset(&small(3)).unwrap();
    let meta = BTreeMap::from([("config_hash".to_string(), "abc".to_string())]);
    let written = write_dataset(dir.path(), &d, meta).unwrap();
    let (manifest, loaded) = load_dataset(dir.path()).unwrap();
    assert_eq!(manifest, written);
    assert_eq!(manifest.meta["config_hash"], "abc");
    assert_eq!(loaded, d);
}

#[test]
fn missing_manifest_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(matches!(err, legible::dataset::DatasetError::Io { .. }), "{err}");
}

#[test]
fn recorded_tally_report() {
    let d = synthesize_dataset(&SynthConfig::default()).unwrap();
    let r = validate_dataset(&d);
    assert_eq!(r.total, 120);
    assert!(r.all_labels_present());
    assert!(!r.no_trials);
    assert_eq!(r.counts.0, [20, 23, 17, 17, 19, 24]);
}

#[test]
fn empty_dataset_is_flagged() {
    let r = validate_dataset(&Dataset::new(Vec::new()));
    assert_eq!(r.total, 0);
    assert!(r.no_trials);
    assert_eq!(r.counts.total(), 0);
}

#[test]
fn halved_rate_warns_for_that_stream() {
    let mut d = synthesize_dataset(&small(11)).unwrap();
    let trial = &mut d.trials[2];
    let hand = &trial.streams[HAND_STREAM];
    let halved = Stream::with_samples(
        HAND_STREAM,
        hand.nominal_rate,
        3,
        hand.samples.iter().step_by(2).cloned().collect(),
    );
    trial.streams.insert(HAND_STREAM.into(), halved);
    let id = trial.trial_id;
    let r = validate_dataset(&d);
    let hits: Vec<_> = r
        .warnings
        .iter()
        .filter(|w| matches!(w, Warning::RateMismatch { trial_id, stream, .. } if *trial_id == id && stream == HAND_STREAM))
        .collect();
    assert_eq!(hits.len(), 1, "{:?}", r.warnings);
    assert_eq!(r.warnings.len(), 1);
}

#[test]
fn coverage_lists_missing_labels() {
    let mut counts = LabelCounts([2; 6]);
    counts.0[ActionLabel::ALL[3].index()] = 0;
    let d = synthesize_dataset(&SynthConfig {
        counts,
        ..SynthConfig::default()
    })
    .unwrap();
    let err = d.require_coverage().unwrap_err();
    assert!(err.to_string().contains("G_L"), "{err}");
}
