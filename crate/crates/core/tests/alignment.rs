use legible::dataset::Stream;
use legible::streamsync::{
    align, align_config, estimate_offset, AlignConfig, AlignPolicy, LinearInterp, NearestSample,
    PolicyRegistry, SyncError,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_stream(name: &str, rate: f64, start: f64, dur: f64, f: impl Fn(f64) -> Vec<f64>) -> Stream {
    let mut s = Stream::new(name, rate, f(0.0).len());
    for i in 0..=(dur * rate).round() as usize {
        let t = start + i as f64 / rate;
        s.push(t, f(t));
    }
    s
}

#[test]
fn offset_from_exact_pairs() {
    let pairs: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.1, i as f64 * 0.1 + 0.5)).collect();
    let e = estimate_offset(&pairs).unwrap();
    assert!((e.offset - 0.5).abs() < 1e-12);
    assert!(e.residual_rms < 1e-12);
}

#[test]
fn offset_under_jitter() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<(f64, f64)> = (0..200)
        .map(|i| {
            let t = i as f64 * 0.01;
            (t, t + 0.5 + rng.random_range(-0.001..0.001))
        })
        .collect();
    let e = estimate_offset(&pairs).unwrap();
    assert!((e.offset - 0.5).abs() < 0.001, "{}", e.offset);
}

#[test]
fn single_pair_is_insufficient() {
    assert!(matches!(estimate_offset(&[(0.0, 1.0)]), Err(SyncError::InsufficientData(1))));
}

#[test]
fn constants_at_thirty_hz_master() {
    let streams = [
        grid_stream("a", 120.0, 0.0, 2.0, |_| vec![1.5]),
        grid_stream("b", 60.0, 0.0, 2.0, |_| vec![-2.0]),
        grid_stream("c", 30.0, 0.0, 2.0, |_| vec![7.0]),
    ];
    let b = align(&streams, 30.0, &NearestSample).unwrap();
    for (s, c) in b.streams.iter().zip([1.5, -2.0, 7.0]) {
        assert!(s.values.iter().all(|v| v == &[c]));
    }
    assert!(b.stream("c").unwrap().max_alignment_error <= 1.0 / 60.0);
}

#[test]
fn master_grid_uniform_and_increasing() {
    let streams = [
        grid_stream("a", 120.0, 0.013, 1.7, |t| vec![t]),
        grid_stream("b", 60.0, 0.0, 2.0, |t| vec![t]),
    ];
    let b = align(&streams, 100.0, &LinearInterp).unwrap();
    for w in b.master_times.windows(2) {
        assert!(w[1] > w[0]);
        assert!((w[1] - w[0] - 0.01).abs() < 1e-9);
    }
}

#[test]
fn config_overrides_pick_policies() {
    let streams = [
        grid_stream("hand_pos", 120.0, 0.0, 1.0, |t| vec![t, 0.0, 0.0]),
        grid_stream("label", 30.0, 0.0, 1.0, |t| vec![(t * 4.0).floor()]),
    ];
    let mut cfg = AlignConfig::default();
    cfg.policy_overrides.insert("label".into(), "nearest".into());
    let b = align_config(&streams, &cfg, &PolicyRegistry::default()).unwrap();
    assert_eq!(b.stream("hand_pos").unwrap().policy, "linear");
    assert_eq!(b.stream("label").unwrap().policy, "nearest");
    assert!(b.stream("label").unwrap().values.iter().all(|v| v[0].fract() == 0.0));

    cfg.default_policy = "cubic".into();
    assert!(matches!(
        align_config(&streams, &cfg, &PolicyRegistry::default()),
        Err(SyncError::UnknownPolicy(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_interp_reproduces_affine_signals(
        a in -5.0f64..5.0, c in -5.0f64..5.0, rate in 20.0f64..200.0, start in 0.0f64..0.1,
    ) {
        let s = grid_stream("s", rate, start, 1.0, |t| vec![a * t + c]);
        let master = grid_stream("m", 90.0, 0.0, 1.2, |_| vec![0.0]);
        let b = align(&[s, master], 90.0, &LinearInterp).unwrap();
        let got = &b.stream("s").unwrap().values;
        for (t, v) in b.master_times.iter().zip(got) {
            prop_assert!((v[0] - (a * t + c)).abs() < 1e-9);
        }
    }

    #[test]
    fn nearest_error_within_half_period(rate in 10.0f64..240.0, start in 0.0f64..0.2, q in 0.0f64..1.0) {
        let s = grid_stream("s", rate, start, 1.0, |t| vec![t]);
        let (lo, hi) = s.span().unwrap();
        let t = lo + q * (hi - lo);
        let r = NearestSample.sample(&s, t);
        prop_assert!(r.error <= 0.5 / rate + 1e-12);
        prop_assert!((r.value[0] - t).abs() == r.error);
    }
}
