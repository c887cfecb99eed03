use legible::minjerk::{profile, MinJerkSegment};
use proptest::prelude::*;

const N: usize = 20_000;

/// Midpoint rule for ∫₀ᵀ f(t)² dt.
fn integral_sq(f: impl Fn(f64) -> f64, duration: f64) -> f64 {
    let h = duration / N as f64;
    (0..N).map(|i| f((i as f64 + 0.5) * h).powi(2)).sum::<f64>() * h
}

/// Third derivative of τ³(1−τ)³, which vanishes with its first two
/// derivatives at both ends.
fn bump_jerk(tau: f64) -> f64 {
    6.0 - 72.0 * tau + 180.0 * tau * tau - 120.0 * tau.powi(3)
}

fn septic_jerk(tau: f64) -> f64 {
    840.0 * tau - 5040.0 * tau * tau + 8400.0 * tau.powi(3) - 4200.0 * tau.powi(4)
}

fn axis_jerk(seg: &MinJerkSegment, axis: usize, t: f64) -> f64 {
    seg.evaluate(t).unwrap().jerk[axis]
}

#[test]
fn profile_third_derivative_matches_finite_difference() {
    let h = 1e-3;
    for i in 1..20 {
        let tau = i as f64 / 20.0;
        let fd = (profile(tau + 2.0 * h)[0] - 2.0 * profile(tau + h)[0] + 2.0 * profile(tau - h)[0]
            - profile(tau - 2.0 * h)[0])
            / (2.0 * h.powi(3));
        assert!((fd - profile(tau)[3]).abs() < 1e-3, "{tau}: {fd}");
    }
}

#[test]
fn beats_other_smooth_rest_to_rest_profiles() {
    let seg = MinJerkSegment::new([0.0; 3], [0.3, -0.1, 0.2], 1.2).unwrap();
    let t = seg.duration;
    let d = 0.3;
    let mj = integral_sq(|s| axis_jerk(&seg, 0, s), t);
    let septic = integral_sq(|s| d * septic_jerk(s / t) / t.powi(3), t);
    assert!(mj < septic, "{mj} vs {septic}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_form_cost(
        a in prop::array::uniform3(-1.0f64..1.0),
        b in prop::array::uniform3(-1.0f64..1.0),
        t in 0.2f64..3.0,
    ) {
        let seg = MinJerkSegment::new(a, b, t).unwrap();
        let d2: f64 = (0..3).map(|k| (b[k] - a[k]).powi(2)).sum();
        let cost: f64 = (0..3).map(|k| integral_sq(|s| axis_jerk(&seg, k, s), t)).sum();
        let want = 720.0 * d2 / t.powi(5);
        prop_assert!((cost - want).abs() <= 1e-6 * want.max(1e-12), "{} vs {}", cost, want);
    }

    #[test]
    fn admissible_perturbations_only_add_jerk(
        d in -1.0f64..1.0,
        t in 0.2f64..3.0,
        eps in -2.0f64..2.0,
    ) {
        prop_assume!(eps.abs() > 1e-3);
        let seg = MinJerkSegment::new([0.0; 3], [d, 0.0, 0.0], t).unwrap();
        let base = integral_sq(|s| axis_jerk(&seg, 0, s), t);
        let bumped = integral_sq(|s| axis_jerk(&seg, 0, s) + eps * bump_jerk(s / t) / t.powi(3), t);
        let bump_only = integral_sq(|s| eps * bump_jerk(s / t) / t.powi(3), t);
        prop_assert!(bumped > base);
        // First variation vanishes: the cost grows by exactly the bump's own cost.
        prop_assert!((bumped - base - bump_only).abs() <= 1e-6 * (base + bump_only));
    }
}
