use landau_core::asymptotics::{
    algebraic_schedule, beta_sup_from_k, beta_sup_from_order, choose_schedules, decay_fit, gronwall_closed_form,
    gronwall_numeric, integrate_scalar, log_slope, stretched_gronwall_bound, stretched_profile, DecayMode,
    GronwallParams, MomentEnvelope, MomentKind, Schedule, ScheduleRequest, StretchedGronwallParams,
};
use landau_core::LabError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_times() -> Vec<f64> {
    let mut times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
    times.extend((1..=40).map(|i| 10f64 * 10f64.powf(i as f64 / 10.0)));
    times
}

fn assert_dominates(p: &GronwallParams) {
    let times = sample_times();
    let numeric = gronwall_numeric(p, &times).unwrap();
    for (t, x) in times.iter().zip(numeric) {
        let bound = gronwall_closed_form(p, *t).unwrap();
        assert!(
            bound >= x * (1.0 - 1e-9),
            "{p:?} at t = {t}: bound {bound} < solution {x}"
        );
    }
}

#[test]
fn closed_form_dominates_twenty_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let a = rng.gen_range(0.0..0.95);
        let p = GronwallParams::new(
            rng.gen_range(0.01..10.0),
            rng.gen_range(0.1..5.0),
            rng.gen_range(0.0..5.0),
            a,
            a + rng.gen_range(0.05..2.0),
        )
        .unwrap();
        assert_dominates(&p);
    }
}

#[test]
fn closed_form_dominates_for_the_twelfth_moment_schedule() {
    let s = algebraic_schedule(12.0).unwrap();
    for (c0, c1, c2) in [(1.0, 1.0, 1.0), (0.2, 3.0, 0.5), (5.0, 0.3, 2.0)] {
        assert_dominates(&s.gronwall(c0, c1, c2).unwrap());
    }
}

#[test]
fn asymptotic_slope_is_the_exponent_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let a = rng.gen_range(0.05..0.5);
        let gap = rng.gen_range(0.1..1.5);
        let p = GronwallParams::new(
            rng.gen_range(0.1..10.0),
            rng.gen_range(1.0..5.0),
            rng.gen_range(0.01..5.0),
            a,
            a + gap,
        )
        .unwrap();
        let slope = log_slope(|t| gronwall_closed_form(&p, t), 1e6, 1e-3).unwrap();
        assert!((slope + gap).abs() < 0.01 * gap, "{p:?}: slope {slope}");
    }
}

#[test]
fn exponent_forms_agree() {
    for order in [10.0, 12.0, 15.0, 20.0] {
        let k = (2.0 * order - 9.0) / 3.0;
        let from_order = beta_sup_from_order(order);
        let from_k = beta_sup_from_k(k);
        assert!((from_order - from_k).abs() < 1e-12);
        let s = algebraic_schedule(order).unwrap();
        let (lo, hi) = s.nu_window;
        assert!(lo < s.nu && s.nu < hi);
        assert!(s.nu * s.k > 2.0 / 3.0);
        assert!(s.a > 0.0 && s.a < 1.0 && s.b > s.a);
        assert!(s.beta() < s.beta_sup);
    }
    assert_eq!(beta_sup_from_order(12.0), 0.5);
}

#[test]
fn window_boundaries_are_rejected() {
    assert!(matches!(algebraic_schedule(9.0), Err(LabError::InvalidConfig(_))));
    assert!(matches!(algebraic_schedule(9.5), Err(LabError::InvalidConfig(_))));
    assert!(algebraic_schedule(9.5 + 1e-9).is_ok());
    // At l = 9 the sup formula gives a negative exponent.
    assert!(beta_sup_from_k(3.0) < 0.0);
}

#[test]
fn stretched_schedule_for_half() {
    match choose_schedules(ScheduleRequest::Stretched { s: 0.5, kappa: 0.5 }).unwrap() {
        Schedule::Stretched(s) => {
            assert!((s.exponent - 1.0 / 7.0).abs() < 1e-15);
            assert!((s.log_power - 6.0 / 7.0).abs() < 1e-15);
            assert!((s.q + 6.0 / 7.0).abs() < 1e-15);
            assert!(s.kappa0 > 0.0 && s.kappa0 < 2.0 * s.kappa / 3.0);
        }
        other => panic!("unexpected schedule {other:?}"),
    }
}

#[test]
fn stretched_bound_without_source_is_pure_decay() {
    let p = StretchedGronwallParams {
        c0: 2.0,
        c1: 0.8,
        c2: 0.0,
        s: 0.5,
        kappa0: 0.1,
    };
    let times = [0.5, 2.0, 10.0, 100.0];
    let x = stretched_gronwall_bound(&p, &times).unwrap();
    // A(t) = int_0^t (1+u)^{-6/7} log(1+u)^{-6/7} du; with w = log(1+u) this is
    // int_0^{log(1+t)} e^{w/7} w^{-6/7} dw, integrated here after w = y^7.
    for (t, x) in times.iter().zip(x) {
        let upper = t.ln_1p().powf(1.0 / 7.0);
        let a = integrate_scalar(|y, _| 7.0 * (y.powi(7) / 7.0).exp(), 0.0, 0.0, &[upper], 1e-13, 1e-300).unwrap()[0];
        let expected = 2.0 * (-0.8 * a).exp();
        assert!((x - expected).abs() < 1e-8 * expected, "t = {t}: {x} vs {expected}");
    }
}

#[test]
fn stretched_bound_eventually_decays() {
    // The profile (1+t)^{1/7} log(1+t)^{-6/7} grows so slowly that the source
    // term (1+t) e^{-kappa0 profile} first drives the solution up; the
    // stretched decay takes over only at very large t.
    let p = StretchedGronwallParams {
        c0: 1.0,
        c1: 1.0,
        c2: 1.0,
        s: 0.5,
        kappa0: 1.0,
    };
    let times = [1e2, 1e10, 1e20, 1e30];
    let x = stretched_gronwall_bound(&p, &times).unwrap();
    assert!(x[1] > x[0] && x[3] < x[2], "{x:?}");
    assert!(x[3] > 0.0 && x[3] < 1e-100, "{x:?}");
}

#[test]
fn decay_fit_recovers_planted_algebraic_exponent() {
    let samples: Vec<(f64, f64)> = (0..60)
        .map(|i| {
            let t = 0.5 * i as f64;
            (t, (1.0 + t).powf(-0.5))
        })
        .collect();
    let fit = decay_fit(&samples, DecayMode::Algebraic).unwrap();
    assert!((fit.exponent - 0.5).abs() < 1e-6);
    assert!(fit.residual < 1e-10);
    assert!(fit.exponent_positive());
}

#[test]
fn decay_fit_recovers_planted_stretched_law() {
    let (c, s) = (1.7, 0.5);
    let samples: Vec<(f64, f64)> = (1..80)
        .map(|i| {
            let t = 0.25 * i as f64 * (1.0 + 0.05 * i as f64);
            (t, 3.0 * (-c * stretched_profile(s, t)).exp())
        })
        .collect();
    let fit = decay_fit(&samples, DecayMode::Stretched).unwrap();
    assert!((fit.exponent - s).abs() < 1e-4, "s = {}", fit.exponent);
    assert!((fit.rate - c).abs() < 1e-4, "c = {}", fit.rate);
    assert!((fit.power - 1.0 / 7.0).abs() < 1e-4);
}

#[test]
fn decay_fit_needs_dynamic_range() {
    let flat: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.3)).collect();
    assert!(matches!(
        decay_fit(&flat, DecayMode::Algebraic),
        Err(LabError::InsufficientData(_))
    ));
    let tiny: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 1e-14)).collect();
    assert!(matches!(
        decay_fit(&tiny, DecayMode::Algebraic),
        Err(LabError::InsufficientData(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_form_dominates_equality_solution(
        c0 in 0.0f64..10.0,
        c1 in 0.05f64..8.0,
        c2 in 0.0f64..8.0,
        a in 0.0f64..0.97,
        gap in 0.01f64..3.0,
    ) {
        let p = GronwallParams::new(c0, c1, c2, a, a + gap).unwrap();
        let times = sample_times();
        let numeric = gronwall_numeric(&p, &times).unwrap();
        for (t, x) in times.iter().zip(numeric) {
            prop_assert!(gronwall_closed_form(&p, *t).unwrap() >= x * (1.0 - 1e-9));
        }
    }

    #[test]
    fn envelope_dominates_its_samples(values in proptest::collection::vec(0.0f64..100.0, 1..40)) {
        let samples: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, &m)| (i as f64 * 0.3, m)).collect();
        let env = MomentEnvelope::fit(MomentKind::Polynomial { order: 10.0 }, samples, -3.0).unwrap();
        prop_assert!(env.dominates());
        prop_assert!(env.slope.is_finite());
    }

    #[test]
    fn algebraic_fit_envelope_bounds_samples(
        beta in 0.1f64..3.0,
        noise in proptest::collection::vec(-0.2f64..0.2, 12..40),
    ) {
        let samples: Vec<(f64, f64)> = noise
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let t = i as f64;
                (t, (1.0 + t).powf(-beta) * e.exp())
            })
            .collect();
        let fit = decay_fit(&samples, DecayMode::Algebraic).unwrap();
        for &(t, h) in &samples {
            prop_assert!(fit.envelope(t) >= h * (1.0 - 1e-12));
        }
    }

    #[test]
    fn windows_are_open_intervals(order in 9.6f64..40.0) {
        let s = algebraic_schedule(order).unwrap();
        prop_assert!(s.nu_window.0 < s.nu && s.nu < s.nu_window.1);
        prop_assert!((s.beta_sup - beta_sup_from_k(s.k)).abs() < 1e-12 * s.beta_sup.abs().max(1.0));
    }
}
