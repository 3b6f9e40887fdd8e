use std::sync::Arc;

use landau_core::dist::{anisotropic_gaussian, random_corpus, standard_maxwellian};
use landau_core::functionals::{partition_constants, Dissipation};
use landau_core::inequalities::{
    check_b_field_consistency, check_bakry_emery, check_cercignani, check_coercivity_lemma, check_interpolation_lemma,
    check_interpolation_lemma_stretched, check_l3_regularity, check_prop31, check_prop32, check_prop33,
    check_theorem_entropy, coercivity_sample, delta_floor, hessian_scalar, partition_floor, Cutoff, InequalityVerdict,
    BAKRY_EMERY_MINIMUM,
};
use landau_core::{CollisionOperator, Corpus, VelocityGrid};
use proptest::prelude::*;

fn corpus(n: usize, count: usize, seed: u64) -> (Arc<VelocityGrid>, Corpus) {
    let grid = Arc::new(VelocityGrid::new(6.0, n).unwrap());
    let corpus = random_corpus(grid.clone(), seed, count, 0.0).unwrap();
    (grid, corpus)
}

fn assert_holds(verdicts: &[InequalityVerdict]) {
    for v in verdicts {
        assert!(v.holds, "{}", v.summary_line());
    }
}

#[test]
fn hessian_minimum_is_five_eighths_on_the_sphere_of_radius_root_three() {
    assert!((hessian_scalar(3.0) - BAKRY_EMERY_MINIMUM).abs() < 1e-12);
    for z in [0.0, 1.0, 2.9, 3.1, 10.0, 100.0] {
        assert!(hessian_scalar(z) > BAKRY_EMERY_MINIMUM);
    }
    let v = check_bakry_emery(2000, 5);
    assert!(v.holds);
    assert!((v.lhs - 0.625).abs() < 1e-12);
}

#[test]
fn drift_field_matches_divergence_of_diffusion() {
    for gamma in [-3.0, -2.5, -1.0, 0.0] {
        assert!(check_b_field_consistency(gamma, 200, 3).unwrap().holds);
    }
}

#[test]
fn corpus_checks_hold_at_coarse_resolution() {
    let (grid, corpus) = corpus(16, 6, 8);
    let op = CollisionOperator::new(grid, -3.0).unwrap();
    let d = Dissipation::Convolution(&op);
    let members = &corpus.members;

    let entropy = check_theorem_entropy(members, d).unwrap();
    assert!(entropy.verdict.holds && entropy.verdict.empirical_constant > 0.0);
    assert_holds(&check_cercignani(members, 2.0, d).unwrap());
    assert!(check_l3_regularity(members, d).unwrap().holds);
    assert_holds(&check_prop33(members, 0.0, d).unwrap());
    for f in members {
        let v = check_prop32(f, d).unwrap();
        assert!(v.holds && v.lhs > v.rhs, "{}", v.summary_line());
        let (z1, z2) = partition_constants(f, -3.0);
        assert!(z1 >= partition_floor(-3.0) && z1 <= 1.0);
        assert!(z2 >= partition_floor(-3.0) && z2 <= 1.0);
    }
    assert!(check_interpolation_lemma(members, 5.0 / 3.0, 2.0).unwrap().holds);
    assert!(
        check_interpolation_lemma_stretched(members, 5.0 / 3.0, 0.5, 0.2, 0.3, 0.7)
            .unwrap()
            .holds
    );
}

#[test]
fn delta_floor_is_the_explicit_constant() {
    assert_eq!(delta_floor(0.0), 2f64.powi(-34) / 81.0);
    assert!((delta_floor(0.5) - 2f64.powi(-34) / 81.0 * (-8.0f64).exp()).abs() < 1e-30);
}

#[test]
fn coercivity_constant_is_positive() {
    let (_, corpus) = corpus(12, 4, 2);
    for cutoff in [Cutoff::Indicator, Cutoff::Smooth] {
        let (verdicts, fit) = check_coercivity_lemma(&corpus.members, -3.0, 0.5, 10.0, cutoff).unwrap();
        assert_holds(&verdicts);
        assert!(fit.k > 0.0);
    }
}

#[test]
fn score_reconstruction_on_anisotropic_gaussian() {
    let grid = Arc::new(VelocityGrid::new(7.0, 32).unwrap());
    let f = anisotropic_gaussian(grid, [1.4, 1.0, 0.6]).unwrap();
    let v = check_prop31(&f, 1e-2).unwrap();
    assert!(v.holds, "{}", v.summary_line());
}

#[test]
fn equilibrium_is_vacuous_for_the_entropy_bound() {
    let grid = Arc::new(VelocityGrid::new(6.0, 16).unwrap());
    let mu = standard_maxwellian(grid.clone());
    let op = CollisionOperator::new(grid, -3.0).unwrap();
    let check = check_theorem_entropy(std::slice::from_ref(&mu), Dissipation::Convolution(&op)).unwrap();
    assert!(check.verdict.vacuous && check.verdict.holds);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pressure_bound_has_slack(seed in 0u64..10_000, gamma in -3.5f64..-0.5) {
        let grid = Arc::new(VelocityGrid::new(5.0, 12).unwrap());
        let corpus = random_corpus(grid.clone(), seed, 1, f64::INFINITY).unwrap();
        let op = CollisionOperator::new(grid, gamma).unwrap();
        let v = check_prop32(&corpus.members[0], Dissipation::Convolution(&op)).unwrap();
        prop_assert!(v.holds);
    }

    #[test]
    fn partition_constants_stay_in_range(seed in 0u64..10_000, gamma in -3.9f64..0.0) {
        let grid = Arc::new(VelocityGrid::new(6.0, 14).unwrap());
        let corpus = random_corpus(grid, seed, 1, 0.0).unwrap();
        let (z1, z2) = partition_constants(&corpus.members[0], gamma);
        prop_assert!(z1 >= partition_floor(gamma) && z1 <= 1.0);
        prop_assert!(z2 >= partition_floor(gamma) && z2 <= 1.0);
    }
}

#[test]
fn coercivity_integral_matches_direct_pair_sum() {
    let (grid, corpus) = corpus(9, 2, 13);
    let (gamma, eta, l) = (-2.5, 0.6, 8.0);
    for cutoff in [Cutoff::Indicator, Cutoff::Smooth] {
        for f in &corpus.members {
            let sample = coercivity_sample(f, gamma, eta, l, cutoff).unwrap();
            let nodes = grid.nodes();
            let w: Vec<f64> = (0..grid.len()).map(|k| grid.weight(k) * f.values()[k]).collect();
            let b2: Vec<f64> = nodes
                .iter()
                .map(|v| 1.0 + v.iter().map(|x| x * x).sum::<f64>())
                .collect();
            let mut direct = 0.0;
            for k in 0..grid.len() {
                for m in 0..k {
                    let r = (0..3).map(|a| (nodes[k][a] - nodes[m][a]).powi(2)).sum::<f64>().sqrt();
                    let kernel = r.powf(gamma) * (1.0 - cutoff.profile(r / eta));
                    let growth = b2[k].powf(0.5 * (l - 2.0)) - b2[m].powf(0.5 * (l - 2.0));
                    direct += w[k] * w[m] * kernel * (b2[m] - b2[k]) * growth;
                }
            }
            assert!(
                (sample.integral - direct).abs() < 1e-12 * direct.abs(),
                "{} vs {direct}",
                sample.integral
            );
        }
    }
}
