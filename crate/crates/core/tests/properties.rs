use hetnet_core::ase::{ase_approx, optimal_fraction, relaxed_ase, rounding_candidates};
use hetnet_core::model::{NetworkModel, TierId, TierParams};
use hetnet_core::rates::{rate_approx, rate_exact};
use hetnet_core::region::{classify_cell, verdict, Verdict};
use proptest::prelude::*;

fn model(d: f64, p: f64, b: f64, alpha: f64) -> NetworkModel {
    NetworkModel::new(TierParams::new(1.0, 1.0, 8, 3), TierParams::new(d, p, 4, 2), alpha, b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn association_probabilities_sum_to_one(d in 0.01f64..100.0, p in 0.001f64..10.0, b in 1.0f64..20.0, alpha in 2.1f64..6.0) {
        let m = model(d, p, b, alpha);
        let total = m.association_probability(TierId::Macro) + m.association_probability(TierId::Small);
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rates_are_finite_and_positive(d in 0.1f64..10.0, p in 0.02f64..1.0, b in 1.0f64..8.0, alpha in 3.0f64..5.0) {
        let m = model(d, p, b, alpha);
        for tier in TierId::BOTH {
            let (e, a) = (rate_exact(&m, tier).unwrap(), rate_approx(&m, tier).unwrap());
            prop_assert!(e.is_finite() && e > 0.0);
            prop_assert!(a.is_finite() && a > 0.0);
        }
    }

    #[test]
    fn optimal_fraction_is_interior_and_antenna_free(d in 0.1f64..10.0, p in 0.02f64..1.0, b in 1.0f64..8.0) {
        let m = model(d, p, b, 4.0);
        for tier in TierId::BOTH {
            let u = optimal_fraction(tier, &m).unwrap();
            prop_assert!(u > 0.0 && u < 1.0);
            prop_assert_eq!(u, optimal_fraction(tier, &m.with_antennas(17, 9)).unwrap());
        }
    }

    #[test]
    fn relaxed_optimum_dominates_integer_points(d in 0.1f64..10.0, p in 0.02f64..1.0, b in 1.0f64..8.0) {
        let m = model(d, p, b, 4.0);
        let (um, us) = (optimal_fraction(TierId::Macro, &m).unwrap(), optimal_fraction(TierId::Small, &m).unwrap());
        let best = relaxed_ase(&m, um, us).unwrap();
        for km in 1..=8 {
            for ks in 1..=4 {
                let t = ase_approx(&m.with_users(km, ks)).unwrap();
                prop_assert!(t <= best * (1.0 + 1e-8), "({}, {}): {} > {}", km, ks, t, best);
            }
        }
    }

    #[test]
    fn rounding_candidates_bracket(u in 0.0f64..1.0, antennas in 1u32..64) {
        let (lo, hi) = rounding_candidates(u, antennas);
        prop_assert!(1 <= lo && lo <= hi && hi <= antennas);
        prop_assert!(hi - lo <= 1);
    }

    #[test]
    fn verdict_partitions(a in 0.1f64..100.0, r in -1e-5f64..1e-5) {
        let b = a * (1.0 + r);
        let v = verdict(b, a, 1e-6);
        let expected = if b > a * (1.0 + 1e-6) {
            Verdict::Improve
        } else if b < a * (1.0 - 1e-6) {
            Verdict::Degrade
        } else {
            Verdict::Tie
        };
        prop_assert_eq!(v, expected);
    }
}

#[test]
fn unit_bias_cells_tie() {
    let c = classify_cell(&model(5.0, 0.05, 1.0, 4.0), 7, 3, 1.0).unwrap();
    assert_eq!(c.verdict, Verdict::Tie);
    assert_eq!(c.ase_biased.to_bits(), c.ase_unbiased.to_bits());
}
