//! Analytic rates against the Monte Carlo simulator.

use hetnet_core::model::{NetworkModel, TierId, TierParams};
use hetnet_core::rates::rate_exact;
use hetnet_core::sim::{simulate_rate, SimSpec};

#[test]
fn single_tier_limit() {
    let m = NetworkModel::new(
        TierParams::new(1.0, 1.0, 1, 1),
        TierParams::new(1e-9, 1.0, 1, 1),
        4.0,
        1.0,
    )
    .unwrap();
    let spec = SimSpec::new(m, None, 100_000, 3).unwrap();
    let out = simulate_rate(&spec).unwrap();
    let e = out.estimate(TierId::Macro);
    let exact = rate_exact(&m, TierId::Macro).unwrap();
    assert!(e.association_fraction > 0.9999);
    assert!((e.mean_rate - exact).abs() < 3.0 * e.std_error, "{e:?} vs {exact}");
}

#[test]
fn symmetric_single_antenna_tiers() {
    let tier = TierParams::new(1.0, 1.0, 1, 1);
    let m = NetworkModel::new(tier, tier, 4.0, 1.0).unwrap();
    let exact = rate_exact(&m, TierId::Macro).unwrap();
    assert_eq!(exact, rate_exact(&m, TierId::Small).unwrap());
    let out = simulate_rate(&SimSpec::new(m, None, 100_000, 4).unwrap()).unwrap();
    let (a, b) = (out.macro_estimate, out.small);
    assert!(
        (a.mean_rate - b.mean_rate).abs() < 3.0 * a.std_error.hypot(b.std_error),
        "{a:?} {b:?}"
    );
    for e in [a, b] {
        assert!((e.mean_rate - exact).abs() < 3.0 * e.std_error, "{e:?} vs {exact}");
    }
}

#[test]
fn multi_antenna_unbiased() {
    let m = NetworkModel::new(
        TierParams::new(1.0, 10.0, 6, 2),
        TierParams::new(3.0, 1.0, 4, 3),
        3.5,
        1.0,
    )
    .unwrap();
    let out = simulate_rate(&SimSpec::new(m, None, 40_000, 8).unwrap()).unwrap();
    for tier in TierId::BOTH {
        let e = out.estimate(tier);
        let exact = rate_exact(&m, tier).unwrap();
        assert!(
            (e.mean_rate - exact).abs() < 3.0 * e.std_error,
            "{tier}: {e:?} vs {exact}"
        );
    }
}
