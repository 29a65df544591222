//! Monte Carlo estimate of both tiers' rates next to the exact values.
//! The first argument sets the replication count (default 50 000).
//!
//! cargo run --release --example simulate -- 200000

use hetnet_core::model::{NetworkModel, TierId, TierParams};
use hetnet_core::rates::rate_exact;
use hetnet_core::sim::{simulate_rate, z_score, SimSpec};

fn main() -> hetnet_core::Result<()> {
    let reps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50_000);
    let model = NetworkModel::new(
        TierParams::new(1.0, 20.0, 10, 3),
        TierParams::new(5.0, 1.0, 5, 2),
        4.0,
        4.0,
    )?;
    let spec = SimSpec::new(model, None, reps, 7)?;
    let start = std::time::Instant::now();
    let out = simulate_rate(&spec)?;
    println!(
        "{} replications in a disk of radius {:.3} ({:.1?}), {} empty windows",
        reps,
        spec.disk_radius,
        start.elapsed(),
        out.empty_windows
    );
    for tier in TierId::BOTH {
        let e = out.estimate(tier);
        let exact = rate_exact(&model, tier)?;
        println!(
            "{tier:>6}: MC {:.5} ± {:.5}  exact {exact:.5}  |z| {:.2}  association {:.4} (closed form {:.4})",
            e.mean_rate,
            e.std_error,
            z_score(e.mean_rate, e.std_error, exact),
            e.association_fraction,
            model.association_probability(tier)
        );
    }
    Ok(())
}
