//! Exact and approximate per-tier rates as the small-cell density grows.
//!
//! cargo run --release --example rates

use hetnet_core::model::{NetworkModel, TierId, TierParams};
use hetnet_core::rates::rate_report;

fn main() -> hetnet_core::Result<()> {
    println!(
        "{:>8} {:>4} {:>6} {:>10} {:>10} {:>9}",
        "λs/λm", "B", "tier", "exact", "approx", "rel.err"
    );
    for bias in [1.0, 4.0] {
        for density_ratio in [0.1, 0.5, 1.0, 5.0, 10.0] {
            let model = NetworkModel::new(
                TierParams::new(1.0, 20.0, 10, 3),
                TierParams::new(density_ratio, 1.0, 5, 2),
                4.0,
                bias,
            )?;
            for tier in TierId::BOTH {
                let r = rate_report(&model, tier)?;
                println!(
                    "{density_ratio:>8} {bias:>4} {tier:>6} {:>10.5} {:>10.5} {:>+9.4}",
                    r.exact,
                    r.approx,
                    (r.approx - r.exact) / r.exact
                );
            }
        }
    }
    Ok(())
}
