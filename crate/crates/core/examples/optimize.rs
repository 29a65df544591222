//! Optimal scheduled users per tier: relaxed fractions, rounded counts, and a
//! brute-force check over every (K_m, K_s).
//!
//! cargo run --release --example optimize

use hetnet_core::ase::{exhaustive_users, optimal_fractions, optimal_users};
use hetnet_core::model::{NetworkModel, TierParams};

fn main() -> hetnet_core::Result<()> {
    println!(
        "{:>6} {:>6} {:>3} {:>8} {:>8} {:>8} {:>11}",
        "λs/λm", "Ps/Pm", "B", "u_m*", "u_s*", "K*", "exhaustive"
    );
    for density_ratio in [1.0, 5.0, 10.0] {
        for power_ratio in [0.05, 0.1] {
            for bias in [1.0, 4.0] {
                let model = NetworkModel::new(
                    TierParams::new(1.0, 1.0, 10, 1),
                    TierParams::new(density_ratio, power_ratio, 5, 1),
                    4.0,
                    bias,
                )?;
                let (um, us) = optimal_fractions(&model)?;
                let a = optimal_users(&model)?;
                let e = exhaustive_users(&model)?;
                println!(
                    "{density_ratio:>6} {power_ratio:>6} {bias:>3} {um:>8.4} {us:>8.4} {:>8} {:>11}",
                    format!("({},{})", a.k_macro, a.k_small),
                    format!("({},{})", e.k_macro, e.k_small)
                );
            }
        }
    }
    Ok(())
}
