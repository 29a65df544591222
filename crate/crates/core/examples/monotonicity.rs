//! How the approximate rates respond to density, power and bias.
//!
//! cargo run --release --example monotonicity

use hetnet_core::model::{NetworkModel, TierId, TierParams};
use hetnet_core::rates::{monotonicity_report, MonotonicityAxes};

fn main() -> hetnet_core::Result<()> {
    let axes = MonotonicityAxes::default();
    for bias in [4.0, 1.0] {
        let model = NetworkModel::new(
            TierParams::new(1.0, 20.0, 10, 3),
            TierParams::new(5.0, 1.0, 5, 2),
            4.0,
            bias,
        )?;
        println!("B = {bias}");
        for tier in TierId::BOTH {
            let r = monotonicity_report(&model, tier, &axes)?;
            for (name, series) in [("λs/λm", &r.density_ratio), ("Ps/Pm", &r.power_ratio), ("B", &r.bias)] {
                let cells: Vec<String> = series.iter().map(|(x, v)| format!("{x}:{v:.4}")).collect();
                println!("  {tier:>5} vs {name:<6} {}", cells.join("  "));
            }
        }
    }
    Ok(())
}
