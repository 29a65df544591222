//! Where range expansion (B = 4) improves the optimized ASE, for two
//! small-cell power levels. Writes `region.csv` to the working directory.
//!
//! cargo run --release --example region

use hetnet_core::model::{NetworkModel, TierParams};
use hetnet_core::region::{sweep_region, Verdict};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for power_ratio in [0.05, 0.1] {
        let template = NetworkModel::new(
            TierParams::new(1.0, 1.0, 1, 1),
            TierParams::new(5.0, power_ratio, 1, 1),
            4.0,
            1.0,
        )?;
        let map = sweep_region(&template, 1..=30, 1..=10, 4.0)?;
        println!("Ps/Pm = {power_ratio}: rows M_s = 10..1, columns M_m = 1..30 (+ improve, - degrade)");
        for ms in (1..=10).rev() {
            let row: String = (1..=30)
                .map(|mm| match map.get(mm, ms).map(|c| c.verdict) {
                    Some(Verdict::Improve) => '+',
                    Some(Verdict::Degrade) => '-',
                    _ => '=',
                })
                .collect();
            println!("  {ms:>2} {row}");
        }
        if power_ratio == 0.05 {
            let mut w = csv::Writer::from_path("region.csv")?;
            for cell in &map.grid {
                w.serialize(cell)?;
            }
            w.flush()?;
        }
    }
    println!("wrote region.csv");
    Ok(())
}
