//! Optimized ASE against the macro antenna count for two biases, with the
//! relaxed optimum alongside.
//!
//! cargo run --release --example ase_sweep

use hetnet_core::model::{NetworkModel, TierParams};
use hetnet_core::region::{r_squared, sweep_ase, Axis};

fn main() -> hetnet_core::Result<()> {
    let template = NetworkModel::new(
        TierParams::new(1.0, 1.0, 10, 1),
        TierParams::new(5.0, 0.05, 5, 1),
        4.0,
        1.0,
    )?;
    let rows = sweep_ase(&template, Axis::MacroAntennas, 4..=20, &[1.0, 4.0], false)?;
    println!(
        "{:>4} {:>3} {:>6} {:>10} {:>10} {:>10}",
        "M_m", "B", "K*", "T*", "T~", "T~ relaxed"
    );
    for r in &rows {
        println!(
            "{:>4} {:>3} {:>6} {:>10.4} {:>10.4} {:>10.4}",
            r.m_macro,
            r.bias,
            format!("({},{})", r.k_macro, r.k_small),
            r.ase_exact,
            r.ase_approx,
            r.ase_relaxed
        );
    }
    for bias in [1.0, 4.0] {
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.bias == bias)
            .map(|r| (f64::from(r.m_macro + 1), r.ase_exact))
            .unzip();
        println!(
            "B={bias}: linear fit of T* against M_m+1, R² = {:.6}",
            r_squared(&x, &y)
        );
    }
    Ok(())
}
