//! Average per-tier user rates, in nats per channel use.
//!
//! The exact rate of a user served by tier `l` with `n = M_l + 1 − K_l` is
//!
//! ```text
//! R_l = ∫_0^∞ (1 + t_l)(1 − (1+z)^{-n}) / (z [F(z, K_l) + t_l F(c_l z, K_o)]) dz
//! ```
//!
//! with `t_l` the cross-tier weight ([`NetworkModel::cross_weight`]) and
//! `c_l = K_l B_l / (K_o B_o)`. The approximation averages the fading gains
//! first, which swaps `F` for `H`, drops the other tier's user count and
//! turns the numerator into `1 − exp(−z n / K_l)`.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_f, kernel_h, PathLoss};
use crate::model::{NetworkModel, TierId};
use crate::numerics::{integrate_zero_to_inf, QuadratureSpec};

/// Exact and approximate rate of one tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub tier: TierId,
    pub exact: f64,
    pub approx: f64,
}

/// Integrates a fallible integrand over `[0, ∞)`; the first error raised by
/// the integrand wins over the quadrature's own diagnosis.
pub(crate) fn integrate_fallible<F>(f: F, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let result = integrate_zero_to_inf(
        |z| match f(z) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        spec,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => result,
    }
}

/// `(1 − (1+z)^{-n}) / z`, with its limit `n` at the origin.
fn gamma_numerator_over_z(z: f64, n: f64) -> f64 {
    if z == 0.0 {
        n
    } else {
        -(-n * z.ln_1p()).exp_m1() / z
    }
}

/// `(1 − e^{-a z}) / z`, with its limit `a` at the origin.
pub(crate) fn exp_numerator_over_z(z: f64, a: f64) -> f64 {
    if z == 0.0 {
        a
    } else {
        -(-a * z).exp_m1() / z
    }
}

/// Exact average rate of a user served by `tier`.
pub fn rate_exact(model: &NetworkModel, tier: TierId) -> Result<f64> {
    model.validate()?;
    model.require_users(tier)?;
    model.require_users(tier.other())?;
    let pl = model.path_loss()?;
    let own = model.tier(tier);
    let other = model.tier(tier.other());
    let n = own.desired_shape();
    let k_own = f64::from(own.users);
    let k_other = f64::from(other.users);
    let t = model.cross_weight(tier);
    let c = (k_own * model.tier_bias(tier)) / (k_other * model.tier_bias(tier.other()));

    integrate_fallible(
        |z| {
            let num = (1.0 + t) * gamma_numerator_over_z(z, n);
            if z == 0.0 {
                return Ok(num / (1.0 + t));
            }
            let den = kernel_f(z, k_own, pl)? + t * kernel_f(c * z, k_other, pl)?;
            Ok(num / den)
        },
        &QuadratureSpec::default(),
    )
}

/// Approximate average rate of a user served by `tier`. Never reads the
/// other tier's antenna or user count.
pub fn rate_approx(model: &NetworkModel, tier: TierId) -> Result<f64> {
    model.validate()?;
    model.require_users(tier)?;
    let pl = model.path_loss()?;
    let own = model.tier(tier);
    if model.bias == 1.0 {
        return rate_approx_unbiased(own.antennas, own.users, pl);
    }
    let a = own.desired_shape() / f64::from(own.users);
    let t = model.cross_weight(tier);
    let c = model.tier_bias(tier) / model.tier_bias(tier.other());

    integrate_fallible(
        |z| {
            let num = (1.0 + t) * exp_numerator_over_z(z, a);
            if z == 0.0 {
                return Ok(num / (1.0 + t));
            }
            let den = kernel_h(z, pl)? + t * kernel_h(c * z, pl)?;
            Ok(num / den)
        },
        &QuadratureSpec::default(),
    )
}

/// Approximate rate without range expansion, which depends only on the
/// tier's own antennas and users and the path loss.
pub fn rate_approx_unbiased(antennas: u32, users: u32, pl: PathLoss) -> Result<f64> {
    if users < 1 || users > antennas {
        return Err(Error::domain(
            "users",
            format!("need 1 <= users <= antennas, got users={users}, antennas={antennas}"),
        ));
    }
    let a = f64::from(antennas + 1 - users) / f64::from(users);
    integrate_fallible(
        |z| {
            let num = exp_numerator_over_z(z, a);
            if z == 0.0 {
                return Ok(num);
            }
            Ok(num / kernel_h(z, pl)?)
        },
        &QuadratureSpec::default(),
    )
}

pub fn rate_report(model: &NetworkModel, tier: TierId) -> Result<RateReport> {
    Ok(RateReport {
        tier,
        exact: rate_exact(model, tier)?,
        approx: rate_approx(model, tier)?,
    })
}

/// Sample points for [`monotonicity_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityAxes {
    /// Values of `λ_s/λ_m`, realized by rescaling `λ_s`.
    pub density_ratios: Vec<f64>,
    /// Values of `P_s/P_m`, realized by rescaling `P_s`.
    pub power_ratios: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Default for MonotonicityAxes {
    fn default() -> Self {
        Self {
            density_ratios: vec![0.1, 0.5, 1.0, 5.0, 10.0],
            power_ratios: vec![1.0 / 40.0, 1.0 / 20.0, 1.0 / 10.0, 1.0 / 5.0, 1.0 / 2.0],
            biases: vec![1.5, 2.0, 4.0, 8.0, 16.0],
        }
    }
}

/// `(axis value, approximate rate)` pairs, in the order the axis was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub tier: TierId,
    pub density_ratio: Vec<(f64, f64)>,
    pub power_ratio: Vec<(f64, f64)>,
    pub bias: Vec<(f64, f64)>,
}

/// Samples the approximate rate of `tier` along each axis with the other
/// parameters held at their values in `model`.
pub fn monotonicity_report(model: &NetworkModel, tier: TierId, axes: &MonotonicityAxes) -> Result<MonotonicityReport> {
    let sample = |values: &[f64], vary: &dyn Fn(f64) -> NetworkModel| -> Result<Vec<(f64, f64)>> {
        values.iter().map(|&v| Ok((v, rate_approx(&vary(v), tier)?))).collect()
    };
    Ok(MonotonicityReport {
        tier,
        density_ratio: sample(&axes.density_ratios, &|r| model.with_density_ratio(r))?,
        power_ratio: sample(&axes.power_ratios, &|r| model.with_power_ratio(r))?,
        bias: sample(&axes.biases, &|b| model.with_bias(b))?,
    })
}
