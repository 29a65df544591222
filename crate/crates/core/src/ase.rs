//! Area spectral efficiency and the choice of scheduled users per tier.
//!
//! With `u = K/(M+1)` the approximate ASE separates into
//! `λ_m (M_m+1) G_m(u_m) + λ_s (M_s+1) G_s(u_s)`, where each `G` is concave
//! in `u` and does not involve any antenna count. The optimal fraction is the
//! root of `G'`, found by bisection; the integer user count is then the better
//! of `⌊u*(M+1)⌋` and `⌈u*(M+1)⌉`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::kernel_h;
use crate::model::{NetworkModel, TierId};
use crate::numerics::{bisect, BracketSpec, QuadratureSpec};
use crate::rates::{exp_numerator_over_z, integrate_fallible, rate_approx, rate_exact};

/// Relative gap under which two candidates count as a tie; the smaller user
/// count is kept.
const ROUNDING_TIE: f64 = 2e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub u_macro: f64,
    pub u_small: f64,
    pub k_macro: u32,
    pub k_small: u32,
    pub ase_exact: f64,
    pub ase_approx: f64,
}

/// Approximate ASE `λ_m K_m R̃_m + λ_s K_s R̃_s`. A tier with no scheduled
/// users contributes zero.
pub fn ase_approx(model: &NetworkModel) -> Result<f64> {
    model.validate()?;
    let mut total = 0.0;
    for tier in TierId::BOTH {
        let p = model.tier(tier);
        if p.users > 0 {
            total += p.density * f64::from(p.users) * rate_approx(model, tier)?;
        }
    }
    Ok(total)
}

/// Exact ASE `λ_m K_m R_m + λ_s K_s R_s`; both tiers need `K >= 1`.
pub fn ase_exact(model: &NetworkModel) -> Result<f64> {
    model.validate()?;
    let mut total = 0.0;
    for tier in TierId::BOTH {
        let p = model.tier(tier);
        total += p.density * f64::from(p.users) * rate_exact(model, tier)?;
    }
    Ok(total)
}

/// Pieces shared by `G` and `G'`: prefactor `1 + t` and
/// `D(z) = H(z) + t H(c z)`.
struct Relaxed {
    t: f64,
    c: f64,
    pl: crate::kernels::PathLoss,
}

impl Relaxed {
    fn new(model: &NetworkModel, tier: TierId) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            t: model.cross_weight(tier),
            c: model.tier_bias(tier) / model.tier_bias(tier.other()),
            pl: model.path_loss()?,
        })
    }

    /// `(1 + t) / D(z)`.
    fn weight(&self, z: f64) -> Result<f64> {
        if z == 0.0 {
            return Ok(1.0);
        }
        let d = kernel_h(z, self.pl)? + self.t * kernel_h(self.c * z, self.pl)?;
        Ok((1.0 + self.t) / d)
    }
}

fn check_fraction(u: f64) -> Result<()> {
    if u.is_finite() && (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::domain("u", format!("fraction must lie in [0, 1], got {u}")))
    }
}

/// Relaxed per-antenna objective `G(u)` of `tier`; `G(0) = G(1) = 0`.
pub fn g_value(u: f64, tier: TierId, model: &NetworkModel) -> Result<f64> {
    check_fraction(u)?;
    if u == 0.0 || u == 1.0 {
        return Ok(0.0);
    }
    let relaxed = Relaxed::new(model, tier)?;
    let a = 1.0 / u - 1.0;
    integrate_fallible(
        |z| Ok(u * exp_numerator_over_z(z, a) * relaxed.weight(z)?),
        &QuadratureSpec::default(),
    )
}

/// `dG/du`. Strictly decreasing on `(0, 1)`, positive near 0.
///
/// At `u = 1` the integrand reduces to `−(1+t)/D(z)`, and since
/// `D(z)` grows only like `z^{2/α}` with `α > 2`, the integral diverges:
/// the derivative is `−∞` there.
pub fn g_derivative(u: f64, tier: TierId, model: &NetworkModel) -> Result<f64> {
    check_fraction(u)?;
    if u == 0.0 {
        return Err(Error::domain("u", "derivative is only defined for u > 0"));
    }
    let relaxed = Relaxed::new(model, tier)?;
    if u == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let a = 1.0 / u - 1.0;
    integrate_fallible(
        |z| {
            // (1 − e^{-az} − (z/u) e^{-az}) / z, which tends to −1 at the origin
            let num = if z == 0.0 {
                -1.0
            } else {
                exp_numerator_over_z(z, a) - (-a * z).exp() / u
            };
            Ok(num * relaxed.weight(z)?)
        },
        &QuadratureSpec::default(),
    )
}

/// Optimal relaxed fraction `u*` of `tier`, the root of `G'` on
/// `[1e-6, 1]`. Independent of both antenna counts.
pub fn optimal_fraction(tier: TierId, model: &NetworkModel) -> Result<f64> {
    bisect(|u| g_derivative(u, tier, model), &BracketSpec::default())
}

/// `(u_m*, u_s*)`.
pub fn optimal_fractions(model: &NetworkModel) -> Result<(f64, f64)> {
    Ok((
        optimal_fraction(TierId::Macro, model)?,
        optimal_fraction(TierId::Small, model)?,
    ))
}

/// Approximate ASE of the relaxed allocation `K_l = u_l (M_l + 1)`:
/// `Σ λ_l (M_l + 1) G_l(u_l)`. Affine in each `M_l + 1` for fixed fractions.
pub fn relaxed_ase(model: &NetworkModel, u_macro: f64, u_small: f64) -> Result<f64> {
    model.validate()?;
    let mut total = 0.0;
    for (tier, u) in [(TierId::Macro, u_macro), (TierId::Small, u_small)] {
        let p = model.tier(tier);
        total += p.density * f64::from(p.antennas + 1) * g_value(u, tier, model)?;
    }
    Ok(total)
}

/// Floor and ceiling of `u(M+1)`, clamped to `[1, M]`.
pub fn rounding_candidates(u: f64, antennas: u32) -> (u32, u32) {
    let target = u * f64::from(antennas + 1);
    let clamp = |k: f64| (k.max(1.0).min(f64::from(antennas))) as u32;
    (clamp(target.floor()), clamp(target.ceil()))
}

/// How the floor/ceiling candidates of `u*(M+1)` are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Per tier, keep the candidate with the larger approximate ASE term.
    /// Separable: each tier is rounded without looking at the other.
    Approximate,
    /// Keep the candidate pair with the larger exact ASE (at most four
    /// evaluations).
    #[default]
    Exact,
}

fn best_users_approx(model: &NetworkModel, tier: TierId, u: f64) -> Result<u32> {
    let p = model.tier(tier);
    let (lo, hi) = rounding_candidates(u, p.antennas);
    if lo == hi {
        return Ok(lo);
    }
    let value = |k: u32| -> Result<f64> {
        let mut m = *model;
        m.tier_mut(tier).users = k;
        Ok(p.density * f64::from(k) * rate_approx(&m, tier)?)
    };
    let (v_lo, v_hi) = (value(lo)?, value(hi)?);
    Ok(if v_hi > v_lo * (1.0 + ROUNDING_TIE) { hi } else { lo })
}

fn best_users_exact(model: &NetworkModel, u_macro: f64, u_small: f64) -> Result<(u32, u32)> {
    let (m_lo, m_hi) = rounding_candidates(u_macro, model.macro_tier.antennas);
    let (s_lo, s_hi) = rounding_candidates(u_small, model.small.antennas);
    let mut pairs = vec![(m_lo, s_lo), (m_lo, s_hi), (m_hi, s_lo), (m_hi, s_hi)];
    pairs.sort_unstable();
    pairs.dedup();
    let mut best = pairs[0];
    let mut best_value = ase_exact(&model.with_users(best.0, best.1))?;
    for &pair in &pairs[1..] {
        let v = ase_exact(&model.with_users(pair.0, pair.1))?;
        if v > best_value * (1.0 + ROUNDING_TIE) {
            best = pair;
            best_value = v;
        }
    }
    Ok(best)
}

/// Completes an allocation from given optimal fractions. Lets sweeps that
/// share a bias reuse one pair of bisections across antenna counts.
pub fn allocate(model: &NetworkModel, u_macro: f64, u_small: f64, rounding: Rounding) -> Result<Allocation> {
    model.validate()?;
    let (k_macro, k_small) = match rounding {
        Rounding::Approximate => (
            best_users_approx(model, TierId::Macro, u_macro)?,
            best_users_approx(model, TierId::Small, u_small)?,
        ),
        Rounding::Exact => best_users_exact(model, u_macro, u_small)?,
    };
    let chosen = model.with_users(k_macro, k_small);
    Ok(Allocation {
        u_macro,
        u_small,
        k_macro,
        k_small,
        ase_exact: ase_exact(&chosen)?,
        ase_approx: ase_approx(&chosen)?,
    })
}

/// Optimal user counts: `u*(M+1)` rounded to whichever neighbouring
/// integers give the larger exact ASE.
pub fn optimal_users(model: &NetworkModel) -> Result<Allocation> {
    optimal_users_with(model, Rounding::default())
}

pub fn optimal_users_with(model: &NetworkModel, rounding: Rounding) -> Result<Allocation> {
    let (u_m, u_s) = optimal_fractions(model)?;
    allocate(model, u_m, u_s, rounding)
}

/// Result of scanning every `(K_m, K_s)` pair for the largest exact ASE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveOptimum {
    pub k_macro: u32,
    pub k_small: u32,
    pub ase_exact: f64,
}

/// Brute-force maximization of the exact ASE over
/// `[1, M_m] × [1, M_s]`. Ties keep the lexicographically smallest pair.
pub fn exhaustive_users(model: &NetworkModel) -> Result<ExhaustiveOptimum> {
    model.validate()?;
    let pairs: Vec<(u32, u32)> = (1..=model.macro_tier.antennas)
        .flat_map(|km| (1..=model.small.antennas).map(move |ks| (km, ks)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(km, ks)| ase_exact(&model.with_users(km, ks)))
        .collect::<Result<Vec<f64>>>()?;
    let (best, ase) = values.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
    );
    Ok(ExhaustiveOptimum {
        k_macro: pairs[best].0,
        k_small: pairs[best].1,
        ase_exact: ase,
    })
}
