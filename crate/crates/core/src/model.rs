//! Network description shared by every analytic and simulated quantity.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::PathLoss;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierId {
    Macro,
    Small,
}

impl TierId {
    pub const BOTH: [TierId; 2] = [TierId::Macro, TierId::Small];

    pub fn other(self) -> TierId {
        match self {
            TierId::Macro => TierId::Small,
            TierId::Small => TierId::Macro,
        }
    }
}

impl fmt::Display for TierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TierId::Macro => "macro",
            TierId::Small => "small",
        })
    }
}

/// One tier of base stations.
///
/// `users` is the number of users scheduled per base station. Rate
/// computations need `1 <= users <= antennas`; `users = 0` is accepted only
/// by the area spectral efficiency of the approximate model, where an idle
/// tier contributes nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    pub density: f64,
    pub power: f64,
    pub antennas: u32,
    pub users: u32,
}

impl TierParams {
    pub fn new(density: f64, power: f64, antennas: u32, users: u32) -> Self {
        Self {
            density,
            power,
            antennas,
            users,
        }
    }

    fn validate(&self, tier: TierId) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::domain(
                format!("{tier}.density"),
                format!("must be finite and > 0, got {}", self.density),
            ));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::domain(
                format!("{tier}.power"),
                format!("must be finite and > 0, got {}", self.power),
            ));
        }
        if self.antennas < 1 {
            return Err(Error::domain(format!("{tier}.antennas"), "must be >= 1"));
        }
        if self.users > self.antennas {
            return Err(Error::domain(
                format!("{tier}.users"),
                format!("must not exceed antennas ({} > {})", self.users, self.antennas),
            ));
        }
        Ok(())
    }

    /// Shape `M + 1 − K` of the serving-link gain.
    pub fn desired_shape(&self) -> f64 {
        f64::from(self.antennas + 1 - self.users)
    }
}

/// Two-tier network: macro tier, small-cell tier, path loss and the
/// range-expansion bias applied to small cells during association.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    #[serde(rename = "macro")]
    pub macro_tier: TierParams,
    pub small: TierParams,
    pub alpha: f64,
    pub bias: f64,
}

impl NetworkModel {
    pub fn new(macro_tier: TierParams, small: TierParams, alpha: f64, bias: f64) -> Result<Self> {
        let model = Self {
            macro_tier,
            small,
            alpha,
            bias,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        PathLoss::new(self.alpha)?;
        if !(self.bias.is_finite() && self.bias >= 1.0) {
            return Err(Error::domain(
                "bias",
                format!("range-expansion bias must satisfy bias >= 1, got {}", self.bias),
            ));
        }
        self.macro_tier.validate(TierId::Macro)?;
        self.small.validate(TierId::Small)
    }

    pub fn path_loss(&self) -> Result<PathLoss> {
        PathLoss::new(self.alpha)
    }

    pub fn tier(&self, id: TierId) -> &TierParams {
        match id {
            TierId::Macro => &self.macro_tier,
            TierId::Small => &self.small,
        }
    }

    pub fn tier_mut(&mut self, id: TierId) -> &mut TierParams {
        match id {
            TierId::Macro => &mut self.macro_tier,
            TierId::Small => &mut self.small,
        }
    }

    /// Association bias of a tier: 1 for macro cells, `bias` for small cells.
    pub fn tier_bias(&self, id: TierId) -> f64 {
        match id {
            TierId::Macro => 1.0,
            TierId::Small => self.bias,
        }
    }

    /// Relative weight of the other tier as seen from `id`:
    /// `(λ_other/λ_own)·(P_other B_other / (P_own B_own))^{2/α}`.
    ///
    /// For the macro tier this is `(λ_s/λ_m)(P_s B/P_m)^{2/α}`; the small
    /// tier gets the reciprocal form.
    pub fn cross_weight(&self, id: TierId) -> f64 {
        let own = self.tier(id);
        let other = self.tier(id.other());
        let power_ratio = (other.power * self.tier_bias(id.other())) / (own.power * self.tier_bias(id));
        (other.density / own.density) * power_ratio.powf(2.0 / self.alpha)
    }

    /// Closed-form probability that the typical user is served by tier `id`.
    pub fn association_probability(&self, id: TierId) -> f64 {
        1.0 / (1.0 + self.cross_weight(id))
    }

    /// Copy with the antenna counts replaced; user counts are clamped so the
    /// copy stays valid.
    pub fn with_antennas(&self, m_macro: u32, m_small: u32) -> Self {
        let mut m = *self;
        m.macro_tier.antennas = m_macro;
        m.small.antennas = m_small;
        m.macro_tier.users = m.macro_tier.users.min(m_macro);
        m.small.users = m.small.users.min(m_small);
        m
    }

    pub fn with_users(&self, k_macro: u32, k_small: u32) -> Self {
        let mut m = *self;
        m.macro_tier.users = k_macro;
        m.small.users = k_small;
        m
    }

    pub fn with_bias(&self, bias: f64) -> Self {
        let mut m = *self;
        m.bias = bias;
        m
    }

    /// Sets `λ_s = ratio·λ_m`.
    pub fn with_density_ratio(&self, ratio: f64) -> Self {
        let mut m = *self;
        m.small.density = ratio * m.macro_tier.density;
        m
    }

    /// Sets `P_s = ratio·P_m`.
    pub fn with_power_ratio(&self, ratio: f64) -> Self {
        let mut m = *self;
        m.small.power = ratio * m.macro_tier.power;
        m
    }

    pub(crate) fn require_users(&self, id: TierId) -> Result<()> {
        if self.tier(id).users == 0 {
            return Err(Error::domain(
                format!("{id}.users"),
                "rate computations need at least one scheduled user (users >= 1)",
            ));
        }
        Ok(())
    }
}
