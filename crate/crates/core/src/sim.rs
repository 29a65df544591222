//! Monte Carlo oracle: Poisson deployments in a disk around a user at the
//! origin, biased association, Gamma effective gains, and the per-tier mean
//! of `ln(1 + SIR)`.
//!
//! Each replication draws from its own ChaCha stream selected by
//! `(seed, replication index)`, and replications are accumulated in fixed
//! blocks merged in index order, so estimates do not depend on the number of
//! worker threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkModel, TierId};

/// Minimum expected number of base stations of the sparsest tier.
pub const MIN_EXPECTED_POINTS: f64 = 500.0;
/// Bound on the interference lost outside the disk, relative to the mean
/// interference inside it.
pub const TRUNCATION_BOUND: f64 = 1e-3;
/// Tiers sparser than this fraction of the densest tier are exempt from
/// [`MIN_EXPECTED_POINTS`]; they are meant to be (almost) absent.
pub const NEGLIGIBLE_DENSITY: f64 = 1e-6;
/// Largest expected window population we are willing to sample.
pub const MAX_EXPECTED_POINTS: f64 = 1e7;
/// Highest tolerated fraction of replications without a usable window.
pub const MAX_EMPTY_FRACTION: f64 = 0.01;

const BLOCK: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub model: NetworkModel,
    pub disk_radius: f64,
    pub replications: u64,
    pub seed: u64,
}

/// Radius below which a typical user sees about one base station.
fn nearest_scale(model: &NetworkModel) -> f64 {
    1.0 / (PI * (model.macro_tier.density + model.small.density)).sqrt()
}

/// Mean interference from beyond `r` relative to that from the annulus
/// `[ρ, r]`, with `ρ` the nearest-neighbour scale. Both integrals share the
/// `r^{2−α}` power law so the tier weights cancel.
pub fn truncation_ratio(model: &NetworkModel, r: f64) -> f64 {
    let rho = nearest_scale(model);
    let e = 2.0 - model.alpha;
    let (inner, outer) = (rho.powf(e), r.powf(e));
    if outer >= inner {
        return f64::INFINITY;
    }
    outer / (inner - outer)
}

fn min_density(model: &NetworkModel) -> f64 {
    let (m, s) = (model.macro_tier.density, model.small.density);
    let max = m.max(s);
    [m, s]
        .into_iter()
        .filter(|&d| d >= NEGLIGIBLE_DENSITY * max)
        .fold(f64::INFINITY, f64::min)
}

fn expected_points(model: &NetworkModel, r: f64) -> f64 {
    (model.macro_tier.density + model.small.density) * PI * r * r
}

/// Smallest radius meeting both the population and the truncation bound.
pub fn auto_disk_radius(model: &NetworkModel) -> Result<f64> {
    model.validate()?;
    let by_count = (MIN_EXPECTED_POINTS / (PI * min_density(model))).sqrt();
    // Solve r^{2−α} = q ρ^{2−α} with q = bound/(1 + bound).
    let q = TRUNCATION_BOUND / (1.0 + TRUNCATION_BOUND);
    let by_tail = nearest_scale(model) * q.powf(1.0 / (2.0 - model.alpha)) * (1.0 + 1e-9);
    let r = by_count.max(by_tail);
    check_population(model, r)?;
    Ok(r)
}

fn check_population(model: &NetworkModel, r: f64) -> Result<()> {
    let n = expected_points(model, r);
    if n > MAX_EXPECTED_POINTS {
        return Err(Error::domain(
            "disk_radius",
            format!(
                "window would hold {n:.3e} base stations on average (limit {MAX_EXPECTED_POINTS:.0e}); \
                 alpha={} needs a very large disk to bound interference truncation",
                model.alpha
            ),
        ));
    }
    Ok(())
}

impl SimSpec {
    /// Builds a validated spec; `disk_radius = None` picks
    /// [`auto_disk_radius`].
    pub fn new(model: NetworkModel, disk_radius: Option<f64>, replications: u64, seed: u64) -> Result<Self> {
        let disk_radius = match disk_radius {
            Some(r) => r,
            None => auto_disk_radius(&model)?,
        };
        let spec = Self {
            model,
            disk_radius,
            replications,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.replications < 1 {
            return Err(Error::domain("replications", "must be >= 1"));
        }
        let r = self.disk_radius;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::domain("disk_radius", format!("must be finite and > 0, got {r}")));
        }
        let ratio = truncation_ratio(&self.model, r);
        if ratio >= TRUNCATION_BOUND {
            return Err(Error::domain(
                "disk_radius",
                format!(
                    "truncated interference ratio {ratio:.3e} must be < {TRUNCATION_BOUND:e}; \
                     radius {r} is too small (auto radius: {:?})",
                    auto_disk_radius(&self.model).ok()
                ),
            ));
        }
        check_population(&self.model, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub tier: TierId,
    pub mean_rate: f64,
    pub std_error: f64,
    pub n_effective: u64,
    pub association_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    #[serde(rename = "macro")]
    pub macro_estimate: SimEstimate,
    pub small: SimEstimate,
    /// Replications skipped because the window held no base station or only
    /// the serving one.
    pub empty_windows: u64,
    pub replications: u64,
    pub seed: u64,
    pub disk_radius: f64,
}

impl SimOutcome {
    pub fn estimate(&self, tier: TierId) -> &SimEstimate {
        match tier {
            TierId::Macro => &self.macro_estimate,
            TierId::Small => &self.small,
        }
    }
}

/// Base stations of one tier as seen from the origin. Only distances matter
/// to a user at the origin, so angles are never drawn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TierRealization {
    /// Squared distances, uniform placement in the disk.
    pub dist_sq: Vec<f64>,
    /// Interfering-link gains `h ~ Gamma(K, 1)`, one per base station.
    pub interference_gain: Vec<f64>,
    /// Serving-link gain `g ~ Gamma(M + 1 − K, 1)`, used if the user
    /// associates with this tier.
    pub desired_gain: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Realization {
    pub macro_tier: TierRealization,
    pub small: TierRealization,
}

impl Realization {
    pub fn tier(&self, id: TierId) -> &TierRealization {
        match id {
            TierId::Macro => &self.macro_tier,
            TierId::Small => &self.small,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.macro_tier.dist_sq.is_empty() && self.small.dist_sq.is_empty()
    }
}

fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only rejects non-positive or non-finite means.
    Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
}

fn gamma(shape: f64) -> Gamma<f64> {
    Gamma::new(shape, 1.0).expect("positive shape")
}

fn sample_positions(rng: &mut ChaCha8Rng, density: f64, radius: f64, out: &mut Vec<f64>) {
    let r2 = radius * radius;
    let n = poisson_count(rng, density * PI * r2);
    out.clear();
    out.extend((0..n).map(|_| r2 * rng.random::<f64>()));
}

fn sample_gains(rng: &mut ChaCha8Rng, users: u32, antennas: u32, tier: &mut TierRealization) {
    let n = tier.dist_sq.len();
    tier.interference_gain.clear();
    if users >= 1 {
        let h = gamma(f64::from(users));
        tier.interference_gain.extend((0..n).map(|_| h.sample(rng)));
        tier.desired_gain = gamma(f64::from(antennas + 1 - users)).sample(rng);
    } else {
        // An idle tier radiates nothing.
        tier.interference_gain.resize(n, 0.0);
        tier.desired_gain = 0.0;
    }
}

fn fill_realization(spec: &SimSpec, index: u64, out: &mut Realization) {
    let mut rng = replication_rng(spec.seed, index);
    let m = &spec.model;
    sample_positions(
        &mut rng,
        m.macro_tier.density,
        spec.disk_radius,
        &mut out.macro_tier.dist_sq,
    );
    sample_positions(&mut rng, m.small.density, spec.disk_radius, &mut out.small.dist_sq);
    sample_gains(&mut rng, m.macro_tier.users, m.macro_tier.antennas, &mut out.macro_tier);
    sample_gains(&mut rng, m.small.users, m.small.antennas, &mut out.small);
}

/// Draws the deployment and gains of one replication. Deterministic in
/// `(spec.seed, index)`.
pub fn sample_realization(spec: &SimSpec, index: u64) -> Realization {
    let mut r = Realization::default();
    fill_realization(spec, index, &mut r);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Association {
    pub tier: TierId,
    pub index: usize,
}

/// Nearest point of a tier among those within `cutoff_sq`; the lowest index
/// wins a distance tie.
fn nearest(dist_sq: &[f64], cutoff_sq: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &d) in dist_sq.iter().enumerate() {
        if d <= cutoff_sq && best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best
}

fn associate_within(r: &Realization, model: &NetworkModel, cutoff_sq: f64) -> Option<Association> {
    let half_alpha = 0.5 * model.alpha;
    let candidate = |id: TierId| {
        nearest(&r.tier(id).dist_sq, cutoff_sq).map(|(index, d)| {
            let metric = model.tier(id).power * model.tier_bias(id) * d.powf(-half_alpha);
            (Association { tier: id, index }, metric)
        })
    };
    match (candidate(TierId::Macro), candidate(TierId::Small)) {
        (None, None) => None,
        (Some((a, _)), None) | (None, Some((a, _))) => Some(a),
        // Macro is the lower tier in the tie-break order.
        (Some((m, pm)), Some((s, ps))) => Some(if ps > pm { s } else { m }),
    }
}

/// Serving base station: the maximizer of `P_l B_l ‖x‖^{−α}`. Ties go to the
/// macro tier, then to the lower index.
pub fn associate(realization: &Realization, model: &NetworkModel) -> Result<Association> {
    associate_within(realization, model, f64::INFINITY).ok_or(Error::EmptyWindow)
}

/// `d^{−α/2}` for squared distance `d`, with an integer fast path.
#[derive(Clone, Copy)]
struct PathGain {
    half_alpha: f64,
    int_exp: Option<i32>,
}

impl PathGain {
    fn new(alpha: f64) -> Self {
        let h = 0.5 * alpha;
        Self {
            half_alpha: h,
            int_exp: (h.fract() == 0.0 && h <= 16.0).then_some(h as i32),
        }
    }

    #[inline]
    fn at(self, d: f64) -> f64 {
        match self.int_exp {
            Some(k) => d.powi(-k),
            None => d.powf(-self.half_alpha),
        }
    }
}

/// SIR of the typical user using only base stations within `cutoff_sq`.
/// `None` if nothing is in range or there is no interferer.
fn sir_within(r: &Realization, model: &NetworkModel, cutoff_sq: f64, pg: PathGain) -> Option<(TierId, f64)> {
    let a = associate_within(r, model, cutoff_sq)?;
    let mut interference = 0.0;
    let mut interferers = 0usize;
    for id in TierId::BOTH {
        let t = r.tier(id);
        let params = model.tier(id);
        if params.users == 0 {
            continue;
        }
        let per_user = params.power / f64::from(params.users);
        let mut sum = 0.0;
        for (i, (&d, &h)) in t.dist_sq.iter().zip(&t.interference_gain).enumerate() {
            if d > cutoff_sq || (id == a.tier && i == a.index) {
                continue;
            }
            sum += h * pg.at(d);
            interferers += 1;
        }
        interference += per_user * sum;
    }
    if interferers == 0 || interference <= 0.0 {
        return None;
    }
    let serving = model.tier(a.tier);
    let d0 = r.tier(a.tier).dist_sq[a.index];
    let signal = serving.power / f64::from(serving.users) * r.tier(a.tier).desired_gain * pg.at(d0);
    Some((a.tier, signal / interference))
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64;
        self.n = n;
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    macro_rate: Moments,
    small_rate: Moments,
    empty: u64,
}

impl Tally {
    fn merge(&mut self, o: &Tally) {
        self.macro_rate.merge(&o.macro_rate);
        self.small_rate.merge(&o.small_rate);
        self.empty += o.empty;
    }
}

/// Runs every replication of `spec`, evaluating each realization at every
/// cutoff radius. Blocks run in parallel; merging is in block order.
fn run_blocks(spec: &SimSpec, cutoffs: &[f64]) -> Vec<Tally> {
    let pg = PathGain::new(spec.model.alpha);
    let cutoff_sq: Vec<f64> = cutoffs.iter().map(|c| c * c).collect();
    let blocks = spec.replications.div_ceil(BLOCK);
    let per_block: Vec<Vec<Tally>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut tallies = vec![Tally::default(); cutoffs.len()];
            let mut real = Realization::default();
            let end = ((b + 1) * BLOCK).min(spec.replications);
            for index in b * BLOCK..end {
                fill_realization(spec, index, &mut real);
                for (t, &c2) in tallies.iter_mut().zip(&cutoff_sq) {
                    match sir_within(&real, &spec.model, c2, pg) {
                        Some((TierId::Macro, sir)) => t.macro_rate.push(sir.ln_1p()),
                        Some((TierId::Small, sir)) => t.small_rate.push(sir.ln_1p()),
                        None => t.empty += 1,
                    }
                }
            }
            tallies
        })
        .collect();
    let mut total = vec![Tally::default(); cutoffs.len()];
    for block in &per_block {
        for (acc, t) in total.iter_mut().zip(block) {
            acc.merge(t);
        }
    }
    total
}

fn outcome(spec: &SimSpec, tally: &Tally, disk_radius: f64) -> Result<SimOutcome> {
    if tally.empty as f64 > MAX_EMPTY_FRACTION * spec.replications as f64 {
        return Err(Error::domain(
            "disk_radius",
            format!(
                "{} of {} replications had no usable window (limit {}%); enlarge the disk or the densities",
                tally.empty,
                spec.replications,
                MAX_EMPTY_FRACTION * 100.0
            ),
        ));
    }
    let used = (tally.macro_rate.n + tally.small_rate.n) as f64;
    let estimate = |tier, m: &Moments| SimEstimate {
        tier,
        mean_rate: m.mean,
        std_error: m.std_error(),
        n_effective: m.n,
        association_fraction: m.n as f64 / used,
    };
    Ok(SimOutcome {
        macro_estimate: estimate(TierId::Macro, &tally.macro_rate),
        small: estimate(TierId::Small, &tally.small_rate),
        empty_windows: tally.empty,
        replications: spec.replications,
        seed: spec.seed,
        disk_radius,
    })
}

fn check_users(model: &NetworkModel) -> Result<()> {
    model.require_users(TierId::Macro)?;
    model.require_users(TierId::Small)
}

/// Monte Carlo estimate of both tiers' mean rates, in nats.
pub fn simulate_rate(spec: &SimSpec) -> Result<SimOutcome> {
    spec.validate()?;
    check_users(&spec.model)?;
    let tally = run_blocks(spec, &[spec.disk_radius]);
    outcome(spec, &tally[0], spec.disk_radius)
}

/// Estimates at `disk_radius` and at twice that radius from the same
/// realizations: the large window is sampled and the small estimate keeps
/// only its inner disk, which is itself a Poisson window. The difference
/// isolates the effect of truncating interference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationAudit {
    pub inner: SimOutcome,
    pub outer: SimOutcome,
}

pub fn truncation_audit(spec: &SimSpec) -> Result<TruncationAudit> {
    spec.validate()?;
    check_users(&spec.model)?;
    let outer_spec = SimSpec {
        disk_radius: 2.0 * spec.disk_radius,
        ..*spec
    };
    outer_spec.validate()?;
    let t = run_blocks(&outer_spec, &[spec.disk_radius, outer_spec.disk_radius]);
    Ok(TruncationAudit {
        inner: outcome(spec, &t[0], spec.disk_radius)?,
        outer: outcome(&outer_spec, &t[1], outer_spec.disk_radius)?,
    })
}

/// Empirical association fractions `(macro, small)` and the number of empty
/// windows. Gains are not drawn, so this is much cheaper than
/// [`simulate_rate`].
pub fn association_fractions(spec: &SimSpec) -> Result<(f64, f64, u64)> {
    spec.validate()?;
    let blocks = spec.replications.div_ceil(BLOCK);
    let counts: Vec<(u64, u64, u64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut real = Realization::default();
            let mut c = (0, 0, 0);
            for index in b * BLOCK..((b + 1) * BLOCK).min(spec.replications) {
                let mut rng = replication_rng(spec.seed, index);
                sample_positions(
                    &mut rng,
                    spec.model.macro_tier.density,
                    spec.disk_radius,
                    &mut real.macro_tier.dist_sq,
                );
                sample_positions(
                    &mut rng,
                    spec.model.small.density,
                    spec.disk_radius,
                    &mut real.small.dist_sq,
                );
                match associate(&real, &spec.model) {
                    Ok(a) if a.tier == TierId::Macro => c.0 += 1,
                    Ok(_) => c.1 += 1,
                    Err(_) => c.2 += 1,
                }
            }
            c
        })
        .collect();
    let (m, s, e) = counts
        .into_iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    let n = (m + s) as f64;
    Ok((m as f64 / n, s as f64 / n, e))
}

/// `|estimate − reference| / std_error` against an exact reference.
pub fn z_score(estimate: f64, std_error: f64, reference: f64) -> f64 {
    (estimate - reference).abs() / std_error
}

/// Draws from a tier's effective-gain law; exposed for sampler checks.
pub fn sample_gamma(shape: f64, seed: u64, n: usize) -> Result<Vec<f64>> {
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::domain("shape", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| g.sample(&mut rng)).collect())
}
