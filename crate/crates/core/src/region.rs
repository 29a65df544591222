//! Where does range expansion pay off? Each lattice point `(M_m, M_s)` is
//! optimized twice, once with the bias and once without, and the exact ASE
//! values are compared.

use std::collections::HashMap;
use std::fmt;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ase::{allocate, exhaustive_users, optimal_fractions, relaxed_ase, Rounding};
use crate::error::{Error, Result};
use crate::model::{NetworkModel, TierId};

pub const DEFAULT_EPSILON_TIE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Improve,
    Degrade,
    Tie,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Improve => "Improve",
            Verdict::Degrade => "Degrade",
            Verdict::Tie => "Tie",
        })
    }
}

/// Classifies a biased ASE against its unbiased baseline with a relative
/// dead band of `epsilon_tie`.
pub fn verdict(ase_biased: f64, ase_unbiased: f64, epsilon_tie: f64) -> Verdict {
    if ase_biased > ase_unbiased * (1.0 + epsilon_tie) {
        Verdict::Improve
    } else if ase_biased < ase_unbiased * (1.0 - epsilon_tie) {
        Verdict::Degrade
    } else {
        Verdict::Tie
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub m_macro: u32,
    pub m_small: u32,
    pub ase_biased: f64,
    pub ase_unbiased: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    /// Row-major in `m_macro`, then `m_small`.
    pub grid: Vec<RegionCell>,
    /// Densities, powers and path loss; antenna and user counts are
    /// overwritten per cell and the bias per side of the comparison.
    pub model_template: NetworkModel,
    pub bias: f64,
    pub epsilon_tie: f64,
}

impl RegionMap {
    pub fn get(&self, m_macro: u32, m_small: u32) -> Option<&RegionCell> {
        self.grid.iter().find(|c| c.m_macro == m_macro && c.m_small == m_small)
    }

    fn index(&self) -> HashMap<(u32, u32), Verdict> {
        self.grid.iter().map(|c| ((c.m_macro, c.m_small), c.verdict)).collect()
    }

    pub fn cells_with(&self, v: Verdict) -> impl Iterator<Item = &RegionCell> {
        self.grid.iter().filter(move |c| c.verdict == v)
    }

    /// Cells `(M_m, M_s)` classified Improve whose right neighbour
    /// `(M_m + 1, M_s)` is classified Degrade.
    pub fn frontier_violations(&self) -> Vec<(u32, u32)> {
        let idx = self.index();
        let mut out: Vec<(u32, u32)> = self
            .cells_with(Verdict::Improve)
            .filter(|c| idx.get(&(c.m_macro + 1, c.m_small)) == Some(&Verdict::Degrade))
            .map(|c| (c.m_macro, c.m_small))
            .collect();
        out.sort_unstable();
        out
    }
}

fn neighbours(m: u32, s: u32) -> impl Iterator<Item = (u32, u32)> {
    (-1i64..=1)
        .flat_map(move |dm| (-1i64..=1).map(move |ds| (dm, ds)))
        .filter(|&d| d != (0, 0))
        .filter_map(move |(dm, ds)| {
            let (mm, ms) = (i64::from(m) + dm, i64::from(s) + ds);
            (mm >= 0 && ms >= 0).then_some((mm as u32, ms as u32))
        })
}

/// Lattice points where the two maps disagree.
pub fn differing_cells(a: &RegionMap, b: &RegionMap) -> Vec<(u32, u32)> {
    let ib = b.index();
    a.grid
        .iter()
        .filter(|c| ib.get(&(c.m_macro, c.m_small)).is_some_and(|v| *v != c.verdict))
        .map(|c| (c.m_macro, c.m_small))
        .collect()
}

/// True when every disagreement between the maps can be explained by the
/// region boundary of `a` moving by one cell: the verdict `b` assigns to a
/// differing cell already occurs among that cell's neighbours in `a`.
pub fn within_boundary_band(a: &RegionMap, b: &RegionMap) -> bool {
    let (ia, ib) = (a.index(), b.index());
    differing_cells(a, b).into_iter().all(|(m, s)| {
        let target = ib[&(m, s)];
        neighbours(m, s).any(|n| ia.get(&n) == Some(&target))
    })
}

/// Improve cells of `inner` that are not Improve in `outer` and have no
/// Improve neighbour in `outer` either.
pub fn improve_containment_violations(outer: &RegionMap, inner: &RegionMap) -> Vec<(u32, u32)> {
    let io = outer.index();
    inner
        .cells_with(Verdict::Improve)
        .map(|c| (c.m_macro, c.m_small))
        .filter(|&(m, s)| {
            io.get(&(m, s)) != Some(&Verdict::Improve)
                && !neighbours(m, s).any(|n| io.get(&n) == Some(&Verdict::Improve))
        })
        .collect()
}

/// Wraps an error with the lattice point that raised it.
fn at_cell(m_macro: u32, m_small: u32) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonConvergence { context, detail } => Error::NonConvergence {
            context: format!("{context} at cell (M_m={m_macro}, M_s={m_small})"),
            detail,
        },
        Error::Domain { field, constraint } => Error::Domain {
            field: format!("{field} at cell (M_m={m_macro}, M_s={m_small})"),
            constraint,
        },
        other => other,
    }
}

fn check_antennas(m_macro: u32, m_small: u32) -> Result<()> {
    if m_macro < 1 || m_small < 1 {
        return Err(Error::domain(
            "antennas",
            format!("lattice points need M_m, M_s >= 1, got ({m_macro}, {m_small})"),
        ));
    }
    Ok(())
}

/// Optimal fractions for the biased and the baseline side, computed once per
/// sweep since they do not depend on antenna counts.
struct Comparison {
    biased: NetworkModel,
    baseline: NetworkModel,
    fractions_biased: (f64, f64),
    fractions_baseline: (f64, f64),
    epsilon_tie: f64,
}

impl Comparison {
    fn new(template: &NetworkModel, bias: f64, baseline_bias: f64, epsilon_tie: f64) -> Result<Self> {
        let template = template.with_users(1, 1);
        let biased = template.with_bias(bias);
        let baseline = template.with_bias(baseline_bias);
        biased.validate()?;
        baseline.validate()?;
        Ok(Self {
            fractions_biased: optimal_fractions(&biased)?,
            fractions_baseline: if bias == baseline_bias {
                optimal_fractions(&biased)?
            } else {
                optimal_fractions(&baseline)?
            },
            biased,
            baseline,
            epsilon_tie,
        })
    }

    fn cell(&self, m_macro: u32, m_small: u32) -> Result<RegionCell> {
        check_antennas(m_macro, m_small)?;
        let run = || -> Result<RegionCell> {
            let (bm, bs) = self.fractions_biased;
            let (um, us) = self.fractions_baseline;
            let ase_biased = allocate(&self.biased.with_antennas(m_macro, m_small), bm, bs, Rounding::Exact)?.ase_exact;
            let ase_unbiased =
                allocate(&self.baseline.with_antennas(m_macro, m_small), um, us, Rounding::Exact)?.ase_exact;
            Ok(RegionCell {
                m_macro,
                m_small,
                ase_biased,
                ase_unbiased,
                verdict: verdict(ase_biased, ase_unbiased, self.epsilon_tie),
            })
        };
        run().map_err(at_cell(m_macro, m_small))
    }
}

/// Compares optimized exact ASE at `bias` against `baseline_bias` for one
/// lattice point.
pub fn compare_biases(
    template: &NetworkModel,
    m_macro: u32,
    m_small: u32,
    bias: f64,
    baseline_bias: f64,
) -> Result<RegionCell> {
    Comparison::new(template, bias, baseline_bias, DEFAULT_EPSILON_TIE)?.cell(m_macro, m_small)
}

/// Classifies one lattice point: does `bias` beat no range expansion?
pub fn classify_cell(template: &NetworkModel, m_macro: u32, m_small: u32, bias: f64) -> Result<RegionCell> {
    compare_biases(template, m_macro, m_small, bias, 1.0)
}

/// Sweeps the lattice, handing each cell to `on_cell` in canonical order as
/// soon as its row is done. Cells within a row are evaluated in parallel.
pub fn sweep_region_with<F>(
    template: &NetworkModel,
    m_macro_range: RangeInclusive<u32>,
    m_small_range: RangeInclusive<u32>,
    bias: f64,
    mut on_cell: F,
) -> Result<RegionMap>
where
    F: FnMut(&RegionCell) -> Result<()>,
{
    if m_macro_range.is_empty() || m_small_range.is_empty() {
        return Err(Error::domain("range", "antenna ranges must be nonempty"));
    }
    let cmp = Comparison::new(template, bias, 1.0, DEFAULT_EPSILON_TIE)?;
    let smalls: Vec<u32> = m_small_range.collect();
    let mut grid = Vec::new();
    for m_macro in m_macro_range {
        let row = smalls
            .par_iter()
            .map(|&m_small| cmp.cell(m_macro, m_small))
            .collect::<Result<Vec<_>>>()?;
        for cell in row {
            on_cell(&cell)?;
            grid.push(cell);
        }
    }
    Ok(RegionMap {
        grid,
        model_template: *template,
        bias,
        epsilon_tie: DEFAULT_EPSILON_TIE,
    })
}

pub fn sweep_region(
    template: &NetworkModel,
    m_macro_range: RangeInclusive<u32>,
    m_small_range: RangeInclusive<u32>,
    bias: f64,
) -> Result<RegionMap> {
    sweep_region_with(template, m_macro_range, m_small_range, bias, |_| Ok(()))
}

/// Which antenna count a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[serde(rename = "mm")]
    MacroAntennas,
    #[serde(rename = "ms")]
    SmallAntennas,
}

impl Axis {
    pub fn tier(self) -> TierId {
        match self {
            Axis::MacroAntennas => TierId::Macro,
            Axis::SmallAntennas => TierId::Small,
        }
    }
}

/// One point of an ASE-versus-antennas sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub antennas: u32,
    pub m_macro: u32,
    pub m_small: u32,
    pub bias: f64,
    pub k_macro: u32,
    pub k_small: u32,
    pub ase_exact: f64,
    pub ase_approx: f64,
    /// Approximate ASE of the unrounded optimum, `K_l = u_l* (M_l + 1)`.
    pub ase_relaxed: f64,
    /// Filled when the sweep also scans every user pair exhaustively.
    pub exhaustive_k_macro: Option<u32>,
    pub exhaustive_k_small: Option<u32>,
    pub exhaustive_ase_exact: Option<f64>,
}

/// Optimized ASE along one antenna axis for each bias. The other tier keeps
/// the antenna count of `template`. Rows are ordered by bias, then antennas.
pub fn sweep_ase_with<F>(
    template: &NetworkModel,
    axis: Axis,
    range: RangeInclusive<u32>,
    biases: &[f64],
    exhaustive: bool,
    mut on_row: F,
) -> Result<Vec<SweepRow>>
where
    F: FnMut(&SweepRow) -> Result<()>,
{
    if range.is_empty() || biases.is_empty() {
        return Err(Error::domain("range", "sweep range and bias list must be nonempty"));
    }
    let antennas: Vec<u32> = range.collect();
    if antennas[0] < 1 {
        return Err(Error::domain("range", "antenna counts start at 1"));
    }
    let mut rows = Vec::new();
    for &bias in biases {
        let model = template.with_users(1, 1).with_bias(bias);
        model.validate()?;
        let (u_m, u_s) = optimal_fractions(&model)?;
        let batch = antennas
            .par_iter()
            .map(|&m| {
                let (m_macro, m_small) = match axis {
                    Axis::MacroAntennas => (m, model.small.antennas),
                    Axis::SmallAntennas => (model.macro_tier.antennas, m),
                };
                let point = model.with_antennas(m_macro, m_small);
                let run = || -> Result<SweepRow> {
                    let a = allocate(&point, u_m, u_s, Rounding::Exact)?;
                    let ex = if exhaustive {
                        Some(exhaustive_users(&point)?)
                    } else {
                        None
                    };
                    Ok(SweepRow {
                        axis,
                        antennas: m,
                        m_macro,
                        m_small,
                        bias,
                        k_macro: a.k_macro,
                        k_small: a.k_small,
                        ase_exact: a.ase_exact,
                        ase_approx: a.ase_approx,
                        ase_relaxed: relaxed_ase(&point, u_m, u_s)?,
                        exhaustive_k_macro: ex.map(|e| e.k_macro),
                        exhaustive_k_small: ex.map(|e| e.k_small),
                        exhaustive_ase_exact: ex.map(|e| e.ase_exact),
                    })
                };
                run().map_err(at_cell(m_macro, m_small))
            })
            .collect::<Result<Vec<_>>>()?;
        for row in batch {
            on_row(&row)?;
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn sweep_ase(
    template: &NetworkModel,
    axis: Axis,
    range: RangeInclusive<u32>,
    biases: &[f64],
    exhaustive: bool,
) -> Result<Vec<SweepRow>> {
    sweep_ase_with(template, axis, range, biases, exhaustive, |_| Ok(()))
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}
