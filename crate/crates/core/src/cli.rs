//! The `hetnet` command line: argument parsing, config merging, output.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage or configuration error,
//! 3 numerical non-convergence.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ase::{exhaustive_users, optimal_users_with, Allocation, ExhaustiveOptimum, Rounding};
use crate::error::{Error, Result};
use crate::model::{NetworkModel, TierId, TierParams};
use crate::rates::rate_report;
use crate::region::{sweep_ase_with, sweep_region_with, Axis, RegionCell, RegionMap, SweepRow, Verdict};
use crate::sim::{simulate_rate, z_score, SimOutcome, SimSpec};

/// Significant digits of every number the CLI emits.
pub const SIGNIFICANT_DIGITS: usize = 12;

const DEFAULT_REPLICATIONS: u64 = 200_000;
const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "hetnet",
    version,
    about = "Rates, user scheduling and range expansion in two-tier multi-antenna networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact and approximate per-tier average rates.
    Rates {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Optimal number of scheduled users per tier.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// How the relaxed optimum is rounded to user counts.
        #[arg(long, value_enum, default_value_t = RoundingArg::Exact)]
        rounding: RoundingArg,
        /// Also scan every (K_m, K_s) pair.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Map where range expansion improves or degrades the optimized ASE.
    Region {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Macro antenna range.
        #[arg(long, default_value = "1:20")]
        mm: Span,
        /// Small-cell antenna range.
        #[arg(long, default_value = "1:10")]
        ms: Span,
    },
    /// Optimized ASE along one antenna axis for a list of biases.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = AxisArg::Mm)]
        axis: AxisArg,
        #[arg(long, default_value = "1:20")]
        range: Span,
        /// Also scan every (K_m, K_s) pair at each point.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Monte Carlo estimate of both tiers' rates.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Compare Monte Carlo estimates with the exact rates at 3 sigma.
    Validate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON model file (or a simulation spec with a "model" field).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path: CSV for region/sweep, JSON otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Unit::Nats)]
    unit: Unit,
    /// Print JSON instead of tables.
    #[arg(long)]
    json: bool,
    /// Master seed for Monte Carlo commands.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    macro_density: Option<f64>,
    #[arg(long)]
    macro_power: Option<f64>,
    #[arg(long)]
    macro_antennas: Option<u32>,
    #[arg(long)]
    macro_users: Option<u32>,
    #[arg(long)]
    small_density: Option<f64>,
    #[arg(long)]
    small_power: Option<f64>,
    #[arg(long)]
    small_antennas: Option<u32>,
    #[arg(long)]
    small_users: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Range-expansion bias; a comma-separated list for region and sweep.
    #[arg(long, value_delimiter = ',')]
    bias: Vec<f64>,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Number of replications.
    #[arg(long)]
    reps: Option<u64>,
    /// Window radius, or "auto".
    #[arg(long)]
    disk_radius: Option<DiskRadius>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Unit {
    Nats,
    Bits,
}

impl Unit {
    fn scale(self) -> f64 {
        match self {
            Unit::Nats => 1.0,
            Unit::Bits => std::f64::consts::LOG2_E,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RoundingArg {
    Exact,
    Approx,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Mm,
    Ms,
}

/// Inclusive `lo:hi` range of antenna counts.
#[derive(Debug, Clone, Copy)]
struct Span {
    lo: u32,
    hi: u32,
}

impl FromStr for Span {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if lo < 1 || lo > hi {
            return Err(format!("need 1 <= lo <= hi, got {lo}:{hi}"));
        }
        Ok(Span { lo, hi })
    }
}

#[derive(Debug, Clone, Copy)]
enum DiskRadius {
    Auto,
    Fixed(f64),
}

impl FromStr for DiskRadius {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(DiskRadius::Auto);
        }
        s.parse::<f64>()
            .map(DiskRadius::Fixed)
            .map_err(|e| format!("expected a radius or \"auto\", got {s:?}: {e}"))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialTier {
    density: Option<f64>,
    power: Option<f64>,
    antennas: Option<u32>,
    users: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialModel {
    #[serde(rename = "macro", default)]
    macro_tier: PartialTier,
    #[serde(default)]
    small: PartialTier,
    alpha: Option<f64>,
    bias: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialSimSpec {
    model: PartialModel,
    disk_radius: Option<f64>,
    replications: Option<u64>,
    seed: Option<u64>,
}

fn load_config(path: Option<&Path>) -> Result<PartialSimSpec> {
    let Some(path) = path else {
        return Ok(PartialSimSpec::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let parsed = if value.get("model").is_some() {
        serde_json::from_value::<PartialSimSpec>(value)
    } else {
        serde_json::from_value::<PartialModel>(value).map(|model| PartialSimSpec {
            model,
            ..Default::default()
        })
    };
    parsed.map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))
}

/// Which model fields may fall back to a placeholder because the command
/// overwrites them anyway.
#[derive(Clone, Copy)]
struct Placeholders {
    antennas: bool,
    users: bool,
}

const STRICT: Placeholders = Placeholders {
    antennas: false,
    users: false,
};

fn require<T>(value: Option<T>, field: &str, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Usage(format!("missing {field}: pass --{flag} or set it in --config")))
}

fn merge_tier(
    file: &PartialTier,
    tier: TierId,
    flags: [Option<f64>; 2],
    counts: [Option<u32>; 2],
    ph: Placeholders,
) -> Result<TierParams> {
    let name = tier.to_string();
    let antennas = counts[0].or(file.antennas).or(ph.antennas.then_some(1));
    let users = counts[1].or(file.users).or(ph.users.then_some(1));
    Ok(TierParams::new(
        require(
            flags[0].or(file.density),
            &format!("{name}.density"),
            &format!("{name}-density"),
        )?,
        require(
            flags[1].or(file.power),
            &format!("{name}.power"),
            &format!("{name}-power"),
        )?,
        require(antennas, &format!("{name}.antennas"), &format!("{name}-antennas"))?,
        require(users, &format!("{name}.users"), &format!("{name}-users"))?,
    ))
}

/// Flags override the file; the merged model is validated. Returns the
/// model and the bias list (the model's own bias if none was passed).
fn merge_model(file: &PartialModel, flags: &ModelArgs, ph: Placeholders) -> Result<(NetworkModel, Vec<f64>)> {
    let macro_tier = merge_tier(
        &file.macro_tier,
        TierId::Macro,
        [flags.macro_density, flags.macro_power],
        [flags.macro_antennas, flags.macro_users],
        ph,
    )?;
    let small = merge_tier(
        &file.small,
        TierId::Small,
        [flags.small_density, flags.small_power],
        [flags.small_antennas, flags.small_users],
        ph,
    )?;
    let alpha = require(flags.alpha.or(file.alpha), "alpha", "alpha")?;
    let biases = if flags.bias.is_empty() {
        vec![file.bias.unwrap_or(1.0)]
    } else {
        flags.bias.clone()
    };
    let model = NetworkModel {
        macro_tier,
        small,
        alpha,
        bias: biases[0],
    };
    model.validate()?;
    for &b in &biases {
        model.with_bias(b).validate()?;
    }
    Ok((model, biases))
}

fn single_model(file: &PartialModel, flags: &ModelArgs) -> Result<NetworkModel> {
    if flags.bias.len() > 1 {
        return Err(Error::Usage("--bias takes a single value for this command".into()));
    }
    Ok(merge_model(file, flags, STRICT)?.0)
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = Value::from(round_sig(x, SIGNIFICANT_DIGITS));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes a result with every float rounded. Echoed inputs are attached
/// unrounded so they can be fed back verbatim.
fn report<T: Serialize>(result: &T, model: Option<&NetworkModel>) -> Result<Value> {
    let mut v = serde_json::to_value(result)?;
    round_value(&mut v);
    if let (Some(m), Value::Object(map)) = (model, &mut v) {
        map.insert("model".into(), serde_json::to_value(m)?);
    }
    Ok(v)
}

fn num(v: &Value) -> String {
    match v {
        Value::Number(n) => n.to_string(),
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn write_json_file(path: &Path, v: &Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, v)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// A finished command: one result structure and its table renderer.
struct Rendered {
    value: Value,
    human: fn(&Value) -> String,
    json: bool,
}

impl Rendered {
    fn emit(&self, out: &mut dyn Write) -> Result<()> {
        if self.json {
            serde_json::to_writer_pretty(&mut *out, &self.value)?;
            writeln!(out)?;
        } else {
            write!(out, "{}", (self.human)(&self.value))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct RateRow {
    tier: TierId,
    exact: f64,
    approx: f64,
    relative_error: f64,
    association_probability: f64,
}

#[derive(Serialize)]
struct RatesResult {
    unit: Unit,
    rates: Vec<RateRow>,
}

fn cmd_rates(model: &NetworkModel, unit: Unit) -> Result<Value> {
    let s = unit.scale();
    let rates = TierId::BOTH
        .iter()
        .map(|&tier| {
            let r = rate_report(model, tier)?;
            Ok(RateRow {
                tier,
                exact: r.exact * s,
                approx: r.approx * s,
                relative_error: (r.approx - r.exact) / r.exact,
                association_probability: model.association_probability(tier),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    report(&RatesResult { unit, rates }, Some(model))
}

fn human_rates(v: &Value) -> String {
    let unit = v["unit"].as_str().unwrap_or("nats");
    let mut s = format!(
        "{:<6} {:>20} {:>20} {:>16} {:>12}\n",
        "tier",
        format!("exact [{unit}]"),
        format!("approx [{unit}]"),
        "rel. error",
        "P(assoc)"
    );
    for r in v["rates"].as_array().into_iter().flatten() {
        let _ = writeln!(
            s,
            "{:<6} {:>20} {:>20} {:>16} {:>12}",
            num(&r["tier"]),
            num(&r["exact"]),
            num(&r["approx"]),
            num(&r["relative_error"]),
            num(&r["association_probability"])
        );
    }
    s
}

#[derive(Serialize)]
struct OptimizeResult {
    unit: Unit,
    rounding: Rounding,
    allocation: Allocation,
    exhaustive: Option<ExhaustiveOptimum>,
}

fn cmd_optimize(model: &NetworkModel, unit: Unit, rounding: Rounding, exhaustive: bool) -> Result<Value> {
    let s = unit.scale();
    let mut allocation = optimal_users_with(model, rounding)?;
    allocation.ase_exact *= s;
    allocation.ase_approx *= s;
    let exhaustive = if exhaustive {
        let mut e = exhaustive_users(model)?;
        e.ase_exact *= s;
        Some(e)
    } else {
        None
    };
    report(
        &OptimizeResult {
            unit,
            rounding,
            allocation,
            exhaustive,
        },
        Some(model),
    )
}

fn human_optimize(v: &Value) -> String {
    let a = &v["allocation"];
    let unit = v["unit"].as_str().unwrap_or("nats");
    let mut s = format!(
        "u* macro {}  small {}\nK  macro {}  small {}  ({} rounding)\nASE exact {}  approx {}  [{unit}/s/Hz per unit area]\n",
        num(&a["u_macro"]),
        num(&a["u_small"]),
        num(&a["k_macro"]),
        num(&a["k_small"]),
        num(&v["rounding"]),
        num(&a["ase_exact"]),
        num(&a["ase_approx"]),
    );
    if let Some(e) = v.get("exhaustive").filter(|e| !e.is_null()) {
        let _ = writeln!(
            s,
            "exhaustive: K macro {}  small {}  ASE exact {}",
            num(&e["k_macro"]),
            num(&e["k_small"]),
            num(&e["ase_exact"])
        );
    }
    s
}

/// `--out` path for one of several biases: `map.csv` becomes
/// `map-bias4.csv`.
fn per_bias_path(path: &Path, bias: f64, many: bool) -> PathBuf {
    if !many {
        return path.to_path_buf();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-bias{bias}.{ext}"),
        None => format!("{stem}-bias{bias}"),
    };
    path.with_file_name(name)
}

fn csv_writer(path: Option<&Path>) -> Result<Option<csv::Writer<File>>> {
    path.map(|p| csv::Writer::from_path(p).map_err(csv_error)).transpose()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(io::Error::other(format!("{other:?}"))),
    }
}

fn rounded_cell(c: &RegionCell, scale: f64) -> RegionCell {
    RegionCell {
        ase_biased: round_sig(c.ase_biased * scale, SIGNIFICANT_DIGITS),
        ase_unbiased: round_sig(c.ase_unbiased * scale, SIGNIFICANT_DIGITS),
        ..*c
    }
}

fn rounded_row(r: &SweepRow, scale: f64) -> SweepRow {
    let f = |x: f64| round_sig(x * scale, SIGNIFICANT_DIGITS);
    SweepRow {
        bias: round_sig(r.bias, SIGNIFICANT_DIGITS),
        ase_exact: f(r.ase_exact),
        ase_approx: f(r.ase_approx),
        ase_relaxed: f(r.ase_relaxed),
        exhaustive_ase_exact: r.exhaustive_ase_exact.map(f),
        ..*r
    }
}

fn cmd_region(
    model: &NetworkModel,
    biases: &[f64],
    mm: Span,
    ms: Span,
    unit: Unit,
    out: Option<&Path>,
) -> Result<Value> {
    let mut maps = Vec::new();
    for &bias in biases {
        let path = out.map(|p| per_bias_path(p, bias, biases.len() > 1));
        let mut writer = csv_writer(path.as_deref())?;
        let map = sweep_region_with(model, mm.lo..=mm.hi, ms.lo..=ms.hi, bias, |cell| {
            if let Some(w) = writer.as_mut() {
                w.serialize(rounded_cell(cell, unit.scale())).map_err(csv_error)?;
                w.flush()?;
            }
            Ok(())
        })?;
        maps.push(RegionMap {
            grid: map.grid.iter().map(|c| rounded_cell(c, unit.scale())).collect(),
            ..map
        });
    }
    report(&maps, None)
}

fn human_region(v: &Value) -> String {
    let mut s = String::new();
    for map in v.as_array().into_iter().flatten() {
        let grid: Vec<RegionCell> = serde_json::from_value(map["grid"].clone()).unwrap_or_default();
        let count = |verdict| grid.iter().filter(|c| c.verdict == verdict).count();
        let _ = writeln!(
            s,
            "bias {}: {} improve, {} degrade, {} tie  (+ improve, - degrade, = tie)",
            num(&map["bias"]),
            count(Verdict::Improve),
            count(Verdict::Degrade),
            count(Verdict::Tie)
        );
        let mut smalls: Vec<u32> = grid.iter().map(|c| c.m_small).collect();
        smalls.sort_unstable();
        smalls.dedup();
        let _ = writeln!(
            s,
            "  M_m\\M_s {}",
            smalls.iter().map(|m| format!("{m:>3}")).collect::<String>()
        );
        let mut current = None;
        for c in &grid {
            if current != Some(c.m_macro) {
                if current.is_some() {
                    s.push('\n');
                }
                let _ = write!(s, "  {:>7} ", c.m_macro);
                current = Some(c.m_macro);
            }
            let mark = match c.verdict {
                Verdict::Improve => '+',
                Verdict::Degrade => '-',
                Verdict::Tie => '=',
            };
            let _ = write!(s, "{mark:>3}");
        }
        s.push_str("\n\n");
    }
    s
}

fn cmd_sweep(
    model: &NetworkModel,
    biases: &[f64],
    axis: Axis,
    range: Span,
    exhaustive: bool,
    unit: Unit,
    out: Option<&Path>,
) -> Result<Value> {
    let mut writer = csv_writer(out)?;
    let rows = sweep_ase_with(model, axis, range.lo..=range.hi, biases, exhaustive, |row| {
        if let Some(w) = writer.as_mut() {
            w.serialize(rounded_row(row, unit.scale())).map_err(csv_error)?;
            w.flush()?;
        }
        Ok(())
    })?;
    let rows: Vec<SweepRow> = rows.iter().map(|r| rounded_row(r, unit.scale())).collect();
    report(&rows, None)
}

fn human_sweep(v: &Value) -> String {
    let mut s = format!(
        "{:>6} {:>5} {:>5} {:>8} {:>4} {:>4} {:>18} {:>18} {:>10}\n",
        "axis", "M_m", "M_s", "bias", "K_m", "K_s", "ASE exact", "ASE approx", "exh. K"
    );
    for r in v.as_array().into_iter().flatten() {
        let exh = if r["exhaustive_k_macro"].is_null() {
            "-".to_string()
        } else {
            format!("({},{})", num(&r["exhaustive_k_macro"]), num(&r["exhaustive_k_small"]))
        };
        let _ = writeln!(
            s,
            "{:>6} {:>5} {:>5} {:>8} {:>4} {:>4} {:>18} {:>18} {:>10}",
            num(&r["axis"]),
            num(&r["m_macro"]),
            num(&r["m_small"]),
            num(&r["bias"]),
            num(&r["k_macro"]),
            num(&r["k_small"]),
            num(&r["ase_exact"]),
            num(&r["ase_approx"]),
            exh
        );
    }
    s
}

fn sim_spec(model: &NetworkModel, file: &PartialSimSpec, common: &Common, sim: &SimArgs) -> Result<SimSpec> {
    let radius = match sim.disk_radius {
        Some(DiskRadius::Auto) => None,
        Some(DiskRadius::Fixed(r)) => Some(r),
        None => file.disk_radius,
    };
    let reps = sim.reps.or(file.replications).unwrap_or(DEFAULT_REPLICATIONS);
    let seed = common.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    SimSpec::new(*model, radius, reps, seed)
}

fn scaled_outcome(o: &SimOutcome, scale: f64) -> SimOutcome {
    let mut o = *o;
    for e in [&mut o.macro_estimate, &mut o.small] {
        e.mean_rate *= scale;
        e.std_error *= scale;
    }
    o
}

#[derive(Serialize)]
struct SimulateResult {
    unit: Unit,
    spec: SimSpec,
    outcome: SimOutcome,
}

fn cmd_simulate(spec: &SimSpec, unit: Unit) -> Result<Value> {
    let outcome = scaled_outcome(&simulate_rate(spec)?, unit.scale());
    let mut v = report(
        &SimulateResult {
            unit,
            spec: *spec,
            outcome,
        },
        None,
    )?;
    v["spec"] = serde_json::to_value(spec)?;
    Ok(v)
}

fn human_simulate(v: &Value) -> String {
    let o = &v["outcome"];
    let unit = v["unit"].as_str().unwrap_or("nats");
    let mut s = format!(
        "{} replications, seed {}, disk radius {}, {} empty windows\n{:<6} {:>20} {:>16} {:>10} {:>14}\n",
        num(&o["replications"]),
        num(&o["seed"]),
        num(&o["disk_radius"]),
        num(&o["empty_windows"]),
        "tier",
        format!("mean [{unit}]"),
        "std. error",
        "n",
        "assoc. frac."
    );
    for tier in ["macro", "small"] {
        let e = &o[tier];
        let _ = writeln!(
            s,
            "{:<6} {:>20} {:>16} {:>10} {:>14}",
            tier,
            num(&e["mean_rate"]),
            num(&e["std_error"]),
            num(&e["n_effective"]),
            num(&e["association_fraction"])
        );
    }
    s
}

#[derive(Serialize)]
struct Check {
    tier: TierId,
    quantity: &'static str,
    estimate: f64,
    std_error: f64,
    reference: f64,
    z: f64,
    pass: bool,
}

#[derive(Serialize)]
struct ValidateResult {
    unit: Unit,
    spec: SimSpec,
    empty_windows: u64,
    checks: Vec<Check>,
    pass: bool,
}

fn cmd_validate(spec: &SimSpec, unit: Unit) -> Result<Value> {
    let model = &spec.model;
    let outcome = simulate_rate(spec)?;
    let used = (outcome.macro_estimate.n_effective + outcome.small.n_effective) as f64;
    let s = unit.scale();
    let mut checks = Vec::new();
    for tier in TierId::BOTH {
        let e = outcome.estimate(tier);
        let exact = crate::rates::rate_exact(model, tier)?;
        let z = z_score(e.mean_rate, e.std_error, exact);
        checks.push(Check {
            tier,
            quantity: "mean_rate",
            estimate: e.mean_rate * s,
            std_error: e.std_error * s,
            reference: exact * s,
            z,
            pass: z <= 3.0,
        });
        let p = model.association_probability(tier);
        let se = (p * (1.0 - p) / used).sqrt();
        let z = z_score(e.association_fraction, se, p);
        checks.push(Check {
            tier,
            quantity: "association_fraction",
            estimate: e.association_fraction,
            std_error: se,
            reference: p,
            z,
            pass: z <= 3.0,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    let mut v = report(
        &ValidateResult {
            unit,
            spec: *spec,
            empty_windows: outcome.empty_windows,
            checks,
            pass,
        },
        None,
    )?;
    v["spec"] = serde_json::to_value(spec)?;
    Ok(v)
}

fn human_validate(v: &Value) -> String {
    let mut s = format!(
        "{:<6} {:<21} {:>18} {:>14} {:>18} {:>8}  result\n",
        "tier", "quantity", "monte carlo", "std. error", "analytic", "|z|"
    );
    for c in v["checks"].as_array().into_iter().flatten() {
        let _ = writeln!(
            s,
            "{:<6} {:<21} {:>18} {:>14} {:>18} {:>8}  {}",
            num(&c["tier"]),
            num(&c["quantity"]),
            num(&c["estimate"]),
            num(&c["std_error"]),
            num(&c["reference"]),
            format!("{:.3}", c["z"].as_f64().unwrap_or(f64::NAN)),
            if c["pass"].as_bool() == Some(true) {
                "PASS"
            } else {
                "FAIL"
            }
        );
    }
    let _ = writeln!(
        s,
        "overall: {}",
        if v["pass"].as_bool() == Some(true) {
            "PASS"
        } else {
            "FAIL"
        }
    );
    s
}

fn execute(command: &Command) -> Result<Rendered> {
    let (common, flags) = match command {
        Command::Rates { common, model }
        | Command::Optimize { common, model, .. }
        | Command::Region { common, model, .. }
        | Command::Sweep { common, model, .. }
        | Command::Simulate { common, model, .. }
        | Command::Validate { common, model, .. } => (common, model),
    };
    let file = load_config(common.config.as_deref())?;
    let json = common.json;
    let unit = common.unit;
    // region/sweep write CSV to --out; every other command writes its JSON.
    let json_out = common.out.as_deref();
    let (value, human): (Value, fn(&Value) -> String) = match command {
        Command::Rates { .. } => (cmd_rates(&single_model(&file.model, flags)?, unit)?, human_rates),
        Command::Optimize {
            rounding, exhaustive, ..
        } => {
            let rounding = match rounding {
                RoundingArg::Exact => Rounding::Exact,
                RoundingArg::Approx => Rounding::Approximate,
            };
            let model = single_model(&file.model, flags)?;
            (cmd_optimize(&model, unit, rounding, *exhaustive)?, human_optimize)
        }
        Command::Region { mm, ms, .. } => {
            let ph = Placeholders {
                antennas: true,
                users: true,
            };
            let (model, biases) = merge_model(&file.model, flags, ph)?;
            let v = cmd_region(&model, &biases, *mm, *ms, unit, common.out.as_deref())?;
            return Ok(Rendered {
                value: v,
                human: human_region,
                json,
            });
        }
        Command::Sweep {
            axis,
            range,
            exhaustive,
            ..
        } => {
            let ph = Placeholders {
                antennas: false,
                users: true,
            };
            let (model, biases) = merge_model(&file.model, flags, ph)?;
            let axis = match axis {
                AxisArg::Mm => Axis::MacroAntennas,
                AxisArg::Ms => Axis::SmallAntennas,
            };
            let v = cmd_sweep(&model, &biases, axis, *range, *exhaustive, unit, common.out.as_deref())?;
            return Ok(Rendered {
                value: v,
                human: human_sweep,
                json,
            });
        }
        Command::Simulate { sim, .. } => {
            let model = single_model(&file.model, flags)?;
            (
                cmd_simulate(&sim_spec(&model, &file, common, sim)?, unit)?,
                human_simulate,
            )
        }
        Command::Validate { sim, .. } => {
            let model = single_model(&file.model, flags)?;
            (
                cmd_validate(&sim_spec(&model, &file, common, sim)?, unit)?,
                human_validate,
            )
        }
    };
    if let Some(path) = json_out {
        write_json_file(path, &value)?;
    }
    Ok(Rendered { value, human, json })
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain { .. } | Error::EmptyWindow => 1,
        Error::Usage(_) | Error::Io(_) | Error::Json(_) => 2,
        Error::NonConvergence { .. } | Error::BadBracket { .. } => 3,
    }
}

fn threads_of(command: &Command) -> Option<usize> {
    match command {
        Command::Rates { common, .. }
        | Command::Optimize { common, .. }
        | Command::Region { common, .. }
        | Command::Sweep { common, .. }
        | Command::Simulate { common, .. }
        | Command::Validate { common, .. } => common.threads,
    }
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match threads_of(&cli.command) {
        Some(0) => Err(Error::Usage("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {n} threads: {e}")))
            .and_then(|pool| pool.install(|| execute(&cli.command))),
        None => execute(&cli.command),
    }
    .and_then(|r| r.emit(out));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the CLI on the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    let (mut out, mut err) = (stdout.lock(), stderr.lock());
    run_with(argv, &mut out, &mut err)
}
