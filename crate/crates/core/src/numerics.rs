//! Adaptive quadrature on semi-infinite intervals and a guarded bisection
//! root finder.
//!
//! Every integral in this crate has the shape `∫_a^∞ f`, with `f` smooth and
//! decaying like a power law. The half line is split into a finite panel
//! `[a, a + s]` and a tail `[a + s, ∞)`; the tail is pulled back onto `(0, 1]`
//! through `z = c·v^{-2}`, which turns a `z^{-3/2}` decay into a bounded
//! integrand and leaves slower decays with an integrable singularity at
//! `v = 0`, where floating point resolution is plentiful. Both pieces share
//! one globally adaptive Gauss–Kronrod (10, 21) subdivision.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Accuracy policy for the quadrature routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(Error::domain("rel_tol", format!("must be > 0, got {rel_tol}")));
        }
        if !(abs_tol >= 0.0 && abs_tol.is_finite()) {
            return Err(Error::domain("abs_tol", format!("must be >= 0, got {abs_tol}")));
        }
        if max_subdivisions < 1 {
            return Err(Error::domain("max_subdivisions", "must be >= 1"));
        }
        Ok(Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

/// Search interval and stopping rule for [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketSpec {
    pub lo: f64,
    pub hi: f64,
    pub x_tol: f64,
    pub max_iters: usize,
}

impl BracketSpec {
    pub fn new(lo: f64, hi: f64, x_tol: f64, max_iters: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::domain("bracket", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if x_tol.is_nan() || x_tol <= 0.0 {
            return Err(Error::domain("x_tol", format!("must be > 0, got {x_tol}")));
        }
        Ok(Self {
            lo,
            hi,
            x_tol,
            max_iters,
        })
    }
}

impl Default for BracketSpec {
    fn default() -> Self {
        Self {
            lo: 1e-6,
            hi: 1.0,
            x_tol: 1e-7,
            max_iters: 200,
        }
    }
}

// Gauss–Kronrod 21-point abscissae (descending, last is the centre) and
// weights; odd-indexed abscissae are the embedded 10-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_472_767,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Exponent of the tail map `z = c·v^{-TAIL_POWER}`.
const TAIL_POWER: f64 = 2.0;

struct Segment {
    piece: usize,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One Gauss–Kronrod 21 panel with a QUADPACK-style scaled error estimate.
fn gk21<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> Result<(f64, f64)> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64> {
        let v = g(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain("integrand", format!("non-finite value {v} at {x}")))
        }
    };

    let fc = eval(centre)?;
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(centre - dx)?;
        let f2 = eval(centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let res_k = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = (res_k - res_g * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((res_k, err))
}

/// Globally adaptive subdivision over several pieces, each integrated on its
/// own parameter interval by `g(piece, x)`.
fn adaptive<G: Fn(usize, f64) -> f64>(
    g: G,
    pieces: &[(f64, f64)],
    spec: &QuadratureSpec,
    context: &str,
) -> Result<f64> {
    let mut heap = BinaryHeap::with_capacity(spec.max_subdivisions + pieces.len());
    for (piece, &(a, b)) in pieces.iter().enumerate() {
        let (value, error) = gk21(&|x| g(piece, x), a, b)?;
        heap.push(Segment {
            piece,
            a,
            b,
            value,
            error,
        });
    }
    let mut subdivisions = pieces.len();
    loop {
        // Re-summing keeps the totals free of drift from repeated updates.
        let (total, total_err) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(total);
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::non_convergence(
                context,
                format!(
                    "{} subdivisions exhausted, error estimate {total_err:.3e} > tolerance {tol:.3e}",
                    spec.max_subdivisions
                ),
            ));
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::non_convergence(
                context,
                format!(
                    "segment [{:e}, {:e}] cannot be subdivided further, error estimate {total_err:.3e}",
                    worst.a, worst.b
                ),
            ));
        }
        let piece = worst.piece;
        let (v1, e1) = gk21(&|x| g(piece, x), worst.a, mid)?;
        let (v2, e2) = gk21(&|x| g(piece, x), mid, worst.b)?;
        heap.push(Segment {
            piece,
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            piece,
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
}

/// Integrates `f` over `[lower, ∞)`.
///
/// `f` must be continuous on `[lower, ∞)` and decay faster than `1/z`.
/// The returned value `I` satisfies `|I − exact| ≲ max(rel_tol·|I|, abs_tol)`
/// according to the embedded error estimate.
pub fn integrate_lower_to_inf<F: Fn(f64) -> f64>(f: F, lower: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(lower >= 0.0 && lower.is_finite()) {
        return Err(Error::domain("lower", format!("must be finite and >= 0, got {lower}")));
    }
    let scale = lower.max(1.0);
    let cut = lower + scale;
    let g = |piece: usize, x: f64| -> f64 {
        match piece {
            0 => f(lower + scale * x) * scale,
            _ => {
                // z = cut · v^{-p}, dz = cut · p · v^{-p-1} dv
                let z = cut * x.powf(-TAIL_POWER);
                if !z.is_finite() {
                    return 0.0;
                }
                f(z) * z * TAIL_POWER / x
            }
        }
    };
    adaptive(g, &[(0.0, 1.0), (0.0, 1.0)], spec, "semi-infinite quadrature")
}

/// Integrates `f` over `[0, ∞)`. The caller supplies the continuity-extended
/// value at `z = 0` when the closed form is `0/0` there.
pub fn integrate_zero_to_inf<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    integrate_lower_to_inf(f, 0.0, spec)
}

/// Integrates `f` over a finite interval `[a, b]`.
pub fn integrate_finite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("interval", format!("must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    adaptive(|_, x| f(x), &[(a, b)], spec, "finite quadrature")
}

/// Finds the root of a monotone `g` by bisection. `g` is fallible so that
/// quadrature-backed functions can propagate their errors.
pub fn bisect<G>(g: G, bracket: &BracketSpec) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let (lo, hi) = bisect_bracket(g, bracket)?;
    Ok(0.5 * (lo + hi))
}

/// Bisection returning the final bracket; `g` changes sign across it.
pub(crate) fn bisect_bracket<G>(mut g: G, bracket: &BracketSpec) -> Result<(f64, f64)>
where
    G: FnMut(f64) -> Result<f64>,
{
    let BracketSpec {
        mut lo,
        mut hi,
        x_tol,
        max_iters,
    } = *bracket;
    let mut g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_lo == 0.0 {
        return Ok((lo, lo));
    }
    if g_hi == 0.0 {
        return Ok((hi, hi));
    }
    if g_lo.signum() == g_hi.signum() || g_lo.is_nan() || g_hi.is_nan() {
        return Err(Error::BadBracket { lo, hi, g_lo, g_hi });
    }
    for _ in 0..max_iters {
        if hi - lo <= x_tol {
            return Ok((lo, hi));
        }
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid)?;
        if g_mid == 0.0 {
            return Ok((mid, mid));
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
        debug_assert!(g_lo.signum() != g_hi.signum());
    }
    if hi - lo <= x_tol {
        return Ok((lo, hi));
    }
    Err(Error::non_convergence(
        "bisection",
        format!(
            "bracket width {:e} > x_tol {x_tol:e} after {max_iters} iterations",
            hi - lo
        ),
    ))
}
