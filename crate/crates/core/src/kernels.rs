//! The interference kernels `F(x, y)` (Gamma-faded interferers) and `H(x)`
//! (interferer gains replaced by their means).
//!
//! ```text
//! F(x, y) = 1 + x^{2/α} ∫_{x^{-2/α}}^∞ (1 − (1 + u^{-α/2})^{-y}) du
//! H(x)    = 1 + x^{2/α} ∫_{x^{-2/α}}^∞ (1 − exp(−u^{-α/2})) du
//! ```
//!
//! Both are evaluated by generic quadrature. Results are memoized on the exact
//! bit patterns of their arguments, so the cache never changes a value.

use std::sync::OnceLock;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_lower_to_inf, QuadratureSpec};

/// Path-loss exponent, always `> 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PathLoss(f64);

impl PathLoss {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 2.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::domain(
                "alpha",
                format!("path-loss exponent must satisfy alpha > 2, got {alpha}"),
            ))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    /// `2/α`, the exponent that turns power ratios into area ratios.
    pub fn delta(self) -> f64 {
        2.0 / self.0
    }
}

impl TryFrom<f64> for PathLoss {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<PathLoss> for f64 {
    fn from(pl: PathLoss) -> f64 {
        pl.0
    }
}

/// Inner integrals are held an order of magnitude tighter than the outer
/// rate integrals so their noise does not drive outer subdivision.
pub(crate) const KERNEL_SPEC: QuadratureSpec = QuadratureSpec {
    rel_tol: 1e-10,
    abs_tol: 1e-14,
    max_subdivisions: 2000,
};

const CACHE_LIMIT: usize = 1 << 22;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    kind: u8,
    x: u64,
    y: u64,
    alpha: u64,
}

fn cache() -> &'static DashMap<Key, f64> {
    static CACHE: OnceLock<DashMap<Key, f64>> = OnceLock::new();
    CACHE.get_or_init(DashMap::new)
}

fn memoized(key: Key, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
    let cache = cache();
    if let Some(v) = cache.get(&key) {
        return Ok(*v);
    }
    let v = compute()?;
    if cache.len() >= CACHE_LIMIT {
        cache.clear();
    }
    cache.insert(key, v);
    Ok(v)
}

fn check_arg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// `1 + x^{2/α} ∫_{x^{-2/α}}^∞ tail(u) du`, with the `x → 0` limit of 1.
fn kernel_shape(x: f64, pl: PathLoss, tail: impl Fn(f64) -> f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(1.0);
    }
    let delta = pl.delta();
    let lower = x.powf(-delta);
    let inner = integrate_lower_to_inf(tail, lower, &KERNEL_SPEC)?;
    Ok(1.0 + x.powf(delta) * inner)
}

/// `F(x, y)`: interference kernel for interferers whose gains are
/// `Gamma(y, 1)`. `y` may be any non-negative real.
pub fn kernel_f(x: f64, y: f64, pl: PathLoss) -> Result<f64> {
    check_arg("x", x)?;
    check_arg("y", y)?;
    if x == 0.0 || y == 0.0 {
        return Ok(1.0);
    }
    let key = Key {
        kind: 0,
        x: x.to_bits(),
        y: y.to_bits(),
        alpha: pl.alpha().to_bits(),
    };
    memoized(key, || {
        let half_alpha = 0.5 * pl.alpha();
        // 1 − (1 + u^{-α/2})^{-y}
        kernel_shape(x, pl, |u| -(-y * u.powf(-half_alpha).ln_1p()).exp_m1())
    })
}

/// `H(x)`: interference kernel with every fading gain replaced by its mean.
pub fn kernel_h(x: f64, pl: PathLoss) -> Result<f64> {
    check_arg("x", x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    let key = Key {
        kind: 1,
        x: x.to_bits(),
        y: 0,
        alpha: pl.alpha().to_bits(),
    };
    memoized(key, || {
        let half_alpha = 0.5 * pl.alpha();
        // 1 − exp(−u^{-α/2})
        kernel_shape(x, pl, |u| -(-u.powf(-half_alpha)).exp_m1())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn a4() -> PathLoss {
        PathLoss::new(4.0).unwrap()
    }

    /// Composite trapezoid on a log grid for `∫_lo^hi g`, with `g(u)` assumed
    /// to behave like `c/u²` beyond `hi` (tail added analytically).
    fn oracle_tail_integral(g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let (s0, s1) = (lo.ln(), hi.ln());
        let h = (s1 - s0) / n as f64;
        let w = |s: f64| {
            let u = s.exp();
            g(u) * u
        };
        let mut acc = 0.5 * (w(s0) + w(s1));
        for i in 1..n {
            acc += w(s0 + i as f64 * h);
        }
        acc * h + g(hi) * hi
    }

    #[test]
    fn f_at_zero_argument_is_one() {
        assert_eq!(kernel_f(0.0, 3.0, a4()).unwrap(), 1.0);
    }

    #[test]
    fn f_with_zero_shape_is_one() {
        for x in [0.1, 1.0, 7.5, 1e6] {
            assert_eq!(kernel_f(x, 0.0, a4()).unwrap(), 1.0);
        }
    }

    #[test]
    fn f_unit_arguments_reduce_to_arctan() {
        // At y = 1, α = 4 the integrand is 1/(1 + u²) on [1, ∞).
        let v = kernel_f(1.0, 1.0, a4()).unwrap();
        assert!((v - (1.0 + FRAC_PI_4)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn h_at_zero_is_one() {
        assert_eq!(kernel_h(0.0, a4()).unwrap(), 1.0);
    }

    #[test]
    fn h_increases() {
        assert!(kernel_h(2.0, a4()).unwrap() > kernel_h(1.0, a4()).unwrap());
    }

    #[test]
    fn h_at_one_matches_trapezoid_oracle() {
        let g = |u: f64| -(-1.0 / (u * u)).exp_m1();
        let oracle = 1.0 + oracle_tail_integral(g, 1.0, 1e5, 400_000);
        let v = kernel_h(1.0, a4()).unwrap();
        assert!((v - oracle).abs() < 1e-8, "kernel {v} vs oracle {oracle}");
    }

    #[test]
    fn f_matches_trapezoid_oracle_off_grid() {
        let (x, y): (f64, f64) = (2.5, 3.0);
        let lo = x.powf(-0.5);
        let g = |u: f64| 1.0 - (1.0 + u.powi(-2)).powf(-y);
        let oracle = 1.0 + x.sqrt() * oracle_tail_integral(g, lo, 1e5, 400_000);
        let v = kernel_f(x, y, a4()).unwrap();
        assert!((v - oracle).abs() < 1e-7, "kernel {v} vs oracle {oracle}");
    }

    #[test]
    fn small_argument_asymptote() {
        // F(x, y) ≈ 1 + 2 y x / (α − 2) and H(x) ≈ 1 + 2 x / (α − 2) as x → 0.
        let pl = PathLoss::new(3.0).unwrap();
        let x = 1e-7;
        let f = kernel_f(x, 2.0, pl).unwrap();
        assert!(((f - 1.0) / (4.0 * x) - 1.0).abs() < 1e-3, "{f}");
        let h = kernel_h(x, pl).unwrap();
        assert!(((h - 1.0) / (2.0 * x) - 1.0).abs() < 1e-3, "{h}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(kernel_f(-1.0, 1.0, a4()).is_err());
        assert!(kernel_f(1.0, -1.0, a4()).is_err());
        assert!(kernel_f(f64::NAN, 1.0, a4()).is_err());
        assert!(kernel_h(f64::INFINITY, a4()).is_err());
        assert!(PathLoss::new(2.0).is_err());
        assert!(PathLoss::new(1.5).is_err());
    }

    #[test]
    fn cached_and_fresh_values_agree() {
        let pl = PathLoss::new(3.7).unwrap();
        let first = kernel_f(0.731, 2.0, pl).unwrap();
        let fresh = kernel_shape(0.731, pl, |u| -(-2.0 * u.powf(-1.85).ln_1p()).exp_m1()).unwrap();
        assert_eq!(first.to_bits(), fresh.to_bits());
        assert_eq!(kernel_f(0.731, 2.0, pl).unwrap().to_bits(), first.to_bits());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn kernels_at_least_one(x in 0.0f64..1e4, y in 0.0f64..12.0, alpha in 2.2f64..6.0) {
                let pl = PathLoss::new(alpha).unwrap();
                prop_assert!(kernel_f(x, y, pl).unwrap() >= 1.0);
                prop_assert!(kernel_h(x, pl).unwrap() >= 1.0);
            }

            #[test]
            fn f_nondecreasing(x in 1e-3f64..1e3, y in 0.5f64..10.0, dx in 0.01f64..2.0, dy in 0.01f64..2.0) {
                let pl = PathLoss::new(4.0).unwrap();
                let base = kernel_f(x, y, pl).unwrap();
                prop_assert!(kernel_f(x * (1.0 + dx), y, pl).unwrap() >= base);
                prop_assert!(kernel_f(x, y + dy, pl).unwrap() >= base);
            }

            #[test]
            fn f_continuous(x in 1e-2f64..1e2, y in 0.5f64..8.0) {
                let pl = PathLoss::new(4.0).unwrap();
                let a = kernel_f(x, y, pl).unwrap();
                let b = kernel_f(x * (1.0 + 1e-7), y, pl).unwrap();
                prop_assert!((a - b).abs() < 1e-5 * a);
            }
        }
    }

    #[test]
    fn h_strictly_increasing_on_log_grid() {
        for alpha in [2.5, 4.0, 5.5] {
            let pl = PathLoss::new(alpha).unwrap();
            let mut prev = kernel_h(0.0, pl).unwrap();
            for i in 0..60 {
                let x = 10f64.powf(-6.0 + 0.2 * i as f64);
                let h = kernel_h(x, pl).unwrap();
                assert!(h > prev, "alpha {alpha}: H({x}) = {h} <= {prev}");
                prev = h;
            }
        }
    }
}
