//! Young functions `Φ(t) = t^p log^λ₁(e + t)` and the Luxemburg gauge.

use std::f64::consts::E;

use crate::{Error, Result};

/// `Φ(t) = t^p · log^λ₁(e + t)` with `p > 1, λ₁ ∈ ℝ` or `p = 1, λ₁ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungPhi {
    p: f64,
    lambda1: f64,
}

impl YoungPhi {
    pub fn new(p: f64, lambda1: f64) -> Result<Self> {
        if !p.is_finite() || !lambda1.is_finite() {
            return Err(Error::InvalidParameter(
                "p and lambda1 must be finite".into(),
            ));
        }
        if p > 1.0 || (p == 1.0 && lambda1 >= 0.0) {
            Ok(Self { p, lambda1 })
        } else {
            Err(Error::InvalidParameter(format!(
                "need p > 1, or p = 1 with lambda1 >= 0; got p = {p}, lambda1 = {lambda1}"
            )))
        }
    }

    /// The pure power `t^p`.
    pub fn power(p: f64) -> Result<Self> {
        Self::new(p, 0.0)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// `Φ(t)`; negative arguments are rejected.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::NegativeArgument(t));
        }
        Ok(self.eval_abs(t))
    }

    /// `Φ(|t|)`.
    #[inline]
    pub fn eval_abs(&self, t: f64) -> f64 {
        let t = t.abs();
        if t == 0.0 {
            return 0.0;
        }
        let power = if self.p == 2.0 { t * t } else { t.powf(self.p) };
        if self.lambda1 == 0.0 {
            power
        } else {
            power * (E + t).ln().powf(self.lambda1)
        }
    }

    /// Sampled shape diagnostics of `Φ` on a positive increasing grid.
    pub fn diagnostics(&self, grid: &[f64], delta: f64) -> PhiDiagnostics {
        let phi = |t: f64| self.eval_abs(t);
        let convex = grid.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let mid = phi(0.5 * (a + b));
            mid <= 0.5 * (phi(a) + phi(b)) * (1.0 + 1e-12)
        });
        let doubling_sup = grid
            .iter()
            .filter(|&&t| phi(t) > 0.0)
            .map(|&t| phi(2.0 * t) / phi(t))
            .fold(0.0, f64::max);
        let low = (self.p - delta).max(1.0);
        let high = self.p + delta;
        // Scale k = 1; T is the smallest grid point past which both bounds hold.
        let mut threshold = None;
        for (i, &t) in grid.iter().enumerate().rev() {
            let ok = t.powf(low) <= phi(t) && phi(t) <= t.powf(high);
            if ok {
                threshold = Some(i);
            } else {
                break;
            }
        }
        PhiDiagnostics {
            convex,
            doubling_sup,
            sandwich: threshold.map(|i| Sandwich {
                delta,
                scale: 1.0,
                threshold: grid[i],
            }),
        }
    }
}

/// Outcome of [`YoungPhi::diagnostics`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhiDiagnostics {
    /// `Φ((a+b)/2) ≤ (Φ(a)+Φ(b))/2` on all consecutive grid pairs.
    pub convex: bool,
    /// `max_t Φ(2t)/Φ(t)` over the grid.
    pub doubling_sup: f64,
    /// Witness for `t^{max(p−δ,1)} ≤ Φ(kt)` and `Φ(t) ≤ (kt)^{p+δ}` for all
    /// grid `t ≥ T`, if one exists on the grid.
    pub sandwich: Option<Sandwich>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub delta: f64,
    pub scale: f64,
    pub threshold: f64,
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// A map `k ↦ ρ(k) ∈ [0, ∞]`, non-increasing on `(0, ∞)`.
pub trait Modular {
    fn value(&self, k: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Modular for F {
    fn value(&self, k: f64) -> f64 {
        self(k)
    }
}

const MAX_DOUBLINGS: usize = 200;

/// Default relative tolerance of the gauge bisection.
pub const GAUGE_TOL: f64 = 1e-10;

/// `inf{k > 0 : ρ(k) ≤ 1}`.
///
/// Brackets the crossing by doubling or halving from `k = 1`, then bisects
/// until the bracket is narrower than `tol` relative. The returned `k`
/// satisfies `ρ(k) ≤ 1`. Returns `0` for `ρ ≡ 0` and `+∞` when `ρ` is
/// infinite everywhere it was probed.
pub fn luxemburg_gauge<M: Modular + ?Sized>(rho: &M, tol: f64) -> Result<f64> {
    let check = |lo_k: f64, lo_v: f64, hi_k: f64, hi_v: f64| {
        if hi_v > lo_v * (1.0 + 1e-9) + 1e-300 {
            Err(Error::NonMonotoneModular(0.5 * (lo_k + hi_k)))
        } else {
            Ok(())
        }
    };

    let mut k = 1.0;
    let mut v = rho.value(k);
    if v.is_nan() {
        return Err(Error::InvalidParameter("modular evaluated to NaN".into()));
    }
    let (mut lo, mut lo_v, mut hi, mut hi_v);
    if v > 1.0 {
        let mut found = false;
        let (mut prev_k, mut prev_v) = (k, v);
        for _ in 0..MAX_DOUBLINGS {
            k *= 2.0;
            v = rho.value(k);
            check(prev_k, prev_v, k, v)?;
            if v <= 1.0 {
                found = true;
                break;
            }
            prev_k = k;
            prev_v = v;
        }
        if !found {
            if v.is_infinite() {
                return Ok(f64::INFINITY);
            }
            return Err(Error::GaugeBracket(MAX_DOUBLINGS));
        }
        hi = k;
        hi_v = v;
        lo = prev_k;
        lo_v = prev_v;
    } else {
        if v == 0.0 {
            // Zero at k = 1 forces ρ ≡ 0 for the modulars of interest; probe
            // downwards to be sure.
            let mut kk = 1.0;
            let mut all_zero = true;
            for _ in 0..MAX_DOUBLINGS {
                kk *= 0.5;
                if rho.value(kk) != 0.0 {
                    all_zero = false;
                    break;
                }
            }
            if all_zero {
                return Ok(0.0);
            }
        }
        let mut found = false;
        let (mut prev_k, mut prev_v) = (k, v);
        for _ in 0..MAX_DOUBLINGS {
            k *= 0.5;
            v = rho.value(k);
            check(k, v, prev_k, prev_v)?;
            if v > 1.0 {
                found = true;
                break;
            }
            prev_k = k;
            prev_v = v;
        }
        if !found {
            return Err(Error::GaugeBracket(MAX_DOUBLINGS));
        }
        lo = k;
        lo_v = v;
        hi = prev_k;
        hi_v = prev_v;
    }

    for _ in 0..200 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let mv = rho.value(mid);
        check(lo, lo_v, mid, mv)?;
        check(mid, mv, hi, hi_v)?;
        if mv <= 1.0 {
            hi = mid;
            hi_v = mv;
        } else {
            lo = mid;
            lo_v = mv;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissibility() {
        assert!(YoungPhi::new(1.0, 0.0).is_ok());
        assert!(YoungPhi::new(1.0, 1.0).is_ok());
        assert!(YoungPhi::new(1.0, -0.5).is_err());
        assert!(YoungPhi::new(0.5, 0.0).is_err());
        assert!(YoungPhi::new(1.5, -3.0).is_ok());
    }

    #[test]
    fn evaluation() {
        let sq = YoungPhi::power(2.0).unwrap();
        assert_eq!(sq.eval(0.0).unwrap(), 0.0);
        assert_eq!(sq.eval(3.0).unwrap(), 9.0);
        assert!(matches!(sq.eval(-1.0), Err(Error::NegativeArgument(_))));
        let log = YoungPhi::new(2.0, 1.0).unwrap();
        let t = E * E - E;
        // log(e + t) = 2 exactly by construction.
        assert!((log.eval(t).unwrap() - 2.0 * t * t).abs() < 1e-12);
        assert!((log.eval(t).unwrap() - 43.63).abs() < 0.01);
    }

    #[test]
    fn diagnostics_examples() {
        let grid = log_grid(1e-8, 1e8, 2001);
        let sq = YoungPhi::power(2.0).unwrap().diagnostics(&grid, 0.5);
        assert!(sq.convex);
        assert_eq!(sq.doubling_sup, 4.0);

        let dense = log_grid(1e-6, 1e6, 20001);
        let d = YoungPhi::new(1.0, 1.0).unwrap().diagnostics(&dense, 0.5);
        assert!(d.doubling_sup <= 4.0);
        assert!(d.convex);

        let neg = YoungPhi::new(2.0, -1.0).unwrap().diagnostics(&dense, 0.5);
        assert!(neg.convex);
        let s = neg.sandwich.expect("sandwich witness on the grid");
        assert!(s.threshold < 1e6);
    }

    #[test]
    fn gauge_of_power_modular() {
        let c = 3.7;
        let g = luxemburg_gauge(&|k: f64| (c / k).powi(2), GAUGE_TOL).unwrap();
        assert!((g - c).abs() < 1e-9);
    }

    #[test]
    fn gauge_of_zero_is_zero() {
        assert_eq!(luxemburg_gauge(&|_k: f64| 0.0, GAUGE_TOL).unwrap(), 0.0);
    }

    #[test]
    fn gauge_scaled_square() {
        let phi = YoungPhi::power(2.0).unwrap();
        let g = luxemburg_gauge(&|k: f64| 4.0 * phi.eval_abs(5.0 / k), GAUGE_TOL).unwrap();
        assert!((g - 10.0).abs() < 1e-8);
    }

    #[test]
    fn gauge_small_and_large_values() {
        for c in [1e-30, 1e-5, 1.0, 1e7, 1e40] {
            let g = luxemburg_gauge(&|k: f64| (c / k).powf(1.5), GAUGE_TOL).unwrap();
            assert!((g / c - 1.0).abs() < 1e-9, "c = {c}, gauge = {g}");
        }
    }

    #[test]
    fn gauge_detects_increasing_modular() {
        let err = luxemburg_gauge(&|k: f64| k, GAUGE_TOL).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneModular(_)));
    }

    #[test]
    fn gauge_infinite_modular() {
        let g = luxemburg_gauge(&|_k: f64| f64::INFINITY, GAUGE_TOL).unwrap();
        assert!(g.is_infinite());
    }

    #[test]
    fn gauge_never_below_one() {
        let err = luxemburg_gauge(&|k: f64| 2.0 + 1.0 / k, GAUGE_TOL).unwrap_err();
        assert!(matches!(err, Error::GaugeBracket(_)));
    }
}
