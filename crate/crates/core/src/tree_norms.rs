//! Functions on the truncated tree and their Orlicz-Sobolev norms.
//!
//! A [`TreeFunction`] stores values at the vertices of levels `0..=N` and is
//! interpreted as linear in `d_X`-arclength along every edge. On such an
//! edge the difference quotient is the minimal upper gradient, so the
//! infimum over upper gradients in the Orlicz-Sobolev norm is attained by
//! the per-edge difference quotients.

use std::io::{Read, Write};

use crate::boundary_norms::read_addressed_csv;
use crate::tree::{TreeParams, VertexAddress};
use crate::young::{luxemburg_gauge, YoungPhi};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeFunction {
    k: usize,
    levels: Vec<Vec<f64>>,
}

impl TreeFunction {
    /// `levels[n]` holds the `K^n` values of level `n`, for `n = 0..=N`.
    pub fn new(k: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "K must be at least 2, got {k}"
            )));
        }
        if levels.len() < 2 {
            return Err(Error::InvalidParameter(
                "a tree function needs depth >= 1".into(),
            ));
        }
        for (n, level) in levels.iter().enumerate() {
            if level.len() != k.pow(n as u32) {
                return Err(Error::InvalidParameter(format!(
                    "level {n} has {} values, expected {}",
                    level.len(),
                    k.pow(n as u32)
                )));
            }
            if level.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "non-finite value on level {n}"
                )));
            }
        }
        Ok(Self { k, levels })
    }

    pub fn constant(k: usize, depth: usize, c: f64) -> Result<Self> {
        Self::new(k, (0..=depth).map(|n| vec![c; k.pow(n as u32)]).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn value(&self, x: &VertexAddress) -> Result<f64> {
        x.validate(self.k, self.depth())?;
        Ok(self.levels[x.level()][x.index(self.k)])
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            k: self.k,
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|v| c * v).collect())
                .collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.k != other.k || self.depth() != other.depth() {
            return Err(Error::InvalidParameter("shape mismatch".into()));
        }
        Ok(Self {
            k: self.k,
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
                .collect(),
        })
    }

    fn check(&self, params: &TreeParams) -> Result<()> {
        if params.k() != self.k {
            return Err(Error::BranchingMismatch {
                expected: params.k(),
                found: self.k,
            });
        }
        Ok(())
    }

    /// Difference quotients `|F(y) − F(x)| / d_X(x, y)` on every edge.
    pub fn upper_gradient_edges(&self, params: &TreeParams) -> Result<EdgeGradients> {
        self.check(params)?;
        let k = self.k;
        let levels = (0..self.depth())
            .map(|n| {
                let len = params.edge_length_at(n);
                let upper = &self.levels[n];
                self.levels[n + 1]
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v - upper[i / k]).abs() / len)
                    .collect()
            })
            .collect();
        Ok(EdgeGradients { levels })
    }

    /// Quadrature points `(weight, |F(τ)|)` of `∫_X Φ(|F|/k) dμ_{λ₂}` so the
    /// modular at any `k` is `Σ weight · Φ(|F|/k)`.
    fn value_quadrature(&self, params: &TreeParams) -> Vec<(f64, f64)> {
        let eps = params.epsilon();
        let lambda2 = params.lambda2();
        let rule = params.rule();
        let span = -(-eps).exp_m1();
        let mut out = Vec::new();
        for n in 0..self.depth() {
            let top = n as f64;
            let upper = &self.levels[n];
            for (i, &fv) in self.levels[n + 1].iter().enumerate() {
                let fu = upper[i / self.k];
                if fu == 0.0 && fv == 0.0 {
                    continue;
                }
                let value_at = |tau: f64| {
                    let s = -(-eps * (tau - top)).exp_m1() / span;
                    fu + (fv - fu) * s
                };
                let mut pieces = vec![(top, top + 1.0)];
                if fu * fv < 0.0 {
                    // Split at the zero so each piece sees a smooth integrand.
                    let s0 = fu / (fu - fv);
                    let tau0 = top - (-s0 * span).ln_1p() / eps;
                    pieces = vec![(top, tau0), (tau0, top + 1.0)];
                }
                for (a, b) in pieces {
                    let half = 0.5 * (b - a);
                    let mid = 0.5 * (a + b);
                    for (x, w) in rule.nodes().iter().zip(rule.weights()) {
                        let tau = mid + half * x;
                        out.push((w * half * params.density(tau, lambda2), value_at(tau).abs()));
                    }
                }
            }
        }
        out
    }

    /// `∫_X Φ(|F|/k) dμ_{λ₂}` over the truncated tree.
    pub fn lphi_modular(&self, params: &TreeParams, phi: &YoungPhi, k: f64) -> Result<f64> {
        self.check(params)?;
        Ok(self
            .value_quadrature(params)
            .iter()
            .map(|(w, v)| w * phi.eval_abs(v / k))
            .sum())
    }

    /// `Σ_edges Φ(g/k) μ_{λ₂}(edge)` for the difference-quotient gradient.
    pub fn gradient_modular(&self, params: &TreeParams, phi: &YoungPhi, k: f64) -> Result<f64> {
        let g = self.upper_gradient_edges(params)?;
        Ok(g.weighted(params)
            .iter()
            .map(|(w, x)| w * phi.eval_abs(x / k))
            .sum())
    }

    /// `‖F‖_{L^Φ(X, μ_{λ₂})}`.
    pub fn lphi_norm(&self, params: &TreeParams, phi: &YoungPhi, tol: f64) -> Result<f64> {
        self.check(params)?;
        let q = self.value_quadrature(params);
        luxemburg_gauge(
            &|k: f64| q.iter().map(|(w, v)| w * phi.eval_abs(v / k)).sum::<f64>(),
            tol,
        )
    }

    /// `‖g_F‖_{L^Φ(X, μ_{λ₂})}` for the difference-quotient gradient.
    pub fn gradient_norm(&self, params: &TreeParams, phi: &YoungPhi, tol: f64) -> Result<f64> {
        let terms = self.upper_gradient_edges(params)?.weighted(params);
        luxemburg_gauge(
            &|k: f64| {
                terms
                    .iter()
                    .map(|(w, x)| w * phi.eval_abs(x / k))
                    .sum::<f64>()
            },
            tol,
        )
    }

    /// `‖F‖_{L^Φ} + ‖g_F‖_{L^Φ}` on `(X_N, μ_{λ₂})`.
    pub fn newtonian_norm(&self, params: &TreeParams, phi: &YoungPhi, tol: f64) -> Result<f64> {
        Ok(self.lphi_norm(params, phi, tol)? + self.gradient_norm(params, phi, tol)?)
    }

    /// `∫_γ g ds` along the geodesic between two vertices, which for the
    /// difference-quotient gradient is the sum of `|ΔF|` over its edges.
    pub fn geodesic_variation(&self, x: &VertexAddress, y: &VertexAddress) -> Result<f64> {
        x.validate(self.k, self.depth())?;
        y.validate(self.k, self.depth())?;
        let c = x.common_prefix_len(y);
        let climb = |v: &VertexAddress| -> f64 {
            (c..v.level())
                .map(|n| {
                    let lo = v.ancestor(n).index(self.k);
                    let hi = v.ancestor(n + 1).index(self.k);
                    (self.levels[n + 1][hi] - self.levels[n][lo]).abs()
                })
                .sum()
        };
        Ok(climb(x) + climb(y))
    }

    /// CSV with a `K,N` header row then one `address,value` row per vertex
    /// (the root's address is empty).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
        out.write_record(["K", "N"])?;
        out.write_record([self.k.to_string(), self.depth().to_string()])?;
        for (n, level) in self.levels.iter().enumerate() {
            for (i, v) in level.iter().enumerate() {
                let addr = VertexAddress::from_index(self.k, n, i);
                out.write_record([addr.to_digit_string(), format!("{v:e}")])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (k, depth, rows) = read_addressed_csv(r)?;
        let mut levels: Vec<Vec<f64>> = (0..=depth)
            .map(|n| vec![f64::NAN; k.pow(n as u32)])
            .collect();
        for (addr, v) in rows {
            addr.validate(k, depth)?;
            levels[addr.level()][addr.index(k)] = v;
        }
        Self::new(k, levels)
    }
}

/// Per-edge gradient constants; `level(n)[i]` belongs to the edge from level
/// `n` down to the `i`-th vertex of level `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGradients {
    levels: Vec<Vec<f64>>,
}

impl EdgeGradients {
    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(n, l)| l.iter().map(move |g| (n, *g)))
    }

    /// `(μ_{λ₂}(edge), g)` for every edge with nonzero gradient.
    fn weighted(&self, params: &TreeParams) -> Vec<(f64, f64)> {
        let masses: Vec<f64> = (0..self.depth())
            .map(|n| params.edge_measure(n, params.lambda2()))
            .collect();
        self.iter()
            .filter(|(_, g)| *g != 0.0)
            .map(|(n, g)| (masses[n], g))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::GAUGE_TOL;
    use std::f64::consts::LN_2;

    fn binary(depth: usize) -> TreeParams {
        TreeParams::new(2, LN_2, 2.0 * LN_2, 0.0, depth, 8).unwrap()
    }

    fn sample() -> TreeFunction {
        TreeFunction::new(
            2,
            vec![vec![0.25], vec![0.5, 0.0], vec![1.0, 0.0, 0.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn shape_validation() {
        assert!(TreeFunction::new(2, vec![vec![0.0], vec![0.0]]).is_err());
        assert!(TreeFunction::new(2, vec![vec![0.0]]).is_err());
    }

    #[test]
    fn gradients() {
        let t = binary(2);
        let g = sample().upper_gradient_edges(&t).unwrap();
        assert!((g.level(0)[0] - LN_2 / 2.0).abs() < 1e-15);
        let zero = TreeFunction::constant(2, 2, 3.0)
            .unwrap()
            .upper_gradient_edges(&t)
            .unwrap();
        assert!(zero.iter().all(|(_, g)| g == 0.0));
        let scaled = sample().scaled(-2.0).upper_gradient_edges(&t).unwrap();
        for ((_, a), (_, b)) in g.iter().zip(scaled.iter()) {
            assert!((b - 2.0 * a).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_modular_is_total_mass() {
        let t = binary(4);
        let phi = YoungPhi::power(3.0).unwrap();
        let f = TreeFunction::constant(2, 4, 1.5).unwrap();
        let got = f.lphi_modular(&t, &phi, 1.0).unwrap();
        let mass = t.truncated_mass(0.0);
        assert!((got - 1.5f64.powi(3) * mass).abs() < 1e-12);
        assert_eq!(
            TreeFunction::constant(2, 4, 0.0)
                .unwrap()
                .lphi_modular(&t, &phi, 1.0)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn gradient_modular_six_edges() {
        let t = binary(2);
        let phi = YoungPhi::power(2.0).unwrap();
        let f = sample();
        // Edge jumps: level 0→1: 1/4, 1/4; level 1→2: 1/2, 1/2, 0, 0.
        let l0 = t.edge_length(0).unwrap();
        let l1 = t.edge_length(1).unwrap();
        let m0 = t.edge_measure(0, 0.0);
        let m1 = t.edge_measure(1, 0.0);
        let expected = 2.0 * (0.25 / l0).powi(2) * m0 + 2.0 * (0.5 / l1).powi(2) * m1;
        let got = f.gradient_modular(&t, &phi, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn newtonian_norm_p2() {
        let t = binary(2);
        let phi = YoungPhi::power(2.0).unwrap();
        let f = sample();
        let expected = f.lphi_modular(&t, &phi, 1.0).unwrap().sqrt()
            + f.gradient_modular(&t, &phi, 1.0).unwrap().sqrt();
        let got = f.newtonian_norm(&t, &phi, GAUGE_TOL).unwrap();
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn geodesic_variation_bounds_differences() {
        let f = sample();
        let x = VertexAddress::new(vec![0, 0]);
        let y = VertexAddress::new(vec![1]);
        let v = f.geodesic_variation(&x, &y).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!((f.value(&x).unwrap() - f.value(&y).unwrap()).abs() <= v);
    }

    #[test]
    fn csv_roundtrip() {
        let f = sample();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(TreeFunction::read_csv(buf.as_slice()).unwrap(), f);
    }
}
