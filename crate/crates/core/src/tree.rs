//! Geometry and measure of the depth-`N` truncation of a regular `K`-ary tree.
//!
//! Positions along the tree are described by the level parameter `τ = |x|`,
//! the number of edges (each a unit interval) between the root and `x`. The
//! uniformizing metric has density `e^{-ετ}` in `τ` and the weighted measure
//! `μ_λ` has density `e^{-βτ}(τ + C)^λ`.

use std::fmt;

use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// A vertex of the tree, addressed by its base-`K` digit word from the root.
///
/// The empty word is the root; a word of length `n` is an `n`-level vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VertexAddress {
    digits: Vec<u32>,
}

impl VertexAddress {
    pub fn root() -> Self {
        Self { digits: Vec::new() }
    }

    pub fn new(digits: Vec<u32>) -> Self {
        Self { digits }
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn level(&self) -> usize {
        self.digits.len()
    }

    pub fn is_root(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn parent(&self) -> Option<Self> {
        if self.digits.is_empty() {
            return None;
        }
        let mut digits = self.digits.clone();
        digits.pop();
        Some(Self { digits })
    }

    pub fn child(&self, digit: u32) -> Self {
        let mut digits = Vec::with_capacity(self.digits.len() + 1);
        digits.extend_from_slice(&self.digits);
        digits.push(digit);
        Self { digits }
    }

    /// The ancestor at `level` (the prefix of that length).
    pub fn ancestor(&self, level: usize) -> Self {
        Self {
            digits: self.digits[..level.min(self.digits.len())].to_vec(),
        }
    }

    /// Length of the longest common prefix with `other`.
    pub fn common_prefix_len(&self, other: &Self) -> usize {
        self.digits
            .iter()
            .zip(&other.digits)
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// True when `self` lies on the geodesic from the root to `other`
    /// (inclusive of `other` itself).
    pub fn is_ancestor_of(&self, other: &Self) -> bool {
        other.digits.starts_with(&self.digits)
    }

    /// Position of this vertex among the `K^n` vertices of its level, in
    /// lexicographic digit order.
    pub fn index(&self, k: usize) -> usize {
        self.digits
            .iter()
            .fold(0usize, |acc, &d| acc * k + d as usize)
    }

    pub fn from_index(k: usize, level: usize, mut index: usize) -> Self {
        let mut digits = vec![0u32; level];
        for slot in digits.iter_mut().rev() {
            *slot = (index % k) as u32;
            index /= k;
        }
        Self { digits }
    }

    pub fn validate(&self, k: usize, depth: usize) -> Result<()> {
        if self.level() > depth {
            return Err(Error::LevelOutOfRange {
                level: self.level(),
                depth,
            });
        }
        if let Some(d) = self.digits.iter().find(|&&d| d as usize >= k) {
            return Err(Error::InvalidAddress(format!(
                "digit {d} not below branching factor {k}"
            )));
        }
        Ok(())
    }

    /// Digit string in base `K` (digits `0-9a-z`); the root is the empty string.
    pub fn to_digit_string(&self) -> String {
        self.digits
            .iter()
            .map(|&d| std::char::from_digit(d, 36).expect("digit below 36"))
            .collect()
    }

    pub fn parse(s: &str, k: usize) -> Result<Self> {
        if !(2..=36).contains(&k) {
            return Err(Error::InvalidParameter(format!(
                "digit strings need 2 <= K <= 36, got {k}"
            )));
        }
        let digits = s
            .trim()
            .chars()
            .map(|c| match c.to_digit(36) {
                Some(d) if (d as usize) < k => Ok(d),
                _ => Err(Error::InvalidAddress(format!(
                    "`{s}` is not a base-{k} word"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { digits })
    }
}

impl fmt::Display for VertexAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            write!(f, "root")
        } else {
            write!(f, "{}", self.to_digit_string())
        }
    }
}

/// A point of the metric tree: it lies on the edge joining `vertex` to its
/// parent, at level parameter `tau ∈ [|vertex| - 1, |vertex|]`. The root is
/// `(root, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePoint {
    vertex: VertexAddress,
    tau: f64,
}

impl TreePoint {
    pub fn at_vertex(vertex: VertexAddress) -> Self {
        let tau = vertex.level() as f64;
        Self { vertex, tau }
    }

    /// Point on the edge above `vertex`, `fraction ∈ [0, 1]` of the way down
    /// in the level parameter.
    pub fn on_edge(vertex: VertexAddress, fraction: f64) -> Result<Self> {
        if vertex.is_root() {
            return Err(Error::InvalidAddress("the root has no parent edge".into()));
        }
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!(
                "edge fraction {fraction} outside [0, 1]"
            )));
        }
        let tau = vertex.level() as f64 - 1.0 + fraction;
        Ok(Self { vertex, tau })
    }

    pub fn vertex(&self) -> &VertexAddress {
        &self.vertex
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Geometry and measure parameters of the truncated tree.
#[derive(Debug, Clone)]
pub struct TreeParams {
    k: usize,
    epsilon: f64,
    beta: f64,
    lambda2: f64,
    c_const: f64,
    depth: usize,
    rule: GaussLegendre,
}

impl TreeParams {
    pub const DEFAULT_QUAD_ORDER: usize = 8;

    /// Validates the raw parameters and sets `C` to its minimal admissible
    /// value `max{2|λ₂|/(β − log K), 2 log 4 / ε}`.
    pub fn new(
        k: usize,
        epsilon: f64,
        beta: f64,
        lambda2: f64,
        depth: usize,
        quad_order: usize,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "branching factor K must be at least 2, got {k}"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let log_k = (k as f64).ln();
        if !(beta > log_k && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must exceed log K = {log_k}, got {beta}"
            )));
        }
        if !lambda2.is_finite() {
            return Err(Error::InvalidParameter("lambda2 must be finite".into()));
        }
        if depth < 1 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        if quad_order < 2 {
            return Err(Error::InvalidParameter(format!(
                "quadrature order must be at least 2, got {quad_order}"
            )));
        }
        Ok(Self {
            k,
            epsilon,
            beta,
            lambda2,
            c_const: Self::min_c_const(k, epsilon, beta, lambda2),
            depth,
            rule: GaussLegendre::new(quad_order),
        })
    }

    pub fn min_c_const(k: usize, epsilon: f64, beta: f64, lambda2: f64) -> f64 {
        let gap = beta - (k as f64).ln();
        (2.0 * lambda2.abs() / gap).max(2.0 * 4f64.ln() / epsilon)
    }

    /// Replaces `C` by a larger value; values below the admissible minimum
    /// are rejected.
    pub fn with_c_const(mut self, c: f64) -> Result<Self> {
        let min = Self::min_c_const(self.k, self.epsilon, self.beta, self.lambda2);
        if !(c >= min && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "C must be at least {min}, got {c}"
            )));
        }
        self.c_const = c;
        Ok(self)
    }

    pub fn with_depth(&self, depth: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        let mut out = self.clone();
        out.depth = depth;
        Ok(out)
    }

    pub fn with_quad_order(&self, quad_order: usize) -> Result<Self> {
        if quad_order < 2 {
            return Err(Error::InvalidParameter(format!(
                "quadrature order must be at least 2, got {quad_order}"
            )));
        }
        let mut out = self.clone();
        out.rule = GaussLegendre::new(quad_order);
        Ok(out)
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    pub fn c_const(&self) -> f64 {
        self.c_const
    }
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn quad_order(&self) -> usize {
        self.rule.order()
    }
    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    /// Hausdorff dimension `Q = log K / ε` of the boundary.
    pub fn dimension(&self) -> f64 {
        (self.k as f64).ln() / self.epsilon
    }

    /// The codimension `(β − log K)/ε`.
    pub fn codimension(&self) -> f64 {
        (self.beta - (self.k as f64).ln()) / self.epsilon
    }

    /// Smoothness of the trace space for exponent `p`: `1 − (β − log K)/(εp)`.
    pub fn theta(&self, p: f64) -> f64 {
        1.0 - self.codimension() / p
    }

    /// Number of vertices at `level`.
    pub fn level_size(&self, level: usize) -> usize {
        self.k.pow(level as u32)
    }

    /// Metric length from the root to level parameter `tau`:
    /// `∫_0^τ e^{-εs} ds`.
    pub fn arclength(&self, tau: f64) -> f64 {
        -(-self.epsilon * tau).exp_m1() / self.epsilon
    }

    /// Inverse of [`arclength`](Self::arclength); `+∞` past the boundary.
    pub fn inverse_arclength(&self, a: f64) -> f64 {
        let arg = self.epsilon * a;
        if arg >= 1.0 {
            f64::INFINITY
        } else {
            -(-arg).ln_1p() / self.epsilon
        }
    }

    /// Metric length of an edge between levels `n` and `n + 1`.
    pub fn edge_length(&self, n: usize) -> Result<f64> {
        if n >= self.depth {
            return Err(Error::LevelOutOfRange {
                level: n,
                depth: self.depth,
            });
        }
        Ok(self.edge_length_at(n))
    }

    pub(crate) fn edge_length_at(&self, n: usize) -> f64 {
        -(-self.epsilon).exp_m1() / self.epsilon * (-self.epsilon * n as f64).exp()
    }

    /// Length of the geodesic between two vertices.
    pub fn vertex_distance(&self, x: &VertexAddress, y: &VertexAddress) -> Result<f64> {
        x.validate(self.k, self.depth)?;
        y.validate(self.k, self.depth)?;
        let c = x.common_prefix_len(y) as f64;
        let up = self.arclength(x.level() as f64) - self.arclength(c);
        let down = self.arclength(y.level() as f64) - self.arclength(c);
        Ok(up + down)
    }

    /// Length of the geodesic between two points of the tree.
    pub fn point_distance(&self, p: &TreePoint, q: &TreePoint) -> Result<f64> {
        p.vertex.validate(self.k, self.depth)?;
        q.vertex.validate(self.k, self.depth)?;
        Ok(self.point_distance_unchecked(p, q))
    }

    fn point_distance_unchecked(&self, p: &TreePoint, q: &TreePoint) -> f64 {
        let (ap, aq) = (self.arclength(p.tau), self.arclength(q.tau));
        if p.vertex.is_ancestor_of(&q.vertex) || q.vertex.is_ancestor_of(&p.vertex) {
            (ap - aq).abs()
        } else {
            let c = p.vertex.common_prefix_len(&q.vertex) as f64;
            ap + aq - 2.0 * self.arclength(c)
        }
    }

    /// Density of `μ_λ` at level parameter `tau`.
    pub fn density(&self, tau: f64, lambda: f64) -> f64 {
        (-self.beta * tau).exp() * (tau + self.c_const).powf(lambda)
    }

    /// `∫_a^b e^{-βτ}(τ + C)^λ dτ` by the configured Gauss rule; intended for
    /// subintervals of a single edge.
    pub fn measure_between(&self, a: f64, b: f64, lambda: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.rule.integrate(a, b, |t| self.density(t, lambda))
    }

    /// `e^{βn} μ_λ([n, n+1])`, integrated in the local coordinate
    /// `s = τ − n` so that deep levels neither underflow nor lose precision.
    fn scaled_edge_measure(&self, n: usize, lambda: f64) -> f64 {
        let shift = n as f64 + self.c_const;
        self.rule.integrate(0.0, 1.0, |s| {
            (-self.beta * s).exp() * (s + shift).powf(lambda)
        })
    }

    /// Measure of one edge from level `n` to `n + 1`.
    pub fn edge_measure(&self, n: usize, lambda: f64) -> f64 {
        (-self.beta * n as f64).exp() * self.scaled_edge_measure(n, lambda)
    }

    /// Total measure of the levels `0..depth` (all `K + … + K^depth` edges).
    pub fn truncated_mass(&self, lambda: f64) -> f64 {
        (0..self.depth)
            .map(|n| self.k.pow(n as u32 + 1) as f64 * self.edge_measure(n, lambda))
            .sum()
    }

    /// Measure of the tree below the truncation level.
    pub fn residual_measure(&self, lambda: f64) -> f64 {
        self.residual_measure_from(self.depth, lambda)
    }

    /// `Σ_{n ≥ level} K^{n+1} μ_λ([n, n+1])`, summed until the geometric
    /// tail bound drops below `1e-12` of the partial sum.
    pub fn residual_measure_from(&self, level: usize, lambda: f64) -> f64 {
        let log_k = (self.k as f64).ln();
        let mut sum = 0.0;
        let mut prev = f64::NAN;
        for n in level..level + 1_000_000 {
            let log_count = (n as f64 + 1.0) * log_k - self.beta * n as f64;
            let term = log_count.exp() * self.scaled_edge_measure(n, lambda);
            sum += term;
            let ratio = term / prev;
            prev = term;
            if term == 0.0 || (ratio < 1.0 && term * ratio / (1.0 - ratio) <= 1e-12 * sum) {
                break;
            }
        }
        sum
    }

    /// `μ_{λ₂}` of the closed ball `B(center, radius)` inside the truncated
    /// tree, computed edge by edge: a ball meets every edge in an interval of
    /// the level parameter, whose measure is integrated exactly up to
    /// quadrature.
    pub fn ball_measure(&self, center: &TreePoint, radius: f64) -> Result<f64> {
        center.vertex.validate(self.k, self.depth)?;
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius must be nonnegative, got {radius}"
            )));
        }
        let mut total = 0.0;
        let mut stack = vec![VertexAddress::root()];
        while let Some(v) = stack.pop() {
            if v.level() >= self.depth {
                continue;
            }
            for d in 0..self.k as u32 {
                let w = v.child(d);
                let (lo, hi) = self.ball_edge_interval(center, &w, radius);
                if hi > lo {
                    total += self.measure_between(lo, hi, self.lambda2);
                }
                let on_path = w.is_ancestor_of(&center.vertex) && w != center.vertex;
                if on_path
                    || self.point_distance_unchecked(center, &TreePoint::at_vertex(w.clone()))
                        <= radius
                {
                    stack.push(w);
                }
            }
        }
        Ok(total)
    }

    /// Level-parameter interval of the edge above `w` lying within `radius`
    /// of `x`.
    fn ball_edge_interval(&self, x: &TreePoint, w: &VertexAddress, radius: f64) -> (f64, f64) {
        let top = w.level() as f64 - 1.0;
        let bottom = top + 1.0;
        let ax = self.arclength(x.tau);
        let (lo, hi) = if *w == x.vertex {
            (
                self.inverse_arclength(ax - radius),
                self.inverse_arclength(ax + radius),
            )
        } else if w.is_ancestor_of(&x.vertex) {
            (self.inverse_arclength(ax - radius), f64::INFINITY)
        } else if x.vertex.is_ancestor_of(w) {
            (f64::NEG_INFINITY, self.inverse_arclength(ax + radius))
        } else {
            let c = w.common_prefix_len(&x.vertex) as f64;
            (
                f64::NEG_INFINITY,
                self.inverse_arclength(radius + 2.0 * self.arclength(c) - ax),
            )
        };
        (lo.max(top), hi.min(bottom))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn binary(depth: usize) -> TreeParams {
        TreeParams::new(2, LN_2, 2.0 * LN_2, 0.0, depth, 8).unwrap()
    }

    #[test]
    fn dimension_and_theta() {
        let t = binary(8);
        assert!((t.dimension() - 1.0).abs() < 1e-15);
        assert!((t.theta(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_inadmissible_parameters() {
        let err = TreeParams::new(2, LN_2, LN_2, 0.0, 8, 8).unwrap_err();
        assert!(err.to_string().contains("beta must exceed log K"));
        assert!(TreeParams::new(1, 1.0, 2.0, 0.0, 8, 8)
            .unwrap_err()
            .to_string()
            .contains("K must be at least 2"));
        assert!(TreeParams::new(2, 0.0, 2.0, 0.0, 8, 8)
            .unwrap_err()
            .to_string()
            .contains("epsilon must be positive"));
        assert!(TreeParams::new(2, 1.0, 2.0, 0.0, 0, 8).is_err());
        assert!(TreeParams::new(2, 1.0, 2.0, 0.0, 4, 1).is_err());
    }

    #[test]
    fn minimal_c_const() {
        let t = TreeParams::new(3, 1.0, 2.0, 1.0, 4, 8).unwrap();
        // max{2/(2 - ln 3), 2 ln 4} by hand.
        let expected = (2.0 / (2.0 - 3f64.ln())).max(2.0 * 4f64.ln());
        assert!((t.c_const() - expected).abs() < 1e-15);
        assert!((t.c_const() - 2.772588722239781).abs() < 1e-12);
        assert!(t.clone().with_c_const(2.0).is_err());
        assert_eq!(t.with_c_const(5.0).unwrap().c_const(), 5.0);
    }

    #[test]
    fn edge_lengths() {
        let t = binary(8);
        let l0 = t.edge_length(0).unwrap();
        assert!((l0 - 1.0 / (2.0 * LN_2)).abs() < 1e-15);
        assert!((t.edge_length(1).unwrap() - l0 / 2.0).abs() < 1e-15);
        assert!(t.edge_length(8).is_err());
        for n in 1..8 {
            assert!(t.edge_length(n).unwrap() < t.edge_length(n - 1).unwrap());
        }
    }

    #[test]
    fn vertex_distances() {
        let t = binary(8);
        let root = VertexAddress::root();
        let a = VertexAddress::new(vec![0]);
        let b = VertexAddress::new(vec![1]);
        assert_eq!(t.vertex_distance(&a, &a).unwrap(), 0.0);
        assert!((t.vertex_distance(&root, &a).unwrap() - 0.7213475204444817).abs() < 1e-12);
        assert!((t.vertex_distance(&a, &b).unwrap() - 1.4426950408889634).abs() < 1e-12);
        let bad = VertexAddress::new(vec![2]);
        assert!(t.vertex_distance(&root, &bad).is_err());
    }

    #[test]
    fn index_roundtrip() {
        for level in 0..5 {
            for i in 0..3usize.pow(level as u32) {
                let a = VertexAddress::from_index(3, level, i);
                assert_eq!(a.index(3), i);
                assert_eq!(VertexAddress::parse(&a.to_digit_string(), 3).unwrap(), a);
            }
        }
        assert!(VertexAddress::parse("012", 2).is_err());
    }

    #[test]
    fn edge_measure_closed_form_at_lambda_zero() {
        let t = binary(8);
        let b = t.beta();
        let m0 = t.edge_measure(0, 0.0);
        assert!((m0 - 0.75 / b).abs() < 1e-15);
        assert!((t.edge_measure(1, 0.0) - 0.25 * m0).abs() < 1e-16);
    }

    #[test]
    fn residual_measure_geometric() {
        let t = binary(10);
        let total = t.residual_measure_from(0, 0.0);
        // Σ 2^{n+1} (e^{-βn} − e^{-β(n+1)})/β with e^{-β} = 1/4.
        let oracle: f64 = (0..200)
            .map(|n| 2f64.powi(n + 1) * (0.25f64.powi(n) - 0.25f64.powi(n + 1)) / t.beta())
            .sum();
        assert!((total - oracle).abs() < 1e-12 * oracle);
        assert!((total - 2.1640425613334453).abs() < 1e-9);
        let tail = t.residual_measure(0.0);
        assert!((tail - total / 1024.0).abs() < 1e-12 * total);
        assert!((t.truncated_mass(0.0) + tail - total).abs() < 1e-12 * total);
    }

    #[test]
    fn point_distance_matches_vertex_distance() {
        let t = binary(6);
        let x = VertexAddress::new(vec![0, 1, 1]);
        let y = VertexAddress::new(vec![0, 0]);
        let d1 = t.vertex_distance(&x, &y).unwrap();
        let d2 = t
            .point_distance(
                &TreePoint::at_vertex(x.clone()),
                &TreePoint::at_vertex(y.clone()),
            )
            .unwrap();
        assert!((d1 - d2).abs() < 1e-15);
    }

    #[test]
    fn ball_covering_everything_has_full_mass() {
        let t = binary(5);
        let c = TreePoint::on_edge(VertexAddress::new(vec![1, 0]), 0.3).unwrap();
        let full = t.ball_measure(&c, 10.0).unwrap();
        assert!((full - t.truncated_mass(0.0)).abs() < 1e-12);
        assert_eq!(t.ball_measure(&c, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn small_ball_inside_one_edge() {
        let t = binary(5);
        let c = TreePoint::on_edge(VertexAddress::new(vec![1, 0]), 0.5).unwrap();
        let r = 1e-3;
        let ax = t.arclength(c.tau());
        let lo = t.inverse_arclength(ax - r);
        let hi = t.inverse_arclength(ax + r);
        let expected = (t.density(lo, 0.0) - t.density(hi, 0.0)) / t.beta();
        let got = t.ball_measure(&c, r).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }
}
