//! Hajłasz-Besov energy at finite resolution.
//!
//! For a boundary function `f` of depth `N`, a fractional `θ`-Hajłasz
//! gradient is a family `g_k ≥ 0` of leaf arrays, one per distance scale
//! `k`, with `|f_a − f_b| ≤ d^θ (g_k(a) + g_k(b))` whenever
//! `2^{-k-1} ≤ d(a, b) < 2^{-k}`. The energy is the infimum of
//! `Σ_k Σ_a ν(a) g_k(a)^p` over such families.
//!
//! Scales never share a variable, so the program splits into one convex
//! problem per scale. Leaves that appear in no active constraint of a scale
//! are fixed at zero.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::boundary::distance_at_split;
use crate::boundary_norms::BoundaryFunction;
use crate::tree::TreeParams;
use crate::{Error, Result};

/// Relative slack allowed by [`HajlaszInstance::feasible`] for rounding.
pub const FEASIBILITY_RTOL: f64 = 1e-12;

/// The unique `k` with `2^{-k-1} ≤ d < 2^{-k}`.
pub fn scale_of_distance(d: f64) -> i64 {
    let mut k = (-d.log2()).ceil() as i64 - 1;
    // Guard the floor/ceil boundary against rounding in log2.
    while d >= 2f64.powi(-k as i32) {
        k -= 1;
    }
    while d < 2f64.powi(-(k as i32) - 1) {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pair {
    a: usize,
    b: usize,
    jump: f64,
    /// `d(a, b)^θ`.
    weight: f64,
}

impl Pair {
    /// Lower bound on `g(a) + g(b)`.
    fn bound(&self) -> f64 {
        self.jump / self.weight
    }
}

/// All pairs whose distance falls in one dyadic annulus.
#[derive(Debug, Clone, PartialEq)]
pub struct Scale {
    k: i64,
    splits: Vec<usize>,
    pairs: Vec<Pair>,
}

impl Scale {
    pub fn k(&self) -> i64 {
        self.k
    }

    /// Split levels whose distance lands in this annulus.
    pub fn splits(&self) -> &[usize] {
        &self.splits
    }

    fn active(&self) -> impl Iterator<Item = &Pair> {
        self.pairs.iter().filter(|p| p.jump > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HajlaszInstance {
    f: BoundaryFunction,
    theta: f64,
    p: f64,
    scales: Vec<Scale>,
}

impl HajlaszInstance {
    pub fn new(f: BoundaryFunction, params: &TreeParams, theta: f64, p: f64) -> Result<Self> {
        if params.k() != f.k() {
            return Err(Error::BranchingMismatch {
                expected: params.k(),
                found: f.k(),
            });
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in (0, 1), got {theta}"
            )));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "p must be at least 1, got {p}"
            )));
        }
        let k = f.k();
        let n = f.depth();
        let mut scales: Vec<Scale> = Vec::new();
        for j in 0..n {
            let d = distance_at_split(params, j);
            let s = scale_of_distance(d);
            let idx = match scales.iter().position(|sc| sc.k == s) {
                Some(i) => i,
                None => {
                    scales.push(Scale {
                        k: s,
                        splits: Vec::new(),
                        pairs: Vec::new(),
                    });
                    scales.len() - 1
                }
            };
            scales[idx].splits.push(j);
            let weight = d.powf(theta);
            let child_span = k.pow((n - j - 1) as u32);
            let node_span = child_span * k;
            let vals = f.values();
            for node in 0..k.pow(j as u32) {
                let base = node * node_span;
                for c1 in 0..k {
                    for c2 in (c1 + 1)..k {
                        for x in 0..child_span {
                            let a = base + c1 * child_span + x;
                            for y in 0..child_span {
                                let b = base + c2 * child_span + y;
                                scales[idx].pairs.push(Pair {
                                    a,
                                    b,
                                    jump: (vals[a] - vals[b]).abs(),
                                    weight,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            f,
            theta,
            p,
            scales,
        })
    }

    pub fn function(&self) -> &BoundaryFunction {
        &self.f
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn scales(&self) -> &[Scale] {
        &self.scales
    }

    fn leaves(&self) -> usize {
        self.f.values().len()
    }

    /// `Σ_k Σ_a ν(a) g_k(a)^p`.
    pub fn objective(&self, g: &[Vec<f64>]) -> f64 {
        let nu = self.f.leaf_measure();
        g.iter().flatten().map(|x| nu * x.powf(self.p)).sum()
    }

    /// Whether `g` satisfies every pointwise constraint, up to
    /// [`FEASIBILITY_RTOL`].
    pub fn feasible(&self, g: &[Vec<f64>]) -> Result<bool> {
        self.check_shape(g)?;
        Ok(self.scales.iter().zip(g).all(|(scale, gk)| {
            scale
                .pairs
                .iter()
                .all(|p| p.jump <= p.weight * (gk[p.a] + gk[p.b]) * (1.0 + FEASIBILITY_RTOL))
        }))
    }

    fn check_shape(&self, g: &[Vec<f64>]) -> Result<()> {
        if g.len() != self.scales.len() || g.iter().any(|gk| gk.len() != self.leaves()) {
            return Err(Error::InvalidParameter(format!(
                "expected {} arrays of {} leaf values",
                self.scales.len(),
                self.leaves()
            )));
        }
        if let Some(x) = g.iter().flatten().find(|x| !(**x >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "gradient values must be nonnegative, got {x}"
            )));
        }
        Ok(())
    }

    /// Minimizes the energy over fractional Hajłasz gradients.
    pub fn energy(&self, config: &SolverConfig) -> Result<HajlaszSolution> {
        let use_lp = match config.method {
            Method::Auto => self.p == 1.0,
            Method::LinearProgram => {
                if self.p != 1.0 {
                    return Err(Error::InvalidParameter("the LP method needs p = 1".into()));
                }
                true
            }
            Method::Barrier => false,
        };
        let mut gradients = Vec::with_capacity(self.scales.len());
        let mut iterations = 0;
        for scale in &self.scales {
            let local = LocalProblem::new(scale, self.leaves());
            let (x, it) = if local.vars.is_empty() {
                (Vec::new(), 0)
            } else if use_lp {
                (local.solve_lp()?, 0)
            } else {
                local.solve_barrier(self.p, config)?
            };
            iterations += it;
            gradients.push(local.scatter(&x, self.leaves()));
        }
        // The LP vertex may sit a rounding error outside the feasible set;
        // a uniform rescale restores feasibility at negligible cost.
        if use_lp {
            let worst = self
                .scales
                .iter()
                .zip(&gradients)
                .flat_map(|(scale, gk)| {
                    scale
                        .active()
                        .map(move |p| p.jump / (p.weight * (gk[p.a] + gk[p.b])))
                })
                .fold(1.0, f64::max);
            if worst > 1.0 {
                for x in gradients.iter_mut().flatten() {
                    *x *= worst;
                }
            }
        }
        Ok(HajlaszSolution {
            value: self.objective(&gradients),
            gradients,
            iterations,
        })
    }

    /// Exhaustive search over the grid `{0, h, …, r·h}` per variable, with
    /// `h = g_max / r` and `g_max = max|f_a − f_b| · max d^{-θ}`.
    ///
    /// Every optimal `g` has entries `≤ g_max`, so rounding it up to the grid
    /// stays feasible; the grid minimum therefore lies in
    /// `[inf, inf + spacing]` with `spacing` as reported.
    pub fn oracle(&self, resolution: usize) -> Result<OracleResult> {
        if self.leaves() > 8 || self.scales.len() > 3 {
            return Err(Error::OracleTooLarge(format!(
                "{} leaves and {} scales (at most 8 and 3)",
                self.leaves(),
                self.scales.len()
            )));
        }
        if resolution == 0 {
            return Err(Error::InvalidParameter(
                "grid resolution must be positive".into(),
            ));
        }
        let max_jump = self
            .scales
            .iter()
            .flat_map(|s| &s.pairs)
            .map(|p| p.jump)
            .fold(0.0, f64::max);
        let min_weight = self
            .scales
            .iter()
            .flat_map(|s| &s.pairs)
            .map(|p| p.weight)
            .fold(f64::INFINITY, f64::min);
        let g_max = max_jump / min_weight;
        if g_max == 0.0 {
            return Ok(OracleResult {
                value: 0.0,
                spacing: 0.0,
                step: 0.0,
            });
        }
        let h = g_max / resolution as f64;
        let nu = self.f.leaf_measure();
        let mut value = 0.0;
        let mut active_vars = 0;
        for scale in &self.scales {
            let local = LocalProblem::new(scale, self.leaves());
            active_vars += local.vars.len();
            if local.vars.is_empty() {
                continue;
            }
            let mut search = GridSearch {
                local: &local,
                p: self.p,
                h,
                resolution,
                assigned: vec![0.0; local.vars.len()],
                best: f64::INFINITY,
            };
            search.descend(0, 0.0);
            value += nu * search.best;
        }
        let spacing = active_vars as f64 * nu * (g_max.powf(self.p) - (g_max - h).powf(self.p));
        Ok(OracleResult {
            value,
            spacing,
            step: h,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Linear program for `p = 1`, barrier otherwise.
    #[default]
    Auto,
    LinearProgram,
    Barrier,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Target relative duality gap of the barrier method.
    pub tol: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            tol: 1e-9,
            max_outer: 60,
            max_newton: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HajlaszSolution {
    pub value: f64,
    /// One leaf array per scale, in the order of [`HajlaszInstance::scales`].
    pub gradients: Vec<Vec<f64>>,
    /// Newton steps taken by the barrier method.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    /// Objective-space width: the grid minimum exceeds the infimum by at
    /// most this much.
    pub spacing: f64,
    /// Grid step `h` in gradient units.
    pub step: f64,
}

/// One scale with the constrained leaves renumbered `0..m`.
struct LocalProblem {
    vars: Vec<usize>,
    /// `(i, j, bound)` in local numbering.
    cons: Vec<(usize, usize, f64)>,
}

impl LocalProblem {
    fn new(scale: &Scale, leaves: usize) -> Self {
        let mut local = vec![usize::MAX; leaves];
        let mut vars = Vec::new();
        let mut cons = Vec::new();
        for p in scale.active() {
            for leaf in [p.a, p.b] {
                if local[leaf] == usize::MAX {
                    local[leaf] = vars.len();
                    vars.push(leaf);
                }
            }
            cons.push((local[p.a], local[p.b], p.bound()));
        }
        Self { vars, cons }
    }

    fn scatter(&self, x: &[f64], leaves: usize) -> Vec<f64> {
        let mut g = vec![0.0; leaves];
        for (&leaf, &v) in self.vars.iter().zip(x) {
            g[leaf] = v;
        }
        g
    }

    fn solve_lp(&self) -> Result<Vec<f64>> {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = self
            .vars
            .iter()
            .map(|_| problem.add_var(1.0, (0.0, f64::INFINITY)))
            .collect();
        for &(i, j, c) in &self.cons {
            problem.add_constraint([(vars[i], 1.0), (vars[j], 1.0)], ComparisonOp::Ge, c);
        }
        let sol = problem
            .solve()
            .map_err(|e| Error::NonConvergence(format!("linear program: {e}")))?;
        Ok(vars.iter().map(|v| sol[*v].max(0.0)).collect())
    }

    /// Log-barrier Newton method on `Σ x^p` subject to `x_i + x_j ≥ c`,
    /// `x ≥ 0`, from the strictly feasible start `x_i = max_j c_ij + δ`.
    fn solve_barrier(&self, p: f64, config: &SolverConfig) -> Result<(Vec<f64>, usize)> {
        let m = self.vars.len();
        let c_max = self.cons.iter().map(|c| c.2).fold(0.0, f64::max);
        let mut x = vec![0.0; m];
        for &(i, j, c) in &self.cons {
            x[i] = f64::max(x[i], c);
            x[j] = f64::max(x[j], c);
        }
        for xi in &mut x {
            *xi += 0.1 * c_max;
        }
        let barrier_terms = (self.cons.len() + m) as f64;
        let objective = |x: &[f64]| x.iter().map(|v| v.powf(p)).sum::<f64>();
        let mut t = barrier_terms / objective(&x);
        let mut steps = 0;
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m * m];
        for _ in 0..config.max_outer {
            let mut centered = false;
            for _ in 0..config.max_newton {
                grad.iter_mut().for_each(|g| *g = 0.0);
                hess.iter_mut().for_each(|h| *h = 0.0);
                for i in 0..m {
                    let xi = x[i];
                    grad[i] = t * p * xi.powf(p - 1.0) - 1.0 / xi;
                    hess[i * m + i] = t * p * (p - 1.0) * xi.powf(p - 2.0) + 1.0 / (xi * xi);
                }
                for &(i, j, c) in &self.cons {
                    let s = x[i] + x[j] - c;
                    let (g1, h1) = (1.0 / s, 1.0 / (s * s));
                    grad[i] -= g1;
                    grad[j] -= g1;
                    hess[i * m + i] += h1;
                    hess[j * m + j] += h1;
                    hess[i * m + j] += h1;
                    hess[j * m + i] += h1;
                }
                let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                let dx = cholesky_solve(&mut hess, m, neg)?;
                steps += 1;
                let decrement2: f64 = -grad.iter().zip(&dx).map(|(g, d)| g * d).sum::<f64>();
                if decrement2 <= 1e-9 {
                    centered = true;
                    break;
                }
                let lambda = decrement2.max(0.0).sqrt();
                let mut alpha = if lambda > 0.25 {
                    1.0 / (1.0 + lambda)
                } else {
                    1.0
                };
                // Stay strictly inside the feasible region.
                loop {
                    let inside = (0..m).all(|i| x[i] + alpha * dx[i] > 0.0)
                        && self.cons.iter().all(|&(i, j, c)| {
                            x[i] + alpha * dx[i] + x[j] + alpha * dx[j] - c > 0.0
                        });
                    if inside {
                        break;
                    }
                    alpha *= 0.5;
                }
                for i in 0..m {
                    x[i] += alpha * dx[i];
                }
            }
            if !centered {
                return Err(Error::NonConvergence(format!(
                    "barrier centering exceeded {} Newton steps",
                    config.max_newton
                )));
            }
            if barrier_terms / t <= config.tol * objective(&x) {
                return Ok((x, steps));
            }
            t *= 10.0;
        }
        Err(Error::NonConvergence(format!(
            "barrier method exceeded {} outer iterations",
            config.max_outer
        )))
    }
}

/// Solves `A x = b` for symmetric positive definite `A` (overwritten).
fn cholesky_solve(a: &mut [f64], m: usize, mut b: Vec<f64>) -> Result<Vec<f64>> {
    for j in 0..m {
        let diag = a[j * m + j];
        let mut d = diag;
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        // Near the boundary of the feasible set the system is badly
        // conditioned; a floored pivot keeps the direction usable.
        d = d.max(1e-13 * diag);
        if !(d > 0.0) {
            return Err(Error::NonConvergence(
                "Newton system is not positive definite".into(),
            ));
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in (j + 1)..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
    }
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * m + k] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in (i + 1)..m {
            s -= a[k * m + i] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    Ok(b)
}

struct GridSearch<'a> {
    local: &'a LocalProblem,
    p: f64,
    h: f64,
    resolution: usize,
    assigned: Vec<f64>,
    best: f64,
}

impl GridSearch<'_> {
    /// Smallest grid index whose value meets every constraint to the
    /// already assigned variables `0..i`.
    fn lowest_index(&self, i: usize) -> usize {
        let need = self
            .local
            .cons
            .iter()
            .filter_map(|&(a, b, c)| match (a == i, b == i) {
                (true, false) if b < i => Some(c - self.assigned[b]),
                (false, true) if a < i => Some(c - self.assigned[a]),
                _ => None,
            })
            .fold(0.0, f64::max);
        let mut idx = (need / self.h).ceil().max(0.0) as usize;
        while idx > 0 && (idx - 1) as f64 * self.h >= need * (1.0 - 1e-14) {
            idx -= 1;
        }
        while (idx as f64) * self.h < need * (1.0 - 1e-14) {
            idx += 1;
        }
        idx
    }

    fn descend(&mut self, i: usize, partial: f64) {
        let m = self.assigned.len();
        let start = self.lowest_index(i);
        if start > self.resolution {
            return;
        }
        if i + 1 == m {
            let v = start as f64 * self.h;
            let total = partial + v.powf(self.p);
            if total < self.best {
                self.best = total;
            }
            return;
        }
        for idx in start..=self.resolution {
            let v = idx as f64 * self.h;
            let next = partial + v.powf(self.p);
            if next >= self.best {
                break;
            }
            self.assigned[i] = v;
            self.descend(i + 1, next);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn binary(depth: usize) -> TreeParams {
        TreeParams::new(2, LN_2, 2.0 * LN_2, 0.0, depth, 8).unwrap()
    }

    fn two_leaf(p: f64) -> HajlaszInstance {
        let f = BoundaryFunction::new(2, 1, vec![1.0, 0.0]).unwrap();
        HajlaszInstance::new(f, &binary(1), 0.5, p).unwrap()
    }

    #[test]
    fn scales() {
        assert_eq!(scale_of_distance(0.75), 0);
        assert_eq!(scale_of_distance(0.5), 0);
        assert_eq!(scale_of_distance(1.0), -1);
        assert_eq!(scale_of_distance(2.0 / LN_2), -2);
        assert_eq!(scale_of_distance(1.0 / LN_2), -1);
        let f = BoundaryFunction::constant(2, 3, 0.0).unwrap();
        let inst = HajlaszInstance::new(f, &binary(3), 0.5, 2.0).unwrap();
        let ks: Vec<i64> = inst.scales().iter().map(Scale::k).collect();
        assert_eq!(ks, vec![-2, -1, 0]);
    }

    #[test]
    fn feasibility_examples() {
        let inst = two_leaf(1.0);
        let d = 2.0 / LN_2;
        let half = d.powf(-0.5) / 2.0;
        assert!(inst.feasible(&[vec![half, half]]).unwrap());
        assert!(!inst.feasible(&[vec![0.0, 0.0]]).unwrap());
        assert!(inst.feasible(&[vec![-1.0, 0.0]]).is_err());
        let c = BoundaryFunction::constant(2, 2, 3.0).unwrap();
        let flat = HajlaszInstance::new(c, &binary(2), 0.5, 2.0).unwrap();
        assert!(flat.feasible(&[vec![0.0; 4], vec![0.0; 4]]).unwrap());
    }

    #[test]
    fn lp_value() {
        let expected = 0.5 * (LN_2 / 2.0).sqrt();
        let sol = two_leaf(1.0).energy(&SolverConfig::default()).unwrap();
        assert!((sol.value - expected).abs() < 1e-9);
        assert!((sol.value - 0.2943).abs() < 1e-4);
        let barrier = two_leaf(1.0)
            .energy(&SolverConfig {
                method: Method::Barrier,
                ..SolverConfig::default()
            })
            .unwrap();
        assert!((barrier.value - expected).abs() < 1e-8);
    }

    #[test]
    fn p2_value() {
        // Minimizing ν(a² + b²) with a + b ≥ c gives ν c²/2.
        let c = (LN_2 / 2.0).sqrt();
        let sol = two_leaf(2.0).energy(&SolverConfig::default()).unwrap();
        assert!((sol.value - 0.25 * c * c).abs() < 1e-9);
        assert!(two_leaf(2.0).feasible(&sol.gradients).unwrap());
    }

    #[test]
    fn constant_function() {
        let f = BoundaryFunction::constant(2, 2, 1.0).unwrap();
        let inst = HajlaszInstance::new(f, &binary(2), 0.5, 2.0).unwrap();
        assert_eq!(inst.energy(&SolverConfig::default()).unwrap().value, 0.0);
        assert_eq!(inst.oracle(10).unwrap().value, 0.0);
    }

    #[test]
    fn oracle_single_constraint() {
        let inst = two_leaf(1.0);
        let exact = 0.5 * (LN_2 / 2.0).sqrt();
        let coarse = inst.oracle(10).unwrap();
        let fine = inst.oracle(20).unwrap();
        assert!(coarse.value >= exact - 1e-12 && coarse.value <= exact + coarse.spacing);
        assert!(fine.value <= coarse.value + 1e-15);
    }

    #[test]
    fn solver_matches_oracle() {
        let f = BoundaryFunction::new(2, 2, vec![0.3, 1.0, -0.2, 0.5]).unwrap();
        for p in [1.0, 2.0] {
            let inst = HajlaszInstance::new(f.clone(), &binary(2), 0.5, p).unwrap();
            let sol = inst.energy(&SolverConfig::default()).unwrap();
            let o = inst.oracle(40).unwrap();
            assert!(inst.feasible(&sol.gradients).unwrap());
            assert!(sol.value <= o.value + 1e-9);
            assert!(o.value - sol.value <= 2.0 * o.spacing);
        }
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let f = BoundaryFunction::constant(2, 4, 0.0).unwrap();
        let inst = HajlaszInstance::new(f, &binary(4), 0.5, 1.0).unwrap();
        assert!(matches!(inst.oracle(4), Err(Error::OracleTooLarge(_))));
    }

    #[test]
    fn symmetric_under_child_swap() {
        let params = binary(2);
        let a = BoundaryFunction::new(2, 2, vec![0.3, 1.0, -0.2, 0.5]).unwrap();
        let b = BoundaryFunction::new(2, 2, vec![-0.2, 0.5, 0.3, 1.0]).unwrap();
        let cfg = SolverConfig::default();
        let ea = HajlaszInstance::new(a, &params, 0.5, 2.0)
            .unwrap()
            .energy(&cfg)
            .unwrap();
        let eb = HajlaszInstance::new(b, &params, 0.5, 2.0)
            .unwrap()
            .energy(&cfg)
            .unwrap();
        assert!((ea.value - eb.value).abs() < 1e-8 * ea.value);
    }
}
