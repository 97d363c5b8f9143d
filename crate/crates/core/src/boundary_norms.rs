//! Function spaces on the boundary: `L^p`, `L^Φ`, dyadic Besov energies, the
//! dyadic Orlicz-Besov modular and norm, and the double-integral seminorm.
//!
//! Boundary functions are piecewise constant on the `K^N` leaf cells of
//! depth `N`, stored in lexicographic digit order. All energies sum over
//! levels `1..=N`; deeper terms vanish for such functions.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boundary::{distance_at_split, BoundaryMeasure, DyadicCell};
use crate::tree::{TreeParams, VertexAddress};
use crate::young::{luxemburg_gauge, YoungPhi};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    k: usize,
    depth: usize,
    values: Vec<f64>,
}

impl BoundaryFunction {
    pub fn new(k: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "K must be at least 2, got {k}"
            )));
        }
        let expected = k.checked_pow(depth as u32).ok_or_else(|| {
            Error::InvalidParameter(format!("K^N overflows for K = {k}, N = {depth}"))
        })?;
        if values.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "expected {expected} leaf values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value {v}")));
        }
        Ok(Self { k, depth, values })
    }

    pub fn constant(k: usize, depth: usize, c: f64) -> Result<Self> {
        Self::new(k, depth, vec![c; k.pow(depth as u32)])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn leaf_measure(&self) -> f64 {
        BoundaryMeasure::new(self.k).of_level(self.depth)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            k: self.k,
            depth: self.depth,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.k != other.k || self.depth != other.depth {
            return Err(Error::InvalidParameter("shape mismatch".into()));
        }
        Ok(Self {
            k: self.k,
            depth: self.depth,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }

    /// Averages over every cell of levels `0..=N`, computed bottom-up.
    pub fn averages(&self) -> CellAverages {
        let mut levels = vec![self.values.clone()];
        for _ in 0..self.depth {
            let finer = levels.last().expect("at least the leaf level");
            let coarser: Vec<f64> = finer
                .chunks_exact(self.k)
                .map(|c| c.iter().sum::<f64>() / self.k as f64)
                .collect();
            levels.push(coarser);
        }
        levels.reverse();
        CellAverages { k: self.k, levels }
    }

    /// Mean of `f` over a cell.
    pub fn cell_average(&self, cell: &DyadicCell) -> Result<f64> {
        cell.address().validate(self.k, self.depth)?;
        let span = self.k.pow((self.depth - cell.level()) as u32);
        let start = cell.index(self.k) * span;
        Ok(self.values[start..start + span].iter().sum::<f64>() / span as f64)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let nu = self.leaf_measure();
        self.values
            .iter()
            .map(|v| nu * v.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn l1_norm(&self) -> f64 {
        self.lp_norm(1.0)
    }

    /// Luxemburg norm `inf{k : Σ ν(leaf) Φ(|f|/k) ≤ 1}`.
    pub fn orlicz_norm(&self, phi: &YoungPhi, tol: f64) -> Result<f64> {
        let nu = self.leaf_measure();
        luxemburg_gauge(
            &|k: f64| {
                self.values
                    .iter()
                    .map(|v| nu * phi.eval_abs(v / k))
                    .sum::<f64>()
            },
            tol,
        )
    }

    /// CSV with a `K,N` header row followed by `address,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
        out.write_record(["K", "N"])?;
        out.write_record([self.k.to_string(), self.depth.to_string()])?;
        for (i, v) in self.values.iter().enumerate() {
            let addr = VertexAddress::from_index(self.k, self.depth, i);
            out.write_record([addr.to_digit_string(), format!("{v:e}")])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (k, depth, rows) = read_addressed_csv(r)?;
        let mut values = vec![f64::NAN; k.pow(depth as u32)];
        for (addr, v) in rows {
            if addr.level() != depth {
                return Err(Error::InvalidAddress(format!(
                    "leaf `{}` is not at level {depth}",
                    addr.to_digit_string()
                )));
            }
            values[addr.index(k)] = v;
        }
        Self::new(k, depth, values)
    }
}

pub(crate) fn read_addressed_csv<R: Read>(
    r: R,
) -> Result<(usize, usize, Vec<(VertexAddress, f64)>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(r);
    let mut records = rdr.records();
    let shape = records
        .next()
        .ok_or_else(|| Error::Config("missing K,N row".into()))??;
    let parse_usize = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("bad integer `{s}`: {e}")))
    };
    let k = parse_usize(shape.get(0).unwrap_or(""))?;
    let depth = parse_usize(shape.get(1).unwrap_or(""))?;
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec?;
        let addr = VertexAddress::parse(rec.get(0).unwrap_or(""), k)?;
        let v = rec
            .get(1)
            .unwrap_or("")
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("bad value: {e}")))?;
        rows.push((addr, v));
    }
    Ok((k, depth, rows))
}

/// Cell averages by level; `levels[n][i]` is the mean over the `i`-th cell
/// of level `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAverages {
    k: usize,
    levels: Vec<Vec<f64>>,
}

impl CellAverages {
    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn into_levels(self) -> Vec<Vec<f64>> {
        self.levels
    }

    /// `(n, f_I − f_Î)` for every cell `I` of level `n ≥ 1`.
    pub fn differences(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (1..self.levels.len()).flat_map(move |n| {
            let parent = &self.levels[n - 1];
            self.levels[n]
                .iter()
                .enumerate()
                .map(move |(i, v)| (n, v - parent[i / self.k]))
        })
    }
}

/// Smoothness and weight exponents of the boundary energies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    theta: f64,
    p: f64,
    lambda: f64,
    lambda2: f64,
}

impl EnergyParams {
    /// `θ ∈ [0, 1)`, `p ≥ 1`; `lambda` weights the dyadic energy and
    /// `lambda2` the Orlicz modular.
    pub fn new(theta: f64, p: f64, lambda: f64, lambda2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0, 1), got {theta}"
            )));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "p must be at least 1, got {p}"
            )));
        }
        if !lambda.is_finite() || !lambda2.is_finite() {
            return Err(Error::InvalidParameter(
                "lambda exponents must be finite".into(),
            ));
        }
        Ok(Self {
            theta,
            p,
            lambda,
            lambda2,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
}

fn check_k(params: &TreeParams, f: &BoundaryFunction) -> Result<()> {
    if params.k() != f.k() {
        return Err(Error::BranchingMismatch {
            expected: params.k(),
            found: f.k(),
        });
    }
    Ok(())
}

/// `Σ_{n=1}^N e^{εnθp} n^λ Σ_{I ∈ Q_n} ν(I) |f_I − f_Î|^p`.
pub fn dyadic_energy(
    f: &BoundaryFunction,
    params: &TreeParams,
    energy: &EnergyParams,
) -> Result<f64> {
    check_k(params, f)?;
    let eps = params.epsilon();
    let nu = BoundaryMeasure::new(f.k());
    let avg = f.averages();
    let mut total = 0.0;
    for n in 1..=f.depth() {
        let weight =
            (eps * n as f64 * energy.theta * energy.p).exp() * (n as f64).powf(energy.lambda);
        let parent = avg.level(n - 1);
        let level_sum: f64 = avg
            .level(n)
            .iter()
            .enumerate()
            .map(|(i, v)| (v - parent[i / f.k()]).abs().powf(energy.p))
            .sum();
        total += weight * nu.of_level(n) * level_sum;
    }
    Ok(total)
}

/// Weighted terms `(w_I, x_I)` of the dyadic Orlicz modular, so that the
/// modular of `f/k` is `Σ w_I Φ(x_I / k)`.
fn orlicz_terms(
    f: &BoundaryFunction,
    params: &TreeParams,
    energy: &EnergyParams,
    phi: &YoungPhi,
) -> Result<Vec<(f64, f64)>> {
    check_k(params, f)?;
    if phi.p() != energy.p {
        return Err(Error::InvalidParameter(format!(
            "energy exponent p = {} differs from the Young function's p = {}",
            energy.p,
            phi.p()
        )));
    }
    let eps = params.epsilon();
    let nu = BoundaryMeasure::new(f.k());
    let avg = f.averages();
    Ok(avg
        .differences()
        .filter(|(_, d)| *d != 0.0)
        .map(|(n, d)| {
            let nf = n as f64;
            let weight = (eps * nf * (energy.theta - 1.0) * energy.p).exp()
                * nf.powf(energy.lambda2)
                * nu.of_level(n);
            (weight, d.abs() * (eps * nf).exp())
        })
        .collect())
}

/// `Σ_{n=1}^N e^{εn(θ−1)p} n^{λ₂} Σ_{I ∈ Q_n} ν(I) Φ(|f_I − f_Î| / e^{-εn})`.
pub fn dyadic_orlicz_modular(
    f: &BoundaryFunction,
    params: &TreeParams,
    energy: &EnergyParams,
    phi: &YoungPhi,
) -> Result<f64> {
    Ok(orlicz_terms(f, params, energy, phi)?
        .iter()
        .map(|(w, x)| w * phi.eval_abs(*x))
        .sum())
}

/// Gauge `inf{k > 0 : modular(f/k) ≤ 1}` of the dyadic Orlicz modular.
pub fn orlicz_besov_seminorm(
    f: &BoundaryFunction,
    params: &TreeParams,
    energy: &EnergyParams,
    phi: &YoungPhi,
    tol: f64,
) -> Result<f64> {
    let terms = orlicz_terms(f, params, energy, phi)?;
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

/// `‖f‖_{L^Φ} + inf{k > 0 : modular(f/k) ≤ 1}`.
pub fn orlicz_besov_norm(
    f: &BoundaryFunction,
    params: &TreeParams,
    energy: &EnergyParams,
    phi: &YoungPhi,
    tol: f64,
) -> Result<f64> {
    Ok(f.orlicz_norm(phi, tol)? + orlicz_besov_seminorm(f, params, energy, phi, tol)?)
}

/// Fraction of cells with `|f_I − f_Î| > e^{-εn(θ+1)/2}`, the threshold that
/// splits the energy into large-jump and small-jump parts.
pub fn large_jump_fraction(f: &BoundaryFunction, params: &TreeParams, theta: f64) -> Result<f64> {
    check_k(params, f)?;
    let avg = f.averages();
    let (mut above, mut total) = (0usize, 0usize);
    for (n, d) in avg.differences() {
        total += 1;
        if d.abs() > (-params.epsilon() * n as f64 * (theta + 1.0) / 2.0).exp() {
            above += 1;
        }
    }
    Ok(if total == 0 {
        0.0
    } else {
        above as f64 / total as f64
    })
}

/// Default cap on ordered leaf pairs for exact double-integral evaluation.
pub const DEFAULT_PAIR_BUDGET: u128 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairMode {
    Exact { pair_budget: u128 },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for PairMode {
    fn default() -> Self {
        PairMode::Exact {
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Zero in exact mode.
    pub std_error: f64,
}

/// `∬ |f(ζ) − f(ξ)|^p / (d^{θp} ν(B(ζ, d))) dν dν`, with the ball of radius
/// `d(ζ, ξ)` taken as the cell of the split level containing `ζ`.
pub fn double_integral_energy(
    f: &BoundaryFunction,
    params: &TreeParams,
    theta: f64,
    p: f64,
    mode: PairMode,
) -> Result<Estimate> {
    check_k(params, f)?;
    let k = f.k();
    let n = f.depth();
    let leaves = f.values().len();
    let nu = BoundaryMeasure::new(k);
    let kernel: Vec<f64> = (0..n)
        .map(|j| 1.0 / (distance_at_split(params, j).powf(theta * p) * nu.of_level(j)))
        .collect();
    let vals = f.values();
    match mode {
        PairMode::Exact { pair_budget } => {
            let pairs = (leaves as u128) * (leaves as u128);
            if pairs > pair_budget {
                return Err(Error::PairBudget {
                    pairs,
                    budget: pair_budget,
                });
            }
            let leaf_nu = f.leaf_measure();
            let mut total = 0.0;
            // Pairs grouped by the node where their rays split.
            for (j, kern) in kernel.iter().enumerate() {
                let child_span = k.pow((n - j - 1) as u32);
                let node_span = child_span * k;
                let mut level_sum = 0.0;
                for node in 0..k.pow(j as u32) {
                    let base = node * node_span;
                    for c1 in 0..k {
                        for c2 in (c1 + 1)..k {
                            for a in 0..child_span {
                                let fa = vals[base + c1 * child_span + a];
                                for b in 0..child_span {
                                    let fb = vals[base + c2 * child_span + b];
                                    level_sum += (fa - fb).abs().powf(p);
                                }
                            }
                        }
                    }
                }
                total += 2.0 * leaf_nu * leaf_nu * kern * level_sum;
            }
            Ok(Estimate {
                value: total,
                std_error: 0.0,
            })
        }
        PairMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter("need at least two samples".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..samples {
                let a = rng.gen_range(0..leaves);
                let b = rng.gen_range(0..leaves);
                let h = if a == b {
                    0.0
                } else {
                    let j = split_of_indices(k, n, a, b);
                    (vals[a] - vals[b]).abs().powf(p) * kernel[j]
                };
                let delta = h - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (h - mean);
            }
            let var = m2 / (samples - 1) as f64;
            Ok(Estimate {
                value: mean,
                std_error: (var / samples as f64).sqrt(),
            })
        }
    }
}

/// Split level of two distinct leaf indices at depth `n`.
fn split_of_indices(k: usize, n: usize, mut a: usize, mut b: usize) -> usize {
    let mut level = n;
    while a != b {
        a /= k;
        b /= k;
        level -= 1;
    }
    level
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::GAUGE_TOL;
    use std::f64::consts::LN_2;

    fn binary(depth: usize) -> TreeParams {
        TreeParams::new(2, LN_2, 2.0 * LN_2, 0.0, depth, 8).unwrap()
    }

    fn sample() -> BoundaryFunction {
        BoundaryFunction::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(BoundaryFunction::new(2, 2, vec![0.0; 3]).is_err());
        assert!(BoundaryFunction::new(2, 1, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn cell_averages() {
        let f = sample();
        let cell = |d: &[u32]| DyadicCell::new(VertexAddress::new(d.to_vec()));
        assert_eq!(f.cell_average(&cell(&[0])).unwrap(), 0.5);
        assert_eq!(f.cell_average(&DyadicCell::whole()).unwrap(), 0.25);
        assert_eq!(f.cell_average(&cell(&[0, 0])).unwrap(), 1.0);
        assert!(f.cell_average(&cell(&[0, 0, 0])).is_err());
        let c = BoundaryFunction::constant(3, 3, 2.5).unwrap();
        for v in c.averages().into_levels().concat() {
            assert_eq!(v, 2.5);
        }
    }

    #[test]
    fn lp_and_orlicz_norms() {
        let f = BoundaryFunction::new(2, 1, vec![1.0, 0.0]).unwrap();
        assert!((f.lp_norm(2.0) - 0.5f64.sqrt()).abs() < 1e-15);
        let phi = YoungPhi::power(2.0).unwrap();
        assert!((f.orlicz_norm(&phi, GAUGE_TOL).unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
        let c = BoundaryFunction::constant(2, 3, -1.5).unwrap();
        assert!((c.lp_norm(3.0) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn dyadic_energy_hand_value() {
        let t = binary(2);
        let e = EnergyParams::new(0.5, 2.0, 0.0, 0.0).unwrap();
        let v = dyadic_energy(&sample(), &t, &e).unwrap();
        assert!((v - 5.0 / 8.0).abs() < 1e-12);
        assert_eq!(
            dyadic_energy(&BoundaryFunction::constant(2, 2, 4.0).unwrap(), &t, &e).unwrap(),
            0.0
        );
        let scaled = dyadic_energy(&sample().scaled(-3.0), &t, &e).unwrap();
        assert!((scaled - 9.0 * v).abs() < 1e-12);
    }

    #[test]
    fn orlicz_modular_single_level() {
        let t = binary(1);
        let e = EnergyParams::new(0.5, 2.0, 0.0, 0.0).unwrap();
        let phi = YoungPhi::new(2.0, 1.0).unwrap();
        let f = BoundaryFunction::new(2, 1, vec![1.0, 0.0]).unwrap();
        // Weight e^{ε(θ−1)p} = 1/2, jumps |Δ| = 1/2 scaled by e^{ε} = 2, two cells of mass 1/2.
        let expected = 0.5 * (2.0 * 0.5 * phi.eval(1.0).unwrap());
        let got = dyadic_orlicz_modular(&f, &t, &e, &phi).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.5 * (std::f64::consts::E + 1.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn double_integral_two_leaves() {
        let t = binary(1);
        let f = BoundaryFunction::new(2, 1, vec![1.0, 0.0]).unwrap();
        let v = double_integral_energy(&f, &t, 0.5, 2.0, PairMode::default()).unwrap();
        assert!((v.value - LN_2 / 4.0).abs() < 1e-12);
        let mc = double_integral_energy(
            &f,
            &t,
            0.5,
            2.0,
            PairMode::MonteCarlo {
                samples: 100_000,
                seed: 7,
            },
        )
        .unwrap();
        assert!((mc.value - v.value).abs() <= 3.0 * mc.std_error);
    }

    #[test]
    fn pair_budget_enforced() {
        let t = binary(8);
        let f = BoundaryFunction::constant(2, 8, 1.0).unwrap();
        assert!(matches!(
            double_integral_energy(&f, &t, 0.5, 2.0, PairMode::default()),
            Err(Error::PairBudget { .. })
        ));
    }

    #[test]
    fn split_of_indices_matches_addresses() {
        for a in 0..27 {
            for b in 0..27 {
                if a != b {
                    let x = VertexAddress::from_index(3, 3, a);
                    let y = VertexAddress::from_index(3, 3, b);
                    assert_eq!(split_of_indices(3, 3, a, b), x.common_prefix_len(&y));
                }
            }
        }
    }

    #[test]
    fn csv_roundtrip() {
        let f =
            BoundaryFunction::new(3, 2, (0..9).map(|i| i as f64 * 0.1 - 0.3).collect()).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("K,N\n3,2\n00,"));
        assert_eq!(BoundaryFunction::read_csv(buf.as_slice()).unwrap(), f);
    }
}
