//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::boundary_norms::{EnergyParams, DEFAULT_PAIR_BUDGET};
use crate::harness::generate::Family;
use crate::tree::TreeParams;
use crate::young::{YoungPhi, GAUGE_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub lambda2: f64,
    /// Overrides the minimal admissible `C` when set.
    pub c_const: Option<f64>,
    pub quad_order: usize,
    pub p: f64,
    pub lambda1: f64,
    /// Smoothness exponent; defaults to `1 − (β − log K)/(εp)`.
    pub theta: Option<f64>,
    /// Exponent of the dyadic energy; defaults to `λ₁ + λ₂`.
    pub lambda: Option<f64>,
    pub family: Family,
    pub seeds: Vec<u64>,
    pub depths: Vec<usize>,
    pub gauge_tol: f64,
    pub slope_tol: f64,
    pub spread_max: f64,
    /// Allowed `max/min` of sampled doubling suprema between depths `N, N+2`.
    pub doubling_factor: f64,
    pub doubling_centers: usize,
    pub doubling_radii: usize,
    pub pair_budget: u128,
    pub mc_samples: usize,
    /// Deepest level at which the Hajłasz program is solved.
    pub hajlasz_max_depth: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ln2 = std::f64::consts::LN_2;
        Self {
            k: 2,
            epsilon: ln2,
            beta: 2.0 * ln2,
            lambda2: 0.0,
            c_const: None,
            quad_order: TreeParams::DEFAULT_QUAD_ORDER,
            p: 2.0,
            lambda1: 0.0,
            theta: None,
            lambda: None,
            family: Family::IidUniform,
            seeds: (0..20).collect(),
            depths: (4..=8).collect(),
            gauge_tol: GAUGE_TOL,
            slope_tol: 0.1,
            spread_max: 100.0,
            doubling_factor: 1.5,
            doubling_centers: 100,
            doubling_radii: 12,
            pair_budget: DEFAULT_PAIR_BUDGET,
            mc_samples: 100_000,
            hajlasz_max_depth: 6,
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse `{v}` for key `{key}`")))
}

/// `a..b`, `a..=b` or a comma-separated list of nonnegative integers.
pub fn parse_list(key: &str, v: &str) -> Result<Vec<u64>> {
    let v = v.trim();
    if let Some((a, b)) = v.split_once("..=") {
        let (a, b): (u64, u64) = (parse_num(key, a.trim())?, parse_num(key, b.trim())?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (parse_num(key, a.trim())?, parse_num(key, b.trim())?);
        return Ok((a..b).collect());
    }
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s.trim()))
        .collect()
}

impl ExperimentConfig {
    /// Reads `key = value` lines; `#` starts a comment. Unknown keys are
    /// rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut cfg = Self::default();
        for (key, v) in &map {
            cfg.set(key, v)?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "K" | "k" => self.k = parse_num(key, v)?,
            "epsilon" => self.epsilon = parse_expr(key, v)?,
            "beta" => self.beta = parse_expr(key, v)?,
            "lambda2" => self.lambda2 = parse_expr(key, v)?,
            "c_const" => self.c_const = Some(parse_expr(key, v)?),
            "quad_order" => self.quad_order = parse_num(key, v)?,
            "p" => self.p = parse_expr(key, v)?,
            "lambda1" => self.lambda1 = parse_expr(key, v)?,
            "theta" => self.theta = Some(parse_expr(key, v)?),
            "lambda" => self.lambda = Some(parse_expr(key, v)?),
            "family" => self.family = v.parse()?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "depths" => {
                self.depths = parse_list(key, v)?
                    .into_iter()
                    .map(|d| d as usize)
                    .collect()
            }
            "gauge_tol" => self.gauge_tol = parse_num(key, v)?,
            "slope_tol" => self.slope_tol = parse_num(key, v)?,
            "spread_max" => self.spread_max = parse_num(key, v)?,
            "doubling_factor" => self.doubling_factor = parse_num(key, v)?,
            "doubling_centers" => self.doubling_centers = parse_num(key, v)?,
            "doubling_radii" => self.doubling_radii = parse_num(key, v)?,
            "pair_budget" => self.pair_budget = parse_num(key, v)?,
            "mc_samples" => self.mc_samples = parse_num(key, v)?,
            "hajlasz_max_depth" => self.hajlasz_max_depth = parse_num(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn tree_params(&self, depth: usize) -> Result<TreeParams> {
        let t = TreeParams::new(
            self.k,
            self.epsilon,
            self.beta,
            self.lambda2,
            depth,
            self.quad_order,
        )?;
        match self.c_const {
            Some(c) => t.with_c_const(c),
            None => Ok(t),
        }
    }

    pub fn phi(&self) -> Result<YoungPhi> {
        YoungPhi::new(self.p, self.lambda1)
    }

    /// `(β − log K)/ε`, the lower bound on `p`.
    pub fn critical_p(&self) -> f64 {
        (self.beta - (self.k as f64).ln()) / self.epsilon
    }

    /// `1 − (β − log K)/(εp)`.
    pub fn trace_theta(&self) -> f64 {
        1.0 - self.critical_p() / self.p
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or_else(|| self.trace_theta())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(self.lambda1 + self.lambda2)
    }

    pub fn energy_params(&self) -> Result<EnergyParams> {
        EnergyParams::new(self.theta(), self.p, self.lambda(), self.lambda2)
    }

    fn validate_common(&self) -> Result<()> {
        self.tree_params(1)?;
        self.phi()?;
        if self.seeds.is_empty() || self.depths.is_empty() {
            return Err(Error::Config("seeds and depths must be nonempty".into()));
        }
        if self.depths.contains(&0) {
            return Err(Error::Config("depths must be positive".into()));
        }
        Ok(())
    }

    /// Standing assumptions of the trace theorem: `p > (β − log K)/ε > 0`
    /// and `θ = 1 − (β − log K)/(εp)`.
    pub fn validate_trace_theorem(&self) -> Result<()> {
        self.validate_common()?;
        let crit = self.critical_p();
        if !(crit > 0.0) {
            return Err(Error::Hypothesis(format!(
                "(beta - log K)/epsilon = {crit} must be positive"
            )));
        }
        if !(self.p > crit) {
            return Err(Error::Hypothesis(format!(
                "p = {} must exceed (beta - log K)/epsilon = {crit}",
                self.p
            )));
        }
        if let Some(t) = self.theta {
            if (t - self.trace_theta()).abs() > 1e-12 {
                return Err(Error::Hypothesis(format!(
                    "theta = {t} differs from 1 - (beta - log K)/(epsilon p) = {}",
                    self.trace_theta()
                )));
            }
        }
        Ok(())
    }

    /// Assumptions of the modular comparison: `λ₁ + λ₂ = λ`, `0 < θ < 1`.
    pub fn validate_equivalence(&self) -> Result<()> {
        self.validate_common()?;
        if (self.lambda() - self.lambda1 - self.lambda2).abs() > 1e-12 {
            return Err(Error::Hypothesis(format!(
                "lambda = {} must equal lambda1 + lambda2 = {}",
                self.lambda(),
                self.lambda1 + self.lambda2
            )));
        }
        let t = self.theta();
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Hypothesis(format!("theta = {t} must lie in (0, 1)")));
        }
        Ok(())
    }
}

/// A number, optionally written as a multiple of `ln2` or `ln3`
/// (e.g. `1.5*ln2`).
fn parse_expr(key: &str, v: &str) -> Result<f64> {
    let v = v.trim();
    let consts = [("ln2", std::f64::consts::LN_2), ("ln3", 3f64.ln())];
    for (name, c) in consts {
        if v == name {
            return Ok(c);
        }
        if let Some(coef) = v
            .strip_suffix(name)
            .and_then(|s| s.trim().strip_suffix('*'))
        {
            return Ok(parse_num::<f64>(key, coef.trim())? * c);
        }
    }
    parse_num(key, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn parses_flat_file() {
        let cfg = ExperimentConfig::parse(
            "# trace run\nK = 3\nepsilon = 1.0\nbeta = 2*ln3\np = 2.5 # exponent\nseeds = 0..5\ndepths = 2,3,4\nfamily = lacunary\n",
        )
        .unwrap();
        assert_eq!(cfg.k, 3);
        assert!((cfg.beta - 2.0 * 3f64.ln()).abs() < 1e-15);
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.depths, vec![2, 3, 4]);
        assert_eq!(cfg.family, Family::Lacunary);
        assert_eq!(parse_list("d", "4..=6").unwrap(), vec![4, 5, 6]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(ExperimentConfig::parse("nope = 1").is_err());
        assert!(ExperimentConfig::parse("just text").is_err());
        assert!(ExperimentConfig::parse("family = brownian").is_err());
    }

    #[test]
    fn theorem_hypotheses() {
        let mut cfg = ExperimentConfig::default();
        assert!((cfg.trace_theta() - 0.5).abs() < 1e-15);
        cfg.validate_trace_theorem().unwrap();
        cfg.p = 1.0;
        cfg.lambda1 = 1.0;
        assert!(matches!(
            cfg.validate_trace_theorem(),
            Err(Error::Hypothesis(_))
        ));
        cfg.beta = 1.5 * LN_2;
        cfg.validate_trace_theorem().unwrap();
        cfg.theta = Some(0.3);
        assert!(cfg.validate_trace_theorem().is_err());
    }

    #[test]
    fn lambda_sum_hypothesis() {
        let mut cfg = ExperimentConfig {
            lambda1: 1.0,
            lambda2: -0.5,
            ..Default::default()
        };
        cfg.validate_equivalence().unwrap();
        cfg.lambda = Some(2.0);
        assert!(matches!(
            cfg.validate_equivalence(),
            Err(Error::Hypothesis(_))
        ));
    }
}
