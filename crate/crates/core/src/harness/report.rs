//! Ratio statistics and pass/fail checks.

use std::io::Write;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSample {
    pub seed: u64,
    pub depth: usize,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

impl RatioSample {
    pub fn new(seed: u64, depth: usize, numerator: f64, denominator: f64) -> Self {
        Self {
            seed,
            depth,
            numerator,
            denominator,
            ratio: numerator / denominator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthAggregate {
    pub depth: usize,
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub name: String,
    /// Sorted by `(seed, depth)`.
    pub samples: Vec<RatioSample>,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub per_depth: Vec<DepthAggregate>,
    /// Least-squares slope of `ln(ratio)` against depth.
    pub slope: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

impl RatioReport {
    /// Rejects empty input and non-finite or nonpositive ratios.
    pub fn new(name: impl Into<String>, mut samples: Vec<RatioSample>) -> Result<Self> {
        let name = name.into();
        if samples.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "report `{name}` has no samples"
            )));
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !(s.ratio.is_finite() && s.ratio > 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "report `{name}`: ratio {} at seed {}, depth {}",
                s.ratio, s.seed, s.depth
            )));
        }
        samples.sort_by_key(|s| (s.seed, s.depth));
        let all = sorted(samples.iter().map(|s| s.ratio).collect());
        let mut depths: Vec<usize> = samples.iter().map(|s| s.depth).collect();
        depths.sort_unstable();
        depths.dedup();
        let per_depth = depths
            .iter()
            .map(|&d| {
                let r = sorted(
                    samples
                        .iter()
                        .filter(|s| s.depth == d)
                        .map(|s| s.ratio)
                        .collect(),
                );
                DepthAggregate {
                    depth: d,
                    count: r.len(),
                    min: r[0],
                    median: median(&r),
                    max: r[r.len() - 1],
                }
            })
            .collect();
        let slope = log_slope(&samples);
        Ok(Self {
            name,
            min: all[0],
            max: all[all.len() - 1],
            median: median(&all),
            per_depth,
            slope,
            samples,
        })
    }

    /// `max / min` over all samples.
    pub fn spread(&self) -> f64 {
        self.max / self.min
    }

    /// Slope of `ln(ratio)` within `±slope_tol` and spread at most
    /// `spread_max`.
    pub fn check(&self, slope_tol: f64, spread_max: f64) -> Check {
        let passed = self.slope.abs() <= slope_tol && self.spread() <= spread_max;
        Check::new(
            self.name.clone(),
            passed,
            format!(
                "min {:.4e} median {:.4e} max {:.4e} spread {:.3} slope {:+.4} (limits ±{slope_tol}, {spread_max})",
                self.min,
                self.median,
                self.max,
                self.spread(),
                self.slope
            ),
        )
    }
}

/// Least-squares slope of `ln(ratio)` on depth; zero for a single depth.
fn log_slope(samples: &[RatioSample]) -> f64 {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.depth as f64).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.ratio.ln()).sum::<f64>() / n;
    let (sxy, sxx) = samples.iter().fold((0.0, 0.0), |(a, b), s| {
        let dx = s.depth as f64 - mx;
        (a + dx * (s.ratio.ln() - my), b + dx * dx)
    });
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub name: String,
    pub reports: Vec<RatioReport>,
    pub checks: Vec<Check>,
    /// Reported but not asserted.
    pub diagnostics: Vec<Check>,
}

impl Outcome {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
        }
        for d in &self.diagnostics {
            s.push_str(&format!("INFO {}: {}\n", d.name, d.detail));
        }
        s
    }

    /// One row per `(report, seed, depth)`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "report",
            "seed",
            "depth",
            "numerator",
            "denominator",
            "ratio",
        ])?;
        for r in &self.reports {
            for s in &r.samples {
                out.write_record([
                    r.name.clone(),
                    s.seed.to_string(),
                    s.depth.to_string(),
                    format!("{:e}", s.numerator),
                    format!("{:e}", s.denominator),
                    format!("{:e}", s.ratio),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// `(series, x = depth, y = ratio)` rows for external plotting.
    pub fn write_plot_data<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["series", "x", "y"])?;
        for r in &self.reports {
            for s in &r.samples {
                out.write_record([
                    r.name.clone(),
                    s.depth.to_string(),
                    format!("{:e}", s.ratio),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        let samples = vec![
            RatioSample::new(1, 5, 4.0, 1.0),
            RatioSample::new(0, 4, 2.0, 1.0),
            RatioSample::new(0, 5, 4.0, 1.0),
            RatioSample::new(1, 4, 1.0, 1.0),
        ];
        let r = RatioReport::new("x", samples).unwrap();
        assert_eq!((r.samples[0].seed, r.samples[0].depth), (0, 4));
        assert_eq!((r.min, r.max, r.median), (1.0, 4.0, 3.0));
        assert_eq!(r.per_depth[0].median, 1.5);
        // ln ratios: depth 4 mean (ln2)/2, depth 5 mean ln4.
        let expected = 2f64.ln() * 1.5;
        assert!((r.slope - expected).abs() < 1e-12);
        assert_eq!(r.spread(), 4.0);
        assert!(!r.check(0.1, 100.0).passed);
    }

    #[test]
    fn constant_ratios_pass() {
        let samples = (0..10)
            .map(|s| RatioSample::new(s, 4 + (s as usize % 3), 3.0, 2.0))
            .collect();
        let r = RatioReport::new("flat", samples).unwrap();
        assert!(r.slope.abs() < 1e-12);
        assert!(r.check(0.1, 100.0).passed);
    }

    #[test]
    fn rejects_bad_ratios() {
        assert!(RatioReport::new("e", vec![]).is_err());
        assert!(RatioReport::new("z", vec![RatioSample::new(0, 1, 1.0, 0.0)]).is_err());
    }
}
