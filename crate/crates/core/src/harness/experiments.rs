//! Experiment drivers. Each returns an [`Outcome`] whose asserted checks
//! decide the exit status of the command line tool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boundary::{ahlfors_ratio, DyadicCell};
use crate::boundary_norms::{
    double_integral_energy, dyadic_energy, dyadic_orlicz_modular, large_jump_fraction,
    orlicz_besov_norm, BoundaryFunction, EnergyParams, PairMode,
};
use crate::hajlasz::{HajlaszInstance, SolverConfig};
use crate::harness::config::ExperimentConfig;
use crate::harness::generate::{generate, generate_boundary, Family, GenParams};
use crate::harness::report::{Check, Outcome, RatioReport, RatioSample};
use crate::operators::{extend, trace};
use crate::tree::{TreeParams, TreePoint, VertexAddress};
use crate::young::log_grid;
use crate::{Error, Result};

fn gen_params(cfg: &ExperimentConfig, depth: usize) -> GenParams {
    GenParams {
        k: cfg.k,
        depth,
        epsilon: cfg.epsilon,
        theta: cfg.theta(),
    }
}

/// `(depth, seed)` pairs in a fixed order.
fn jobs(cfg: &ExperimentConfig) -> Vec<(usize, u64)> {
    cfg.depths
        .iter()
        .flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s)))
        .collect()
}

fn run<T, F>(jobs: &[(usize, u64)], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    jobs.par_iter().map(|&(d, s)| f(d, s)).collect()
}

fn require_boundary_family(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.family.is_boundary() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "family {} does not produce boundary functions",
            cfg.family
        )))
    }
}

fn checked(outcome: &mut Outcome, report: RatioReport, cfg: &ExperimentConfig) {
    outcome
        .checks
        .push(report.check(cfg.slope_tol, cfg.spread_max));
    outcome.reports.push(report);
}

/// `‖Tr F‖_B / ‖F‖_{N^{1,Φ}}` over sampled tree functions.
pub fn verify_trace_bound(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate_trace_theorem()?;
    let phi = cfg.phi()?;
    let energy = cfg.energy_params()?;
    let tol = cfg.gauge_tol;
    let samples = run(&jobs(cfg), |depth, seed| {
        let params = cfg.tree_params(depth)?;
        let f = generate(cfg.family, &gen_params(cfg, depth), seed)?.into_tree();
        let num = orlicz_besov_norm(&trace(&f), &params, &energy, &phi, tol)?;
        let den = f.newtonian_norm(&params, &phi, tol)?;
        Ok(RatioSample::new(seed, depth, num, den))
    })?;
    let mut out = Outcome::new("trace-bound");
    checked(&mut out, RatioReport::new("trace/newtonian", samples)?, cfg);
    Ok(out)
}

/// `‖Eu‖_{N^{1,Φ}} / ‖u‖_B`, plus the edge-sum identity comparing the
/// gradient modular of `Eu` with the dyadic modular of `u`.
pub fn verify_extension_bound(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate_trace_theorem()?;
    require_boundary_family(cfg)?;
    let phi = cfg.phi()?;
    let energy = cfg.energy_params()?;
    let tol = cfg.gauge_tol;
    let rows = run(&jobs(cfg), |depth, seed| {
        let params = cfg.tree_params(depth)?;
        let u = generate_boundary(cfg.family, &gen_params(cfg, depth), seed)?;
        let f = extend(&u);
        let norm = RatioSample::new(
            seed,
            depth,
            f.newtonian_norm(&params, &phi, tol)?,
            orlicz_besov_norm(&u, &params, &energy, &phi, tol)?,
        );
        let modular = dyadic_orlicz_modular(&u, &params, &energy, &phi)?;
        let identity = (modular > 0.0)
            .then(|| f.gradient_modular(&params, &phi, 1.0))
            .transpose()?
            .map(|g| RatioSample::new(seed, depth, g, modular));
        Ok((norm, identity))
    })?;
    let (norms, identities): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mut out = Outcome::new("extension-bound");
    checked(&mut out, RatioReport::new("newtonian/besov", norms)?, cfg);
    let identities: Vec<_> = identities.into_iter().flatten().collect();
    if !identities.is_empty() {
        checked(
            &mut out,
            RatioReport::new("gradient-modular/dyadic-modular", identities)?,
            cfg,
        );
    }
    Ok(out)
}

/// Constants `(C, C′)` fitted on `(modular, energy)` pairs: `C` is the
/// largest ratio either way, `C′` the largest excess over `C ·` the other
/// side on the side carrying the additive constant.
pub fn fit_two_sided(pairs: &[(f64, f64)], lambda1: f64) -> (f64, f64) {
    let c = pairs
        .iter()
        .map(|&(m, e)| f64::max(m / e, e / m))
        .fold(1.0, f64::max);
    let c_prime = pairs
        .iter()
        .map(|&(m, e)| if lambda1 >= 0.0 { e - c * m } else { m - c * e })
        .fold(0.0, f64::max);
    (c, c_prime)
}

/// Whether `(modular, energy)` satisfies the two-sided bound with `(C, C′)`.
pub fn two_sided_holds(modular: f64, energy: f64, c: f64, c_prime: f64, lambda1: f64) -> bool {
    if lambda1 >= 0.0 {
        modular <= c * energy && energy <= c * modular + c_prime
    } else {
        energy <= c * modular && modular <= c * energy + c_prime
    }
}

/// Norm comparisons on the boundary: double-integral and Hajłasz energies
/// against the dyadic energy, and the Orlicz modular against the weighted
/// dyadic energy.
pub fn verify_equivalences(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate_equivalence()?;
    require_boundary_family(cfg)?;
    let phi = cfg.phi()?;
    let theta = cfg.theta();
    let p = cfg.p;
    let plain = EnergyParams::new(theta, p, 0.0, cfg.lambda2)?;
    let weighted = cfg.energy_params()?;
    let tol = cfg.gauge_tol;
    let solver = SolverConfig::default();

    struct Row {
        seed: u64,
        depth: usize,
        plain: f64,
        double: f64,
        hajlasz: Option<f64>,
        modular: f64,
        energy: f64,
        besov: f64,
        composite: f64,
        chi: f64,
    }

    let rows = run(&jobs(cfg), |depth, seed| {
        let params = cfg.tree_params(depth)?;
        let u = generate_boundary(cfg.family, &gen_params(cfg, depth), seed)?;
        let leaves = u.values().len() as u128;
        let mode = if leaves * leaves <= cfg.pair_budget {
            PairMode::Exact {
                pair_budget: cfg.pair_budget,
            }
        } else {
            PairMode::MonteCarlo {
                samples: cfg.mc_samples,
                seed,
            }
        };
        let hajlasz = if depth <= cfg.hajlasz_max_depth {
            Some(
                HajlaszInstance::new(u.clone(), &params, theta, p)?
                    .energy(&solver)?
                    .value,
            )
        } else {
            None
        };
        let energy = dyadic_energy(&u, &params, &weighted)?;
        Ok(Row {
            seed,
            depth,
            plain: dyadic_energy(&u, &params, &plain)?,
            double: double_integral_energy(&u, &params, theta, p, mode)?.value,
            hajlasz,
            modular: dyadic_orlicz_modular(&u, &params, &weighted, &phi)?,
            energy,
            besov: orlicz_besov_norm(&u, &params, &weighted, &phi, tol)?,
            composite: u.orlicz_norm(&phi, tol)? + energy.powf(1.0 / p),
            chi: large_jump_fraction(&u, &params, theta)?,
        })
    })?;

    let mut out = Outcome::new("equivalence");
    let pick =
        |f: &dyn Fn(&Row) -> Option<RatioSample>| rows.iter().filter_map(f).collect::<Vec<_>>();
    checked(
        &mut out,
        RatioReport::new(
            "double-integral/dyadic",
            pick(&|r| Some(RatioSample::new(r.seed, r.depth, r.double, r.plain))),
        )?,
        cfg,
    );
    let hajlasz = pick(&|r| {
        r.hajlasz
            .map(|h| RatioSample::new(r.seed, r.depth, h, r.plain))
    });
    if !hajlasz.is_empty() {
        checked(&mut out, RatioReport::new("hajlasz/dyadic", hajlasz)?, cfg);
    }
    let modular = RatioReport::new(
        "modular/energy",
        pick(&|r| Some(RatioSample::new(r.seed, r.depth, r.modular, r.energy))),
    )?;
    if cfg.lambda1 == 0.0 {
        let worst = modular
            .samples
            .iter()
            .map(|s| (s.ratio - 1.0).abs())
            .fold(0.0, f64::max);
        out.checks.push(Check::new(
            "modular=energy",
            worst <= 1e-12,
            format!("max |ratio - 1| = {worst:.3e}"),
        ));
    } else {
        out.checks.push(lemma_fit_check(
            &rows
                .iter()
                .map(|r| (r.depth, r.modular, r.energy))
                .collect::<Vec<_>>(),
            cfg.lambda1,
        ));
    }
    out.diagnostics
        .push(modular.check(cfg.slope_tol, cfg.spread_max));
    out.reports.push(modular);
    let composite = RatioReport::new(
        "besov-norm/composite",
        pick(&|r| Some(RatioSample::new(r.seed, r.depth, r.besov, r.composite))),
    )?;
    out.diagnostics
        .push(composite.check(cfg.slope_tol, cfg.spread_max));
    out.reports.push(composite);
    for &d in &cfg.depths {
        let fr: Vec<f64> = rows
            .iter()
            .filter(|r| r.depth == d)
            .map(|r| r.chi)
            .collect();
        let mean = fr.iter().sum::<f64>() / fr.len() as f64;
        out.diagnostics.push(Check::new(
            format!("large-jump fraction N={d}"),
            true,
            format!("mean {mean:.4}"),
        ));
    }
    Ok(out)
}

/// Fits `(C, C′)` at the shallowest depth and validates every deeper sample
/// with `C` doubled.
fn lemma_fit_check(rows: &[(usize, f64, f64)], lambda1: f64) -> Check {
    let Some(first) = rows.iter().map(|r| r.0).min() else {
        return Check::new("two-sided fit", false, "no samples");
    };
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.0 == first)
        .map(|r| (r.1, r.2))
        .collect();
    let (c, c_prime) = fit_two_sided(&fit, lambda1);
    let deeper: Vec<_> = rows.iter().filter(|r| r.0 > first).collect();
    let failures = deeper
        .iter()
        .filter(|r| !two_sided_holds(r.1, r.2, 2.0 * c, c_prime, lambda1))
        .count();
    Check::new(
        "two-sided fit",
        failures == 0 && !deeper.is_empty(),
        format!(
            "C = {c:.4}, C' = {c_prime:.3e} fitted at N={first}; {failures} of {} deeper samples violate",
            deeper.len()
        ),
    )
}

/// `Tr ∘ E = Id` and linearity of both operators, for every boundary family.
pub fn verify_roundtrip(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut worst_roundtrip: f64 = 0.0;
    let mut worst_linear: f64 = 0.0;
    let mut count = 0;
    for family in Family::BOUNDARY {
        let errs = run(&jobs(cfg), |depth, seed| {
            let gp = gen_params(cfg, depth);
            let u = generate_boundary(family, &gp, seed)?;
            let v = generate_boundary(Family::IidUniform, &gp, seed ^ 0x9e37_79b9_7f4a_7c15)?;
            let back = trace(&extend(&u));
            let rt = max_diff(back.values(), u.values());
            let (a, b) = (0.75, -1.5);
            let lhs = extend(&u.combine(a, &v, b)?);
            let rhs = extend(&u).combine(a, &extend(&v), b)?;
            let lin_e = lhs
                .levels()
                .iter()
                .zip(rhs.levels())
                .map(|(x, y)| max_diff(x, y))
                .fold(0.0, f64::max);
            let lin_t = max_diff(trace(&lhs).values(), trace(&rhs).values());
            Ok((rt, lin_e.max(lin_t)))
        })?;
        for (rt, lin) in errs {
            worst_roundtrip = worst_roundtrip.max(rt);
            worst_linear = worst_linear.max(lin);
            count += 1;
        }
    }
    let mut out = Outcome::new("roundtrip");
    out.checks.push(Check::new(
        "trace(extend(u)) = u",
        worst_roundtrip <= 1e-12,
        format!("{count} functions, max error {worst_roundtrip:.3e}"),
    ));
    out.checks.push(Check::new(
        "linearity",
        worst_linear <= 1e-12,
        format!("max error {worst_linear:.3e}"),
    ));
    Ok(out)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Sampled `sup μ(B(x, 2r)) / μ(B(x, r))` on the depth-`N` truncation.
///
/// Centers are uniform in the level parameter on a random edge; radii run
/// over a log grid from a fraction of the deepest edge length to the
/// diameter.
pub fn doubling_sup(params: &TreeParams, centers: usize, radii: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.depth();
    let eps = params.epsilon();
    let r_max = 2.0 / eps;
    let r_min = 1e-2 * params.edge_length(n - 1)?;
    let grid = log_grid(r_min, r_max, radii.max(2));
    let points: Vec<TreePoint> = (0..centers)
        .map(|_| {
            let level = rng.gen_range(1..=n);
            let digits = (0..level)
                .map(|_| rng.gen_range(0..params.k() as u32))
                .collect();
            TreePoint::on_edge(VertexAddress::new(digits), rng.gen::<f64>())
        })
        .collect::<Result<_>>()?;
    let sups = points
        .par_iter()
        .map(|x| {
            grid.iter().try_fold(0.0f64, |acc, &r| {
                let small = params.ball_measure(x, r)?;
                let big = params.ball_measure(x, 2.0 * r)?;
                Ok(if small > 0.0 {
                    acc.max(big / small)
                } else {
                    acc
                })
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sups.into_iter().fold(0.0, f64::max))
}

/// Doubling suprema at every configured depth; depths `N` and `N + 2` must
/// agree within `doubling_factor`.
pub fn verify_doubling(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let mut sups = Vec::new();
    for &d in &cfg.depths {
        let params = cfg.tree_params(d)?;
        sups.push((
            d,
            doubling_sup(&params, cfg.doubling_centers, cfg.doubling_radii, seed)?,
        ));
    }
    let mut out = Outcome::new("doubling");
    for &(d, s) in &sups {
        if let Some(&(_, s2)) = sups.iter().find(|(d2, _)| *d2 == d + 2) {
            let factor = s.max(s2) / s.min(s2);
            out.checks.push(Check::new(
                format!("doubling N={d} vs N={}", d + 2),
                s.is_finite() && s2.is_finite() && factor <= cfg.doubling_factor,
                format!(
                    "sup {s:.4} vs {s2:.4}, factor {factor:.4} (limit {})",
                    cfg.doubling_factor
                ),
            ));
        }
    }
    if out.checks.is_empty() {
        out.checks.push(Check::new(
            "doubling finite",
            sups.iter().all(|(_, s)| s.is_finite()),
            "no depth pair N, N+2 configured",
        ));
    }
    out.reports.push(RatioReport::new(
        "doubling-sup",
        sups.iter()
            .map(|&(d, s)| RatioSample::new(seed, d, s, 1.0))
            .collect(),
    )?);
    Ok(out)
}

/// `ν(I)/diam(I)^Q` over every cell of every level up to each depth.
pub fn verify_ahlfors(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut cells = 0usize;
    let mut reference = f64::NAN;
    for &d in &cfg.depths {
        let params = cfg.tree_params(d)?;
        reference = (params.epsilon() / 2.0).powf(params.dimension());
        for level in 0..=d {
            for i in 0..params.level_size(level) {
                let r = ahlfors_ratio(&params, &DyadicCell::from_index(cfg.k, level, i));
                worst = worst.max((r / reference - 1.0).abs());
                cells += 1;
            }
        }
    }
    let mut out = Outcome::new("ahlfors");
    out.checks.push(Check::new(
        "ahlfors ratio constant",
        worst <= 1e-12,
        format!("{cells} cells, ratio {reference:.12}, max relative deviation {worst:.3e}"),
    ));
    Ok(out)
}

/// Dyadic energy of a boundary function at the configured parameters.
pub fn boundary_energy(cfg: &ExperimentConfig, u: &BoundaryFunction) -> Result<f64> {
    dyadic_energy(u, &cfg.tree_params(u.depth())?, &cfg.energy_params()?)
}
