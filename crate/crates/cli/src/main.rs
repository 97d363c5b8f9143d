use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use treetrace::boundary_norms::{dyadic_orlicz_modular, orlicz_besov_norm, orlicz_besov_seminorm};
use treetrace::harness::{
    boundary_energy, generate, verify_ahlfors, verify_doubling, verify_equivalences,
    verify_extension_bound, verify_roundtrip, verify_trace_bound, ExperimentConfig, Family,
    GenParams, Generated, Outcome,
};
use treetrace::operators::{extend, trace};
use treetrace::{BoundaryFunction, TreeFunction};

#[derive(Parser)]
#[command(
    name = "treetrace",
    version,
    about = "Traces of Orlicz-Sobolev functions on rooted K-ary trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Dyadic energy, Orlicz modular and Besov norms of a boundary CSV.
    Energy {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Extend a boundary CSV to a tree CSV by cell averages.
    Extend {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Restrict a tree CSV to its bottom level.
    Trace {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a random function from one of the families.
    Gen {
        #[arg(long, default_value = "iid-uniform")]
        family: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment and check its asserted properties.
    Verify {
        kind: Kind,
        /// Run this seed only.
        #[arg(long)]
        seed: Option<u64>,
        /// Run this depth only.
        #[arg(long)]
        depth: Option<usize>,
        /// Also write `(series, x, y)` rows next to the CSV as `<out>.plot.csv`.
        #[arg(long)]
        emit_plot_data: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    TraceBound,
    ExtensionBound,
    Equivalence,
    Roundtrip,
    Doubling,
    Ahlfors,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ExperimentConfig::parse(&text)
                .with_context(|| format!("parsing {}", p.display()))?)
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn energy(input: &Path, common: &Common) -> anyhow::Result<bool> {
    let mut cfg = load_config(common.config.as_deref())?;
    let u = BoundaryFunction::read_csv(open(input)?)?;
    cfg.k = u.k();
    let params = cfg.tree_params(u.depth())?;
    let ep = cfg.energy_params()?;
    let phi = cfg.phi()?;
    let rows = [
        ("dyadic_energy", boundary_energy(&cfg, &u)?),
        (
            "orlicz_modular",
            dyadic_orlicz_modular(&u, &params, &ep, &phi)?,
        ),
        (
            "besov_seminorm",
            orlicz_besov_seminorm(&u, &params, &ep, &phi, cfg.gauge_tol)?,
        ),
        ("orlicz_norm", u.orlicz_norm(&phi, cfg.gauge_tol)?),
        (
            "besov_norm",
            orlicz_besov_norm(&u, &params, &ep, &phi, cfg.gauge_tol)?,
        ),
    ];
    let mut w = sink(common.out.as_deref())?;
    for (name, v) in rows {
        writeln!(w, "{name} = {v:.12e}")?;
    }
    w.flush()?;
    Ok(true)
}

fn gen(family: &str, seed: u64, depth: usize, common: &Common) -> anyhow::Result<bool> {
    let cfg = load_config(common.config.as_deref())?;
    let family: Family = family.parse()?;
    let gp = GenParams {
        k: cfg.k,
        depth,
        epsilon: cfg.epsilon,
        theta: cfg.theta(),
    };
    let w = sink(common.out.as_deref())?;
    match generate(family, &gp, seed)? {
        Generated::Boundary(u) => u.write_csv(w)?,
        Generated::Tree(f) => f.write_csv(w)?,
    }
    Ok(true)
}

fn plot_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".plot.csv");
    out.with_file_name(name)
}

fn verify(
    kind: Kind,
    seed: Option<u64>,
    depth: Option<usize>,
    emit_plot_data: bool,
    common: &Common,
) -> anyhow::Result<bool> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(d) = depth {
        cfg.depths = vec![d];
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    let outcome: Outcome = match kind {
        Kind::TraceBound => verify_trace_bound(&cfg)?,
        Kind::ExtensionBound => verify_extension_bound(&cfg)?,
        Kind::Equivalence => verify_equivalences(&cfg)?,
        Kind::Roundtrip => verify_roundtrip(&cfg)?,
        Kind::Doubling => verify_doubling(&cfg)?,
        Kind::Ahlfors => verify_ahlfors(&cfg)?,
    };
    print!("{}", outcome.summary());
    match &cfg.out {
        Some(out) => {
            outcome.write_csv(sink(Some(out))?)?;
            if emit_plot_data {
                outcome.write_plot_data(sink(Some(&plot_path(out)))?)?;
            }
        }
        None if emit_plot_data => bail!("--emit-plot-data needs --out"),
        None => {}
    }
    println!("{}", if outcome.passed() { "PASS" } else { "FAIL" });
    Ok(outcome.passed())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Energy { input, common } => energy(&input, &common),
        Command::Extend { input, common } => {
            let u = BoundaryFunction::read_csv(open(&input)?)?;
            extend(&u).write_csv(sink(common.out.as_deref())?)?;
            Ok(true)
        }
        Command::Trace { input, common } => {
            let f = TreeFunction::read_csv(open(&input)?)?;
            trace(&f).write_csv(sink(common.out.as_deref())?)?;
            Ok(true)
        }
        Command::Gen {
            family,
            seed,
            depth,
            common,
        } => gen(&family, seed, depth, &common),
        Command::Verify {
            kind,
            seed,
            depth,
            emit_plot_data,
            common,
        } => verify(kind, seed, depth, emit_plot_data, &common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
