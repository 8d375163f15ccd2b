use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mixcara::conegeo::{hankel_classify, represent_with_prescribed_component, stieltjes_classify};
use mixcara::harness::{run_experiment, ExperimentConfig};
use mixcara::jacobian::{estimate_rank_number, RankFamily, RankSampling};
use mixcara::moments::{dirac_moments, mixture_moments};
use mixcara::recover::recover;
use mixcara::reduce::{reduce_atoms, reduce_mixture_components};
use mixcara::{
    AtomicMeasure, Engine, MixtureKind, MixtureMeasure, MomentVector, MonomialBasis, RecoveryConfig,
};

/// Truncated moments, rank bounds and few-component recovery for Dirac, Gaussian and log-normal mixtures.
#[derive(Parser)]
#[command(name = "mixcara", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Moment vector of an atomic measure or a mixture.
    Moments {
        #[command(flatten)]
        basis: BasisArgs,
        /// JSON file holding an atomic measure or a mixture.
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Randomized estimate of the smallest k whose Jacobian is generically onto.
    Rank {
        #[command(flatten)]
        basis: BasisArgs,
        #[arg(long, value_enum, default_value_t = Family::Dirac)]
        family: Family,
        /// Largest k to test; defaults to the basis size.
        #[arg(long)]
        max_k: Option<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        rel_tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Carathéodory reduction to at most m components.
    Reduce {
        #[command(flatten)]
        basis: BasisArgs,
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Interior / boundary / exterior test for moments over {1, x, ..., x^d}.
    Classify {
        #[arg(long)]
        moments: PathBuf,
        #[arg(long, value_enum, default_value_t = Support::Real)]
        support: Support,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Representation that contains a prescribed component.
    Prescribe {
        #[arg(long)]
        moments: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long)]
        sigma0: f64,
        #[arg(long, value_enum, default_value_t = Kind::Gaussian)]
        kind: Kind,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recover a mixture from a moment vector.
    Recover {
        #[arg(long)]
        moments: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::SharedSigma)]
        engine: EngineArg,
        #[arg(long, value_enum, default_value_t = Kind::Gaussian)]
        kind: Kind,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fit one σ per component (lm engine only).
        #[arg(long)]
        free_sigma: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a bound-checking experiment; exit status 0 if the bound held, 2 if not.
    VerifyBounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the CSV and JSON reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BasisArgs {
    /// JSON basis file, e.g. {"n":1,"exponents":[[0],[2],[3]]}.
    #[arg(long, conflicts_with_all = ["degree", "exponents"])]
    basis: Option<PathBuf>,
    /// All monomials of total degree at most d in `vars` variables.
    #[arg(long, conflicts_with = "exponents")]
    degree: Option<u32>,
    #[arg(long, default_value_t = 1, requires = "degree")]
    vars: usize,
    /// Univariate exponents, e.g. 0,2,3,5,6.
    #[arg(long, value_delimiter = ',')]
    exponents: Option<Vec<u32>>,
}

impl BasisArgs {
    fn resolve(&self) -> Result<MonomialBasis> {
        if let Some(path) = &self.basis {
            return serde_json::from_str(&read(path)?)
                .with_context(|| format!("parsing basis {}", path.display()));
        }
        if let Some(d) = self.degree {
            return Ok(MonomialBasis::total_degree(self.vars, d)?);
        }
        if let Some(e) = &self.exponents {
            return Ok(MonomialBasis::univariate(e)?);
        }
        bail!("give one of --basis, --degree or --exponents")
    }
}

#[derive(Args)]
struct OutArgs {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl OutArgs {
    fn emit<T: Serialize>(&self, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        match &self.output {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Dirac,
    Gaussian,
    Lognormal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Support {
    Real,
    Positive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gaussian,
    Lognormal,
}

impl From<Kind> for MixtureKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Gaussian => MixtureKind::Gaussian,
            Kind::Lognormal => MixtureKind::Lognormal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    SharedSigma,
    Homotopy,
    Lm,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::SharedSigma => Engine::SharedSigma,
            EngineArg::Homotopy => Engine::Homotopy,
            EngineArg::Lm => Engine::Lm,
        }
    }
}

enum Measure {
    Atomic(AtomicMeasure),
    Mixture(MixtureMeasure),
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_measure(path: &Path) -> Result<Measure> {
    let value: serde_json::Value = serde_json::from_str(&read(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    if value.get("components").is_some() {
        Ok(Measure::Mixture(serde_json::from_value(value)?))
    } else {
        Ok(Measure::Atomic(serde_json::from_value(value)?))
    }
}

fn read_moments(path: &Path) -> Result<MomentVector> {
    serde_json::from_str(&read(path)?)
        .with_context(|| format!("parsing moment vector {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Moments {
            basis,
            measure,
            out,
        } => {
            let basis = basis.resolve()?;
            let s = match read_measure(&measure)? {
                Measure::Atomic(mu) => dirac_moments(&basis, &mu)?,
                Measure::Mixture(mu) => mixture_moments(&basis, &mu)?,
            };
            out.emit(&s)?;
        }
        Command::Rank {
            basis,
            family,
            max_k,
            trials,
            seed,
            rel_tol,
            out,
        } => {
            let basis = basis.resolve()?;
            let family = match family {
                Family::Dirac => RankFamily::Dirac,
                Family::Gaussian => RankFamily::Gaussian,
                Family::Lognormal => RankFamily::Lognormal,
            };
            let cfg = RankSampling {
                rel_tol,
                ..RankSampling::default()
            };
            let est = estimate_rank_number(
                &basis,
                family,
                max_k.unwrap_or(basis.m()),
                trials,
                seed,
                &cfg,
            )?;
            out.emit(&est)?;
        }
        Command::Reduce {
            basis,
            measure,
            out,
        } => {
            let basis = basis.resolve()?;
            match read_measure(&measure)? {
                Measure::Atomic(mu) => out.emit(&reduce_atoms(&basis, &mu)?)?,
                Measure::Mixture(mu) => out.emit(&reduce_mixture_components(&basis, &mu)?)?,
            }
        }
        Command::Classify {
            moments,
            support,
            out,
        } => {
            let s = read_moments(&moments)?;
            let class = match support {
                Support::Real => hankel_classify(&s)?,
                Support::Positive => stieltjes_classify(&s)?,
            };
            out.emit(&class)?;
        }
        Command::Prescribe {
            moments,
            x0,
            sigma0,
            kind,
            out,
        } => {
            let s = read_moments(&moments)?;
            let engine = RecoveryConfig::new(Engine::SharedSigma, kind.into());
            out.emit(&represent_with_prescribed_component(
                &s,
                &[x0],
                sigma0,
                &engine,
            )?)?;
        }
        Command::Recover {
            moments,
            engine,
            kind,
            k,
            seed,
            free_sigma,
            out,
        } => {
            let s = read_moments(&moments)?;
            let mut cfg = RecoveryConfig::new(engine.into(), kind.into());
            cfg.k = k;
            cfg.seed = seed;
            cfg.free_sigma = free_sigma;
            let report = recover(&s, &cfg)?;
            out.emit(&report)?;
            if !report.success {
                return Ok(ExitCode::from(2));
            }
        }
        Command::VerifyBounds {
            config,
            trials,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::from_json(&read(&config)?)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.output = Some(dir);
            }
            let report = run_experiment(&cfg)?;
            let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
            let (csv, json) = report.write(&dir)?;
            eprintln!(
                "{}: {}/{} succeeded (rate {:.3}, threshold {:.2}); bound {}",
                report.experiment.name(),
                report.successes,
                report.trials,
                report.success_rate,
                report.threshold,
                if report.bound_held {
                    "held"
                } else {
                    "violated"
                }
            );
            eprintln!("wrote {} and {}", csv.display(), json.display());
            if !report.bound_held {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
