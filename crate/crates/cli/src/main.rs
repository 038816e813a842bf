//! `osfield` command-line front end.

mod config;
mod error;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use osfield::harness::modulus::BandSplit;
use osfield::harness::Family;
use osfield::{ExponentSpec, ModelConfig};

use config::*;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "osfield", version, about = "Operator-scaling Gaussian random fields")]
struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (JSON or TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model config (JSON or TOML).
    #[arg(long, conflicts_with = "diag")]
    model: Option<PathBuf>,
    /// Diagonal exponent shorthand, e.g. `--diag 1.5,2.5`.
    #[arg(long, value_delimiter = ',')]
    diag: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report or data output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV trace output.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-metric radius and direction of each point of a CSV file.
    Tau {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Variogram, radius and comparability ratio of each lag of a CSV file.
    Variogram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lags: Option<PathBuf>,
    },
    /// Sample the field on a dyadic grid or an explicit point set.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<SimMethod>,
        #[arg(long)]
        freq_count: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run a verification experiment.
    Verify {
        #[command(subcommand)]
        verb: Verb,
    },
    /// Range, graph and level set dimensions.
    Dims {
        #[command(flatten)]
        common: Common,
        #[arg(long = "H", value_delimiter = ',')]
        h: Option<Vec<f64>>,
        #[arg(long = "d")]
        d: Option<u32>,
    },
    /// The curve integral `α(θ)` of the planar Jordan-cell example.
    Alpha {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        #[arg(long)]
        argmin: bool,
    },
}

#[derive(Subcommand)]
enum Verb {
    /// Conditional variance ratios on random and rescaled configurations
    Slnd {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        max_points: Option<usize>,
    },
    /// Uniform modulus of continuity on the dyadic grid
    Umc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        radii: Option<usize>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Local modulus at the origin, optionally with the band split
    Lil {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        smallest_ball: Option<usize>,
        #[arg(long)]
        radii: Option<usize>,
        #[arg(long)]
        replicas: Option<usize>,
        /// Also run the band decomposition with default parameters.
        #[arg(long)]
        band_split: bool,
    },
    /// Variogram scaling under `c^E`
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lags: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        factors: Option<Vec<f64>>,
    },
    /// Truncated spectral second moment against its bound
    Truncation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Anchors and curve laws of the planar Jordan cell
    #[command(alias = "example62")]
    PlanarCell {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: Option<f64>,
        /// Directional moduli for these families (diagonal, vertical, ray).
        #[arg(long, value_delimiter = ',', value_parser = parse_family)]
        directional: Option<Vec<Family>>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u32>>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Dimension formulas with the branch continuity sweep
    Dims {
        #[command(flatten)]
        common: Common,
        #[arg(long = "H", value_delimiter = ',')]
        h: Option<Vec<f64>>,
        #[arg(long = "d")]
        d: Option<u32>,
    },
}

fn parse_family(s: &str) -> Result<Family, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown family `{s}` (diagonal, vertical, ray)"))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Loads the config named by `--config` (or starts from `default`) and
/// applies the shared flag overrides.
fn base_config(common: &Common, default: Experiment) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg: ExperimentConfig = config::load(path)?;
            if cfg.experiment.kind() != default.kind() {
                return Err(CliError::Config(format!(
                    "{} describes a `{}` experiment, not `{}`",
                    path.display(),
                    cfg.experiment.kind(),
                    default.kind()
                )));
            }
            cfg
        }
        None => ExperimentConfig {
            model: None,
            experiment: default,
            seed: None,
            output: Output::default(),
        },
    };
    if let Some(path) = &common.model {
        cfg.model = Some(config::load::<ModelConfig>(path)?);
    }
    if let Some(a) = &common.diag {
        cfg.model = Some(ModelConfig::new(ExponentSpec::diagonal(a)?));
    }
    set(&mut cfg.seed, common.seed.map(Some));
    set(&mut cfg.output.path, common.out.clone().map(Some));
    set(&mut cfg.output.csv, common.csv.clone().map(Some));
    Ok(cfg)
}

macro_rules! with_params {
    ($cfg:expr, $variant:ident, |$p:ident| $body:block) => {
        if let Experiment::$variant($p) = &mut $cfg.experiment $body
    };
}

fn build(command: Command) -> CliResult<ExperimentConfig> {
    let cfg = match command {
        Command::Tau { common, points } => {
            let mut cfg = base_config(&common, Experiment::Tau(Default::default()))?;
            with_params!(cfg, Tau, |p| {
                set(&mut p.points, points.map(Some));
            });
            cfg
        }
        Command::Variogram { common, lags } => {
            let mut cfg = base_config(&common, Experiment::Variogram(Default::default()))?;
            with_params!(cfg, Variogram, |p| {
                set(&mut p.lags, lags.map(Some));
            });
            cfg
        }
        Command::Simulate {
            common,
            level,
            points,
            method,
            freq_count,
            format,
        } => {
            let mut cfg = base_config(&common, Experiment::Simulate(Default::default()))?;
            with_params!(cfg, Simulate, |p| {
                if level.is_some() || points.is_some() {
                    p.level = level;
                    p.points = points;
                }
                set(&mut p.method, method);
                set(&mut p.freq_count, freq_count);
                set(&mut p.format, format);
            });
            cfg
        }
        Command::Dims { common, h, d } => dims_config(&common, h, d)?,
        Command::Alpha {
            common,
            a,
            theta,
            argmin,
        } => {
            let mut cfg = base_config(&common, Experiment::Alpha(Default::default()))?;
            with_params!(cfg, Alpha, |p| {
                set(&mut p.a, a);
                set(&mut p.thetas, theta);
                p.argmin |= argmin;
            });
            cfg
        }
        Command::Verify { verb } => match verb {
            Verb::Slnd {
                common,
                count,
                max_points,
            } => {
                let mut cfg = base_config(&common, Experiment::Slnd(Default::default()))?;
                with_params!(cfg, Slnd, |p| {
                    set(&mut p.count, count);
                    set(&mut p.max_points, max_points);
                });
                cfg
            }
            Verb::Umc {
                common,
                level,
                radii,
                replicas,
            } => {
                let mut cfg = base_config(&common, Experiment::Umc(Default::default()))?;
                with_params!(cfg, Umc, |p| {
                    set(&mut p.level, level);
                    set(&mut p.radii, radii);
                    set(&mut p.replicas, replicas);
                });
                cfg
            }
            Verb::Lil {
                common,
                level,
                smallest_ball,
                radii,
                replicas,
                band_split,
            } => {
                let mut cfg = base_config(&common, Experiment::Lil(Default::default()))?;
                with_params!(cfg, Lil, |p| {
                    set(&mut p.level, level);
                    set(&mut p.smallest_ball, smallest_ball);
                    set(&mut p.radii, radii);
                    set(&mut p.replicas, replicas);
                    if band_split && p.band_split.is_none() {
                        p.band_split = Some(BandSplit::default());
                    }
                });
                cfg
            }
            Verb::Scaling { common, lags, factors } => {
                let mut cfg = base_config(&common, Experiment::Scaling(Default::default()))?;
                with_params!(cfg, Scaling, |p| {
                    set(&mut p.lags, lags);
                    set(&mut p.factors, factors);
                });
                cfg
            }
            Verb::Truncation { common, count } => {
                let mut cfg = base_config(&common, Experiment::Truncation(Default::default()))?;
                with_params!(cfg, Truncation, |p| {
                    set(&mut p.count, count);
                });
                cfg
            }
            Verb::PlanarCell {
                common,
                a,
                directional,
                levels,
                replicas,
            } => {
                let mut cfg = base_config(&common, Experiment::PlanarCell(Default::default()))?;
                with_params!(cfg, PlanarCell, |p| {
                    set(&mut p.a, a);
                    set(&mut p.directional, directional);
                    set(&mut p.levels, levels);
                    set(&mut p.replicas, replicas);
                });
                cfg
            }
            Verb::Dims { common, h, d } => dims_config(&common, h, d)?,
        },
    };
    Ok(cfg)
}

fn dims_config(common: &Common, h: Option<Vec<f64>>, d: Option<u32>) -> CliResult<ExperimentConfig> {
    let mut cfg = base_config(common, Experiment::Dims(Default::default()))?;
    with_params!(cfg, Dims, |p| {
        set(&mut p.h, h);
        set(&mut p.d, d);
        if p.h.is_empty() {
            return Err(CliError::Missing("H"));
        }
    });
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = build(cli.command).and_then(|cfg| run::run(&cfg));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
