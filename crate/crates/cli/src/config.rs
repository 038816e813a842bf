//! Experiment configuration files.

use std::path::{Path, PathBuf};

use osfield::harness::modulus::BandSplit;
use osfield::harness::Family;
use osfield::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: Option<ModelConfig>,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Output,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Output {
    /// JSON report or primary data file; stdout when absent.
    pub path: Option<PathBuf>,
    /// CSV trace for plotting.
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Tau(TauParams),
    Variogram(VariogramParams),
    Simulate(SimulateParams),
    Slnd(SlndParams),
    Umc(UmcParams),
    Lil(LilParams),
    Scaling(ScalingParams),
    Truncation(TruncationParams),
    #[serde(alias = "example62")]
    PlanarCell(PlanarCellParams),
    Dims(DimsParams),
    Alpha(AlphaParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Tau(_) => "tau",
            Experiment::Variogram(_) => "variogram",
            Experiment::Simulate(_) => "simulate",
            Experiment::Slnd(_) => "slnd",
            Experiment::Umc(_) => "umc",
            Experiment::Lil(_) => "lil",
            Experiment::Scaling(_) => "scaling",
            Experiment::Truncation(_) => "truncation",
            Experiment::PlanarCell(_) => "planar_cell",
            Experiment::Dims(_) => "dims",
            Experiment::Alpha(_) => "alpha",
        }
    }

    /// Whether the experiment draws random numbers and so needs a seed.
    pub fn is_stochastic(&self) -> bool {
        match self {
            Experiment::Simulate(_)
            | Experiment::Slnd(_)
            | Experiment::Umc(_)
            | Experiment::Lil(_)
            | Experiment::Scaling(_)
            | Experiment::Truncation(_) => true,
            Experiment::PlanarCell(p) => !p.directional.is_empty(),
            _ => false,
        }
    }

    /// Whether a field model must be supplied.
    pub fn needs_model(&self) -> bool {
        !matches!(
            self,
            Experiment::PlanarCell(_) | Experiment::Dims(_) | Experiment::Alpha(_)
        )
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TauParams {
    pub points: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct VariogramParams {
    pub lags: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    #[default]
    Cholesky,
    Spectral,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    F64le,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateParams {
    pub level: Option<u32>,
    pub points: Option<PathBuf>,
    pub method: SimMethod,
    pub freq_count: usize,
    pub band_lo: f64,
    pub band_hi: Option<f64>,
    pub format: Format,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            level: None,
            points: None,
            method: SimMethod::Cholesky,
            freq_count: 1 << 14,
            band_lo: 0.0,
            band_hi: None,
            format: Format::Csv,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SlndParams {
    pub count: usize,
    pub max_points: usize,
    /// Configuration rescaled by `c^E`; a fixed default when absent.
    pub base: Option<Vec<Vec<f64>>>,
    pub scales: Vec<f64>,
    pub scale_tol: f64,
}

impl Default for SlndParams {
    fn default() -> Self {
        Self {
            count: 200,
            max_points: 6,
            base: None,
            scales: vec![0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            scale_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct UmcParams {
    pub level: u32,
    pub radii: usize,
    pub replicas: usize,
}

impl Default for UmcParams {
    fn default() -> Self {
        Self {
            level: 6,
            radii: 4,
            replicas: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LilParams {
    pub level: u32,
    pub smallest_ball: usize,
    pub radii: usize,
    pub replicas: usize,
    pub band_split: Option<BandSplit>,
}

impl Default for LilParams {
    fn default() -> Self {
        Self {
            level: 6,
            smallest_ball: 200,
            radii: 4,
            replicas: 20,
            band_split: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingParams {
    pub lags: usize,
    pub factors: Vec<f64>,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            lags: 20,
            factors: vec![0.25, 0.5, 2.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationParams {
    pub count: usize,
}

impl Default for TruncationParams {
    fn default() -> Self {
        Self { count: 100 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanarCellParams {
    pub a: f64,
    pub theta: f64,
    pub log_shift: f64,
    pub fixed_theta: f64,
    pub y_norms: Vec<f64>,
    pub directional: Vec<Family>,
    pub levels: Vec<u32>,
    pub replicas: usize,
}

impl Default for PlanarCellParams {
    fn default() -> Self {
        Self {
            a: 2.0,
            theta: 50.0,
            log_shift: 0.0,
            fixed_theta: 1.0,
            y_norms: (8..=40).map(|k| 10f64.powf(-k as f64 / 4.0)).collect(),
            directional: Vec::new(),
            levels: vec![6],
            replicas: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DimsParams {
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    pub d: u32,
    /// Points of the continuity sweep; zero skips it.
    pub sweep: usize,
}

impl Default for DimsParams {
    fn default() -> Self {
        Self {
            h: Vec::new(),
            d: 1,
            sweep: 50,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaParams {
    pub a: f64,
    pub thetas: Vec<f64>,
    pub argmin: bool,
}

impl Default for AlphaParams {
    fn default() -> Self {
        Self {
            a: 2.0,
            thetas: Vec::new(),
            argmin: false,
        }
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}

/// Parses JSON or TOML by file extension.
pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    if is_toml(path) {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
