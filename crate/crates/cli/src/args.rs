use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cphase_core::metrics::MetricsOptions;
use cphase_core::spectral::{GateParams, GridSpec};
use cphase_core::Result;
use serde::Serialize;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_VAR: &str = "CPHASE_OUTPUT_DIR";

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "cphase", version, about = "Photon-photon controlled-phase gate simulator")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Physical and output settings shared by every command.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Pulse bandwidth γ in units of Γ.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub gamma: f64,
    /// Coupling scale Γ.
    #[arg(long = "Gamma", global = true, default_value_t = 1.0)]
    pub coupling: f64,
    /// Explicit H coupling Γ_H (defaults to Γ).
    #[arg(long, global = true)]
    pub gamma_h: Option<f64>,
    /// Explicit V coupling Γ_V (defaults to Γ).
    #[arg(long, global = true)]
    pub gamma_v: Option<f64>,
    /// Minimum wavenumber-grid node count.
    #[arg(long, global = true, default_value_t = GridSpec::default().resolution)]
    pub resolution: usize,
    /// Grid window in units of the widest feature.
    #[arg(long, global = true, default_value_t = GridSpec::default().cutoff)]
    pub cutoff: f64,
    /// Largest accepted change of the overlap under grid doubling.
    #[arg(long, global = true, default_value_t = MetricsOptions::default().tolerance)]
    pub tolerance: f64,
    /// Output file (default: `<command>.<format>` in $CPHASE_OUTPUT_DIR or the working directory).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Seed for randomized searches.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PmpChoice {
    On,
    Off,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Post,
    Pre,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Gate metrics over a detuning range.
    Sweep {
        #[arg(long, allow_negative_numbers = true, default_value_t = -4.0)]
        delta_min: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 4.0)]
        delta_max: f64,
        #[arg(long, default_value_t = 81)]
        points: usize,
    },
    /// All gate metrics at one detuning.
    Metrics {
        /// Detuning δ in units of Γ.
        #[arg(long, allow_negative_numbers = true, default_value_t = 5.0)]
        delta: f64,
    },
    /// Reduced-state purity of the gate output.
    Purity {
        #[arg(long, allow_negative_numbers = true, default_value_t = 5.0)]
        delta: f64,
        /// Evaluate after or before removing the linear evolution.
        #[arg(long, value_enum, default_value_t = Stage::Post)]
        stage: Stage,
    },
    /// Field-level cascade with or without principal-mode projection.
    Cascade {
        #[arg(long, allow_negative_numbers = true, default_value_t = 5.0)]
        delta: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = PmpChoice::Both)]
        pmp: PmpChoice,
    },
    /// Optimal bandwidth ratio and detuning for cascade depths N.
    Optimize {
        /// Cascade depths; accepts scientific notation.
        #[arg(long = "n", value_delimiter = ',', default_values_t = [1e3, 1e5, 1e7])]
        n: Vec<f64>,
    },
    /// Cavity loading efficiency against bandwidth mismatch.
    PmpLoad {
        /// Smallest γ_cav/γ.
        #[arg(long, default_value_t = 0.25)]
        ratio_min: f64,
        /// Largest γ_cav/γ.
        #[arg(long, default_value_t = 4.0)]
        ratio_max: f64,
        #[arg(long, default_value_t = 17)]
        points: usize,
        /// Cavity detuning from the carrier in units of γ.
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        cavity_detuning: f64,
    },
    /// Run the invariant suite; exits nonzero on any failure.
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sweep { .. } => "sweep",
            Command::Metrics { .. } => "metrics",
            Command::Purity { .. } => "purity",
            Command::Cascade { .. } => "cascade",
            Command::Optimize { .. } => "optimize",
            Command::PmpLoad { .. } => "pmp-load",
            Command::Verify => "verify",
        }
    }
}

impl Common {
    /// Gate parameters at detuning `delta` (units of Γ), carrier at zero.
    pub fn params(&self, delta: f64) -> Result<GateParams> {
        let c = self.coupling;
        if !(c > 0.0 && c.is_finite()) {
            return Err(cphase_core::Error::InvalidParameter(format!("Γ must be positive, got {c}")));
        }
        GateParams::new(0.0, self.gamma * c, -delta * c, self.gamma_h.unwrap_or(c), self.gamma_v.unwrap_or(c))
    }

    pub fn grid(&self) -> Result<GridSpec> {
        // validated where the grid is built
        Ok(GridSpec { resolution: self.resolution, cutoff: self.cutoff, ..GridSpec::default() })
    }

    pub fn output_path(&self, command: &str) -> PathBuf {
        self.output.clone().unwrap_or_else(|| {
            let dir = std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from).unwrap_or_default();
            dir.join(format!("{command}.{}", self.format.extension()))
        })
    }
}
