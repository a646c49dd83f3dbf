use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

fn finite(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a finite number")),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "modecoupler",
    version,
    about = "Coupled-resonator transmission spectra, eigenvalue branches, BIC search and fitting",
    after_help = "Exit codes: 0 success, 1 invalid input or parse error, 2 numerical failure.\n\
                  MODECOUPLER_THREADS caps the worker pool (0 or unset = all cores)."
)]
pub struct Cli {
    /// Emit structured output as a single JSON object instead of CSV/text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute S21 of a model over a frequency grid.
    Spectrum(SpectrumArgs),
    /// List eigenvalue branches of a model, optionally along a gap sweep.
    Eigen(EigenArgs),
    /// Compute a 2D |S21| map over split gap and frequency.
    Sweep(SweepArgs),
    /// Locate bound states in the continuum along a gap sweep.
    Bic(BicArgs),
    /// Classify the coupling regime of a model at zero detuning.
    Classify(ClassifyArgs),
    /// Fit model parameters to a measured spectrum.
    Fit(FitArgs),
    /// Convert between Touchstone and spectrum CSV files.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Case1,
    Case2,
}

/// Where a sweep comes from: a preset or a model file plus calibration.
#[derive(Debug, Args)]
pub struct SweepSource {
    /// Built-in device configuration.
    #[arg(long, value_enum, conflicts_with = "model")]
    pub preset: Option<Preset>,

    /// Model configuration file (TOML).
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Gap calibration as g_min,g_max,omega_start,omega_end (mm, mm, GHz, GHz);
    /// overrides a [calibration] block in the model file.
    #[arg(long, value_delimiter = ',', value_parser = finite)]
    pub calibration: Option<Vec<f64>>,

    /// 1-based mode that follows the calibration (with --calibration).
    #[arg(long, default_value_t = 1)]
    pub varying_mode: usize,

    /// Intrinsic losses a1,a2 in GHz for presets.
    #[arg(long, value_delimiter = ',', value_parser = finite, requires = "preset")]
    pub alpha: Option<Vec<f64>>,

    /// Number of gap samples (overrides the preset or file).
    #[arg(long)]
    pub gap_samples: Option<usize>,

    /// Number of frequency points (overrides the preset or file).
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 5.5)]
    pub fmin: f64,
    #[arg(long, default_value_t = 8.0)]
    pub fmax: f64,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EigenArgs {
    /// Model configuration file (TOML).
    #[arg(long, required_unless_present = "preset")]
    pub model: Option<PathBuf>,
    /// Evaluate along the gap sweep described by the model file or preset.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, value_enum, conflicts_with = "model", requires = "sweep")]
    pub preset: Option<Preset>,
    #[arg(long, value_delimiter = ',', value_parser = finite, requires = "sweep")]
    pub calibration: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub varying_mode: usize,
    #[arg(long)]
    pub gap_samples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SweepSource,
    /// Output directory for the matrix, long-format and metadata files.
    #[arg(long, default_value = "sweep_out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BicArgs {
    #[command(flatten)]
    pub source: SweepSource,
    /// Bisection tolerance on the residual, GHz^2.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Machine-readable copy of the results (CSV, or JSON with --json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mag,
    Complex,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Observed spectrum: Touchstone (.s2p) or spectrum CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Initial model (TOML); guessed from the data when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Mode count for the guessed initial model.
    #[arg(long, default_value_t = 2)]
    pub modes: usize,
    /// Free parameters, e.g. omega1,beta2,delta_re or beta1=0:0.1 with bounds.
    #[arg(long, value_delimiter = ',', required = true)]
    pub free: Vec<String>,
    /// Default bound half-width as a fraction of each initial value.
    #[arg(long, default_value_t = 0.2)]
    pub bound_fraction: f64,
    #[arg(long, value_enum, default_value_t = LossArg::Complex)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// S-parameter to fit when the data is Touchstone.
    #[arg(long, default_value = "s21")]
    pub param: String,
    /// Write the fitted model here (TOML).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output file; `.csv` writes a spectrum, anything else Touchstone.
    #[arg(long)]
    pub out: PathBuf,
    /// S-parameter extracted into a CSV.
    #[arg(long, default_value = "s21")]
    pub param: String,
    /// Touchstone output format: ri, ma or db.
    #[arg(long, default_value = "ri")]
    pub format: String,
}
