//! Split-gap sweeps: the affine gap-to-frequency calibration, 2D |S21| maps
//! over (gap, frequency), and the two measured device configurations as
//! presets.
//!
//! The calibration maps the CSRR split gap `g` (mm) linearly between two
//! quoted endpoint frequencies. The real device relation is nonlinear; under
//! the affine map the case-1 crossing lands at g = 0.85 mm whereas the
//! measured coupling centre is near 0.7 mm. Presets keep that discrepancy
//! visible rather than recalibrating it away.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_increasing, linspace, s21_spectrum, CouplingModel, ModeParams, SpectrumGrid};

/// Intrinsic losses used by the presets unless overridden, GHz.
pub const DEFAULT_PRESET_ALPHA: [f64; 2] = [0.01, 0.01];
pub const DEFAULT_GAP_SAMPLES: usize = 57;
pub const DEFAULT_FREQ_POINTS: usize = 2001;
pub const DEFAULT_FREQ_RANGE: (f64, f64) = (5.5, 8.0);

/// Affine map from split gap (mm) to mode frequency (GHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapCalibration {
    pub g_min: f64,
    pub g_max: f64,
    pub omega_start: f64,
    pub omega_end: f64,
}

impl GapCalibration {
    pub fn new(g_min: f64, g_max: f64, omega_start: f64, omega_end: f64) -> Result<Self> {
        let cal = Self {
            g_min,
            g_max,
            omega_start,
            omega_end,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.g_min, self.g_max, self.omega_start, self.omega_end]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("calibration values must be finite".into()));
        }
        if self.g_min >= self.g_max {
            return Err(Error::InvalidInput(format!(
                "calibration needs g_min < g_max, got {} >= {}",
                self.g_min, self.g_max
            )));
        }
        if self.omega_start <= 0.0 || self.omega_end <= 0.0 {
            return Err(Error::InvalidInput("calibration frequencies must be positive".into()));
        }
        Ok(())
    }

    /// Mode frequency at gap `g`.
    pub fn omega_of_gap(&self, g: f64) -> Result<f64> {
        if !(g >= self.g_min && g <= self.g_max) {
            return Err(Error::OutOfRange {
                name: "gap",
                value: g,
                min: self.g_min,
                max: self.g_max,
            });
        }
        let t = (g - self.g_min) / (self.g_max - self.g_min);
        Ok(self.omega_start + (self.omega_end - self.omega_start) * t)
    }

    /// Inverse map; fails when `omega` is not reached inside the gap range.
    pub fn gap_of_omega(&self, omega: f64) -> Result<f64> {
        if self.omega_end == self.omega_start {
            return Err(Error::InvalidInput("flat calibration has no inverse".into()));
        }
        let t = (omega - self.omega_start) / (self.omega_end - self.omega_start);
        if !(0.0..=1.0).contains(&t) {
            let (lo, hi) = if self.omega_start < self.omega_end {
                (self.omega_start, self.omega_end)
            } else {
                (self.omega_end, self.omega_start)
            };
            return Err(Error::OutOfRange {
                name: "omega",
                value: omega,
                min: lo,
                max: hi,
            });
        }
        Ok(self.g_min + t * (self.g_max - self.g_min))
    }

    /// Case 1: 0.1 - 1.5 mm tunes the CSRR from 6.0 to 7.4 GHz.
    pub fn case1() -> Self {
        Self {
            g_min: 0.1,
            g_max: 1.5,
            omega_start: 6.0,
            omega_end: 7.4,
        }
    }

    /// Case 2 (rotated CSRR): 0.1 - 2.2 mm tunes it from 5.7 to 7.5 GHz.
    pub fn case2() -> Self {
        Self {
            g_min: 0.1,
            g_max: 2.2,
            omega_start: 5.7,
            omega_end: 7.5,
        }
    }
}

/// Free function form of [`GapCalibration::omega_of_gap`].
pub fn omega_of_gap(cal: &GapCalibration, g: f64) -> Result<f64> {
    cal.omega_of_gap(g)
}

/// One 2D sweep: a model whose `varying_mode_index` mode follows the
/// calibration over `gap_samples`, evaluated on `freq_grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base_model: CouplingModel,
    pub varying_mode_index: usize,
    pub calibration: GapCalibration,
    pub gap_samples: Vec<f64>,
    pub freq_grid: Vec<f64>,
    /// Name of the preset this spec came from, if any.
    pub preset: Option<String>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.calibration.validate()?;
        if self.varying_mode_index >= self.base_model.n_modes() {
            return Err(Error::InvalidInput(format!(
                "varying mode index {} out of range for {} modes",
                self.varying_mode_index,
                self.base_model.n_modes()
            )));
        }
        check_increasing(&self.freq_grid)?;
        for &g in &self.gap_samples {
            self.calibration.omega_of_gap(g)?;
        }
        Ok(())
    }

    /// The base model with the varying mode tuned to gap `g`.
    pub fn model_at_gap(&self, g: f64) -> Result<CouplingModel> {
        let omega = self.calibration.omega_of_gap(g)?;
        self.base_model.with_mode_omega(self.varying_mode_index, omega)
    }

    /// Index of the gap sample closest to `g`.
    pub fn nearest_gap_index(&self, g: f64) -> Option<usize> {
        self.gap_samples
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - g).abs().total_cmp(&(b.1 - g).abs()))
            .map(|(i, _)| i)
    }
}

/// |S21| and phase over (frequency, gap). Matrices are indexed
/// `[freq_index][gap_index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub gaps: Vec<f64>,
    pub freqs: Vec<f64>,
    pub magnitude: Vec<Vec<f64>>,
    pub phase: Vec<Vec<f64>>,
    columns: Vec<Vec<Complex64>>,
}

impl SweepResult {
    /// Builds a result from per-gap complex columns.
    pub fn from_columns(gaps: Vec<f64>, freqs: Vec<f64>, columns: Vec<Vec<Complex64>>) -> Result<Self> {
        if columns.len() != gaps.len() || columns.iter().any(|c| c.len() != freqs.len()) {
            return Err(Error::InvalidInput("sweep columns do not match gaps x freqs".into()));
        }
        let magnitude = (0..freqs.len())
            .map(|i| columns.iter().map(|c| c[i].norm()).collect())
            .collect();
        let phase = (0..freqs.len())
            .map(|i| columns.iter().map(|c| c[i].arg()).collect())
            .collect();
        Ok(Self {
            gaps,
            freqs,
            magnitude,
            phase,
            columns,
        })
    }

    /// Complex spectrum of column `gap_index`.
    pub fn column(&self, gap_index: usize) -> SpectrumGrid {
        SpectrumGrid::new(self.freqs.clone(), self.columns[gap_index].clone())
            .expect("sweep columns are validated on construction")
    }

    pub fn column_magnitudes(&self, gap_index: usize) -> Vec<f64> {
        self.columns[gap_index].iter().map(|z| z.norm()).collect()
    }
}

/// Evaluates every gap column. Columns are computed in parallel and
/// collected in sample order, so the result equals sequential evaluation.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let columns = spec
        .gap_samples
        .par_iter()
        .enumerate()
        .map(|(index, &gap)| {
            let tag = |e: Error| Error::AtGap {
                index,
                gap,
                source: Box::new(e),
            };
            let model = spec.model_at_gap(gap).map_err(tag)?;
            let grid = s21_spectrum(&model, &spec.freq_grid).map_err(tag)?;
            Ok(grid.s21().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    SweepResult::from_columns(spec.gap_samples.clone(), spec.freq_grid.clone(), columns)
}

fn check_alpha(alpha: [f64; 2]) -> Result<()> {
    if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::InvalidInput(format!(
            "intrinsic losses must be finite and non-negative, got {alpha:?}"
        )));
    }
    Ok(())
}

fn preset_spec(
    name: &str,
    calibration: GapCalibration,
    varying_beta: f64,
    fixed: ModeParams,
    delta: f64,
    alpha: [f64; 2],
) -> Result<SweepSpec> {
    check_alpha(alpha)?;
    let varying = ModeParams::new(calibration.omega_start, varying_beta).with_alpha(alpha[0]);
    let fixed = fixed.with_alpha(alpha[1]);
    let base_model = CouplingModel::two_mode(varying, fixed, Complex64::new(delta, 0.0))?;
    let (fmin, fmax) = DEFAULT_FREQ_RANGE;
    Ok(SweepSpec {
        base_model,
        varying_mode_index: 0,
        calibration,
        gap_samples: linspace(calibration.g_min, calibration.g_max, DEFAULT_GAP_SAMPLES),
        freq_grid: linspace(fmin, fmax, DEFAULT_FREQ_POINTS),
        preset: Some(name.to_string()),
    })
}

/// Case 1 (both split gaps perpendicular to the line): CSRR with radiative
/// damping 0.076 tuned across a fixed CELC at 6.75 GHz with damping 0.048,
/// no direct coupling. `alpha` is the intrinsic loss of (CSRR, CELC).
pub fn case1_preset(alpha: [f64; 2]) -> Result<SweepSpec> {
    preset_spec(
        "case1",
        GapCalibration::case1(),
        0.076,
        ModeParams::new(6.75, 0.048),
        0.0,
        alpha,
    )
}

/// Case 2 (CSRR rotated by 90 degrees): damping 0.0227 / 0.0057, direct
/// coupling 0.12 GHz, CELC fixed at 6.65 GHz.
pub fn case2_preset(alpha: [f64; 2]) -> Result<SweepSpec> {
    preset_spec(
        "case2",
        GapCalibration::case2(),
        0.0227,
        ModeParams::new(6.65, 0.0057),
        0.12,
        alpha,
    )
}
