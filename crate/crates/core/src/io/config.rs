//! Model configuration files (TOML).
//!
//! ```toml
//! delta_re = [[0.0, 0.12], [0.12, 0.0]]   # optional, default all zero
//! delta_im = [[0.0, 0.0], [0.0, 0.0]]     # optional
//!
//! [[modes]]
//! omega = 6.65
//! beta = 0.0227
//! alpha = 0.01                            # optional, default 0
//!
//! [[modes]]
//! omega = 6.65
//! beta = 0.0057
//!
//! [calibration]                           # optional, enables sweeps
//! varying_mode = 1                        # 1-based, default 1
//! g_min = 0.1
//! g_max = 2.2
//! omega_start = 5.7
//! omega_end = 7.5
//!
//! [sweep]                                 # optional, defaults shown
//! gap_samples = 57                        # or: gaps = [..]
//! fmin = 5.5
//! fmax = 8.0
//! points = 2001                           # or: freqs = [..]
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{linspace, CouplingModel, ModeParams};
use crate::sweep::{GapCalibration, SweepSpec, DEFAULT_FREQ_POINTS, DEFAULT_FREQ_RANGE, DEFAULT_GAP_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub omega: f64,
    pub beta: f64,
    #[serde(default)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default = "first_mode")]
    pub varying_mode: usize,
    pub g_min: f64,
    pub g_max: f64,
    pub omega_start: f64,
    pub omega_end: f64,
}

fn first_mode() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fmin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freqs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_re: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub modes: Vec<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn matrix_part(m: &Option<Vec<Vec<f64>>>, name: &str, n: usize) -> Result<Vec<Vec<f64>>> {
    match m {
        None => Ok(vec![vec![0.0; n]; n]),
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidModel(format!("{name} must be a {n}x{n} matrix")));
            }
            Ok(rows.clone())
        }
    }
}

/// `Some(range)` when `values` is exactly `linspace(first, last, len)`.
fn as_linspace(values: &[f64]) -> Option<(f64, f64, usize)> {
    let (&first, &last) = (values.first()?, values.last()?);
    (linspace(first, last, values.len()) == values).then_some((first, last, values.len()))
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of_offset(text, s.start));
            Error::parse(line, e.message().trim().to_string())
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model config always serializes")
    }

    pub fn to_model(&self) -> Result<CouplingModel> {
        let n = self.modes.len();
        let re = matrix_part(&self.delta_re, "delta_re", n)?;
        let im = matrix_part(&self.delta_im, "delta_im", n)?;
        let mut coupling = CMatrix::zeros(n);
        for j in 0..n {
            for k in 0..n {
                coupling[(j, k)] = Complex64::new(re[j][k], im[j][k]);
            }
        }
        let modes = self
            .modes
            .iter()
            .map(|m| ModeParams::new(m.omega, m.beta).with_alpha(m.alpha))
            .collect();
        CouplingModel::new(modes, coupling)
    }

    pub fn from_model(model: &CouplingModel) -> Self {
        let n = model.n_modes();
        let coupled = (0..n).any(|j| (0..n).any(|k| model.coupling(j, k) != Complex64::new(0.0, 0.0)));
        let lossy = (0..n).any(|j| (0..n).any(|k| model.coupling(j, k).im != 0.0));
        let part = |f: fn(Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|j| (0..n).map(|k| f(model.coupling(j, k))).collect()).collect()
        };
        Self {
            preset: None,
            delta_re: coupled.then(|| part(|z| z.re)),
            delta_im: lossy.then(|| part(|z| z.im)),
            modes: model
                .modes()
                .iter()
                .map(|m| ModeConfig {
                    omega: m.omega,
                    beta: m.beta_ext,
                    alpha: m.alpha_int,
                })
                .collect(),
            calibration: None,
            sweep: None,
        }
    }

    /// The sweep described by the `[calibration]` and `[sweep]` blocks, or
    /// `None` without a calibration.
    pub fn to_sweep_spec(&self) -> Result<Option<SweepSpec>> {
        let Some(cal) = self.calibration else {
            if self.sweep.is_some() {
                return Err(Error::InvalidInput("[sweep] requires a [calibration] block".into()));
            }
            return Ok(None);
        };
        let calibration = GapCalibration::new(cal.g_min, cal.g_max, cal.omega_start, cal.omega_end)?;
        let n = self.modes.len();
        if cal.varying_mode == 0 || cal.varying_mode > n {
            return Err(Error::InvalidInput(format!(
                "varying_mode {} out of range 1..={n}",
                cal.varying_mode
            )));
        }
        let sweep = self.sweep.clone().unwrap_or_default();
        let gap_samples = match (&sweep.gaps, sweep.gap_samples) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput("give either gaps or gap_samples, not both".into()));
            }
            (Some(g), None) => g.clone(),
            (None, count) => linspace(calibration.g_min, calibration.g_max, count.unwrap_or(DEFAULT_GAP_SAMPLES)),
        };
        let freq_grid = match (&sweep.freqs, sweep.fmin, sweep.fmax, sweep.points) {
            (Some(f), None, None, None) => f.clone(),
            (Some(_), ..) => {
                return Err(Error::InvalidInput("give either freqs or fmin/fmax/points, not both".into()));
            }
            (None, fmin, fmax, points) => linspace(
                fmin.unwrap_or(DEFAULT_FREQ_RANGE.0),
                fmax.unwrap_or(DEFAULT_FREQ_RANGE.1),
                points.unwrap_or(DEFAULT_FREQ_POINTS),
            ),
        };
        let spec = SweepSpec {
            base_model: self.to_model()?,
            varying_mode_index: cal.varying_mode - 1,
            calibration,
            gap_samples,
            freq_grid,
            preset: self.preset.clone(),
        };
        spec.validate()?;
        Ok(Some(spec))
    }

    pub fn from_sweep_spec(spec: &SweepSpec) -> Self {
        let cal = spec.calibration;
        let mut sweep = SweepConfig::default();
        match as_linspace(&spec.gap_samples) {
            Some((a, b, count)) if a == cal.g_min && b == cal.g_max => sweep.gap_samples = Some(count),
            _ => sweep.gaps = Some(spec.gap_samples.clone()),
        }
        match as_linspace(&spec.freq_grid) {
            Some((a, b, count)) => {
                sweep.fmin = Some(a);
                sweep.fmax = Some(b);
                sweep.points = Some(count);
            }
            None => sweep.freqs = Some(spec.freq_grid.clone()),
        }
        Self {
            preset: spec.preset.clone(),
            calibration: Some(CalibrationConfig {
                varying_mode: spec.varying_mode_index + 1,
                g_min: cal.g_min,
                g_max: cal.g_max,
                omega_start: cal.omega_start,
                omega_end: cal.omega_end,
            }),
            sweep: Some(sweep),
            ..Self::from_model(&spec.base_model)
        }
    }
}
