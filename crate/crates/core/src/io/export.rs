//! Sweep exports: an |S21| matrix CSV, a long-format CSV for plotting tools
//! and a JSON metadata sidecar.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::csv::{content_lines, parse_numeric_row};
use crate::error::{Error, Result};
use crate::sweep::{GapCalibration, SweepResult, SweepSpec, DEFAULT_PRESET_ALPHA};

/// Label in the top-left cell of the matrix file.
pub const MATRIX_CORNER: &str = "freq_ghz\\gap_mm";
pub const LONG_HEADER: &str = "gap_mm,freq_ghz,magnitude,phase_rad";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub preset: Option<String>,
    pub calibration: GapCalibration,
    /// 1-based index of the mode that follows the calibration.
    pub varying_mode: usize,
    pub omega: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta_re: Vec<Vec<f64>>,
    pub delta_im: Vec<Vec<f64>>,
    pub preset_alpha_default: [f64; 2],
    pub gap_count: usize,
    pub freq_count: usize,
    pub gap_range_mm: [f64; 2],
    pub freq_range_ghz: [f64; 2],
    pub matrix_layout: String,
    pub long_layout: String,
}

impl SweepMetadata {
    pub fn describe(spec: &SweepSpec, result: &SweepResult) -> Self {
        let m = &spec.base_model;
        let n = m.n_modes();
        let range = |v: &[f64]| [v.first().copied().unwrap_or(f64::NAN), v.last().copied().unwrap_or(f64::NAN)];
        Self {
            preset: spec.preset.clone(),
            calibration: spec.calibration,
            varying_mode: spec.varying_mode_index + 1,
            omega: m.modes().iter().map(|p| p.omega).collect(),
            beta: m.modes().iter().map(|p| p.beta_ext).collect(),
            alpha: m.modes().iter().map(|p| p.alpha_int).collect(),
            delta_re: (0..n).map(|j| (0..n).map(|k| m.coupling(j, k).re).collect()).collect(),
            delta_im: (0..n).map(|j| (0..n).map(|k| m.coupling(j, k).im).collect()).collect(),
            preset_alpha_default: DEFAULT_PRESET_ALPHA,
            gap_count: result.gaps.len(),
            freq_count: result.freqs.len(),
            gap_range_mm: range(&result.gaps),
            freq_range_ghz: range(&result.freqs),
            matrix_layout: "first row: gaps (mm); first column: frequencies (GHz); cells: |S21|".into(),
            long_layout: format!("{LONG_HEADER}; gap-major order"),
        }
    }
}

/// The three files of one sweep export.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepExport {
    pub matrix_csv: String,
    pub long_csv: String,
    pub metadata_json: String,
}

pub fn export_sweep(spec: &SweepSpec, result: &SweepResult) -> SweepExport {
    let mut matrix = String::from(MATRIX_CORNER);
    for g in &result.gaps {
        let _ = write!(matrix, ",{g}");
    }
    matrix.push('\n');
    for (f, row) in result.freqs.iter().zip(&result.magnitude) {
        let _ = write!(matrix, "{f}");
        for m in row {
            let _ = write!(matrix, ",{m}");
        }
        matrix.push('\n');
    }

    let mut long = String::with_capacity(48 * result.gaps.len() * result.freqs.len());
    long.push_str(LONG_HEADER);
    long.push('\n');
    for (j, g) in result.gaps.iter().enumerate() {
        for (i, f) in result.freqs.iter().enumerate() {
            let _ = writeln!(long, "{g},{f},{},{}", result.magnitude[i][j], result.phase[i][j]);
        }
    }

    let metadata = SweepMetadata::describe(spec, result);
    SweepExport {
        matrix_csv: matrix,
        long_csv: long,
        metadata_json: serde_json::to_string_pretty(&metadata).expect("metadata serializes") + "\n",
    }
}

/// Contents of a matrix file.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMatrix {
    pub gaps: Vec<f64>,
    pub freqs: Vec<f64>,
    /// `[freq_index][gap_index]`.
    pub magnitude: Vec<Vec<f64>>,
}

pub fn read_sweep_matrix(text: &str) -> Result<SweepMatrix> {
    let mut lines = content_lines(text);
    let (n, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty sweep matrix file"))?;
    let mut cells = header.split(',');
    if cells.next().map(str::trim) != Some(MATRIX_CORNER) {
        return Err(Error::parse(n, format!("first cell must be '{MATRIX_CORNER}'")));
    }
    let gaps = cells
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(n, format!("'{c}' is not a gap value")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut freqs = Vec::new();
    let mut magnitude = Vec::new();
    for (n, line) in lines {
        let mut row = parse_numeric_row(line, n, gaps.len() + 1)?;
        freqs.push(row.remove(0));
        magnitude.push(row);
    }
    Ok(SweepMatrix { gaps, freqs, magnitude })
}

pub fn read_sweep_metadata(text: &str) -> Result<SweepMetadata> {
    serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))
}
