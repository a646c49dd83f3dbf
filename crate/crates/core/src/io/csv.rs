//! Complex spectra as three-column CSV: `freq_ghz,re_s21,im_s21`.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SpectrumGrid;

pub const SPECTRUM_HEADER: &str = "freq_ghz,re_s21,im_s21";

/// Splits `line` on commas and parses exactly `expected` finite numbers.
pub(crate) fn parse_numeric_row(line: &str, line_no: usize, expected: usize) -> Result<Vec<f64>> {
    let cells: Vec<&str> = line.split(',').map(str::trim).collect();
    if cells.len() != expected {
        return Err(Error::parse(
            line_no,
            format!("expected {expected} columns, found {}", cells.len()),
        ));
    }
    cells
        .iter()
        .map(|c| match c.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::parse(line_no, format!("'{c}' is not a finite number"))),
        })
        .collect()
}

/// Non-blank lines with their 1-based numbers, line endings and a leading
/// byte-order mark removed.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.trim_start_matches('\u{feff}')
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn read_spectrum_csv(text: &str) -> Result<SpectrumGrid> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, h)) if h == SPECTRUM_HEADER => {}
        Some((n, h)) => {
            return Err(Error::parse(n, format!("expected header '{SPECTRUM_HEADER}', found '{h}'")));
        }
        None => return Err(Error::parse(1, format!("missing header '{SPECTRUM_HEADER}'"))),
    }
    let mut freqs: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines {
        let row = parse_numeric_row(line, n, 3)?;
        if let Some(&prev) = freqs.last() {
            if row[0] <= prev {
                return Err(Error::parse(
                    n,
                    format!("frequency {} does not increase (previous {prev})", row[0]),
                ));
            }
        }
        freqs.push(row[0]);
        values.push(Complex64::new(row[1], row[2]));
    }
    SpectrumGrid::new(freqs, values)
}

/// Shortest round-trip formatting keeps `read(write(x)) == x` exactly.
pub fn write_spectrum_csv(grid: &SpectrumGrid) -> String {
    let mut out = String::with_capacity(32 * (grid.len() + 1));
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for (f, z) in grid.iter() {
        let _ = writeln!(out, "{f},{},{}", z.re, z.im);
    }
    out
}
