//! Touchstone v1 two-port (`.s2p`) files.
//!
//! Supported: `!` comments (whole-line and trailing), one `#` option line,
//! RI / MA / DB data with angles in degrees, and records split over several
//! lines. Frequencies are converted to GHz while parsing.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SpectrumGrid;

const FIELDS_PER_RECORD: usize = 9;
/// Emitted for an exactly zero magnitude in DB format, where log10 diverges.
const DB_FLOOR: f64 = -999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    #[default]
    GHz,
}

impl FreqUnit {
    /// Multiplier taking a value in this unit to GHz.
    pub fn to_ghz(self) -> f64 {
        match self {
            FreqUnit::Hz => 1e-9,
            FreqUnit::KHz => 1e-6,
            FreqUnit::MHz => 1e-3,
            FreqUnit::GHz => 1.0,
        }
    }
}

impl fmt::Display for FreqUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreqUnit::Hz => "Hz",
            FreqUnit::KHz => "kHz",
            FreqUnit::MHz => "MHz",
            FreqUnit::GHz => "GHz",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataFormat {
    Ri,
    #[default]
    Ma,
    Db,
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::Ri => "RI",
            DataFormat::Ma => "MA",
            DataFormat::Db => "DB",
        })
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RI" => Ok(DataFormat::Ri),
            "MA" => Ok(DataFormat::Ma),
            "DB" => Ok(DataFormat::Db),
            _ => Err(Error::InvalidInput(format!("unknown data format '{s}' (expected RI, MA or DB)"))),
        }
    }
}

/// One of the four two-port parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SParam {
    S11,
    S21,
    S12,
    S22,
}

impl SParam {
    /// Position in a record, which lists S11, S21, S12, S22.
    fn slot(self) -> usize {
        match self {
            SParam::S11 => 0,
            SParam::S21 => 1,
            SParam::S12 => 2,
            SParam::S22 => 3,
        }
    }
}

impl FromStr for SParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s11" => Ok(SParam::S11),
            "s21" => Ok(SParam::S21),
            "s12" => Ok(SParam::S12),
            "s22" => Ok(SParam::S22),
            _ => Err(Error::InvalidInput(format!("unknown S-parameter '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TouchstoneRow {
    pub freq_ghz: f64,
    /// S11, S21, S12, S22.
    pub s: [Complex64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TouchstoneData {
    /// Unit declared by the source file; row frequencies are always GHz.
    pub freq_unit: FreqUnit,
    /// Format declared by the source file.
    pub format: DataFormat,
    pub reference_ohms: f64,
    pub rows: Vec<TouchstoneRow>,
}

impl Default for TouchstoneData {
    fn default() -> Self {
        Self {
            freq_unit: FreqUnit::GHz,
            format: DataFormat::Ma,
            reference_ohms: 50.0,
            rows: Vec::new(),
        }
    }
}

impl TouchstoneData {
    /// One parameter as a spectrum over the file's frequencies.
    pub fn spectrum(&self, which: SParam) -> SpectrumGrid {
        let freqs = self.rows.iter().map(|r| r.freq_ghz).collect();
        let values = self.rows.iter().map(|r| r.s[which.slot()]).collect();
        SpectrumGrid::new(freqs, values).expect("parsed rows are strictly increasing")
    }
}

struct Options {
    unit: FreqUnit,
    format: DataFormat,
    reference: f64,
}

fn parse_option_line(body: &str, line: usize) -> Result<Options> {
    let mut opts = Options {
        unit: FreqUnit::GHz,
        format: DataFormat::Ma,
        reference: 50.0,
    };
    let (mut seen_unit, mut seen_param, mut seen_format, mut seen_ref) = (false, false, false, false);
    let once = |seen: &mut bool, what: &str| -> Result<()> {
        if std::mem::replace(seen, true) {
            Err(Error::parse(line, format!("option line repeats the {what}")))
        } else {
            Ok(())
        }
    };
    let mut tokens = body.split_whitespace();
    while let Some(token) = tokens.next() {
        match token.to_ascii_uppercase().as_str() {
            unit @ ("HZ" | "KHZ" | "MHZ" | "GHZ") => {
                once(&mut seen_unit, "frequency unit")?;
                opts.unit = match unit {
                    "HZ" => FreqUnit::Hz,
                    "KHZ" => FreqUnit::KHz,
                    "MHZ" => FreqUnit::MHz,
                    _ => FreqUnit::GHz,
                };
            }
            "S" => once(&mut seen_param, "parameter type")?,
            "Y" | "Z" | "G" | "H" => {
                return Err(Error::parse(line, format!("parameter type {token} is not supported, only S")));
            }
            fmt @ ("RI" | "MA" | "DB") => {
                once(&mut seen_format, "data format")?;
                opts.format = fmt.parse().expect("matched a known format");
            }
            "R" => {
                once(&mut seen_ref, "reference resistance")?;
                let value = tokens
                    .next()
                    .ok_or_else(|| Error::parse(line, "option R needs a resistance value"))?;
                opts.reference = match value.parse::<f64>() {
                    Ok(r) if r.is_finite() && r > 0.0 => r,
                    _ => return Err(Error::parse(line, format!("invalid reference resistance '{value}'"))),
                };
            }
            _ => return Err(Error::parse(line, format!("unknown option '{token}'"))),
        }
    }
    Ok(opts)
}

fn to_complex(format: DataFormat, a: f64, b: f64) -> Complex64 {
    match format {
        DataFormat::Ri => Complex64::new(a, b),
        DataFormat::Ma => Complex64::from_polar(a, b.to_radians()),
        DataFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

fn finish_record(
    fields: &[f64],
    start_line: usize,
    opts: &Options,
    rows: &mut Vec<TouchstoneRow>,
) -> Result<()> {
    let freq_ghz = fields[0] * opts.unit.to_ghz();
    if let Some(prev) = rows.last() {
        if freq_ghz <= prev.freq_ghz {
            return Err(Error::parse(
                start_line,
                format!("frequency {} is not above the previous {}", fields[0], prev.freq_ghz / opts.unit.to_ghz()),
            ));
        }
    }
    let mut s = [Complex64::new(0.0, 0.0); 4];
    for (k, slot) in s.iter_mut().enumerate() {
        *slot = to_complex(opts.format, fields[1 + 2 * k], fields[2 + 2 * k]);
    }
    rows.push(TouchstoneRow { freq_ghz, s });
    Ok(())
}

/// Parses a Touchstone v1 two-port file.
pub fn parse_touchstone(text: &str) -> Result<TouchstoneData> {
    let mut opts: Option<Options> = None;
    let mut rows = Vec::new();
    let mut pending: Vec<f64> = Vec::with_capacity(FIELDS_PER_RECORD);
    let mut pending_start = 0;

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            return Err(Error::parse(
                line,
                format!("keyword {content} belongs to Touchstone v2, which is not supported"),
            ));
        }
        if let Some(body) = content.strip_prefix('#') {
            if opts.is_some() {
                return Err(Error::parse(line, "second option line"));
            }
            if !rows.is_empty() || !pending.is_empty() {
                return Err(Error::parse(line, "option line must precede the data"));
            }
            opts = Some(parse_option_line(body, line)?);
            continue;
        }
        let active = opts.get_or_insert(Options {
            unit: FreqUnit::GHz,
            format: DataFormat::Ma,
            reference: 50.0,
        });

        if pending.is_empty() {
            pending_start = line;
        }
        for token in content.split_whitespace() {
            let value: f64 = token
                .parse()
                .map_err(|_| Error::parse(line, format!("'{token}' is not a number")))?;
            if !value.is_finite() {
                return Err(Error::parse(line, format!("'{token}' is not finite")));
            }
            pending.push(value);
        }
        if pending.len() > FIELDS_PER_RECORD {
            return Err(Error::parse(
                pending_start,
                format!(
                    "record has {} fields, expected {FIELDS_PER_RECORD} (frequency and four complex values)",
                    pending.len()
                ),
            ));
        }
        if pending.len() == FIELDS_PER_RECORD {
            finish_record(&pending, pending_start, active, &mut rows)?;
            pending.clear();
        }
    }
    if !pending.is_empty() {
        return Err(Error::parse(
            pending_start,
            format!("record has {} fields, expected {FIELDS_PER_RECORD}", pending.len()),
        ));
    }

    let opts = opts.unwrap_or(Options {
        unit: FreqUnit::GHz,
        format: DataFormat::Ma,
        reference: 50.0,
    });
    Ok(TouchstoneData {
        freq_unit: opts.unit,
        format: opts.format,
        reference_ohms: opts.reference,
        rows,
    })
}

fn from_complex(format: DataFormat, z: Complex64) -> (f64, f64) {
    match format {
        DataFormat::Ri => (z.re, z.im),
        DataFormat::Ma => (z.norm(), z.arg().to_degrees()),
        DataFormat::Db => {
            let m = z.norm();
            let db = if m > 0.0 { 20.0 * m.log10() } else { DB_FLOOR };
            (db, z.arg().to_degrees())
        }
    }
}

/// Writes `data` with frequencies in GHz and values in `format`.
pub fn write_touchstone(data: &TouchstoneData, format: DataFormat) -> String {
    let mut out = String::new();
    out.push_str("! two-port S-parameters\n");
    let _ = writeln!(out, "# GHz S {format} R {}", data.reference_ohms);
    for row in &data.rows {
        let _ = write!(out, "{:.16e}", row.freq_ghz);
        for z in row.s {
            let (a, b) = from_complex(format, z);
            let _ = write!(out, " {a:.16e} {b:.16e}");
        }
        out.push('\n');
    }
    out
}
