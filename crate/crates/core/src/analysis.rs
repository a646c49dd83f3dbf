//! Friedrich-Wintgen BIC location, level attraction / repulsion
//! classification and |S21| feature extraction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_increasing, eigenvalues, ComplexFrequency, CouplingModel, SpectrumGrid};
use crate::sweep::SweepSpec;

/// Gap differences closer than this are labelled [`RegimeLabel::Degenerate`].
pub const REGIME_TIE_MARGIN: f64 = 1e-9;

/// Largest |omega_1 - omega_2| accepted by [`classify_regime`].
pub const ZERO_DETUNING_TOL: f64 = 1e-9;

/// Prominence used by [`transparency_window`].
pub const DEFAULT_PROMINENCE: f64 = 1e-3;

const BIC_VERIFY_FLOOR: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;

/// A located bound state in the continuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicPoint {
    /// Control parameter (gap, mm) at the located point.
    pub sweep_value: f64,
    /// Real part of the trapped eigenvalue, GHz.
    pub omega_bic: f64,
    /// Friedrich-Wintgen residual at the point, GHz^2.
    pub residual: f64,
    /// Smallest |Im lambda| over the branches, GHz.
    pub min_im: f64,
    /// Whether `min_im <= 1e-9 + max(alpha_j)`.
    pub verified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegimeLabel {
    LevelRepulsion,
    LevelAttraction,
    Degenerate,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeLabel::LevelRepulsion => "LEVEL_REPULSION",
            RegimeLabel::LevelAttraction => "LEVEL_ATTRACTION",
            RegimeLabel::Degenerate => "DEGENERATE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// |Re(lambda+ - lambda-)| at zero detuning, GHz.
    pub gap_re: f64,
    /// |Im(lambda+ - lambda-)| at zero detuning, GHz.
    pub gap_im: f64,
    pub label: RegimeLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureKind {
    Dip,
    Peak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeature {
    pub kind: FeatureKind,
    /// Refined extremum frequency, GHz.
    pub freq: f64,
    /// Refined |S21| at the extremum.
    pub magnitude: f64,
    /// Full width at the half-prominence level, when both flanks cross it
    /// inside the grid.
    pub fwhm: Option<f64>,
    pub prominence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransparencyWindow {
    /// Highest |S21| between the two deepest dips.
    pub window_height: f64,
    /// Frequency distance between the two deepest dips, GHz.
    pub dip_separation: f64,
}

fn require_two_real(model: &CouplingModel) -> Result<()> {
    if model.n_modes() != 2 {
        return Err(Error::Unsupported(format!(
            "two-mode model required, got {} modes",
            model.n_modes()
        )));
    }
    if !model.has_real_coupling() {
        return Err(Error::Unsupported(
            "Friedrich-Wintgen condition is defined for real direct coupling only".into(),
        ));
    }
    Ok(())
}

/// `Delta (beta1 - beta2) - sqrt(beta1 beta2) (omega1 - omega2)`, GHz^2.
///
/// Zero exactly when one hybrid eigenvalue loses all radiative width.
pub fn fw_residual(model: &CouplingModel) -> Result<f64> {
    require_two_real(model)?;
    let (m1, m2) = (model.mode(0), model.mode(1));
    let delta = model.coupling(0, 1).re;
    Ok(delta * (m1.beta_ext - m2.beta_ext) - (m1.beta_ext * m2.beta_ext).sqrt() * (m1.omega - m2.omega))
}

fn bic_at(spec: &SweepSpec, g: f64, residual: f64) -> Result<BicPoint> {
    let model = spec.model_at_gap(g)?;
    let trapped = eigenvalues(&model)?
        .into_iter()
        .min_by(|a, b| a.im.abs().total_cmp(&b.im.abs()))
        .expect("two-mode model has two branches");
    let alpha_floor = model.modes().iter().map(|m| m.alpha_int).fold(0.0, f64::max);
    let min_im = trapped.im.abs();
    Ok(BicPoint {
        sweep_value: g,
        omega_bic: trapped.re,
        residual,
        min_im,
        verified: min_im <= BIC_VERIFY_FLOOR + alpha_floor,
    })
}

/// Locates every Friedrich-Wintgen BIC along a gap sweep.
///
/// Sign changes of [`fw_residual`] between consecutive gap samples are
/// refined by bisection until `|residual| <= tol`. Points that fail the
/// eigenvalue check are returned with `verified = false`.
pub fn find_bic(spec: &SweepSpec, tol: f64) -> Result<Vec<BicPoint>> {
    spec.validate()?;
    require_two_real(&spec.base_model)?;
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be non-negative, got {tol}")));
    }
    check_increasing(&spec.gap_samples)
        .map_err(|e| Error::Precondition(format!("BIC search needs increasing gap samples: {e}")))?;
    let residual_at = |g: f64| -> Result<f64> { fw_residual(&spec.model_at_gap(g)?) };

    let gaps = &spec.gap_samples;
    let residuals = gaps.iter().map(|&g| residual_at(g)).collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    for i in 0..gaps.len() {
        if residuals[i] == 0.0 {
            out.push(bic_at(spec, gaps[i], 0.0)?);
            continue;
        }
        if i + 1 == gaps.len() || residuals[i + 1] == 0.0 {
            continue;
        }
        if residuals[i].signum() == residuals[i + 1].signum() {
            continue;
        }

        let (mut lo, mut hi) = (gaps[i], gaps[i + 1]);
        let mut r_lo = residuals[i];
        let (mut best_g, mut best_r) = if residuals[i].abs() <= residuals[i + 1].abs() {
            (lo, r_lo)
        } else {
            (hi, residuals[i + 1])
        };
        for _ in 0..MAX_BISECTIONS {
            if best_r.abs() <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let r_mid = residual_at(mid)?;
            if r_mid.abs() < best_r.abs() {
                best_g = mid;
                best_r = r_mid;
            }
            if r_mid == 0.0 {
                break;
            }
            if r_mid.signum() == r_lo.signum() {
                lo = mid;
                r_lo = r_mid;
            } else {
                hi = mid;
            }
        }
        out.push(bic_at(spec, best_g, best_r)?);
    }
    out.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value));
    Ok(out)
}

/// Labels the coupling regime from the eigenvalue splitting at zero detuning.
pub fn classify_regime(model_at_zero_detuning: &CouplingModel) -> Result<RegimeReport> {
    let model = model_at_zero_detuning;
    if model.n_modes() != 2 {
        return Err(Error::Unsupported(format!(
            "two-mode model required, got {} modes",
            model.n_modes()
        )));
    }
    let detuning = (model.mode(0).omega - model.mode(1).omega).abs();
    if detuning > ZERO_DETUNING_TOL {
        return Err(Error::Precondition(format!(
            "classification needs zero detuning, got |omega1 - omega2| = {detuning}"
        )));
    }
    let ev: Vec<ComplexFrequency> = eigenvalues(model)?;
    let gap_re = (ev[0].re - ev[1].re).abs();
    let gap_im = (ev[0].im - ev[1].im).abs();
    let label = if gap_re > gap_im + REGIME_TIE_MARGIN {
        RegimeLabel::LevelRepulsion
    } else if gap_im > gap_re + REGIME_TIE_MARGIN {
        RegimeLabel::LevelAttraction
    } else {
        RegimeLabel::Degenerate
    };
    Ok(RegimeReport { gap_re, gap_im, label })
}

/// Vertex of the parabola through three samples, relative to the middle one.
/// Falls back to the middle sample when the fit is flat or the vertex leaves
/// the bracket.
fn refine_extremum(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let h0 = x[0] - x[1];
    let h2 = x[2] - x[1];
    let s0 = (y[0] - y[1]) / h0;
    let s2 = (y[2] - y[1]) / h2;
    let a = (s2 - s0) / (h2 - h0);
    let b = s2 - a * h2;
    if a == 0.0 || !a.is_finite() {
        return (x[1], y[1]);
    }
    let u = -b / (2.0 * a);
    if !(u >= h0 && u <= h2) {
        return (x[1], y[1]);
    }
    (x[1] + u, y[1] - b * b / (4.0 * a))
}

/// Reference level on one side of an extremum: the most extreme value
/// (max for dips, min for peaks) reached before the trace passes beyond the
/// extremum value.
fn side_reference<'a>(values: impl Iterator<Item = &'a f64>, level: f64, dip: bool) -> Option<f64> {
    let mut reference: Option<f64> = None;
    for &v in values {
        let beyond = if dip { v < level } else { v > level };
        if beyond {
            break;
        }
        reference = Some(match reference {
            None => v,
            Some(r) if dip => r.max(v),
            Some(r) => r.min(v),
        });
    }
    reference
}

/// First crossing of `level` walking outward from `start`; linear
/// interpolation between the bracketing samples.
fn half_level_crossing(freqs: &[f64], mags: &[f64], start: usize, level: f64, dip: bool, leftward: bool) -> Option<f64> {
    let reached = |v: f64| if dip { v >= level } else { v <= level };
    let mut prev = start;
    loop {
        let next = if leftward {
            prev.checked_sub(1)?
        } else {
            let n = prev + 1;
            if n >= mags.len() {
                return None;
            }
            n
        };
        if reached(mags[next]) {
            let (x0, y0, x1, y1) = (freqs[prev], mags[prev], freqs[next], mags[next]);
            if y1 == y0 {
                return Some(x1);
            }
            return Some(x0 + (level - y0) * (x1 - x0) / (y1 - y0));
        }
        prev = next;
    }
}

/// Local minima (dips) and maxima (peaks) of |S21| whose prominence exceeds
/// `prominence`, sorted by frequency.
///
/// Prominence follows the usual topographic definition: for a dip, the
/// smaller of the two highest levels reached on either side before the trace
/// drops below the dip, minus the dip value. Extremum positions are refined
/// by a parabola through the three nearest samples.
pub fn extract_features(spectrum: &SpectrumGrid, prominence: f64) -> Vec<SpectralFeature> {
    let freqs = spectrum.freqs();
    let mags = spectrum.magnitudes();
    let n = mags.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }

    let mut i = 1;
    while i + 1 < n {
        // plateau [i, j] of equal values
        let mut j = i;
        while j + 1 < n && mags[j + 1] == mags[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let (left, right, v) = (mags[i - 1], mags[j + 1], mags[i]);
        let kind = if v < left && v < right {
            Some(FeatureKind::Dip)
        } else if v > left && v > right {
            Some(FeatureKind::Peak)
        } else {
            None
        };
        if let Some(kind) = kind {
            let dip = kind == FeatureKind::Dip;
            let k = (i + j) / 2;
            let lref = side_reference(mags[..i].iter().rev(), v, dip);
            let rref = side_reference(mags[j + 1..].iter(), v, dip);
            let prom = match (lref, rref) {
                (Some(l), Some(r)) if dip => l.min(r) - v,
                (Some(l), Some(r)) => v - l.max(r),
                _ => 0.0,
            };
            if prom > prominence {
                let (freq, magnitude) = if i == j {
                    refine_extremum(
                        [freqs[k - 1], freqs[k], freqs[k + 1]],
                        [mags[k - 1], mags[k], mags[k + 1]],
                    )
                } else {
                    (0.5 * (freqs[i] + freqs[j]), v)
                };
                let magnitude = magnitude.max(0.0);
                let half = if dip { magnitude + 0.5 * prom } else { magnitude - 0.5 * prom };
                let fwhm = half_level_crossing(freqs, &mags, i, half, dip, true)
                    .zip(half_level_crossing(freqs, &mags, j, half, dip, false))
                    .map(|(l, r)| r - l);
                out.push(SpectralFeature {
                    kind,
                    freq,
                    magnitude,
                    fwhm,
                    prominence: prom,
                });
            }
        }
        i = j + 1;
    }
    out
}

/// Transparency window between the two deepest dips, if a peak separates
/// them.
pub fn transparency_window(spectrum: &SpectrumGrid) -> Option<TransparencyWindow> {
    let features = extract_features(spectrum, DEFAULT_PROMINENCE);
    let mut dips: Vec<&SpectralFeature> = features.iter().filter(|f| f.kind == FeatureKind::Dip).collect();
    if dips.len() < 2 {
        return None;
    }
    dips.sort_by(|a, b| a.magnitude.total_cmp(&b.magnitude));
    let (lo, hi) = if dips[0].freq < dips[1].freq {
        (dips[0].freq, dips[1].freq)
    } else {
        (dips[1].freq, dips[0].freq)
    };
    let peak = features
        .iter()
        .filter(|f| f.kind == FeatureKind::Peak && f.freq > lo && f.freq < hi)
        .map(|f| f.magnitude)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))))?;
    Some(TransparencyWindow {
        window_height: peak,
        dip_separation: hi - lo,
    })
}
