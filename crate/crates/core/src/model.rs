//! The effective non-Hermitian Hamiltonian of N resonator modes sharing one
//! transmission channel, its complex eigenfrequencies and the S21 response.
//!
//! All frequencies and rates are cyclic, in GHz. Time dependence is
//! `exp(-i omega t)`, so decaying modes have negative imaginary parts.
//!
//! The effective Hamiltonian is
//!
//! ```text
//! H_jj = omega_j - i (alpha_j + beta_j)
//! H_jk = Delta_jk - i sqrt(beta_j beta_k)        (j != k)
//! ```
//!
//! where `beta_j` is the radiative rate into the channel, `alpha_j` the
//! intrinsic loss and `Delta_jk = J_jk + i Gamma_jk` the direct coupling. The
//! channel term is a rank-one update `-i v v^T` with `v_j = sqrt(beta_j)`, and
//! the transmission is
//!
//! ```text
//! S21(omega) = 1 - 2 i v^T (omega I - H)^-1 v
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{polynomial_roots, CMatrix, RootOptions};

/// Largest mode count accepted by [`eigenvalues`].
pub const MAX_EIGEN_MODES: usize = 8;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One resonator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    /// Resonance frequency, GHz.
    pub omega: f64,
    /// Radiative damping into the shared channel, GHz.
    pub beta_ext: f64,
    /// Intrinsic (non-radiative) damping, GHz.
    #[serde(default)]
    pub alpha_int: f64,
}

impl ModeParams {
    pub fn new(omega: f64, beta_ext: f64) -> Self {
        Self {
            omega,
            beta_ext,
            alpha_int: 0.0,
        }
    }

    pub fn with_alpha(mut self, alpha_int: f64) -> Self {
        self.alpha_int = alpha_int;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() || self.omega <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "mode frequency must be finite and positive, got {}",
                self.omega
            )));
        }
        if !self.beta_ext.is_finite() || self.beta_ext < 0.0 {
            return Err(Error::InvalidModel(format!(
                "radiative damping must be finite and non-negative, got {}",
                self.beta_ext
            )));
        }
        if !self.alpha_int.is_finite() || self.alpha_int < 0.0 {
            return Err(Error::InvalidModel(format!(
                "intrinsic damping must be finite and non-negative, got {}",
                self.alpha_int
            )));
        }
        Ok(())
    }

    /// Total decay rate `alpha + beta`.
    pub fn total_damping(&self) -> f64 {
        self.alpha_int + self.beta_ext
    }
}

/// N modes plus their symmetric direct-coupling matrix.
///
/// Constructed only through validating constructors, so every instance has
/// physical mode parameters and a finite, symmetric, zero-diagonal coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingModel {
    modes: Vec<ModeParams>,
    coupling: CMatrix,
}

impl CouplingModel {
    pub fn new(modes: Vec<ModeParams>, direct_coupling: CMatrix) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            m.validate()
                .map_err(|e| Error::InvalidModel(format!("mode {}: {e}", i + 1)))?;
        }
        let n = modes.len();
        if direct_coupling.dim() != n {
            return Err(Error::InvalidModel(format!(
                "coupling matrix is {0}x{0} but there are {n} modes",
                direct_coupling.dim()
            )));
        }
        if !direct_coupling.is_finite() {
            return Err(Error::InvalidModel("coupling matrix has non-finite entries".into()));
        }
        for j in 0..n {
            if direct_coupling[(j, j)] != Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidModel(format!(
                    "coupling diagonal entry ({0},{0}) must be zero",
                    j + 1
                )));
            }
            for k in j + 1..n {
                if direct_coupling[(j, k)] != direct_coupling[(k, j)] {
                    return Err(Error::InvalidModel(format!(
                        "coupling matrix is not symmetric at ({},{})",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        Ok(Self {
            modes,
            coupling: direct_coupling,
        })
    }

    /// Modes with no direct coupling.
    pub fn uncoupled(modes: Vec<ModeParams>) -> Result<Self> {
        let n = modes.len();
        Self::new(modes, CMatrix::zeros(n))
    }

    /// Two modes coupled by `delta`.
    pub fn two_mode(first: ModeParams, second: ModeParams, delta: Complex64) -> Result<Self> {
        let mut c = CMatrix::zeros(2);
        c[(0, 1)] = delta;
        c[(1, 0)] = delta;
        Self::new(vec![first, second], c)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[ModeParams] {
        &self.modes
    }

    pub fn mode(&self, index: usize) -> &ModeParams {
        &self.modes[index]
    }

    pub fn direct_coupling(&self) -> &CMatrix {
        &self.coupling
    }

    pub fn coupling(&self, j: usize, k: usize) -> Complex64 {
        self.coupling[(j, k)]
    }

    /// Copy with mode `index` replaced.
    pub fn with_mode(&self, index: usize, mode: ModeParams) -> Result<Self> {
        if index >= self.n_modes() {
            return Err(Error::InvalidInput(format!(
                "mode index {index} out of range for {} modes",
                self.n_modes()
            )));
        }
        mode.validate()?;
        let mut out = self.clone();
        out.modes[index] = mode;
        Ok(out)
    }

    /// Copy with mode `index` retuned to `omega`.
    pub fn with_mode_omega(&self, index: usize, omega: f64) -> Result<Self> {
        let mode = ModeParams {
            omega,
            ..*self.modes.get(index).ok_or_else(|| {
                Error::InvalidInput(format!("mode index {index} out of range"))
            })?
        };
        self.with_mode(index, mode)
    }

    /// Copy with the symmetric pair `(j, k)` of the coupling set to `delta`.
    pub fn with_coupling(&self, j: usize, k: usize, delta: Complex64) -> Result<Self> {
        let n = self.n_modes();
        if j >= n || k >= n || j == k {
            return Err(Error::InvalidInput(format!(
                "coupling index ({j},{k}) invalid for {n} modes"
            )));
        }
        let mut c = self.coupling.clone();
        c[(j, k)] = delta;
        c[(k, j)] = delta;
        Self::new(self.modes.clone(), c)
    }

    /// True when no off-diagonal coupling has a nonzero imaginary part.
    pub fn has_real_coupling(&self) -> bool {
        let n = self.n_modes();
        (0..n).all(|j| (0..n).all(|k| self.coupling[(j, k)].im == 0.0))
    }

    /// Checks the extra constraint of a passive system: `Im Delta_jk <= 0`.
    pub fn check_passive(&self) -> Result<()> {
        let n = self.n_modes();
        for j in 0..n {
            for k in j + 1..n {
                if self.coupling[(j, k)].im > 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "coupling ({},{}) has positive imaginary part; not passive",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Channel coupling vector `v_j = sqrt(beta_j)`.
    pub fn channel_vector(&self) -> Vec<Complex64> {
        self.modes
            .iter()
            .map(|m| Complex64::new(m.beta_ext.sqrt(), 0.0))
            .collect()
    }
}

/// Complex eigenfrequency; `im < 0` means decaying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexFrequency {
    pub re: f64,
    pub im: f64,
}

impl ComplexFrequency {
    /// Branch ordering: real part ascending, ties by imaginary part.
    pub fn branch_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.re.total_cmp(&other.re).then(self.im.total_cmp(&other.im))
    }
}

impl From<Complex64> for ComplexFrequency {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ComplexFrequency> for Complex64 {
    fn from(f: ComplexFrequency) -> Self {
        Complex64::new(f.re, f.im)
    }
}

/// Frequency grid with complex transmission samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumGrid {
    freqs: Vec<f64>,
    s21: Vec<Complex64>,
}

impl SpectrumGrid {
    pub fn new(freqs: Vec<f64>, s21: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != s21.len() {
            return Err(Error::InvalidInput(format!(
                "{} frequencies but {} samples",
                freqs.len(),
                s21.len()
            )));
        }
        check_increasing(&freqs)?;
        Ok(Self { freqs, s21 })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn s21(&self) -> &[Complex64] {
        &self.s21
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.s21.iter().map(|z| z.norm()).collect()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.s21.iter().map(|z| z.arg()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.freqs.iter().copied().zip(self.s21.iter().copied())
    }
}

pub(crate) fn check_increasing(freqs: &[f64]) -> Result<()> {
    if let Some(bad) = freqs.iter().position(|f| !f.is_finite()) {
        return Err(Error::InvalidInput(format!("frequency {bad} is not finite")));
    }
    if let Some(i) = freqs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!(
            "frequencies must be strictly increasing (index {} -> {}: {} -> {})",
            i,
            i + 1,
            freqs[i],
            freqs[i + 1]
        )));
    }
    Ok(())
}

/// `points` evenly spaced frequencies from `fmin` to `fmax` inclusive.
pub fn linspace(fmin: f64, fmax: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![fmin],
        _ => {
            let step = (fmax - fmin) / (points - 1) as f64;
            (0..points)
                .map(|i| if i == points - 1 { fmax } else { fmin + step * i as f64 })
                .collect()
        }
    }
}

/// The effective coupling matrix.
pub fn build_effective_hamiltonian(model: &CouplingModel) -> CMatrix {
    let n = model.n_modes();
    let mut h = CMatrix::zeros(n);
    for (j, mj) in model.modes.iter().enumerate() {
        h[(j, j)] = Complex64::new(mj.omega, -mj.total_damping());
        for (k, mk) in model.modes.iter().enumerate() {
            if k != j {
                h[(j, k)] = model.coupling[(j, k)] - I * (mj.beta_ext * mk.beta_ext).sqrt();
            }
        }
    }
    h
}

fn sort_branches(mut values: Vec<ComplexFrequency>) -> Vec<ComplexFrequency> {
    values.sort_by(|a, b| a.branch_cmp(b));
    values
}

/// Eigenvalues of a 2x2 matrix from the quadratic formula, written as
/// `mean +- sqrt(half_diff^2 + b c)` so the discriminant never subtracts two
/// large squares.
pub fn eigenvalues_2x2(h: &CMatrix) -> [Complex64; 2] {
    assert_eq!(h.dim(), 2);
    let coupling = h[(0, 1)] * h[(1, 0)];
    if coupling == Complex64::new(0.0, 0.0) {
        // triangular: the diagonal is exact
        return [h[(0, 0)], h[(1, 1)]];
    }
    let mean = (h[(0, 0)] + h[(1, 1)]) * 0.5;
    let half_diff = (h[(0, 0)] - h[(1, 1)]) * 0.5;
    let root = (half_diff * half_diff + coupling).sqrt();
    [mean + root, mean - root]
}

/// Eigenvalues from the roots of the characteristic polynomial, for any N.
///
/// The matrix is shifted by its mean diagonal first so the polynomial
/// coefficients stay small.
pub fn eigenvalues_via_polynomial(model: &CouplingModel) -> Result<Vec<ComplexFrequency>> {
    let h = build_effective_hamiltonian(model);
    let n = h.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let shift = h.trace() / n as f64;
    let mut centered = h;
    for i in 0..n {
        centered[(i, i)] -= shift;
    }
    let roots = polynomial_roots(&centered.characteristic_polynomial(), RootOptions::default())?;
    Ok(sort_branches(
        roots.into_iter().map(|z| ComplexFrequency::from(z + shift)).collect(),
    ))
}

/// Complex eigenfrequencies of the effective Hamiltonian, sorted by real
/// part then imaginary part.
pub fn eigenvalues(model: &CouplingModel) -> Result<Vec<ComplexFrequency>> {
    let n = model.n_modes();
    if n > MAX_EIGEN_MODES {
        return Err(Error::Unsupported(format!(
            "eigenvalues limited to {MAX_EIGEN_MODES} modes, got {n}"
        )));
    }
    match n {
        0 => Ok(Vec::new()),
        1 => {
            let h = build_effective_hamiltonian(model);
            Ok(vec![h[(0, 0)].into()])
        }
        2 => {
            let h = build_effective_hamiltonian(model);
            Ok(sort_branches(eigenvalues_2x2(&h).into_iter().map(Into::into).collect()))
        }
        _ => eigenvalues_via_polynomial(model),
    }
}

/// `H` and `v` of a model, precomputed for repeated S21 evaluation.
#[derive(Debug, Clone)]
pub struct Response {
    h: CMatrix,
    v: Vec<Complex64>,
    transparent: bool,
}

impl Response {
    pub fn new(model: &CouplingModel) -> Self {
        let v = model.channel_vector();
        let transparent = v.iter().all(|x| x.re == 0.0);
        Self {
            h: build_effective_hamiltonian(model),
            v,
            transparent,
        }
    }

    /// `1 - 2 i v^T (omega I - H)^-1 v` by a direct solve (closed form for
    /// one and two modes).
    pub fn s21(&self, omega: f64) -> Result<Complex64> {
        if !omega.is_finite() {
            return Err(Error::InvalidInput(format!("frequency {omega} is not finite")));
        }
        if self.transparent {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let w = Complex64::new(omega, 0.0);
        let singular = Error::SingularResponse { omega };
        let overlap = match self.h.dim() {
            1 => {
                let a = w - self.h[(0, 0)];
                if a.norm() == 0.0 {
                    return Err(singular);
                }
                self.v[0] * self.v[0] / a
            }
            2 => {
                let (a, b) = (w - self.h[(0, 0)], -self.h[(0, 1)]);
                let (c, d) = (-self.h[(1, 0)], w - self.h[(1, 1)]);
                // Same pivot test as the elimination in CMatrix::solve.
                // Squared magnitudes avoid the square roots on this hot path.
                let (na, nc) = (a.norm_sqr(), c.norm_sqr());
                let tiny_sq = 1e-28 * na.max(b.norm_sqr()).max(nc).max(d.norm_sqr());
                let pivot_sq = na.max(nc);
                let det = a * d - b * c;
                if !(pivot_sq > tiny_sq) || !(det.norm_sqr() > tiny_sq * pivot_sq) {
                    return Err(singular);
                }
                let (v0, v1) = (self.v[0], self.v[1]);
                (d * v0 * v0 - (b + c) * v0 * v1 + a * v1 * v1) / det
            }
            _ => {
                let a = self.h.shifted_resolvent_operand(w);
                let x = a.solve(&self.v).ok_or(singular)?;
                self.v.iter().zip(&x).map(|(a, b)| a * b).sum()
            }
        };
        Ok(Complex64::new(1.0, 0.0) - 2.0 * I * overlap)
    }
}

/// Transmission at one frequency by a direct linear solve.
pub fn s21(model: &CouplingModel, omega: f64) -> Result<Complex64> {
    Response::new(model).s21(omega)
}

/// Transmission via the rank-one (Sherman-Morrison) form.
///
/// With `A = omega I - H0`, where `H0` is the Hamiltonian without the channel
/// term, and `g = v^T A^-1 v`, the response is `(1 - i g) / (1 + i g)`. When
/// there is no direct coupling `A` is diagonal and no solve is needed.
pub fn s21_sherman_morrison(model: &CouplingModel, omega: f64) -> Result<Complex64> {
    if !omega.is_finite() {
        return Err(Error::InvalidInput(format!("frequency {omega} is not finite")));
    }
    let n = model.n_modes();
    let uncoupled = (0..n).all(|j| (0..n).all(|k| model.coupling[(j, k)] == Complex64::new(0.0, 0.0)));
    let g: Complex64 = if uncoupled {
        let mut g = Complex64::new(0.0, 0.0);
        for m in model.modes() {
            if m.beta_ext == 0.0 {
                continue;
            }
            let d = Complex64::new(omega - m.omega, m.alpha_int);
            if d.norm() == 0.0 {
                return Err(Error::SingularResponse { omega });
            }
            g += m.beta_ext / d;
        }
        g
    } else {
        let mut a = CMatrix::zeros(n);
        for j in 0..n {
            for k in 0..n {
                a[(j, k)] = -model.coupling[(j, k)];
            }
            let m = model.mode(j);
            a[(j, j)] = Complex64::new(omega - m.omega, m.alpha_int);
        }
        let v = model.channel_vector();
        let x = a.solve(&v).ok_or(Error::SingularResponse { omega })?;
        v.iter().zip(&x).map(|(a, b)| a * b).sum()
    };
    let denom = Complex64::new(1.0, 0.0) + I * g;
    if denom.norm() == 0.0 {
        return Err(Error::SingularResponse { omega });
    }
    Ok((Complex64::new(1.0, 0.0) - I * g) / denom)
}

/// S21 sampled on a strictly increasing frequency grid.
pub fn s21_spectrum(model: &CouplingModel, freqs: &[f64]) -> Result<SpectrumGrid> {
    check_increasing(freqs)?;
    let response = Response::new(model);
    let s21 = freqs
        .iter()
        .map(|&f| {
            response.s21(f).map_err(|e| Error::AtFrequency {
                freq: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumGrid {
        freqs: freqs.to_vec(),
        s21,
    })
}
