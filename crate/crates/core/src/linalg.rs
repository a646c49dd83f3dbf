//! Small dense complex linear algebra.
//!
//! Matrices here are at most a handful of modes wide, so everything is plain
//! row-major storage with O(n^3) kernels: Gaussian elimination for solves and
//! determinants, Faddeev-LeVerrier for characteristic polynomials and
//! Aberth-Ehrlich simultaneous iteration for polynomial roots.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from rows. Panics if the rows are ragged or not square.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "matrix must be square");
            data.extend_from_slice(row);
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.n.max(1)).take(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.n, v.len());
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `shift * I - self`
    pub fn shifted_resolvent_operand(&self, shift: Complex64) -> CMatrix {
        let mut out = self.clone();
        for z in out.data.iter_mut() {
            *z = -*z;
        }
        for i in 0..self.n {
            out[(i, i)] += shift;
        }
        out
    }

    /// Solves `self * x = rhs` by Gaussian elimination with partial pivoting.
    ///
    /// Returns `None` when a pivot falls below `1e-14 * max|A|`, i.e. the
    /// system is singular to working precision.
    pub fn solve(&self, rhs: &[Complex64]) -> Option<Vec<Complex64>> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Some(Vec::new());
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return None;
        }
        let tiny = 1e-14 * scale;
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();

        for col in 0..n {
            let (piv, piv_abs) = (col..n)
                .map(|r| (r, a[r * n + col].norm()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(piv_abs > tiny) {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                b.swap(col, piv);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                if f == ZERO {
                    continue;
                }
                for j in col..n {
                    let t = a[col * n + j];
                    a[r * n + j] -= f * t;
                }
                let t = b[col];
                b[r] -= f * t;
            }
        }

        let mut x = vec![ZERO; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        Some(x)
    }

    /// Determinant by elimination with partial pivoting.
    pub fn determinant(&self) -> Complex64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = ONE;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&p, &q| a[p * n + col].norm().total_cmp(&a[q * n + col].norm()))
                .unwrap_or(col);
            if a[piv * n + col] == ZERO {
                return ZERO;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                det = -det;
            }
            let d = a[col * n + col];
            det *= d;
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                for j in col..n {
                    let t = a[col * n + j];
                    a[r * n + j] -= f * t;
                }
            }
        }
        det
    }

    /// Characteristic polynomial `det(z I - A)` by Faddeev-LeVerrier.
    ///
    /// Coefficients are in ascending order, `c[0] + c[1] z + ... + z^n`, so
    /// the returned vector has length `n + 1` and is monic.
    pub fn characteristic_polynomial(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut coeffs = vec![ZERO; n + 1];
        coeffs[n] = ONE;
        let mut m = CMatrix::identity(n);
        for k in 1..=n {
            let am = self.matmul(&m);
            let c = -am.trace() / k as f64;
            coeffs[n - k] = c;
            m = am;
            for i in 0..n {
                m[(i, i)] += c;
            }
        }
        coeffs
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Evaluates `p(z)` and `p'(z)` by Horner's rule; coefficients ascending.
fn horner_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Stopping rule for [`polynomial_roots`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Converged when every correction satisfies `|w| <= tol * max(1, |z|)`.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iterations: 200,
        }
    }
}

/// All roots of a monic polynomial (ascending coefficients) by Aberth-Ehrlich
/// iteration.
pub fn polynomial_roots(coeffs: &[Complex64], opts: RootOptions) -> Result<Vec<Complex64>> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    if lead == ZERO {
        return Err(Error::InvalidInput("leading coefficient is zero".into()));
    }
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    if degree == 1 {
        return Ok(vec![-monic[0]]);
    }

    // Roots are shifted to their centroid before starting so the initial
    // circle sits around them.
    let center = -monic[degree - 1] / degree as f64;
    let shifted = taylor_shift(&monic, center);

    // Fujiwara-style radius bound on the shifted roots.
    let radius = (0..degree)
        .map(|k| shifted[k].norm().powf(1.0 / (degree - k) as f64))
        .fold(0.0, f64::max)
        * 2.0;
    if radius == 0.0 {
        return Ok(vec![center; degree]);
    }

    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / degree as f64 + 0.4;
            Complex64::from_polar(radius * 0.5, theta)
        })
        .collect();

    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let mut max_step: f64 = 0.0;
        for k in 0..degree {
            let (p, dp) = horner_with_derivative(&shifted, z[k]);
            if p == ZERO {
                continue;
            }
            let ratio = if dp == ZERO {
                // Stationary point; any finite nudge will do.
                Complex64::new(radius * 1e-3, radius * 1e-3)
            } else {
                p / dp
            };
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != k)
                .map(|j| ONE / (z[k] - z[j]))
                .sum();
            let step = ratio / (ONE - ratio * repulsion);
            if !(step.re.is_finite() && step.im.is_finite()) {
                return Err(Error::NumericalFailure {
                    what: "Aberth iteration produced a non-finite step".into(),
                    residual: f64::INFINITY,
                });
            }
            z[k] -= step;
            max_step = max_step.max(step.norm() / z[k].norm().max(1.0));
        }
        if max_step <= opts.tol {
            converged = true;
            break;
        }
    }

    if !converged {
        let residual = z
            .iter()
            .map(|&r| horner_with_derivative(&shifted, r).0.norm())
            .fold(0.0, f64::max);
        return Err(Error::NumericalFailure {
            what: format!(
                "polynomial roots did not converge in {} iterations",
                opts.max_iterations
            ),
            residual,
        });
    }
    Ok(z.into_iter().map(|r| r + center).collect())
}

/// Coefficients of `q(z) = p(z + s)`, ascending.
fn taylor_shift(coeffs: &[Complex64], s: Complex64) -> Vec<Complex64> {
    let mut q = coeffs.to_vec();
    let n = q.len();
    // Repeated synthetic division.
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let t = q[j + 1];
            q[j] += s * t;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solve_recovers_known_vector() {
        let a = CMatrix::from_rows(&[
            vec![c(2.0, 1.0), c(0.5, 0.0), c(0.0, -1.0)],
            vec![c(0.0, 0.3), c(1.0, 0.0), c(1.0, 1.0)],
            vec![c(4.0, 0.0), c(0.0, 2.0), c(-1.0, 0.0)],
        ]);
        let x = vec![c(1.0, -1.0), c(0.5, 2.0), c(-3.0, 0.25)];
        let b = a.mul_vec(&x);
        let got = a.solve(&b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).norm() < 1e-13);
        }
    }

    #[test]
    fn solve_flags_singular() {
        let a = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(2.0, 0.0), c(4.0, 0.0)]]);
        assert!(a.solve(&[ONE, ONE]).is_none());
        assert!(CMatrix::zeros(2).solve(&[ONE, ONE]).is_none());
    }

    #[test]
    fn determinant_of_triangular_is_diagonal_product() {
        let a = CMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(7.0, 1.0), c(3.0, 0.0)],
            vec![ZERO, c(0.0, 1.0), c(5.0, 0.0)],
            vec![ZERO, ZERO, c(-1.0, 2.0)],
        ]);
        let want = c(2.0, 0.0) * c(0.0, 1.0) * c(-1.0, 2.0);
        assert!((a.determinant() - want).norm() < 1e-14);
    }

    #[test]
    fn characteristic_polynomial_of_2x2() {
        let a = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(3.0, 0.0), c(4.0, 0.0)]]);
        // z^2 - 5 z - 2
        let p = a.characteristic_polynomial();
        assert_eq!(p, vec![c(-2.0, 0.0), c(-5.0, 0.0), ONE]);
    }

    #[test]
    fn roots_of_cubic_with_known_factors() {
        // (z - 1)(z - 2i)(z + 3)
        let r = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)];
        let p = vec![
            -(r[0] * r[1] * r[2]),
            r[0] * r[1] + r[0] * r[2] + r[1] * r[2],
            -(r[0] + r[1] + r[2]),
            ONE,
        ];
        let mut got = polynomial_roots(&p, RootOptions::default()).unwrap();
        got.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let want = [r[2], r[1], r[0]];
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn repeated_root_converges() {
        // (z - 2)^3
        let p = vec![c(-8.0, 0.0), c(12.0, 0.0), c(-6.0, 0.0), ONE];
        let got = polynomial_roots(&p, RootOptions::default()).unwrap();
        assert!(got.iter().all(|z| (z - c(2.0, 0.0)).norm() < 1e-10));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let p = vec![c(-1.0, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(0.0, 1.0), ONE];
        let err = polynomial_roots(
            &p,
            RootOptions {
                tol: 1e-13,
                max_iterations: 1,
            },
        )
        .unwrap_err();
        match err {
            Error::NumericalFailure { residual, .. } => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn taylor_shift_matches_direct_evaluation() {
        let p = vec![c(1.0, 1.0), c(-2.0, 0.0), c(0.5, 0.0), c(0.0, 1.0)];
        let s = c(0.7, -0.2);
        let q = taylor_shift(&p, s);
        let z = c(0.3, 0.9);
        let lhs = horner_with_derivative(&q, z).0;
        let rhs = horner_with_derivative(&p, z + s).0;
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
