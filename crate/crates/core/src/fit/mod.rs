//! Least-squares estimation of mode parameters from measured spectra.
//!
//! Free parameters are mapped onto the unit box defined by their bounds and
//! minimized with a bounded Nelder-Mead simplex. Each fit runs from the
//! initial model and from jittered copies of it (seeded), keeping the best.

mod simplex;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{extract_features, FeatureKind, DEFAULT_PROMINENCE};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{CouplingModel, ModeParams, Response, SpectrumGrid};

use simplex::{minimize, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Loss {
    /// Real and imaginary residuals stacked.
    #[default]
    ComplexResidual,
    /// Residuals of |S21| only; blind to a global phase.
    MagnitudeResidual,
}

/// Addressable model parameter. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Omega(usize),
    Beta(usize),
    Alpha(usize),
    DeltaRe(usize, usize),
    DeltaIm(usize, usize),
}

impl Param {
    /// Fails when the parameter does not exist in an `n`-mode model.
    pub fn check(&self, n: usize) -> Result<()> {
        let ok = match *self {
            Param::Omega(j) | Param::Beta(j) | Param::Alpha(j) => j < n,
            Param::DeltaRe(j, k) | Param::DeltaIm(j, k) => j < n && k < n && j != k,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("parameter {self} does not exist for {n} modes")))
        }
    }

    pub fn get(&self, model: &CouplingModel) -> f64 {
        match *self {
            Param::Omega(j) => model.mode(j).omega,
            Param::Beta(j) => model.mode(j).beta_ext,
            Param::Alpha(j) => model.mode(j).alpha_int,
            Param::DeltaRe(j, k) => model.coupling(j, k).re,
            Param::DeltaIm(j, k) => model.coupling(j, k).im,
        }
    }

    /// Rates that must stay non-negative.
    pub fn is_rate(&self) -> bool {
        matches!(self, Param::Beta(_) | Param::Alpha(_))
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Param::Omega(j) => write!(f, "omega{}", j + 1),
            Param::Beta(j) => write!(f, "beta{}", j + 1),
            Param::Alpha(j) => write!(f, "alpha{}", j + 1),
            Param::DeltaRe(0, 1) => f.write_str("delta_re"),
            Param::DeltaIm(0, 1) => f.write_str("delta_im"),
            Param::DeltaRe(j, k) => write!(f, "delta_re_{}_{}", j + 1, k + 1),
            Param::DeltaIm(j, k) => write!(f, "delta_im_{}_{}", j + 1, k + 1),
        }
    }
}

impl FromStr for Param {
    type Err = Error;

    /// Accepts `omegaN`, `betaN`, `alphaN` (1-based), `delta_re` / `delta_im`
    /// for the (1,2) pair and `delta_re_J_K` / `delta_im_J_K` otherwise.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown parameter name '{s}'"));
        let index = |digits: &str| -> Result<usize> {
            match digits.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(bad()),
            }
        };
        let s = s.trim();
        let pair = |rest: &str| -> Result<(usize, usize)> {
            if rest.is_empty() {
                return Ok((0, 1));
            }
            let rest = rest.strip_prefix('_').ok_or_else(bad)?;
            let (a, b) = rest.split_once('_').ok_or_else(bad)?;
            Ok((index(a)?, index(b)?))
        };
        if let Some(rest) = s.strip_prefix("delta_re") {
            let (j, k) = pair(rest)?;
            return Ok(Param::DeltaRe(j.min(k), j.max(k)));
        }
        if let Some(rest) = s.strip_prefix("delta_im") {
            let (j, k) = pair(rest)?;
            return Ok(Param::DeltaIm(j.min(k), j.max(k)));
        }
        for (prefix, make) in [
            ("omega", Param::Omega as fn(usize) -> Param),
            ("beta", Param::Beta),
            ("alpha", Param::Alpha),
        ] {
            if let Some(rest) = s.strip_prefix(prefix) {
                return Ok(make(index(rest)?));
            }
        }
        Err(bad())
    }
}

/// Sets `params` to `values` on a copy of `base`.
pub fn assemble(base: &CouplingModel, params: &[Param], values: &[f64]) -> Result<CouplingModel> {
    let mut modes: Vec<ModeParams> = base.modes().to_vec();
    let mut coupling: CMatrix = base.direct_coupling().clone();
    for (p, &v) in params.iter().zip(values) {
        match *p {
            Param::Omega(j) => modes[j].omega = v,
            Param::Beta(j) => modes[j].beta_ext = v,
            Param::Alpha(j) => modes[j].alpha_int = v,
            Param::DeltaRe(j, k) => {
                let z = Complex64::new(v, coupling[(j, k)].im);
                coupling[(j, k)] = z;
                coupling[(k, j)] = z;
            }
            Param::DeltaIm(j, k) => {
                let z = Complex64::new(coupling[(j, k)].re, v);
                coupling[(j, k)] = z;
                coupling[(k, j)] = z;
            }
        }
    }
    CouplingModel::new(modes, coupling)
}

/// A free parameter with its closed search interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParam {
    pub param: Param,
    pub lower: f64,
    pub upper: f64,
}

impl FreeParam {
    pub fn new(param: Param, lower: f64, upper: f64) -> Self {
        Self { param, lower, upper }
    }

    /// Interval `value +- fraction * |value|` around the parameter's value in
    /// `model`; rates are clipped at zero. Panics if `param` is not in `model`.
    pub fn relative(param: Param, model: &CouplingModel, fraction: f64) -> Self {
        let v = param.get(model);
        let half = fraction * v.abs();
        let lower = if param.is_rate() { (v - half).max(0.0) } else { v - half };
        Self::new(param, lower, v + half)
    }

    fn unit_of(&self, v: f64) -> f64 {
        let width = self.upper - self.lower;
        if width > 0.0 {
            ((v - self.lower) / width).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    fn value_at(&self, u: f64) -> f64 {
        if u >= 1.0 {
            self.upper
        } else {
            self.lower + u * (self.upper - self.lower)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub observed: SpectrumGrid,
    pub free: Vec<FreeParam>,
    pub initial: CouplingModel,
    pub loss: Loss,
}

impl FitProblem {
    pub fn validate(&self) -> Result<()> {
        if self.free.is_empty() {
            return Err(Error::InvalidInput("at least one free parameter is required".into()));
        }
        if self.observed.is_empty() {
            return Err(Error::InvalidInput("observed spectrum is empty".into()));
        }
        let n = self.initial.n_modes();
        for (i, fp) in self.free.iter().enumerate() {
            fp.param.check(n)?;
            if self.free[..i].iter().any(|o| o.param == fp.param) {
                return Err(Error::InvalidInput(format!("parameter {} listed twice", fp.param)));
            }
            if !(fp.lower.is_finite() && fp.upper.is_finite()) || fp.lower > fp.upper {
                return Err(Error::InvalidInput(format!(
                    "bounds for {} must be finite with lower <= upper, got [{}, {}]",
                    fp.param, fp.lower, fp.upper
                )));
            }
            if fp.param.is_rate() && fp.lower < 0.0 {
                return Err(Error::InvalidInput(format!("lower bound for {} must be >= 0", fp.param)));
            }
            if let Param::Omega(_) = fp.param {
                if fp.lower <= 0.0 {
                    return Err(Error::InvalidInput(format!("lower bound for {} must be > 0", fp.param)));
                }
            }
            let v = fp.param.get(&self.initial);
            if v < fp.lower || v > fp.upper {
                return Err(Error::InvalidInput(format!(
                    "initial {} = {v} outside [{}, {}]",
                    fp.param, fp.lower, fp.upper
                )));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<Param> {
        self.free.iter().map(|f| f.param).collect()
    }

    /// Number of real residuals in the objective.
    pub fn residual_count(&self) -> usize {
        match self.loss {
            Loss::ComplexResidual => 2 * self.observed.len(),
            Loss::MagnitudeResidual => self.observed.len(),
        }
    }

    /// Sum of squared residuals of `model` against the observed spectrum;
    /// infinite when the model response is singular somewhere on the grid.
    pub fn objective(&self, model: &CouplingModel) -> f64 {
        let response = Response::new(model);
        let mut sum = 0.0;
        for (f, obs) in self.observed.iter() {
            let Ok(s) = response.s21(f) else {
                return f64::INFINITY;
            };
            sum += match self.loss {
                Loss::ComplexResidual => (s - obs).norm_sqr(),
                Loss::MagnitudeResidual => {
                    let d = s.norm() - obs.norm();
                    d * d
                }
            };
        }
        sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Seed for the jittered restarts.
    pub seed: u64,
    /// Total starts: the initial model plus `starts - 1` jittered copies.
    pub starts: usize,
    /// Evaluation cap per start.
    pub max_evaluations: usize,
    pub rel_tol: f64,
    /// Jitter half-width as a fraction of each bound interval.
    pub jitter: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 3,
            max_evaluations: 5000,
            rel_tol: 1e-12,
            jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: CouplingModel,
    pub rms_residual: f64,
    /// Sum of squared residuals at `model`.
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each simplex iteration, across all starts.
    pub objective_history: Vec<f64>,
}

pub fn fit_spectrum(problem: &FitProblem) -> Result<FitResult> {
    fit_spectrum_with(problem, &FitOptions::default())
}

pub fn fit_spectrum_with(problem: &FitProblem, opts: &FitOptions) -> Result<FitResult> {
    problem.validate()?;
    let params = problem.params();
    let eval = |u: &[f64]| -> f64 {
        let values: Vec<f64> = problem.free.iter().zip(u).map(|(fp, &x)| fp.value_at(x)).collect();
        match assemble(&problem.initial, &params, &values) {
            Ok(m) => problem.objective(&m),
            Err(_) => f64::INFINITY,
        }
    };

    let u0: Vec<f64> = problem
        .free
        .iter()
        .map(|fp| fp.unit_of(fp.param.get(&problem.initial)))
        .collect();
    let f0 = problem.objective(&problem.initial);
    if !f0.is_finite() {
        return Err(Error::InvalidInitial);
    }
    let n_res = problem.residual_count() as f64;
    if f0 == 0.0 {
        return Ok(FitResult {
            model: problem.initial.clone(),
            rms_residual: 0.0,
            objective: 0.0,
            iterations: 0,
            evaluations: 1,
            converged: true,
            objective_history: vec![0.0],
        });
    }

    let simplex_opts = SimplexOptions {
        max_evaluations: opts.max_evaluations,
        rel_tol: opts.rel_tol,
        initial_step: 0.1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut history = vec![f0];
    let mut best_u = u0.clone();
    let mut best_f = f0;
    let mut best_converged = false;
    let mut iterations = 0;
    let mut evaluations = 1;

    for start in 0..opts.starts.max(1) {
        let (u, fu) = if start == 0 {
            (u0.clone(), f0)
        } else {
            let u: Vec<f64> = u0
                .iter()
                .map(|&x| (x + rng.random_range(-opts.jitter..=opts.jitter)).clamp(0.0, 1.0))
                .collect();
            let fu = eval(&u);
            evaluations += 1;
            (u, fu)
        };
        let outcome = minimize(eval, &u, fu, simplex_opts);
        iterations += outcome.iterations;
        evaluations += outcome.evaluations;
        let mut running = *history.last().expect("history starts non-empty");
        for v in &outcome.history {
            running = running.min(*v);
            history.push(running);
        }
        if outcome.value < best_f || (start == 0 && outcome.value <= best_f) {
            best_f = outcome.value;
            best_u = outcome.best;
            best_converged = outcome.converged;
        }
    }
    if *history.last().expect("non-empty") > best_f {
        history.push(best_f);
    }

    let values: Vec<f64> = problem.free.iter().zip(&best_u).map(|(fp, &x)| fp.value_at(x)).collect();
    let model = assemble(&problem.initial, &params, &values)?;
    let objective = problem.objective(&model);
    Ok(FitResult {
        model,
        rms_residual: (objective / n_res).sqrt(),
        objective,
        iterations,
        evaluations,
        converged: best_converged,
        objective_history: history,
    })
}

/// Outcome of a joint fit over several spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFit {
    pub results: Vec<FitResult>,
    pub shared: Vec<(Param, f64)>,
    /// Pooled objective after each outer round.
    pub pooled_history: Vec<f64>,
}

const SWEEP_ROUNDS: usize = 10;
const SWEEP_REL_TOL: f64 = 1e-9;

/// Fits several spectra whose models share the parameters in `shared`.
///
/// Alternates between fitting the shared values against the pooled
/// objective (locals fixed) and refitting each problem's remaining free
/// parameters (shared fixed).
pub fn fit_sweep(problems: &[FitProblem], shared: &[Param], opts: &FitOptions) -> Result<SweepFit> {
    let first = problems
        .first()
        .ok_or_else(|| Error::InvalidInput("no problems to fit".into()))?;
    let n = first.initial.n_modes();
    for (i, p) in problems.iter().enumerate() {
        p.validate().map_err(|e| Error::InvalidInput(format!("problem {}: {e}", i + 1)))?;
        if p.initial.n_modes() != n {
            return Err(Error::InvalidInput(format!(
                "problem {} has {} modes, expected {n}",
                i + 1,
                p.initial.n_modes()
            )));
        }
        for s in shared {
            if !p.free.iter().any(|f| f.param == *s) {
                return Err(Error::InvalidInput(format!(
                    "shared parameter {s} is not free in problem {}",
                    i + 1
                )));
            }
        }
    }

    if shared.is_empty() || problems.len() == 1 {
        let results = problems
            .iter()
            .map(|p| fit_spectrum_with(p, opts))
            .collect::<Result<Vec<_>>>()?;
        let shared_values = shared.iter().map(|s| (*s, s.get(&results[0].model))).collect();
        let pooled = results.iter().map(|r| r.objective).sum();
        return Ok(SweepFit {
            results,
            shared: shared_values,
            pooled_history: vec![pooled],
        });
    }

    // Shared bounds: intersection over problems.
    let mut shared_bounds: Vec<FreeParam> = Vec::with_capacity(shared.len());
    for s in shared {
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for p in problems {
            let fp = p.free.iter().find(|f| f.param == *s).expect("checked above");
            lower = lower.max(fp.lower);
            upper = upper.min(fp.upper);
        }
        if lower > upper {
            return Err(Error::InvalidInput(format!("bounds for shared {s} do not overlap")));
        }
        shared_bounds.push(FreeParam::new(*s, lower, upper));
    }

    let start_values: Vec<f64> = shared_bounds
        .iter()
        .map(|fp| fp.param.get(&first.initial).clamp(fp.lower, fp.upper))
        .collect();
    let mut models = problems
        .iter()
        .map(|p| assemble(&p.initial, shared, &start_values))
        .collect::<Result<Vec<_>>>()?;
    let pooled = |models: &[CouplingModel]| -> f64 {
        problems.iter().zip(models).map(|(p, m)| p.objective(m)).sum()
    };

    let simplex_opts = SimplexOptions {
        max_evaluations: opts.max_evaluations,
        rel_tol: opts.rel_tol,
        initial_step: 0.1,
    };
    let mut pooled_history = vec![pooled(&models)];
    let mut results: Vec<Option<FitResult>> = vec![None; problems.len()];

    for round in 0..SWEEP_ROUNDS {
        // Shared step.
        let eval = |u: &[f64]| -> f64 {
            let values: Vec<f64> = shared_bounds.iter().zip(u).map(|(fp, &x)| fp.value_at(x)).collect();
            let mut total = 0.0;
            for (p, m) in problems.iter().zip(&models) {
                match assemble(m, shared, &values) {
                    Ok(m) => total += p.objective(&m),
                    Err(_) => return f64::INFINITY,
                }
            }
            total
        };
        let u0: Vec<f64> = shared_bounds
            .iter()
            .map(|fp| fp.unit_of(fp.param.get(&models[0])))
            .collect();
        let f0 = eval(&u0);
        if !f0.is_finite() {
            return Err(Error::InvalidInitial);
        }
        let outcome = minimize(eval, &u0, f0, simplex_opts);
        let values: Vec<f64> = shared_bounds
            .iter()
            .zip(&outcome.best)
            .map(|(fp, &x)| fp.value_at(x))
            .collect();
        models = models
            .iter()
            .map(|m| assemble(m, shared, &values))
            .collect::<Result<Vec<_>>>()?;

        // Local step.
        for (i, p) in problems.iter().enumerate() {
            let locals: Vec<FreeParam> = p.free.iter().copied().filter(|f| !shared.contains(&f.param)).collect();
            let result = if locals.is_empty() {
                let objective = p.objective(&models[i]);
                FitResult {
                    model: models[i].clone(),
                    rms_residual: (objective / p.residual_count() as f64).sqrt(),
                    objective,
                    iterations: 0,
                    evaluations: 1,
                    converged: true,
                    objective_history: vec![objective],
                }
            } else {
                let sub = FitProblem {
                    observed: p.observed.clone(),
                    free: locals,
                    initial: models[i].clone(),
                    loss: p.loss,
                };
                let local_opts = FitOptions {
                    seed: opts.seed.wrapping_add((round * problems.len() + i) as u64),
                    ..*opts
                };
                fit_spectrum_with(&sub, &local_opts)?
            };
            models[i] = result.model.clone();
            results[i] = Some(result);
        }

        let now = pooled(&models);
        let prev = *pooled_history.last().expect("non-empty");
        pooled_history.push(now);
        if prev - now <= SWEEP_REL_TOL * prev {
            break;
        }
    }

    let shared_values = shared.iter().map(|s| (*s, s.get(&models[0]))).collect();
    Ok(SweepFit {
        results: results.into_iter().map(|r| r.expect("every problem fitted")).collect(),
        shared: shared_values,
        pooled_history,
    })
}

/// Starting model estimated from the dips of a spectrum.
///
/// Mode frequencies come from the `n_modes` deepest dips and total widths
/// from half their FWHM, split evenly between radiative and intrinsic loss.
/// Two dips closer than four times the sum of their FWHMs are read as one
/// coupled pair: both modes sit at the midpoint with `Delta` equal to half
/// the splitting. Without enough dips the modes are spread evenly over the
/// grid with widths of 1% of the span.
pub fn initial_guess(spectrum: &SpectrumGrid, n_modes: usize) -> Result<CouplingModel> {
    if spectrum.is_empty() {
        return Err(Error::InvalidInput("cannot guess parameters from an empty spectrum".into()));
    }
    if !(1..=2).contains(&n_modes) {
        return Err(Error::InvalidInput(format!("initial guess supports 1 or 2 modes, got {n_modes}")));
    }
    let freqs = spectrum.freqs();
    let (fmin, fmax) = (freqs[0], freqs[freqs.len() - 1]);
    let span = fmax - fmin;
    let default_width = if span > 0.0 { 0.01 * span } else { 0.01 * fmin.abs().max(1.0) };

    let mut dips: Vec<_> = extract_features(spectrum, DEFAULT_PROMINENCE)
        .into_iter()
        .filter(|f| f.kind == FeatureKind::Dip)
        .collect();
    dips.sort_by(|a, b| a.magnitude.total_cmp(&b.magnitude));

    let positive = |w: f64| if w > 0.0 { w } else { default_width.max(f64::MIN_POSITIVE) };
    let mode = |omega: f64, width: f64| {
        let w = positive(width);
        ModeParams::new(omega, 0.5 * w).with_alpha(0.5 * w)
    };

    if dips.len() < n_modes {
        let modes = (0..n_modes)
            .map(|j| {
                let omega = fmin + span * (j + 1) as f64 / (n_modes + 1) as f64;
                mode(positive(omega), default_width)
            })
            .collect();
        return CouplingModel::uncoupled(modes);
    }

    let mut chosen: Vec<_> = dips[..n_modes].to_vec();
    chosen.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    let half_width = |f: &crate::analysis::SpectralFeature| f.fwhm.map_or(default_width, |w| 0.5 * w);

    if n_modes == 1 {
        let d = chosen[0];
        return CouplingModel::uncoupled(vec![mode(positive(d.freq), half_width(&d))]);
    }

    let (a, b) = (chosen[0], chosen[1]);
    let separation = b.freq - a.freq;
    let fwhm_sum = a.fwhm.unwrap_or(2.0 * default_width) + b.fwhm.unwrap_or(2.0 * default_width);
    if separation < 4.0 * fwhm_sum {
        let mid = positive(0.5 * (a.freq + b.freq));
        CouplingModel::two_mode(
            mode(mid, half_width(&a)),
            mode(mid, half_width(&b)),
            Complex64::new(0.5 * separation, 0.0),
        )
    } else {
        CouplingModel::uncoupled(vec![
            mode(positive(a.freq), half_width(&a)),
            mode(positive(b.freq), half_width(&b)),
        ])
    }
}
