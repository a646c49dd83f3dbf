//! Bounded Nelder-Mead on the unit box.
//!
//! Coordinates are normalized so every free parameter lives in [0, 1]; trial
//! points are projected back onto the box. Stagnation over a full simplex
//! cycle triggers a re-seed around the best vertex, and a re-seed that brings
//! no further improvement ends the run.

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOptions {
    pub max_evaluations: usize,
    pub rel_tol: f64,
    pub initial_step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

fn project(u: &mut [f64]) {
    for x in u.iter_mut() {
        *x = if x.is_nan() { 0.5 } else { x.clamp(0.0, 1.0) };
    }
}

struct Counter<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counter<F> {
    fn eval(&mut self, u: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(u);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn seed_simplex<F: FnMut(&[f64]) -> f64>(
    center: &[f64],
    center_value: f64,
    step: f64,
    counter: &mut Counter<F>,
) -> Vec<(Vec<f64>, f64)> {
    let mut simplex = vec![(center.to_vec(), center_value)];
    for i in 0..center.len() {
        let mut p = center.to_vec();
        p[i] = if p[i] + step <= 1.0 { p[i] + step } else { p[i] - step };
        project(&mut p);
        let v = counter.eval(&p);
        simplex.push((p, v));
    }
    simplex
}

fn spread(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(p, _)| p.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Minimizes `f` over the unit box starting from `start`.
///
/// `start_value` is `f(start)`, already evaluated by the caller.
pub(crate) fn minimize<F: FnMut(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    start_value: f64,
    opts: SimplexOptions,
) -> SimplexOutcome {
    let dim = start.len();
    let mut counter = Counter { f, evaluations: 0 };
    let mut history = Vec::new();

    if start_value == 0.0 || dim == 0 {
        return SimplexOutcome {
            best: start.to_vec(),
            value: start_value,
            iterations: 0,
            evaluations: 0,
            converged: true,
            history,
        };
    }

    // Adaptive coefficients for higher dimensions.
    let d = dim as f64;
    let (reflect, expand, contract, shrink) = if dim > 2 {
        (1.0, 1.0 + 2.0 / d, 0.75 - 0.5 / d, 1.0 - 1.0 / d)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex = seed_simplex(start, start_value, opts.initial_step, &mut counter);
    let cycle = dim + 1;
    let mut iterations = 0;
    let mut converged = false;
    let mut cycle_start_best = f64::INFINITY;
    let mut reseed_base = f64::INFINITY;

    while counter.evaluations < opts.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        if best == 0.0 {
            converged = true;
            break;
        }

        if iterations % cycle == 0 {
            // A cycle whose vertices all agree to rel_tol cannot improve the
            // best value by more than that; re-seed, and stop once a re-seed
            // brings nothing.
            let flat = simplex[dim].1 - best <= opts.rel_tol * best;
            let stalled = cycle_start_best.is_finite() && cycle_start_best - best <= opts.rel_tol * cycle_start_best;
            if (flat && stalled) || spread(&simplex) < 1e-15 {
                if reseed_base.is_finite() && reseed_base - best <= opts.rel_tol * reseed_base {
                    converged = true;
                    break;
                }
                reseed_base = best;
                let step = (spread(&simplex) * 10.0).clamp(1e-9, opts.initial_step);
                let (center, value) = simplex[0].clone();
                simplex = seed_simplex(&center, value, step, &mut counter);
                simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
                cycle_start_best = f64::INFINITY;
                continue;
            }
            cycle_start_best = best;
        }

        iterations += 1;
        let worst = simplex[dim].1;
        let second_worst = simplex[dim - 1].1;
        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(p, _)| p[i]).sum::<f64>() / d)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p);
            p
        };

        let xr = along(reflect);
        let fr = counter.eval(&xr);
        if fr < best {
            let xe = along(reflect * expand);
            let fe = counter.eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < second_worst {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(reflect * contract);
                let fc = counter.eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-contract);
                let fc = counter.eval(&xc);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = anchor
                        .iter()
                        .zip(&vertex.0)
                        .map(|(a, x)| a + shrink * (x - a))
                        .collect();
                    project(&mut p);
                    let v = counter.eval(&p);
                    *vertex = (p, v);
                }
            }
        }
        let current = simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        history.push(current.min(best));
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (best, value) = simplex.swap_remove(0);
    SimplexOutcome {
        best,
        value,
        iterations,
        evaluations: counter.evaluations,
        converged,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SimplexOptions {
        SimplexOptions {
            max_evaluations: 5000,
            rel_tol: 1e-12,
            initial_step: 0.1,
        }
    }

    #[test]
    fn quadratic_bowl() {
        let target = [0.3, 0.7, 0.55, 0.1];
        let f = |u: &[f64]| u.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let start = [0.5; 4];
        let out = minimize(f, &start, f(&start), opts());
        assert!(out.converged);
        for (a, b) in out.best.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6, "{:?}", out.best);
        }
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn optimum_on_boundary() {
        let f = |u: &[f64]| (u[0] + 1.0).powi(2) + (u[1] - 0.5).powi(2);
        let out = minimize(f, &[0.5, 0.2], f(&[0.5, 0.2]), opts());
        assert!(out.best[0].abs() < 1e-9);
        assert!((out.best[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_scaled_into_box() {
        let f = |u: &[f64]| {
            let (x, y) = (4.0 * u[0] - 2.0, 4.0 * u[1] - 2.0);
            (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
        };
        let out = minimize(f, &[0.2, 0.8], f(&[0.2, 0.8]), opts());
        assert!(out.value < 1e-10, "{}", out.value);
    }

    #[test]
    fn zero_at_start_returns_immediately() {
        let out = minimize(|_: &[f64]| 0.0, &[0.5], 0.0, opts());
        assert_eq!(out.evaluations, 0);
        assert!(out.converged);
    }

    #[test]
    fn nan_objective_does_not_panic() {
        let f = |u: &[f64]| if u[0] > 0.6 { f64::NAN } else { (u[0] - 0.3).powi(2) };
        let out = minimize(f, &[0.5], f(&[0.5]), opts());
        assert!((out.best[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn flat_objective_terminates() {
        let out = minimize(|_: &[f64]| 1.0, &[0.5, 0.5], 1.0, opts());
        assert!(out.converged);
        assert!(out.evaluations < 100);
    }
}
