//! Least-squares fitting and bounded derivative-free minimization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub residual_sum: f64,
    pub r_squared: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Box constraints, one interval per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::Domain("bounds must pair up with lo <= hi".into()));
        }
        Ok(Bounds { lo, hi })
    }

    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinimizeOptions {
    /// Stop when the simplex values agree to this relative tolerance.
    pub rel_tol: f64,
    /// Iteration cap per descent; `None` means `500 * dim`.
    pub max_iter: Option<usize>,
    /// Jittered restarts from the incumbent after the first descent.
    pub restarts: usize,
    /// Initial simplex edge, relative to each coordinate.
    pub initial_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { rel_tol: 1e-10, max_iter: None, restarts: 3, initial_step: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Bounded Nelder-Mead with default options.
pub fn minimize(
    objective: impl FnMut(&[f64]) -> f64,
    initial: &[f64],
    bounds: Option<&Bounds>,
) -> Result<Minimum> {
    minimize_with(objective, initial, bounds, MinimizeOptions::default())
}

/// Bounded Nelder-Mead. Trial points are projected onto the box before every
/// evaluation, so the objective is never called outside `bounds`.
/// Non-finite values are treated as `+inf` away from the initial point.
pub fn minimize_with(
    mut objective: impl FnMut(&[f64]) -> f64,
    initial: &[f64],
    bounds: Option<&Bounds>,
    opts: MinimizeOptions,
) -> Result<Minimum> {
    let dim = initial.len();
    if dim == 0 {
        return Err(Error::Domain("empty starting point".into()));
    }
    if let Some(b) = bounds {
        if b.lo.len() != dim {
            return Err(Error::Domain(format!(
                "bounds have {} coordinates, starting point has {dim}",
                b.lo.len()
            )));
        }
    }
    let mut x0 = initial.to_vec();
    if let Some(b) = bounds {
        b.project(&mut x0);
    }
    let f0 = objective(&x0);
    if !f0.is_finite() {
        return Err(Error::Domain(format!("objective is not finite at the starting point ({f0})")));
    }
    let mut eval = |x: &[f64]| -> f64 {
        let v = objective(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let max_iter = opts.max_iter.unwrap_or(500 * dim);
    let mut best = nelder_mead(&mut eval, &x0, f0, bounds, opts.initial_step, opts.rel_tol, max_iter);
    // Fixed jitter pattern so restarts are reproducible.
    let jitter = [1.7, 0.6, 2.9, 0.35];
    for r in 0..opts.restarts {
        let step = opts.initial_step * jitter[r % jitter.len()];
        let trial = nelder_mead(&mut eval, &best.point, best.value, bounds, step, opts.rel_tol, max_iter);
        let improved = trial.value < best.value;
        let iterations = best.iterations + trial.iterations;
        if improved {
            best = Minimum { iterations, ..trial };
        } else {
            best.iterations = iterations;
            best.converged |= trial.converged;
        }
        if !improved && best.converged {
            break;
        }
    }
    Ok(best)
}

fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    bounds: Option<&Bounds>,
    step: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Minimum {
    let dim = x0.len();
    let project = |x: &mut Vec<f64>| {
        if let Some(b) = bounds {
            b.project(x);
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        let h = if x[i] != 0.0 { step * x[i].abs() } else { step * 0.005 };
        x[i] += h;
        project(&mut x);
        if x[i] == x0[i] {
            // Pinned against the upper bound: step inward instead.
            x[i] -= h;
            project(&mut x);
        }
        let v = f(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_lo = simplex[0].1;
        let f_hi = simplex[dim].1;
        let spread_f = (f_hi - f_lo).abs();
        let spread_x = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())))
            .fold(0.0, f64::max);
        if spread_f <= rel_tol * (f_lo.abs() + f_hi.abs()) + 1e-300 || spread_x <= rel_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut x);
            x
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[dim].1 {
            let x = along(0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = f(&x);
            (x, v)
        };
        if fc < fr.min(simplex[dim].1) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = vertex.0.iter().zip(&best).map(|(v, b)| b + 0.5 * (v - b)).collect();
            project(&mut x);
            let v = f(&x);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    Minimum { point, value, iterations, converged }
}

/// Least squares `log2 d = log2 a + b * l_a`; returns `params = [a, b]` with
/// `R^2` computed in log space.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::TooFewRecords { needed: 3, got: points.len() });
    }
    if let Some(&(l, d)) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return Err(Error::Fit(format!("non-positive value {d} at l_a = {l}")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * (1.0 + mx * mx) * n {
        return Err(Error::Fit("rank deficient: every point has the same size".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let log_a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - log_a - b * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    Ok(FitResult {
        params: vec![log_a.exp2(), b],
        residual_sum: ss_res,
        r_squared: r_squared(ss_res, ss_tot),
        iterations: 0,
        converged: true,
    })
}

fn r_squared(ss_res: f64, ss_tot: f64) -> f64 {
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        0.0
    }
}

/// Weighted least squares of `model(params, x)` against `y` by bounded
/// Nelder-Mead. A fit that hits the iteration cap is returned with
/// `converged = false`.
pub fn fit_curve(
    model: impl Fn(&[f64], f64) -> f64,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    initial: &[f64],
    bounds: Option<&Bounds>,
) -> Result<FitResult> {
    if x.len() != y.len() || weights.is_some_and(|w| w.len() != x.len()) {
        return Err(Error::DimensionMismatch(format!(
            "x has {}, y has {}, weights have {:?} entries",
            x.len(),
            y.len(),
            weights.map(<[f64]>::len)
        )));
    }
    if x.is_empty() {
        return Err(Error::TooFewRecords { needed: 1, got: 0 });
    }
    if let Some(w) = weights {
        if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Fit("weights must be positive".into()));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let ss = |p: &[f64]| -> f64 {
        (0..x.len()).map(|i| weight(i) * (y[i] - model(p, x[i])).powi(2)).sum()
    };
    let best = minimize(ss, initial, bounds)?;
    let w_sum: f64 = (0..x.len()).map(weight).sum();
    let y_mean = (0..x.len()).map(|i| weight(i) * y[i]).sum::<f64>() / w_sum;
    let ss_tot: f64 = (0..x.len()).map(|i| weight(i) * (y[i] - y_mean).powi(2)).sum();
    Ok(FitResult {
        params: best.point,
        residual_sum: best.value,
        r_squared: r_squared(best.value, ss_tot),
        iterations: best.iterations,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::cell::Cell;

    #[test]
    fn exponential_exact_data() {
        let pts: Vec<(f64, f64)> = (4..=8).map(|l| (l as f64, 2.0 * (l as f64).exp2())).collect();
        let fit = fit_exponential(&pts).unwrap();
        assert_relative_eq!(fit.params[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(fit.params[1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_errors() {
        let same = [(5.0, 1.0), (5.0, 2.0), (5.0, 3.0)];
        assert!(matches!(fit_exponential(&same), Err(Error::Fit(_))));
        let neg = [(1.0, 1.0), (2.0, -2.0), (3.0, 3.0)];
        assert!(matches!(fit_exponential(&neg), Err(Error::Fit(_))));
        assert!(matches!(
            fit_exponential(&[(1.0, 1.0), (2.0, 2.0)]),
            Err(Error::TooFewRecords { .. })
        ));
    }

    #[test]
    fn linear_model_recovered() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let fit = fit_curve(|p, x| p[0] + p[1] * x, &x, &y, None, &[1.0, 1.0], None).unwrap();
        assert_relative_eq!(fit.params[0], 3.0, epsilon = 1e-5);
        assert_relative_eq!(fit.params[1], -0.5, epsilon = 1e-5);
        assert!(fit.residual_sum < 1e-9);
    }

    #[test]
    fn flat_data_reports_zero_r_squared() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [2.0; 4];
        let fit = fit_curve(|p, x| p[0] * x, &x, &y, None, &[1.0], None).unwrap();
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn curve_fit_rejects_bad_inputs() {
        let x = [0.0, 1.0];
        assert!(matches!(
            fit_curve(|p, x| p[0] * x, &x, &[1.0], None, &[1.0], None),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            fit_curve(|p, x| p[0] * x, &x, &[1.0, 2.0], Some(&[1.0, 0.0]), &[1.0], None),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn quadratic_minimum() {
        let m = minimize(|x| (x[0] - 2.0).powi(2), &[0.0], None).unwrap();
        assert!((m.point[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = MinimizeOptions { rel_tol: 1e-8, ..Default::default() };
        let m = minimize_with(rosen, &[0.0, 0.0], None, opts).unwrap();
        assert!(m.value < 1e-4, "{m:?}");
    }

    #[test]
    fn bounded_minimum_on_boundary() {
        let b = Bounds::new(vec![3.0], vec![5.0]).unwrap();
        let outside = Cell::new(false);
        let m = minimize(
            |x| {
                if !(3.0..=5.0).contains(&x[0]) {
                    outside.set(true);
                }
                (x[0] - 2.0).powi(2)
            },
            &[4.0],
            Some(&b),
        )
        .unwrap();
        assert_eq!(m.point[0], 3.0);
        assert!(!outside.get());
    }

    #[test]
    fn non_finite_start_is_domain_error() {
        let r = minimize(|x| x[0].ln(), &[-1.0], None);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] + 1.1).powi(4) + 0.1 * (5.0 * x[0]).sin();
        let a = minimize(f, &[1.0, 1.0], None).unwrap();
        let b = minimize(f, &[1.0, 1.0], None).unwrap();
        assert_eq!(a, b);
    }
}
