//! Entropy curves over a `Lambda` grid, the per-size `D_n` extraction and the
//! cross-family comparison in the rescaled variable `Lambda / D_n`.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{derive_seed, ergodic_limit, ErgodicLimit, Warning};
use crate::ensembles::{solve_param, variance_profile, EnsembleSpec, Family, ParamBounds};
use crate::error::{Error, Result};
use crate::fit::{fit_curve, fit_exponential, Bounds, FitResult};
use crate::measures::{aggregate, measure_batch, SweepPoint};
use crate::sampler::with_workers;
use crate::theory::{bracket, q_of_lambda, r0_of_lambda, DModel, Order, TheoryParams};

/// Where the limiting amplitude of the fitted entropy curve comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Amplitude {
    /// Ergodic Monte Carlo calibration: `<R0(inf)>/N - q_0` for `R1`,
    /// `<R2(inf)>` for `R2`.
    #[default]
    Calibrated,
    /// `g_n` from the measured `<R0>` and `<Q>` at the same `Lambda`.
    Measured,
    /// `g_n` from the `R0` and `Q` predictions with `tau = 1/D_n`.
    Predicted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub templates: Vec<EnsembleSpec>,
    pub lambda_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub bounds: ParamBounds,
    /// Samples of the ergodic calibration run per size.
    pub calibration_samples: usize,
    pub amplitude: Amplitude,
}

impl SweepConfig {
    pub fn new(templates: Vec<EnsembleSpec>, lambda_grid: Vec<f64>, samples: usize, seed: u64) -> Self {
        SweepConfig {
            templates,
            lambda_grid,
            samples,
            seed,
            bounds: ParamBounds::default(),
            calibration_samples: samples.max(2),
            amplitude: Amplitude::Calibrated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub family: Family,
    pub l_a: u32,
    pub l_b: u32,
    pub gamma: f64,
    pub points: Vec<SweepPoint>,
    pub d1: Option<FitResult>,
    pub d2: Option<FitResult>,
    pub ergodic: ErgodicLimit,
    pub amplitude: Amplitude,
    pub seed: u64,
    pub samples: usize,
    pub warnings: Vec<Warning>,
}

impl SweepResult {
    pub fn n_a(&self) -> usize {
        1 << self.l_a
    }

    pub fn n_b(&self) -> usize {
        1 << self.l_b
    }

    pub fn d_fit(&self, order: Order) -> Option<&FitResult> {
        match order {
            Order::One => self.d1.as_ref(),
            Order::Two => self.d2.as_ref(),
        }
    }

    /// Fitted `D_n`, if the fit succeeded.
    pub fn d(&self, order: Order) -> Option<f64> {
        self.d_fit(order).map(|f| f.params[0].exp())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda_value).collect()
    }

    pub fn means(&self, order: Order) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| match order {
                Order::One => p.r1.mean,
                Order::Two => p.r2.mean,
            })
            .collect()
    }

    /// Theory parameters with the fitted rescalings as constant models.
    pub fn theory_params(&self) -> Result<TheoryParams> {
        let d1 = self.d(Order::One).ok_or_else(|| Error::Fit("D_1 not available".into()))?;
        let d2 = self.d(Order::Two).unwrap_or(d1);
        TheoryParams::new(self.gamma, self.n_a(), self.n_b(), DModel::constant(d1), DModel::constant(d2))
    }

    /// Predicted `<R_n>` at every grid point.
    pub fn predictions(&self, order: Order) -> Result<Vec<f64>> {
        let d = self.d(order).ok_or_else(|| Error::Fit(format!("D_{} not available", order.index())))?;
        let ctx = AmplitudeCtx::new(self, order);
        let lambdas = self.lambdas();
        (0..lambdas.len())
            .map(|i| ctx.model(d, i, lambdas[i]))
            .collect::<Result<Vec<_>>>()
    }
}

/// Everything needed to evaluate the fitted model at grid point `i`.
struct AmplitudeCtx {
    order: Order,
    amplitude: Amplitude,
    n_a: usize,
    n_b: usize,
    gamma: f64,
    ergodic: ErgodicLimit,
    r0: Vec<f64>,
    q: Vec<f64>,
}

impl AmplitudeCtx {
    fn new(result: &SweepResult, order: Order) -> Self {
        AmplitudeCtx {
            order,
            amplitude: result.amplitude,
            n_a: result.n_a(),
            n_b: result.n_b(),
            gamma: result.gamma,
            ergodic: result.ergodic,
            r0: result.points.iter().map(|p| p.r0.mean).collect(),
            q: result.points.iter().map(|p| p.q.mean).collect(),
        }
    }

    fn params(&self, d: f64) -> Result<TheoryParams> {
        TheoryParams::new(self.gamma, self.n_a, self.n_b, DModel::constant(d), DModel::constant(d))
    }

    fn amplitude(&self, p: &TheoryParams, i: usize, lambda: f64) -> Result<f64> {
        let n = self.n_a as f64;
        Ok(match (self.amplitude, self.order) {
            (Amplitude::Calibrated, Order::One) => self.ergodic.r0.mean / n - p.q0(),
            (Amplitude::Calibrated, Order::Two) => self.ergodic.r2.mean,
            (Amplitude::Measured, Order::One) => self.r0[i] / n - p.q0(),
            (Amplitude::Measured, Order::Two) => p.beta / n * self.q[i],
            (Amplitude::Predicted, Order::One) => {
                r0_of_lambda(lambda, p, self.ergodic.r0.mean)? / n - p.q0()
            }
            (Amplitude::Predicted, Order::Two) => p.beta / n * q_of_lambda(lambda, p, n * n)?,
        })
    }

    fn model(&self, d: f64, i: usize, lambda: f64) -> Result<f64> {
        let p = self.params(d)?;
        Ok(self.amplitude(&p, i, lambda)? * bracket(self.order, lambda, &p)?)
    }
}

/// Starting guess: the `Lambda` where the curve first reaches half its
/// largest value, converted to `D` through `L_A^(-Lambda/D) = 1/2`.
fn half_rise_guess(lambdas: &[f64], values: &[f64], l_a: u32) -> Option<f64> {
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return None;
    }
    let half = top / 2.0;
    let i = values.iter().position(|&v| v >= half)?;
    let lam = if i == 0 {
        lambdas[0]
    } else {
        let t = (half - values[i - 1]) / (values[i] - values[i - 1]);
        (lambdas[i - 1].ln() + t * (lambdas[i].ln() - lambdas[i - 1].ln())).exp()
    };
    Some(lam * (l_a as f64).ln() / std::f64::consts::LN_2)
}

fn fit_d_with(
    lambdas: &[f64],
    values: &[f64],
    l_a: u32,
    model: impl Fn(f64, usize, f64) -> Result<f64>,
) -> Result<FitResult> {
    if lambdas.len() != values.len() {
        return Err(Error::DimensionMismatch("lambda grid and values differ in length".into()));
    }
    if lambdas.len() < 3 {
        return Err(Error::TooFewRecords { needed: 3, got: lambdas.len() });
    }
    if l_a < 2 {
        return Err(Error::Domain("D fit needs l_a >= 2".into()));
    }
    let d0 = half_rise_guess(lambdas, values, l_a)
        .ok_or_else(|| Error::Fit("flat curve: the fit did not converge".into()))?;
    let idx: Vec<f64> = (0..lambdas.len()).map(|i| i as f64).collect();
    let eval = |p: &[f64], x: f64| -> f64 {
        let i = x as usize;
        model(p[0].exp(), i, lambdas[i]).unwrap_or(f64::NAN)
    };
    let bounds = Bounds::new(vec![(-10f64).max(d0.ln() - 15.0)], vec![d0.ln() + 15.0])?;
    let fit = fit_curve(eval, &idx, values, None, &[d0.ln()], Some(&bounds))?;
    if !fit.converged || !fit.residual_sum.is_finite() {
        return Err(Error::Fit(format!("D fit did not converge: {fit:?}")));
    }
    Ok(fit)
}

/// Fit `D` in `amplitude * (1 - L_A^(-Lambda/D))` (the `beta = 2` bracket) to
/// a measured curve. `params[0]` of the result is `ln D`.
pub fn fit_d_curve(lambdas: &[f64], values: &[f64], l_a: u32, amplitude: f64) -> Result<FitResult> {
    let p = TheoryParams::new(1.0, 1 << l_a, 1 << l_a, DModel::constant(1.0), DModel::constant(1.0))?;
    let ln_base = p.l_a().ln();
    fit_d_with(lambdas, values, l_a, |d, _, lam| {
        Ok(-amplitude * (-(lam / d) * ln_base).exp_m1())
    })
}

/// Sweep every template over the `Lambda` grid and fit `D_1`, `D_2` per
/// template. Unattainable points and failing fits become warnings.
pub fn universality_sweep(config: &SweepConfig, workers: usize) -> Result<Vec<SweepResult>> {
    if config.lambda_grid.is_empty() {
        return Err(Error::Domain("lambda grid is empty".into()));
    }
    if config.lambda_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("lambda grid must be strictly increasing".into()));
    }
    with_workers(workers, || {
        config.templates.iter().map(|t| sweep_one(config, t)).collect::<Result<Vec<_>>>()
    })?
}

fn sweep_one(config: &SweepConfig, template: &EnsembleSpec) -> Result<SweepResult> {
    template.validate()?;
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    let ctx = format!("{} {}x{}", template.family, template.l_a, template.l_b);
    for &target in &config.lambda_grid {
        match sweep_point(config, template, target) {
            Ok(p) => points.push(p),
            Err(e @ (Error::Unattainable { .. } | Error::Numerical(_) | Error::SingularTerm { .. })) => {
                warn!("{ctx}: skipping Lambda = {target}: {e}");
                warnings.push(Warning::new(format!("{ctx} Lambda={target}"), e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    let ergodic = ergodic_limit(
        template.n_a(),
        template.n_b(),
        config.calibration_samples,
        config.seed,
    )?;
    let mut result = SweepResult {
        family: template.family,
        l_a: template.l_a,
        l_b: template.l_b,
        gamma: template.gamma,
        points,
        d1: None,
        d2: None,
        ergodic,
        amplitude: config.amplitude,
        seed: config.seed,
        samples: config.samples,
        warnings,
    };
    for order in [Order::One, Order::Two] {
        match fit_sweep_d(&result, order) {
            Ok(fit) => match order {
                Order::One => result.d1 = Some(fit),
                Order::Two => result.d2 = Some(fit),
            },
            Err(e) => {
                warn!("{ctx}: D_{} fit failed: {e}", order.index());
                result.warnings.push(Warning::new(format!("{ctx} D_{}", order.index()), e.to_string()));
            }
        }
    }
    if let Some(d1) = result.d(Order::One) {
        for p in &mut result.points {
            p.lambda_ent = Some(p.lambda_value / d1);
        }
    }
    Ok(result)
}

fn sweep_point(config: &SweepConfig, template: &EnsembleSpec, target: f64) -> Result<SweepPoint> {
    let param = solve_param(template, target, config.bounds)?;
    let spec = template.with_param(param)?;
    let profile = variance_profile(&spec)?;
    let seed = derive_seed(
        config.seed,
        &[template.family as u64, template.l_a as u64, template.l_b as u64, target.to_bits()],
    );
    let records = measure_batch(&profile, seed, config.samples)?;
    aggregate(&records, &spec, target, seed)
}

fn fit_sweep_d(result: &SweepResult, order: Order) -> Result<FitResult> {
    let ctx = AmplitudeCtx::new(result, order);
    let lambdas = result.lambdas();
    let values = result.means(order);
    // The R0 prediction has a pole at Lambda = 1; keep only points past it.
    let keep: Vec<usize> = (0..lambdas.len())
        .filter(|&i| ctx.amplitude != Amplitude::Predicted || lambdas[i] > 1.0)
        .collect();
    let lam: Vec<f64> = keep.iter().map(|&i| lambdas[i]).collect();
    let val: Vec<f64> = keep.iter().map(|&i| values[i]).collect();
    fit_d_with(&lam, &val, result.l_a, |d, j, x| ctx.model(d, keep[j], x))
}

/// Fit `D_n = a 2^(b l_a)` across sizes from the per-size fits.
pub fn extract_d(sweeps: &[SweepResult], order: Order) -> Result<FitResult> {
    let mut pts = Vec::new();
    for s in sweeps {
        let d = s.d(order).ok_or_else(|| {
            Error::Fit(format!("{} at l_a = {}: D_{} fit missing", s.family, s.l_a, order.index()))
        })?;
        pts.push((s.l_a as f64, d));
    }
    let mut sizes: Vec<u32> = sweeps.iter().map(|s| s.l_a).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::TooFewRecords { needed: 3, got: sizes.len() });
    }
    fit_exponential(&pts)
}

/// Piecewise-linear interpolation in `ln x`, clamped to the end values.
fn interp_log(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let u = x.ln();
    if u <= xs[0].ln() {
        return ys[0];
    }
    let last = xs.len() - 1;
    if u >= xs[last].ln() {
        return ys[last];
    }
    let j = xs.partition_point(|&v| v.ln() <= u);
    let (u0, u1) = (xs[j - 1].ln(), xs[j].ln());
    ys[j - 1] + (u - u0) / (u1 - u0) * (ys[j] - ys[j - 1])
}

/// Largest difference between any two curves `<R_n>(Lambda / D_n)` on a
/// log-spaced grid of `grid_points` rescaled values in `[lo, hi]`.
pub fn max_pairwise_deviation(
    results: &[SweepResult],
    order: Order,
    lo: f64,
    hi: f64,
    grid_points: usize,
) -> Result<f64> {
    if results.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: results.len() });
    }
    let mut curves = Vec::new();
    for r in results {
        let d = r.d(order).ok_or_else(|| Error::Fit(format!("{}: D_{} missing", r.family, order.index())))?;
        if r.points.len() < 2 {
            return Err(Error::TooFewRecords { needed: 2, got: r.points.len() });
        }
        let xs: Vec<f64> = r.lambdas().iter().map(|l| l / d).collect();
        curves.push((xs, r.means(order)));
    }
    let mut worst: f64 = 0.0;
    for k in 0..grid_points {
        let t = k as f64 / (grid_points - 1).max(1) as f64;
        let x = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
        let vals: Vec<f64> = curves.iter().map(|(xs, ys)| interp_log(xs, ys, x)).collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(max - min);
    }
    Ok(worst)
}

/// Root-mean-square difference between predicted and measured `<R_n>` over
/// the sweep grid.
pub fn theory_rms(result: &SweepResult, order: Order) -> Result<f64> {
    let pred = result.predictions(order)?;
    let meas = result.means(order);
    if pred.is_empty() {
        return Err(Error::TooFewRecords { needed: 1, got: 0 });
    }
    let ss: f64 = pred.iter().zip(&meas).map(|(p, m)| (p - m).powi(2)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    #[test]
    fn synthetic_d_recovered() {
        let model = DModel { a: 2.174, b: 0.965 };
        let mut pts = Vec::new();
        for l_a in 4..=9u32 {
            let d = model.at(l_a);
            let lam = grid(d * 1e-2, d * 1e2, 25);
            let amp = (l_a as f64) * 0.69;
            let ys: Vec<f64> = lam.iter().map(|l| amp * (1.0 - (l_a as f64).powf(-l / d))).collect();
            let fit = fit_d_curve(&lam, &ys, l_a, amp).unwrap();
            assert_relative_eq!(fit.params[0].exp(), d, max_relative = 1e-4);
            pts.push((l_a as f64, fit.params[0].exp()));
        }
        let fit = fit_exponential(&pts).unwrap();
        assert_relative_eq!(fit.params[0], 2.174, max_relative = 0.01);
        assert_relative_eq!(fit.params[1], 0.965, max_relative = 0.01);
    }

    #[test]
    fn flat_curve_is_an_error() {
        let lam = grid(0.1, 100.0, 10);
        let ys = vec![0.0; 10];
        assert!(matches!(fit_d_curve(&lam, &ys, 5, 1.0), Err(Error::Fit(_))));
    }

    #[test]
    fn interpolation_clamps() {
        let xs = [1.0, 10.0, 100.0];
        let ys = [0.0, 1.0, 3.0];
        assert_eq!(interp_log(&xs, &ys, 0.1), 0.0);
        assert_eq!(interp_log(&xs, &ys, 1e3), 3.0);
        assert_relative_eq!(interp_log(&xs, &ys, 10f64.sqrt()), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn small_sweep_runs_and_fits() {
        let t = EnsembleSpec::decay(Family::Be, 3, 3, 1.0).unwrap().with_gamma(0.5).unwrap();
        let cfg = SweepConfig::new(vec![t], grid(0.05, 500.0, 9), 20, 5);
        let out = universality_sweep(&cfg, 1).unwrap();
        assert_eq!(out.len(), 1);
        let r = &out[0];
        assert_eq!(r.points.len(), 9);
        assert!(r.d(Order::One).is_some(), "{:?}", r.warnings);
        assert!(r.points.iter().all(|p| p.lambda_ent.is_some() && p.sample_count == 20));
        assert!(r.points[0].r1.mean < r.points[8].r1.mean);
        let again = universality_sweep(&cfg, 2).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn unsorted_grid_rejected() {
        let t = EnsembleSpec::decay(Family::Be, 2, 2, 1.0).unwrap();
        let cfg = SweepConfig::new(vec![t], vec![1.0, 0.5], 4, 0);
        assert!(matches!(universality_sweep(&cfg, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn extract_needs_three_sizes() {
        assert!(matches!(extract_d(&[], Order::One), Err(Error::TooFewRecords { .. })));
    }
}
