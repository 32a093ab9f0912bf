//! Finite-size scaling of `<R1>` against the exponent `alpha` of the decay
//! parameter, `mu ~ N_A^alpha`: curve crossings, scaling collapse in
//! `x = (alpha - alpha*) L_A^(1/nu)` and bootstrap error bands.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::derive_seed;
use crate::ensembles::{lambda_asymptotic, lambda_closed_form, variance_profile, EnsembleSpec, Family};
use crate::error::{Error, Result};
use crate::fit::{minimize, Bounds};
use crate::measures::{aggregate, measure_batch, MeanErr, SweepPoint};
use crate::sampler::with_workers;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepConfig {
    pub family: Family,
    pub gamma: f64,
    pub c: f64,
    /// Total sizes `L`; each is split evenly, `L_A = L_B = L/2`.
    pub sizes: Vec<u32>,
    pub alpha_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub ee_squared: bool,
}

/// `<R1>(alpha)` at one subsystem size, keeping per-sample values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaCurve {
    pub l_a: u32,
    pub alphas: Vec<f64>,
    pub params: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Large-size asymptotic `Lambda` for comparison with the exact sum.
    pub lambdas_asymptotic: Vec<Option<f64>>,
    pub r1: Vec<MeanErr>,
    pub samples: Vec<Vec<f64>>,
    /// Full averages per grid point (empty for curves built from means).
    pub points: Vec<SweepPoint>,
}

impl AlphaCurve {
    /// A curve from means alone (no resampling possible).
    pub fn from_means(l_a: u32, alphas: Vec<f64>, means: Vec<f64>) -> Self {
        let n = alphas.len();
        AlphaCurve {
            l_a,
            alphas,
            params: vec![f64::NAN; n],
            lambdas: vec![f64::NAN; n],
            lambdas_asymptotic: vec![None; n],
            r1: means.into_iter().map(|mean| MeanErr { mean, err: 0.0 }).collect(),
            samples: vec![Vec::new(); n],
            points: Vec::new(),
        }
    }

    pub fn means(&self) -> Vec<f64> {
        self.r1.iter().map(|m| m.mean).collect()
    }
}

/// Decay parameter at exponent `alpha`: `mu = N_A^alpha / c` for BE and
/// `mu = c N_A^(2 - alpha)` for PE and EE.
pub fn alpha_param(family: Family, c: f64, l_a: u32, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    let n = (1u64 << l_a) as f64;
    match family {
        Family::Be => Ok(n.powf(alpha) / c),
        Family::Pe | Family::Ee => Ok(c * n.powf(2.0 - alpha)),
        Family::Se => Err(Error::InvalidSpec("the criticality study covers BE, PE and EE".into())),
    }
}

pub fn alpha_sweep(config: &AlphaSweepConfig, workers: usize) -> Result<Vec<AlphaCurve>> {
    if config.family == Family::Se {
        return Err(Error::InvalidSpec("the criticality study covers BE, PE and EE".into()));
    }
    if config.alpha_grid.is_empty() || config.sizes.is_empty() {
        return Err(Error::Domain("alpha grid and size list must be nonempty".into()));
    }
    if let Some(&l) = config.sizes.iter().find(|&&l| l % 2 != 0 || l < 2) {
        return Err(Error::InvalidSpec(format!("size L = {l} must be even and >= 2")));
    }
    for &a in &config.alpha_grid {
        alpha_param(config.family, config.c, 1, a)?;
    }
    with_workers(workers, || {
        config
            .sizes
            .iter()
            .map(|&l| alpha_curve(config, l / 2))
            .collect::<Result<Vec<_>>>()
    })?
}

fn alpha_curve(config: &AlphaSweepConfig, l_a: u32) -> Result<AlphaCurve> {
    let n = config.alpha_grid.len();
    let mut curve = AlphaCurve {
        l_a,
        alphas: config.alpha_grid.clone(),
        params: Vec::with_capacity(n),
        lambdas: Vec::with_capacity(n),
        lambdas_asymptotic: Vec::with_capacity(n),
        r1: Vec::with_capacity(n),
        samples: Vec::with_capacity(n),
        points: Vec::with_capacity(n),
    };
    for &alpha in &config.alpha_grid {
        let mu = alpha_param(config.family, config.c, l_a, alpha)?;
        let spec = EnsembleSpec::decay(config.family, l_a, l_a, mu)?
            .with_gamma(config.gamma)?
            .with_ee_squared(config.ee_squared);
        let lambda = lambda_closed_form(&spec)?;
        let seed = derive_seed(config.seed, &[config.family as u64, l_a as u64, alpha.to_bits()]);
        let records = measure_batch(&variance_profile(&spec)?, seed, config.samples)?;
        let r1: Vec<f64> = records.iter().map(|r| r.r1).collect();
        curve.params.push(mu);
        curve.lambdas.push(lambda);
        curve.lambdas_asymptotic.push(lambda_asymptotic(&spec));
        curve.r1.push(MeanErr::of(r1.iter().copied()));
        curve.samples.push(r1);
        curve.points.push(aggregate(&records, &spec, lambda, seed)?);
    }
    Ok(curve)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCrossing {
    pub l_a: (u32, u32),
    pub alpha: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub alpha_star: f64,
    pub r_star: f64,
    /// Max minus min of the pairwise crossing abscissae.
    pub spread: f64,
    pub pairs: Vec<PairCrossing>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Intersection of two curves on a shared grid. When the difference changes
/// sign more than once (noise), the bracket with the steepest change wins.
fn pair_crossing(alphas: &[f64], a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for j in 0..d.len() {
        let cand = if d[j] == 0.0 {
            // Exact hit on a grid point counts once, from the left neighbour.
            if j > 0 && d[j - 1] == 0.0 {
                None
            } else {
                let step = if j + 1 < d.len() { (d[j + 1]).abs() } else { 0.0 };
                Some((alphas[j], a[j], step))
            }
        } else if j + 1 < d.len() && d[j + 1] != 0.0 && d[j].signum() != d[j + 1].signum() {
            let t = d[j] / (d[j] - d[j + 1]);
            let alpha = alphas[j] + t * (alphas[j + 1] - alphas[j]);
            let value = a[j] + t * (a[j + 1] - a[j]);
            Some((alpha, value, (d[j + 1] - d[j]).abs()))
        } else {
            None
        };
        if let Some(c) = cand {
            if best.is_none_or(|b| c.2 > b.2) {
                best = Some(c);
            }
        }
    }
    best.map(|(x, y, _)| (x, y))
}

/// Pairwise crossings of curves sharing one `alpha` grid; the estimate is the
/// median over pairs.
pub fn find_crossing(curves: &[AlphaCurve]) -> Result<Crossing> {
    if curves.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: curves.len() });
    }
    let grid = &curves[0].alphas;
    if curves.iter().any(|c| &c.alphas != grid || c.r1.len() != grid.len()) {
        return Err(Error::DimensionMismatch("curves must share one alpha grid".into()));
    }
    let means: Vec<Vec<f64>> = curves.iter().map(AlphaCurve::means).collect();
    if means.iter().all(|m| m == &means[0]) {
        return Err(Error::DegenerateCrossing("all curves coincide".into()));
    }
    let mut pairs = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            if means[i] == means[j] {
                continue;
            }
            if let Some((alpha, value)) = pair_crossing(grid, &means[i], &means[j]) {
                pairs.push(PairCrossing { l_a: (curves[i].l_a, curves[j].l_a), alpha, value });
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoCrossing("no pair of curves changes order on the grid".into()));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.alpha).collect();
    let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Crossing {
        alpha_star: median(xs),
        r_star: median(pairs.iter().map(|p| p.value).collect()),
        spread,
        pairs,
    })
}

struct ScaledPoint {
    x: f64,
    y: f64,
    size: usize,
}

fn scaled_points(curves: &[AlphaCurve], means: &[Vec<f64>], alpha_star: f64, nu: f64) -> Vec<ScaledPoint> {
    let mut pts = Vec::new();
    for (s, (c, m)) in curves.iter().zip(means).enumerate() {
        let scale = (c.l_a as f64).powf(1.0 / nu);
        for (a, y) in c.alphas.iter().zip(m) {
            pts.push(ScaledPoint { x: (a - alpha_star) * scale, y: *y, size: s });
        }
    }
    pts
}

/// Local-linear estimate at `x0` from points (optionally excluding one size):
/// all points within `half_width`, or the 5 nearest if fewer.
fn local_linear(pts: &[ScaledPoint], x0: f64, half_width: f64, exclude: Option<usize>) -> Option<f64> {
    let mut near: Vec<(f64, &ScaledPoint)> = pts
        .iter()
        .filter(|p| Some(p.size) != exclude)
        .map(|p| ((p.x - x0).abs(), p))
        .collect();
    if near.is_empty() {
        return None;
    }
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    let in_window = near.iter().take_while(|(d, _)| *d <= half_width).count();
    let k = in_window.max(5).min(near.len());
    let sel = &near[..k];
    let n = k as f64;
    let mx = sel.iter().map(|(_, p)| p.x).sum::<f64>() / n;
    let my = sel.iter().map(|(_, p)| p.y).sum::<f64>() / n;
    let sxx: f64 = sel.iter().map(|(_, p)| (p.x - mx).powi(2)).sum();
    let sxy: f64 = sel.iter().map(|(_, p)| (p.x - mx) * (p.y - my)).sum();
    if sxx <= 1e-300 {
        return Some(my);
    }
    Some(my + sxy / sxx * (x0 - mx))
}

fn window(pts: &[ScaledPoint]) -> f64 {
    let lo = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / 20.0
}

fn cost_of(curves: &[AlphaCurve], means: &[Vec<f64>], alpha_star: f64, nu: f64) -> f64 {
    let pts = scaled_points(curves, means, alpha_star, nu);
    let hw = window(&pts);
    let mut ss = 0.0;
    let mut n = 0usize;
    for p in &pts {
        if let Some(fit) = local_linear(&pts, p.x, hw, Some(p.size)) {
            ss += (p.y - fit).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        f64::INFINITY
    } else {
        ss / n as f64
    }
}

/// Mean squared residual of every point about the master curve built from the
/// other sizes (windowed local-linear fit, window 1/10 of the `x` range).
pub fn collapse_cost(curves: &[AlphaCurve], alpha_star: f64, nu: f64) -> f64 {
    let means: Vec<Vec<f64>> = curves.iter().map(AlphaCurve::means).collect();
    cost_of(curves, &means, alpha_star, nu)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseOptions {
    /// Bootstrap resamples over Monte Carlo samples; zero disables.
    pub bootstrap: usize,
    pub seed: u64,
    pub nu_bounds: (f64, f64),
}

impl Default for CollapseOptions {
    fn default() -> Self {
        CollapseOptions { bootstrap: 200, seed: 0, nu_bounds: (0.05, 5.0) }
    }
}

/// 95% percentile interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    fn of(mut xs: Vec<f64>) -> Option<Band> {
        if xs.is_empty() {
            return None;
        }
        xs.sort_by(f64::total_cmp);
        let at = |q: f64| xs[((q * (xs.len() - 1) as f64).round() as usize).min(xs.len() - 1)];
        Some(Band { lo: at(0.025), hi: at(0.975) })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBands {
    pub resamples: usize,
    pub alpha_star: Band,
    pub nu: Band,
    pub r_star: Band,
    pub crossing_alpha: Option<Band>,
    pub crossing_r: Option<Band>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub alpha_star: f64,
    pub nu_exponent: f64,
    /// Master-curve value at `x = 0`.
    pub r_star: f64,
    pub collapse_cost: f64,
    pub converged: bool,
    pub crossing_estimates: Vec<PairCrossing>,
    pub bootstrap: Option<BootstrapBands>,
}

impl CollapseResult {
    /// Entanglement length `|alpha - alpha*|^(-nu)`.
    pub fn xi(&self, alpha: f64) -> f64 {
        (alpha - self.alpha_star).abs().powf(-self.nu_exponent)
    }
}

struct Optimum {
    alpha_star: f64,
    nu: f64,
    cost: f64,
    r_star: f64,
    converged: bool,
}

fn optimize(curves: &[AlphaCurve], means: &[Vec<f64>], init: (f64, f64), opts: &CollapseOptions) -> Result<Optimum> {
    let grid = &curves[0].alphas;
    let a_lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let a_hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bounds = Bounds::new(vec![a_lo, opts.nu_bounds.0], vec![a_hi, opts.nu_bounds.1])?;
    let start = [init.0.clamp(a_lo, a_hi), init.1.clamp(opts.nu_bounds.0, opts.nu_bounds.1)];
    let m = minimize(|p| cost_of(curves, means, p[0], p[1]), &start, Some(&bounds))?;
    let pts = scaled_points(curves, means, m.point[0], m.point[1]);
    let r_star = local_linear(&pts, 0.0, window(&pts), None).unwrap_or(f64::NAN);
    Ok(Optimum { alpha_star: m.point[0], nu: m.point[1], cost: m.value, r_star, converged: m.converged })
}

/// Fit `alpha*` and `nu` by minimizing [`collapse_cost`], then bootstrap the
/// Monte Carlo samples for error bands.
pub fn collapse(
    curves: &[AlphaCurve],
    alpha_star_init: f64,
    nu_init: f64,
    opts: &CollapseOptions,
) -> Result<CollapseResult> {
    let mut sizes: Vec<u32> = curves.iter().map(|c| c.l_a).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::Domain("nu is unidentifiable from a single size".into()));
    }
    let grid = &curves[0].alphas;
    if curves.iter().any(|c| &c.alphas != grid) {
        return Err(Error::DimensionMismatch("curves must share one alpha grid".into()));
    }
    let means: Vec<Vec<f64>> = curves.iter().map(AlphaCurve::means).collect();
    let best = optimize(curves, &means, (alpha_star_init, nu_init), opts)?;
    let crossing_estimates = find_crossing(curves).map(|c| c.pairs).unwrap_or_default();

    let resamplable = curves.iter().all(|c| c.samples.iter().all(|s| s.len() >= 2));
    let bootstrap = if opts.bootstrap > 0 && resamplable {
        Some(bootstrap(curves, &best, opts)?)
    } else {
        None
    };
    Ok(CollapseResult {
        alpha_star: best.alpha_star,
        nu_exponent: best.nu,
        r_star: best.r_star,
        collapse_cost: best.cost,
        converged: best.converged,
        crossing_estimates,
        bootstrap,
    })
}

fn bootstrap(curves: &[AlphaCurve], best: &Optimum, opts: &CollapseOptions) -> Result<BootstrapBands> {
    let mut alphas = Vec::new();
    let mut nus = Vec::new();
    let mut rs = Vec::new();
    let mut cross_a = Vec::new();
    let mut cross_r = Vec::new();
    for b in 0..opts.bootstrap {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &[0xB007, b as u64]));
        let resampled: Vec<AlphaCurve> = curves
            .iter()
            .map(|c| {
                let mut out = c.clone();
                for (k, s) in c.samples.iter().enumerate() {
                    let draw: Vec<f64> = (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).collect();
                    out.r1[k] = MeanErr::of(draw.iter().copied());
                    out.samples[k] = draw;
                }
                out
            })
            .collect();
        let means: Vec<Vec<f64>> = resampled.iter().map(AlphaCurve::means).collect();
        let opt = optimize(&resampled, &means, (best.alpha_star, best.nu), opts)?;
        alphas.push(opt.alpha_star);
        nus.push(opt.nu);
        rs.push(opt.r_star);
        if let Ok(c) = find_crossing(&resampled) {
            cross_a.push(c.alpha_star);
            cross_r.push(c.r_star);
        }
    }
    let band = |xs: Vec<f64>| Band::of(xs).ok_or_else(|| Error::Numerical("empty bootstrap".into()));
    Ok(BootstrapBands {
        resamples: opts.bootstrap,
        alpha_star: band(alphas)?,
        nu: band(nus)?,
        r_star: band(rs)?,
        crossing_alpha: Band::of(cross_a),
        crossing_r: Band::of(cross_r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn synthetic(alpha_star: f64, nu: f64) -> Vec<AlphaCurve> {
        let alphas = grid(0.9, 1.7, 33);
        [4u32, 6, 8, 10]
            .iter()
            .map(|&l| {
                let ys = alphas
                    .iter()
                    .map(|a| 0.5 * (1.0 - ((a - alpha_star) * (l as f64).powf(1.0 / nu) / 20.0).tanh()))
                    .collect();
                AlphaCurve::from_means(l, alphas.clone(), ys)
            })
            .collect()
    }

    #[test]
    fn line_crossing() {
        let alphas = grid(0.0, 2.0, 9);
        let curves: Vec<AlphaCurve> = [2u32, 3]
            .iter()
            .map(|&l| AlphaCurve::from_means(l, alphas.clone(), alphas.iter().map(|a| l as f64 * (a - 1.0)).collect()))
            .collect();
        let c = find_crossing(&curves).unwrap();
        assert_relative_eq!(c.alpha_star, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.r_star, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn crossing_errors() {
        let alphas = grid(0.0, 1.0, 5);
        let same = vec![
            AlphaCurve::from_means(2, alphas.clone(), vec![1.0, 0.8, 0.6, 0.4, 0.2]),
            AlphaCurve::from_means(3, alphas.clone(), vec![1.0, 0.8, 0.6, 0.4, 0.2]),
        ];
        assert!(matches!(find_crossing(&same), Err(Error::DegenerateCrossing(_))));
        let apart = vec![
            AlphaCurve::from_means(2, alphas.clone(), vec![1.0, 0.8, 0.6, 0.4, 0.2]),
            AlphaCurve::from_means(3, alphas, vec![2.0, 1.8, 1.6, 1.4, 1.2]),
        ];
        assert!(matches!(find_crossing(&apart), Err(Error::NoCrossing(_))));
    }

    #[test]
    fn synthetic_collapse_recovered() {
        let curves = synthetic(1.3, 0.5);
        let opts = CollapseOptions { bootstrap: 0, ..Default::default() };
        let r = collapse(&curves, 1.25, 0.8, &opts).unwrap();
        assert_relative_eq!(r.alpha_star, 1.3, max_relative = 0.02);
        assert_relative_eq!(r.nu_exponent, 0.5, max_relative = 0.08);
        assert_relative_eq!(r.r_star, 0.5, epsilon = 0.02);
        assert!(r.xi(1.3 + 0.1) > 1.0);
    }

    #[test]
    fn cost_is_sharply_minimal_at_truth() {
        let curves = synthetic(1.3, 0.5);
        let best = collapse_cost(&curves, 1.3, 0.5);
        for (a, nu) in [(1.0, 0.5), (1.6, 0.5), (1.3, 1.0)] {
            // Shifted critical point and doubled exponent.
            assert!(collapse_cost(&curves, a, nu) >= 10.0 * best, "({a}, {nu})");
        }
    }

    #[test]
    fn single_size_rejected() {
        let curves = synthetic(1.3, 0.5);
        let r = collapse(&curves[..1], 1.3, 0.5, &CollapseOptions::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn alpha_range_and_family_checked() {
        assert!(alpha_param(Family::Be, 0.1, 6, 0.0).is_err());
        assert!(alpha_param(Family::Be, 0.1, 6, 2.0).is_err());
        assert!(alpha_param(Family::Se, 0.1, 6, 1.0).is_err());
        assert_relative_eq!(alpha_param(Family::Be, 0.1, 6, 1.0).unwrap(), 640.0, max_relative = 1e-14);
        assert_relative_eq!(alpha_param(Family::Pe, 0.5, 6, 1.0).unwrap(), 32.0, max_relative = 1e-14);
    }

    #[test]
    fn small_sweep_has_both_branches() {
        let cfg = AlphaSweepConfig {
            family: Family::Be,
            gamma: 0.5,
            c: 10.0,
            sizes: vec![6, 8],
            alpha_grid: vec![0.3, 1.9],
            samples: 8,
            seed: 2,
            ee_squared: false,
        };
        let curves = alpha_sweep(&cfg, 1).unwrap();
        assert_eq!(curves.len(), 2);
        for c in &curves {
            let n = (1u64 << c.l_a) as f64;
            assert!(c.r1[0].mean > 0.6 * (n.ln() - 0.5));
            assert!(c.r1[1].mean < c.r1[0].mean);
            assert_eq!(c.samples[0].len(), 8);
        }
        let odd = AlphaSweepConfig { sizes: vec![7], ..cfg };
        assert!(alpha_sweep(&odd, 1).is_err());
    }

    #[test]
    fn bootstrap_bands_bracket_estimate() {
        let cfg = AlphaSweepConfig {
            family: Family::Be,
            gamma: 0.5,
            c: 0.1,
            sizes: vec![4, 6, 8],
            alpha_grid: grid(0.6, 1.8, 7),
            samples: 10,
            seed: 3,
            ee_squared: false,
        };
        let curves = alpha_sweep(&cfg, 1).unwrap();
        let opts = CollapseOptions { bootstrap: 10, seed: 1, ..Default::default() };
        let r = collapse(&curves, 1.2, 0.7, &opts).unwrap();
        let b = r.bootstrap.unwrap();
        assert_eq!(b.resamples, 10);
        assert!(b.alpha_star.lo <= b.alpha_star.hi);
        assert!(b.nu.lo > 0.0);
    }
}
