//! Ensemble families of state matrices and their complexity parameter.
//!
//! Every family is a zero-mean Gaussian ensemble over `N_A x N_B` complex
//! matrices with an entry-wise variance profile `h[k][l]`. The complexity
//! parameter `Lambda` measures how far a profile has moved away from the
//! separable initial ensemble (all weight in the first column). It is
//! available through two independent routes: per-family closed-form sums
//! ([`lambda_closed_form`]) and the generic per-component characteristic
//! solution summed over the whole profile ([`lambda_generic`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest subsystem exponent accepted; `2^26` basis states per side is
/// already far beyond what a dense decomposition can handle.
pub const MAX_SUBSYSTEM_BITS: u32 = 26;

/// Terms with `|1 - 2*gamma*h|` below this are treated as singular.
const SINGULAR_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// Brownian ensemble: first column 1, everything else `1/(1+mu)`.
    #[serde(rename = "BE")]
    Be,
    /// Power-law decay: `1/(1 + k(l-1)/mu)`.
    #[serde(rename = "PE")]
    Pe,
    /// Exponential decay: `exp(-k(l-1)/mu)`.
    #[serde(rename = "EE")]
    Ee,
    /// Sparse ensemble gated by the Hamming distance of the basis labels.
    #[serde(rename = "SE")]
    Se,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Be, Family::Pe, Family::Ee, Family::Se];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Be => "BE",
            Family::Pe => "PE",
            Family::Ee => "EE",
            Family::Se => "SE",
        }
    }

    /// Direction in which `Lambda` grows with the family's scalar parameter.
    pub fn lambda_increases_with_param(self) -> bool {
        !matches!(self, Family::Be)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BE" => Ok(Family::Be),
            "PE" => Ok(Family::Pe),
            "EE" => Ok(Family::Ee),
            "SE" => Ok(Family::Se),
            other => Err(Error::InvalidSpec(format!("unknown family `{other}`"))),
        }
    }
}

/// Family-specific parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyParams {
    /// BE, PE and EE share a single decay parameter.
    Decay { mu: f64 },
    /// SE: on-diagonal width `w`, in-band width `w_s`, Hamming radius `n`.
    Sparse { w: f64, w_s: f64, hamming_radius: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub family: Family,
    /// Subsystem A holds `2^l_a` basis states.
    pub l_a: u32,
    /// Subsystem B holds `2^l_b` basis states; `l_b >= l_a`.
    pub l_b: u32,
    pub gamma: f64,
    pub params: FamilyParams,
    /// EE only: use `exp(-(k(l-1)/mu)^2)` instead of `exp(-k(l-1)/mu)`.
    #[serde(default)]
    pub ee_squared: bool,
}

impl EnsembleSpec {
    pub const DEFAULT_GAMMA: f64 = 1.0;

    pub fn new(family: Family, l_a: u32, l_b: u32, params: FamilyParams) -> Result<Self> {
        let spec = EnsembleSpec {
            family,
            l_a,
            l_b,
            gamma: Self::DEFAULT_GAMMA,
            params,
            ee_squared: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// BE/PE/EE spec with decay parameter `mu`.
    pub fn decay(family: Family, l_a: u32, l_b: u32, mu: f64) -> Result<Self> {
        Self::new(family, l_a, l_b, FamilyParams::Decay { mu })
    }

    pub fn sparse(l_a: u32, l_b: u32, w: f64, w_s: f64, hamming_radius: u32) -> Result<Self> {
        Self::new(
            Family::Se,
            l_a,
            l_b,
            FamilyParams::Sparse { w, w_s, hamming_radius },
        )
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_ee_squared(mut self, squared: bool) -> Self {
        self.ee_squared = squared;
        self
    }

    pub fn n_a(&self) -> usize {
        1usize << self.l_a
    }

    pub fn n_b(&self) -> usize {
        1usize << self.l_b
    }

    /// `nu_0 = N_B - N_A`.
    pub fn nu0(&self) -> usize {
        self.n_b() - self.n_a()
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_a < 1 {
            return Err(Error::InvalidSpec("l_a must be >= 1 (N_A >= 2)".into()));
        }
        if self.l_b < self.l_a {
            return Err(Error::InvalidSpec(format!(
                "l_b ({}) must be >= l_a ({})",
                self.l_b, self.l_a
            )));
        }
        if self.l_a + self.l_b > 2 * MAX_SUBSYSTEM_BITS || self.l_b > MAX_SUBSYSTEM_BITS {
            return Err(Error::InvalidSpec(format!(
                "subsystem sizes 2^{} x 2^{} too large",
                self.l_a, self.l_b
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidSpec(format!("gamma must be positive, got {}", self.gamma)));
        }
        match (self.family, self.params) {
            (Family::Se, FamilyParams::Sparse { w, w_s, .. }) => {
                if !(w.is_finite() && w > 0.0 && w_s.is_finite() && w_s > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "SE needs w > 0 and w_s > 0, got w={w}, w_s={w_s}"
                    )));
                }
            }
            (Family::Se, FamilyParams::Decay { .. }) => {
                return Err(Error::InvalidSpec("SE needs w, w_s, hamming_radius".into()));
            }
            (_, FamilyParams::Decay { mu }) => {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(Error::InvalidSpec(format!("mu must be positive, got {mu}")));
                }
            }
            (family, FamilyParams::Sparse { .. }) => {
                return Err(Error::InvalidSpec(format!("{family} takes a single `mu` parameter")));
            }
        }
        Ok(())
    }

    /// The scalar parameter that [`solve_param`] moves: `mu`, or `w` for SE.
    pub fn param(&self) -> f64 {
        match self.params {
            FamilyParams::Decay { mu } => mu,
            FamilyParams::Sparse { w, .. } => w,
        }
    }

    /// Replace the scalar parameter. For SE the ratio `w_s/w` is kept, so SE
    /// specs move along the ray fixed by the template.
    pub fn with_param(&self, value: f64) -> Result<Self> {
        let mut out = *self;
        out.params = match self.params {
            FamilyParams::Decay { .. } => FamilyParams::Decay { mu: value },
            FamilyParams::Sparse { w, w_s, hamming_radius } => FamilyParams::Sparse {
                w: value,
                w_s: w_s / w * value,
                hamming_radius,
            },
        };
        out.validate()?;
        Ok(out)
    }

    /// Same family and parameters on a different bipartition.
    pub fn with_sizes(&self, l_a: u32, l_b: u32) -> Result<Self> {
        let mut out = *self;
        out.l_a = l_a;
        out.l_b = l_b;
        out.validate()?;
        Ok(out)
    }
}

/// Hamming distance between the zero-based binary labels of the one-based
/// basis indices `k` and `l`.
pub fn hamming_distance(k: usize, l: usize) -> u32 {
    debug_assert!(k >= 1 && l >= 1);
    ((k - 1) ^ (l - 1)).count_ones()
}

/// Entry-wise variances `h` and means `b` of an ensemble, row-major
/// `n_a x n_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceProfile {
    n_a: usize,
    n_b: usize,
    h: Vec<f64>,
    b: Vec<f64>,
}

impl VarianceProfile {
    pub fn from_fn(n_a: usize, n_b: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut h = Vec::with_capacity(n_a * n_b);
        for k in 1..=n_a {
            for l in 1..=n_b {
                h.push(f(k, l));
            }
        }
        VarianceProfile { n_a, n_b, h, b: vec![0.0; n_a * n_b] }
    }

    /// Every entry has variance `value` (the stationary Wishart limit for
    /// `value = 1`).
    pub fn uniform(n_a: usize, n_b: usize, value: f64) -> Self {
        Self::from_fn(n_a, n_b, |_, _| value)
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// Variance of cell `(k, l)`, one-based.
    pub fn h(&self, k: usize, l: usize) -> f64 {
        self.h[(k - 1) * self.n_b + (l - 1)]
    }

    pub fn b(&self, k: usize, l: usize) -> f64 {
        self.b[(k - 1) * self.n_b + (l - 1)]
    }

    /// Row-major variances.
    pub fn variances(&self) -> &[f64] {
        &self.h
    }

    pub fn means(&self) -> &[f64] {
        &self.b
    }
}

fn decay_variance(spec: &EnsembleSpec, k: usize, l: usize) -> f64 {
    let m = (k * (l - 1)) as f64;
    match (spec.family, spec.params) {
        (Family::Be, FamilyParams::Decay { mu }) => {
            if l == 1 {
                1.0
            } else {
                1.0 / (1.0 + mu)
            }
        }
        (Family::Pe, FamilyParams::Decay { mu }) => 1.0 / (1.0 + m / mu),
        (Family::Ee, FamilyParams::Decay { mu }) => {
            if spec.ee_squared {
                (-(m / mu).powi(2)).exp()
            } else {
                (-m / mu).exp()
            }
        }
        (Family::Se, FamilyParams::Sparse { w, w_s, hamming_radius }) => {
            match hamming_distance(k, l) {
                0 => (-m / (w * w)).exp(),
                d if d <= hamming_radius => (-m / (w_s * w_s)).exp(),
                _ => 0.0,
            }
        }
        _ => unreachable!("spec validated on construction"),
    }
}

/// Variance profile of `spec`; the means are identically zero.
pub fn variance_profile(spec: &EnsembleSpec) -> Result<VarianceProfile> {
    spec.validate()?;
    Ok(VarianceProfile::from_fn(spec.n_a(), spec.n_b(), |k, l| {
        decay_variance(spec, k, l)
    }))
}

/// The separable initial ensemble of the family (`mu -> inf` for BE,
/// `mu -> 0` for PE/EE, `w, w_s -> 0` for SE): only first-column cells keep
/// a nonzero variance.
pub fn initial_profile(spec: &EnsembleSpec) -> Result<VarianceProfile> {
    spec.validate()?;
    Ok(VarianceProfile::from_fn(spec.n_a(), spec.n_b(), |k, l| {
        if l != 1 {
            return 0.0;
        }
        match spec.params {
            FamilyParams::Sparse { hamming_radius, .. } => {
                if hamming_distance(k, l) <= hamming_radius {
                    1.0
                } else {
                    0.0
                }
            }
            FamilyParams::Decay { .. } => 1.0,
        }
    }))
}

/// `ln|1 - y|`, accurate for small `y`.
fn ln_abs_one_minus(y: f64) -> f64 {
    if y < 1.0 {
        (-y).ln_1p()
    } else {
        (y - 1.0).ln()
    }
}

/// One `ln|1 - 2 gamma h|` term of a closed-form sum, with the singular and
/// fixed-point conventions applied.
fn closed_term(gamma: f64, h: f64, k: usize, l: usize) -> Result<f64> {
    let y = 2.0 * gamma * h;
    if (1.0 - y).abs() < SINGULAR_TOL {
        return Err(Error::SingularTerm { k, l });
    }
    if (1.0 - gamma * h).abs() < SINGULAR_TOL {
        return Ok(0.0);
    }
    Ok(ln_abs_one_minus(y))
}

/// Complexity parameter from the per-family closed-form sums.
///
/// Only cells whose variance differs from the initial ensemble contribute
/// (the first column never moves). `|.|` is taken inside the logarithm so
/// regimes with `2 gamma h > 1` stay real.
pub fn lambda_closed_form(spec: &EnsembleSpec) -> Result<f64> {
    spec.validate()?;
    let gamma = spec.gamma;
    let n_a = spec.n_a();
    let n_b = spec.n_b();
    let sum = match spec.params {
        FamilyParams::Decay { mu } => match spec.family {
            Family::Be => {
                let cells = (n_a * (n_b - 1)) as f64;
                cells * closed_term(gamma, 1.0 / (1.0 + mu), 1, 2)?
            }
            Family::Pe => {
                let mut acc = 0.0;
                for r1 in 1..=n_a {
                    for r2 in 1..n_b {
                        let h = mu / (mu + (r1 * r2) as f64);
                        acc += closed_term(gamma, h, r1, r2 + 1)?;
                    }
                }
                acc
            }
            Family::Ee => {
                let mut acc = 0.0;
                for r1 in 1..=n_a {
                    for r2 in 1..n_b {
                        let x = (r1 * r2) as f64 / mu;
                        let h = if spec.ee_squared { (-x * x).exp() } else { (-x).exp() };
                        acc += closed_term(gamma, h, r1, r2 + 1)?;
                    }
                }
                acc
            }
            Family::Se => unreachable!(),
        },
        FamilyParams::Sparse { w, w_s, hamming_radius } => {
            let mut acc = 0.0;
            for r in 2..=n_a {
                let h = (-((r * (r - 1)) as f64) / (w * w)).exp();
                acc += closed_term(gamma, h, r, r)?;
            }
            for r1 in 1..=n_a {
                for r2 in 2..=n_b {
                    let d = hamming_distance(r1, r2);
                    if d == 0 || d > hamming_radius {
                        continue;
                    }
                    let h = (-((r1 * (r2 - 1)) as f64) / (w_s * w_s)).exp();
                    acc += closed_term(gamma, h, r1, r2)?;
                }
            }
            acc
        }
    };
    Ok(clean_zero(-sum / (2.0 * gamma)))
}

fn clean_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// `ln f` for one real component, `f = |2(1 - 2 gamma h)|`.
fn ln_characteristic(gamma: f64, h: f64, k: usize, l: usize) -> Result<f64> {
    let y = 2.0 * gamma * h;
    if (1.0 - y).abs() < SINGULAR_TOL {
        return Err(Error::SingularTerm { k, l });
    }
    Ok(std::f64::consts::LN_2 + ln_abs_one_minus(y))
}

/// First characteristic coordinate `Y_1` of a profile relative to
/// `reference`, summed over every cell and both real components
/// (`M = 2 N_A N_B`). Components with identical variance in both profiles
/// cancel and are skipped, which also removes the always-zero SE cells.
fn y1_difference(profile: &VarianceProfile, gamma: f64, reference: &VarianceProfile) -> Result<f64> {
    let n_a = profile.n_a();
    let n_b = profile.n_b();
    let components = 2 * n_a * n_b;
    let mut acc = 0.0;
    for k in 1..=n_a {
        for l in 1..=n_b {
            // The four families share one variance for the real and the
            // imaginary part.
            for _s in 0..2 {
                let h = profile.h(k, l);
                let h0 = reference.h(k, l);
                if h == h0 {
                    continue;
                }
                if profile.b(k, l) != 0.0 || reference.b(k, l) != 0.0 {
                    return Err(Error::InvalidSpec(
                        "nonzero means are not supported by the complexity parameter".into(),
                    ));
                }
                acc += ln_characteristic(gamma, h, k, l)? - ln_characteristic(gamma, h0, k, l)?;
            }
        }
    }
    Ok(-acc / (2.0 * components as f64 * gamma))
}

/// Complexity parameter `Lambda = N_A N_B (Y_1 - Y_0)` from the generic
/// characteristic solution.
pub fn lambda_generic(
    profile: &VarianceProfile,
    gamma: f64,
    reference: &VarianceProfile,
) -> Result<f64> {
    if profile.n_a() != reference.n_a() || profile.n_b() != reference.n_b() {
        return Err(Error::DimensionMismatch(format!(
            "profile {}x{} vs reference {}x{}",
            profile.n_a(),
            profile.n_b(),
            reference.n_a(),
            reference.n_b()
        )));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidSpec(format!("gamma must be positive, got {gamma}")));
    }
    let cells = (profile.n_a() * profile.n_b()) as f64;
    Ok(clean_zero(cells * y1_difference(profile, gamma, reference)?))
}

/// Ratios `(1 - gamma h_a)/(1 - gamma h_b)` over the cell pairs that the
/// family keeps as constants of evolution: any two cells off the first column
/// for BE, and `(m, n)` vs `(n-1, m+1)` for PE and EE.
pub fn evolution_constant_ratios(spec: &EnsembleSpec) -> Result<Vec<f64>> {
    let profile = variance_profile(spec)?;
    let g = spec.gamma;
    let n_a = profile.n_a();
    let n_b = profile.n_b();
    let mut out = Vec::new();
    match spec.family {
        Family::Be => {
            let pivot = 1.0 - g * profile.h(1, 2);
            for k in 1..=n_a {
                for l in 2..=n_b {
                    out.push((1.0 - g * profile.h(k, l)) / pivot);
                }
            }
        }
        Family::Pe | Family::Ee => {
            for m in 1..=n_a {
                for n in 2..=n_b {
                    let (k2, l2) = (n - 1, m + 1);
                    if k2 >= 1 && k2 <= n_a && l2 <= n_b {
                        out.push((1.0 - g * profile.h(k2, l2)) / (1.0 - g * profile.h(m, n)));
                    }
                }
            }
        }
        Family::Se => {}
    }
    Ok(out)
}

/// Cells `(k, l)` where `1 - 2 gamma h_kl` vanishes, excluding cells that
/// never move away from the initial ensemble.
pub fn singular_cells(spec: &EnsembleSpec) -> Vec<(usize, usize)> {
    let (Ok(p), Ok(r)) = (variance_profile(spec), initial_profile(spec)) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for k in 1..=p.n_a() {
        for l in 1..=p.n_b() {
            let h = p.h(k, l);
            if h != r.h(k, l) && (1.0 - 2.0 * spec.gamma * h).abs() < SINGULAR_TOL {
                out.push((k, l));
            }
        }
    }
    out
}

/// Search interval for the scalar family parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds { lo: 1e-12, hi: 1e12 }
    }
}

/// Open interval of the scalar parameter on which `Lambda` is strictly
/// monotone, starting from the separable end and stopping short of the first
/// cell with `h = 1/(2 gamma)`.
pub fn monotone_branch(spec: &EnsembleSpec, bounds: ParamBounds) -> (f64, f64) {
    let two_g = 2.0 * spec.gamma;
    let margin = 1e-9;
    let (mut lo, mut hi) = (bounds.lo, bounds.hi);
    if two_g > 1.0 {
        match spec.family {
            // h = 1/(1+mu) hits 1/(2 gamma) at mu = 2 gamma - 1.
            Family::Be => lo = lo.max((two_g - 1.0) * (1.0 + margin)),
            // Smallest product k(l-1) is 1.
            Family::Pe => hi = hi.min((1.0 - margin) / (two_g - 1.0)),
            Family::Ee => {
                let edge = if spec.ee_squared {
                    1.0 / two_g.ln().sqrt()
                } else {
                    1.0 / two_g.ln()
                };
                hi = hi.min(edge * (1.0 - margin));
            }
            Family::Se => {
                if let FamilyParams::Sparse { w, w_s, hamming_radius } = spec.params {
                    let ratio = w_s / w;
                    let ln2g = two_g.ln();
                    // Diagonal cell (2,2) has the smallest product among d = 0.
                    let mut edge = if spec.n_a() >= 2 { (2.0 / ln2g).sqrt() } else { f64::INFINITY };
                    if hamming_radius >= 1 {
                        edge = edge.min((1.0 / ln2g).sqrt() / ratio);
                    }
                    hi = hi.min(edge * (1.0 - margin));
                }
            }
        }
    }
    (lo, hi)
}

/// Find the family parameter whose closed-form `Lambda` equals `target`
/// (relative accuracy 1e-8), searching the monotone branch inside `bounds`.
/// For SE the search runs over `w` with `w_s/w` fixed by the template.
pub fn solve_param(template: &EnsembleSpec, target: f64, bounds: ParamBounds) -> Result<f64> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::Domain(format!("target Lambda must be positive, got {target}")));
    }
    template.validate()?;
    let (lo, hi) = monotone_branch(template, bounds);
    if !(lo < hi) {
        return Err(Error::Unattainable { target, lo: 0.0, hi: 0.0 });
    }
    let lambda_at = |p: f64| -> Result<f64> { lambda_closed_form(&template.with_param(p)?) };
    let ln_t = target.ln();
    let objective = |u: f64| -> Result<f64> {
        let lam = lambda_at(u.exp())?;
        Ok(lam.max(1e-300).ln() - ln_t)
    };
    let (mut u_lo, mut u_hi) = (lo.ln(), hi.ln());
    // Far ends of an unbounded branch can round a variance onto the singular
    // value (e.g. 1/(1+mu) == 1 for tiny mu); move such ends to the last
    // parameter that still evaluates.
    let singular = |f: &Result<f64>| matches!(f, Err(Error::SingularTerm { .. }));
    let mut f_hi = objective(u_hi);
    if singular(&f_hi) {
        (u_hi, f_hi) = retreat(&objective, u_hi, u_lo)?;
    }
    let mut f_lo = objective(u_lo);
    if singular(&f_lo) {
        (u_lo, f_lo) = retreat(&objective, u_lo, u_hi)?;
    }
    let (f_lo, f_hi) = (f_lo?, f_hi?);
    let (lo, hi) = (u_lo.exp(), u_hi.exp());
    if f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        let a = lambda_at(lo)?;
        let b = lambda_at(hi)?;
        return Err(Error::Unattainable { target, lo: a.min(b), hi: a.max(b) });
    }
    let u = brent_root(objective, u_lo, u_hi, f_lo, f_hi, 1e-11)?;
    Ok(u.exp())
}

/// From a singular end `bad` toward `good`: halve until a point evaluates,
/// then bisect the gap down to the evaluable point closest to `bad`.
fn retreat(
    objective: &impl Fn(f64) -> Result<f64>,
    mut bad: f64,
    good: f64,
) -> Result<(f64, Result<f64>)> {
    let mut ok = None;
    let mut probe = bad;
    for _ in 0..60 {
        probe = 0.5 * (probe + good);
        let f = objective(probe);
        if !matches!(f, Err(Error::SingularTerm { .. })) {
            ok = Some((probe, f));
            break;
        }
        bad = probe;
    }
    let Some((mut at, mut f_at)) = ok else {
        return Err(Error::Numerical("no evaluable point on the parameter branch".into()));
    };
    for _ in 0..60 {
        let mid = 0.5 * (at + bad);
        if mid == at || mid == bad {
            break;
        }
        let f = objective(mid);
        if matches!(f, Err(Error::SingularTerm { .. })) {
            bad = mid;
        } else {
            at = mid;
            f_at = f;
        }
    }
    Ok((at, f_at))
}

/// [`solve_param`] with the default bounds.
pub fn mu_for_lambda(template: &EnsembleSpec, target: f64) -> Result<f64> {
    solve_param(template, target, ParamBounds::default())
}

/// Brent's method on a bracketing interval; stops when `|f| <= ftol`.
fn brent_root(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    ftol: f64,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-15;
        let m = 0.5 * (c - b);
        if fb.abs() <= ftol || m.abs() <= tol {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
        if !fb.is_finite() {
            return Err(Error::Numerical(format!("non-finite objective at {b}")));
        }
    }
    Err(Error::Numerical("root search did not converge".into()))
}

/// Exponential integral `E_1(x) = Gamma(0, x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 1.0 {
        // Power series.
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -0.577_215_664_901_532_9 - x.ln() + sum
    } else {
        // Modified Lentz continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// `n`-th harmonic number.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Large-size asymptotic `Lambda` forms used by the criticality analysis as a
/// cross-check against the exact sums: `N_A (N_B - 1)/mu` for BE,
/// `mu H_{N_A} H_{N_B-1}` for PE and `mu Gamma(0, 1/mu)` for EE.
/// Not defined for SE.
pub fn lambda_asymptotic(spec: &EnsembleSpec) -> Option<f64> {
    let n_a = spec.n_a();
    let n_b = spec.n_b();
    match spec.params {
        FamilyParams::Decay { mu } => match spec.family {
            Family::Be => Some((n_a * (n_b - 1)) as f64 / mu),
            Family::Pe => Some(mu * harmonic(n_a) * harmonic(n_b - 1)),
            Family::Ee => Some(mu * exp_integral_e1(1.0 / mu)),
            Family::Se => None,
        },
        FamilyParams::Sparse { .. } => None,
    }
}
