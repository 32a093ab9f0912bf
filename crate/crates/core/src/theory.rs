//! Closed-form predictions for the ensemble-averaged entropies as functions
//! of the complexity parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which entropy a prediction refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    /// von Neumann entropy `R1`.
    #[serde(rename = "1")]
    One,
    /// Renyi-2 entropy `R2`.
    #[serde(rename = "2")]
    Two,
}

impl Order {
    pub fn index(self) -> usize {
        match self {
            Order::One => 1,
            Order::Two => 2,
        }
    }

    pub fn from_index(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Order::One),
            2 => Ok(Order::Two),
            _ => Err(Error::Domain(format!("entropy order must be 1 or 2, got {n}"))),
        }
    }
}

/// Size-dependent rescaling `D_n = a * 2^(b * l_a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DModel {
    pub a: f64,
    pub b: f64,
}

impl DModel {
    pub fn constant(d: f64) -> Self {
        DModel { a: d, b: 0.0 }
    }

    pub fn at(&self, l_a: u32) -> f64 {
        d_of_size(l_a, *self)
    }
}

pub fn d_of_size(l_a: u32, model: DModel) -> f64 {
    model.a * (model.b * l_a as f64).exp2()
}

/// Bracket used by [`r_n_of_lambda`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BracketForm {
    /// `1 - L_A^(-beta Lambda / (2 D_n))`.
    #[default]
    Rescaled,
    /// `1 - L_A^(-tau (beta Lambda / 2 - 1))`.
    Shifted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub beta: f64,
    pub gamma: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// Overrides the default `tau = 1 / D_n`.
    pub tau: Option<f64>,
    pub d1: DModel,
    pub d2: DModel,
    #[serde(default)]
    pub bracket: BracketForm,
}

impl TheoryParams {
    pub fn new(gamma: f64, n_a: usize, n_b: usize, d1: DModel, d2: DModel) -> Result<Self> {
        let p = TheoryParams { beta: 2.0, gamma, n_a, n_b, tau: None, d1, d2, bracket: BracketForm::Rescaled };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a < 2 || self.n_b < self.n_a {
            return Err(Error::Domain(format!(
                "need n_b >= n_a >= 2, got n_a={}, n_b={}",
                self.n_a, self.n_b
            )));
        }
        if !(self.gamma > 0.0) || !(self.beta > 0.0) {
            return Err(Error::Domain("beta and gamma must be positive".into()));
        }
        for m in [self.d1, self.d2] {
            if !(m.a > 0.0 && m.b >= 0.0) {
                return Err(Error::Domain(format!("invalid D model {m:?}")));
            }
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return Err(Error::Domain(format!("tau must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// `L_A = log2 N_A`.
    pub fn l_a(&self) -> f64 {
        (self.n_a as f64).log2()
    }

    pub fn nu0(&self) -> f64 {
        (self.n_b - self.n_a) as f64
    }

    pub fn d_model(&self, order: Order) -> DModel {
        match order {
            Order::One => self.d1,
            Order::Two => self.d2,
        }
    }

    /// `D_n` at this subsystem size.
    pub fn d(&self, order: Order) -> f64 {
        let m = self.d_model(order);
        m.a * (m.b * self.l_a()).exp2()
    }

    pub fn tau(&self, order: Order) -> f64 {
        self.tau.unwrap_or_else(|| 1.0 / self.d(order))
    }

    /// Half size difference `(N_B - N_A + 1) / 2`.
    pub fn half_difference(&self) -> f64 {
        (self.n_b as f64 - self.n_a as f64 + 1.0) / 2.0
    }

    /// `(N + 2 nu D - 1) / (N + 2 nu - 1)` with `D = D_1`.
    pub fn chi1(&self) -> f64 {
        let n = self.n_a as f64;
        let nu = self.half_difference();
        (n + 2.0 * nu * self.d(Order::One) - 1.0) / (n + 2.0 * nu - 1.0)
    }

    /// `(N + nu D - 1) / (N + 2 nu - 1)` with `D = D_1`.
    pub fn chi2(&self) -> f64 {
        let n = self.n_a as f64;
        let nu = self.half_difference();
        (n + nu * self.d(Order::One) - 1.0) / (n + 2.0 * nu - 1.0)
    }

    /// `q_0 = (2N + nu_0 - 1) / (N + nu_0)`.
    pub fn q0(&self) -> f64 {
        let n = self.n_a as f64;
        let nu0 = self.nu0();
        (2.0 * n + nu0 - 1.0) / (n + nu0)
    }
}

/// Ergodic-limit average entropies: `ln N - N/(2(N + nu_0))` for `R1`,
/// `ln(N (N + nu_0) / (2N + nu_0 - 1))` for `R2`.
pub fn r_infinity(order: Order, n_a: usize, n_b: usize) -> Result<f64> {
    if n_a < 2 || n_b < n_a {
        return Err(Error::Domain(format!("need n_b >= n_a >= 2, got {n_a}, {n_b}")));
    }
    let n = n_a as f64;
    let nu0 = (n_b - n_a) as f64;
    Ok(match order {
        Order::One => n.ln() - n / (2.0 * (n + nu0)),
        Order::Two => (n * (n + nu0) / (2.0 * n + nu0 - 1.0)).ln(),
    })
}

/// `<R0>(Lambda) = <R0(inf)> + N^2 / (2 gamma tau (Lambda - 1))`, with `tau`
/// taken from the `R1` rescaling unless overridden.
pub fn r0_of_lambda(lambda: f64, params: &TheoryParams, r0_inf: f64) -> Result<f64> {
    if !(lambda > 1.0) {
        return Err(Error::Domain(format!("R0 prediction needs Lambda > 1, got {lambda}")));
    }
    let n = params.n_a as f64;
    let tau = params.tau(Order::One);
    Ok(r0_inf + n * n / (2.0 * params.gamma * tau * (lambda - 1.0)))
}

/// `<Q>(Lambda) = e^x + (beta/2N) q2 (1 - e^x)` with `x = tau (1 - beta Lambda/2)`,
/// `tau` taken from the `R2` rescaling unless overridden.
pub fn q_of_lambda(lambda: f64, params: &TheoryParams, q2_estimate: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("Lambda must be non-negative, got {lambda}")));
    }
    if !(q2_estimate >= 1.0) {
        return Err(Error::Domain(format!("<Q^2> estimate must be >= 1, got {q2_estimate}")));
    }
    let tau = params.tau(Order::Two);
    let e = (tau * (1.0 - params.beta * lambda / 2.0)).exp();
    let n = params.n_a as f64;
    Ok(e + params.beta / (2.0 * n) * q2_estimate * (1.0 - e))
}

/// The Lambda-dependent bracket of the entropy prediction.
pub fn bracket(order: Order, lambda: f64, params: &TheoryParams) -> Result<f64> {
    let l_a = params.l_a();
    if !(l_a > 1.0) {
        return Err(Error::Domain(format!(
            "power-law base log2 N_A must exceed 1, got {l_a}"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("Lambda must be non-negative, got {lambda}")));
    }
    let exponent = match params.bracket {
        BracketForm::Rescaled => params.beta * lambda / (2.0 * params.d(order)),
        BracketForm::Shifted => params.tau(order) * (params.beta * lambda / 2.0 - 1.0),
    };
    Ok(-(-exponent * l_a.ln()).exp_m1())
}

/// The amplitude `g_n` entering the prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GInput {
    /// `g_1 = R0 / N - q_0`.
    R0(f64),
    /// `g_2 = -(2 beta / N) Q`.
    Q(f64),
}

pub fn g_n(order: Order, params: &TheoryParams, input: GInput) -> Result<f64> {
    let n = params.n_a as f64;
    match (order, input) {
        (Order::One, GInput::R0(r0)) => Ok(r0 / n - params.q0()),
        (Order::Two, GInput::Q(q)) => Ok(-2.0 * params.beta / n * q),
        _ => Err(Error::Domain(format!("{input:?} does not define g_{}", order.index()))),
    }
}

/// `<R_n> = ((-1)^(n-1) / n) g_n bracket`.
pub fn r_n_of_lambda(order: Order, lambda: f64, params: &TheoryParams, input: GInput) -> Result<f64> {
    let g = g_n(order, params, input)?;
    let sign = match order {
        Order::One => 1.0,
        Order::Two => -0.5,
    };
    Ok(sign * g * bracket(order, lambda, params)?)
}

/// Prediction with the limiting value supplied directly:
/// `<R_n> = amplitude * bracket`.
pub fn r_n_with_amplitude(order: Order, lambda: f64, params: &TheoryParams, amplitude: f64) -> Result<f64> {
    Ok(amplitude * bracket(order, lambda, params)?)
}
