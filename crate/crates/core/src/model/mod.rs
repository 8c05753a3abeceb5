//! Nonlinearities `f(x, t)` and everything derived from them pointwise:
//! the primitive `F`, the limits `α` (at 0) and `η` (at infinity), the limit
//! `β` of `½ f t − F`, and sampled checks of the structural hypotheses.

mod beta;
mod expr;
mod hypotheses;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use beta::{beta_eval, beta_numeric, BetaError, BetaLadder, BetaLimit};
pub use expr::{parse_expr, Expr, ExprModel, ParseError};
pub use hypotheses::{
    check_hypotheses, Check, HypothesisReport, SampleLattice, SpectralInputs, Verdict, Witness,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("section5 model needs eta > theta > 0 (theta = {theta}, eta = {eta})")]
    Section5Parameters { theta: f64, eta: f64 },
    #[error("rational model needs eta > alpha >= 0 (alpha = {alpha}, eta = {eta})")]
    RationalParameters { alpha: f64, eta: f64 },
    #[error("coercive model needs alpha > eta > 0 (alpha = {alpha}, eta = {eta})")]
    CoerciveParameters { alpha: f64, eta: f64 },
    #[error("linear model needs a finite slope (got {0})")]
    LinearParameters(f64),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expression model: {0}")]
    Evaluation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    ClosedForm,
    NumericLimit,
    Infinite,
}

/// A Carathéodory nonlinearity together with its asymptotic data.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn f(&self, x: &[f64], t: f64) -> f64;

    /// `F(x, t) = ∫_0^t f(x, s) ds`.
    fn primitive(&self, x: &[f64], t: f64) -> f64;

    /// `lim_{t→0} f(x, t)/t`.
    fn alpha(&self, x: &[f64]) -> f64;

    /// `lim_{|t|→∞} f(x, t)/t`.
    fn eta(&self, x: &[f64]) -> f64;

    fn is_odd(&self) -> bool;

    fn is_autonomous(&self) -> bool {
        true
    }

    fn beta_mode(&self) -> BetaMode;

    /// `½ f(x, t) t − F(x, t)`. Built-ins override this with a form that
    /// avoids the cancellation of the two `O(t²)` terms.
    fn nehari_integrand(&self, x: &[f64], t: f64) -> f64 {
        0.5 * self.f(x, t) * t - self.primitive(x, t)
    }

    fn beta_closed_form(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// `g(x, t) = η(x) t − f(x, t)`.
pub fn resonance_defect(model: &dyn Nonlinearity, x: &[f64], t: f64) -> f64 {
    model.eta(x) * t - model.f(x, t)
}

/// `G(x, t) = ∫_0^t g(x, s) ds = η(x) t²/2 − F(x, t)`.
pub fn resonance_defect_primitive(model: &dyn Nonlinearity, x: &[f64], t: f64) -> f64 {
    0.5 * model.eta(x) * t * t - model.primitive(x, t)
}

/// The piecewise model `f(t) = t|t|` for `|t| ≤ θ`, `η t⁵/(a + t⁴)` beyond,
/// with `a = θ³(η − θ)` making `f` continuous at `±θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section5Model {
    theta: f64,
    eta: f64,
    a: f64,
}

impl Section5Model {
    pub fn new(theta: f64, eta: f64) -> Result<Self, ModelError> {
        if !(theta.is_finite() && eta.is_finite() && theta > 0.0 && eta > theta) {
            return Err(ModelError::Section5Parameters { theta, eta });
        }
        Ok(Self {
            theta,
            eta,
            a: theta.powi(3) * (eta - theta),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eta_value(&self) -> f64 {
        self.eta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `ηθ²/2 − (η√a/2) arctan(θ²/√a) − θ³/3 + πη√a/4`.
    pub fn beta(&self) -> f64 {
        let (th, eta) = (self.theta, self.eta);
        let ra = self.a.sqrt();
        eta * th * th / 2.0 - eta * ra / 2.0 * (th * th / ra).atan() - th.powi(3) / 3.0
            + PI * eta * ra / 4.0
    }

    /// Left and right limits of `f` at `θ`.
    pub fn one_sided_at_theta(&self) -> (f64, f64) {
        let th = self.theta;
        (th * th, self.eta * th.powi(5) / (self.a + th.powi(4)))
    }
}

impl Nonlinearity for Section5Model {
    fn name(&self) -> String {
        format!("section5(theta={}, eta={})", self.theta, self.eta)
    }

    fn f(&self, _x: &[f64], t: f64) -> f64 {
        let s = t.abs();
        if s <= self.theta {
            t * s
        } else {
            let t4 = s.powi(4);
            self.eta * t * t4 / (self.a + t4)
        }
    }

    fn primitive(&self, _x: &[f64], t: f64) -> f64 {
        let s = t.abs();
        let th = self.theta;
        if s <= th {
            return s.powi(3) / 3.0;
        }
        let ra = self.a.sqrt();
        let arc = (s * s / ra).atan() - (th * th / ra).atan();
        th.powi(3) / 3.0 + self.eta * ((s * s - th * th) / 2.0 - ra / 2.0 * arc)
    }

    fn alpha(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn eta(&self, _x: &[f64]) -> f64 {
        self.eta
    }

    fn is_odd(&self) -> bool {
        true
    }

    fn beta_mode(&self) -> BetaMode {
        BetaMode::ClosedForm
    }

    fn nehari_integrand(&self, _x: &[f64], t: f64) -> f64 {
        let s = t.abs();
        let th = self.theta;
        if s <= th {
            return s.powi(3) / 6.0;
        }
        let ra = self.a.sqrt();
        let s2 = s * s;
        let arc = (s2 / ra).atan() - (th * th / ra).atan();
        self.eta * th * th / 2.0 - th.powi(3) / 3.0 - 0.5 * self.eta * self.a * s2 / (self.a + s2 * s2)
            + self.eta * ra / 2.0 * arc
    }

    fn beta_closed_form(&self, _x: &[f64]) -> Option<f64> {
        Some(self.beta())
    }
}

/// `f(t) = α t + (η − α) t³/(1 + t²)`; `½ f t − F` grows like `ln|t|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalModel {
    alpha: f64,
    eta: f64,
}

impl RationalModel {
    pub fn new(alpha: f64, eta: f64) -> Result<Self, ModelError> {
        if !(alpha.is_finite() && eta.is_finite() && alpha >= 0.0 && eta > alpha) {
            return Err(ModelError::RationalParameters { alpha, eta });
        }
        Ok(Self { alpha, eta })
    }
}

/// `½ ln(1 + x) − x/(2(1 + x))`, series near zero.
fn log_gap(x: f64) -> f64 {
    if x < 1e-4 {
        x * x * (0.25 - x / 3.0 + 0.375 * x)
    } else {
        0.5 * x.ln_1p() - x / (2.0 * (1.0 + x))
    }
}

impl Nonlinearity for RationalModel {
    fn name(&self) -> String {
        format!("rational(alpha={}, eta={})", self.alpha, self.eta)
    }

    fn f(&self, _x: &[f64], t: f64) -> f64 {
        self.alpha * t + (self.eta - self.alpha) * t.powi(3) / (1.0 + t * t)
    }

    fn primitive(&self, _x: &[f64], t: f64) -> f64 {
        let t2 = t * t;
        self.alpha * t2 / 2.0 + (self.eta - self.alpha) * (t2 / 2.0 - 0.5 * t2.ln_1p())
    }

    fn alpha(&self, _x: &[f64]) -> f64 {
        self.alpha
    }

    fn eta(&self, _x: &[f64]) -> f64 {
        self.eta
    }

    fn is_odd(&self) -> bool {
        true
    }

    fn beta_mode(&self) -> BetaMode {
        BetaMode::Infinite
    }

    fn nehari_integrand(&self, _x: &[f64], t: f64) -> f64 {
        (self.eta - self.alpha) * log_gap(t * t)
    }
}

/// `f(t) = η t + (α − η) t/(1 + t²)` with `α > η`: steep at the origin,
/// flat at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoerciveModel {
    alpha: f64,
    eta: f64,
}

impl CoerciveModel {
    pub fn new(alpha: f64, eta: f64) -> Result<Self, ModelError> {
        if !(alpha.is_finite() && eta.is_finite() && eta > 0.0 && alpha > eta) {
            return Err(ModelError::CoerciveParameters { alpha, eta });
        }
        Ok(Self { alpha, eta })
    }
}

impl Nonlinearity for CoerciveModel {
    fn name(&self) -> String {
        format!("coercive(alpha={}, eta={})", self.alpha, self.eta)
    }

    fn f(&self, _x: &[f64], t: f64) -> f64 {
        self.eta * t + (self.alpha - self.eta) * t / (1.0 + t * t)
    }

    fn primitive(&self, _x: &[f64], t: f64) -> f64 {
        let t2 = t * t;
        self.eta * t2 / 2.0 + (self.alpha - self.eta) * 0.5 * t2.ln_1p()
    }

    fn alpha(&self, _x: &[f64]) -> f64 {
        self.alpha
    }

    fn eta(&self, _x: &[f64]) -> f64 {
        self.eta
    }

    fn is_odd(&self) -> bool {
        true
    }

    fn beta_mode(&self) -> BetaMode {
        BetaMode::NumericLimit
    }

    fn nehari_integrand(&self, _x: &[f64], t: f64) -> f64 {
        -(self.alpha - self.eta) * log_gap(t * t)
    }
}

/// `f(t) = c t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    slope: f64,
}

impl LinearModel {
    pub fn new(slope: f64) -> Result<Self, ModelError> {
        if !slope.is_finite() {
            return Err(ModelError::LinearParameters(slope));
        }
        Ok(Self { slope })
    }
}

impl Nonlinearity for LinearModel {
    fn name(&self) -> String {
        format!("linear(eta={})", self.slope)
    }

    fn f(&self, _x: &[f64], t: f64) -> f64 {
        self.slope * t
    }

    fn primitive(&self, _x: &[f64], t: f64) -> f64 {
        0.5 * self.slope * t * t
    }

    fn alpha(&self, _x: &[f64]) -> f64 {
        self.slope
    }

    fn eta(&self, _x: &[f64]) -> f64 {
        self.slope
    }

    fn is_odd(&self) -> bool {
        true
    }

    fn beta_mode(&self) -> BetaMode {
        BetaMode::ClosedForm
    }

    fn nehari_integrand(&self, _x: &[f64], _t: f64) -> f64 {
        0.0
    }

    fn beta_closed_form(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
}

/// Model block of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `theta` defaults to `|e_1(η)|_∞` of the run's grid when omitted.
    Section5 {
        #[serde(default)]
        theta: Option<f64>,
        eta: f64,
    },
    Rational {
        alpha: f64,
        eta: f64,
    },
    Coercive {
        alpha: f64,
        eta: f64,
    },
    Linear {
        eta: f64,
    },
    Expr {
        f: String,
        #[serde(default, rename = "F")]
        primitive: Option<String>,
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        eta: Option<f64>,
    },
}

impl ModelConfig {
    /// Builds the model; `default_theta` supplies `θ` for a section5 block
    /// that leaves it out.
    pub fn build(&self, default_theta: Option<f64>) -> Result<Box<dyn Nonlinearity>, ModelError> {
        Ok(match self {
            Self::Section5 { theta, eta } => {
                let theta = theta.or(default_theta).unwrap_or(f64::NAN);
                Box::new(Section5Model::new(theta, *eta)?)
            }
            Self::Rational { alpha, eta } => Box::new(RationalModel::new(*alpha, *eta)?),
            Self::Coercive { alpha, eta } => Box::new(CoerciveModel::new(*alpha, *eta)?),
            Self::Linear { eta } => Box::new(LinearModel::new(*eta)?),
            Self::Expr {
                f,
                primitive,
                alpha,
                eta,
            } => Box::new(ExprModel::parse(f, primitive.as_deref(), *alpha, *eta)?),
        })
    }
}

/// Parses a user expression for `f(x, t)` (with optional `F`).
pub fn parse_model(src: &str) -> Result<ExprModel, ModelError> {
    ExprModel::parse(src, None, None, None)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}
