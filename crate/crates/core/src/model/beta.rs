//! Numerical evaluation of `β(x) = lim_{|t|→∞} [½ f(x, t) t − F(x, t)]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Nonlinearity;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BetaError {
    #[error("beta ladder needs at least 3 increasing positive entries ending at >= 1e3")]
    InvalidLadder,
    #[error("beta limit undecided at x = {x:?}: {reason}")]
    Undecided { x: Vec<f64>, reason: String },
}

/// Sample magnitudes `T_k` for the limit. Expected to be geometric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaLadder {
    pub magnitudes: Vec<f64>,
    /// `|½ f t − F|` above this counts as diverged.
    #[serde(default = "default_cap")]
    pub cap: f64,
}

fn default_cap() -> f64 {
    1e8
}

impl Default for BetaLadder {
    fn default() -> Self {
        Self {
            magnitudes: (1..=6).map(|k| 10f64.powi(k)).collect(),
            cap: default_cap(),
        }
    }
}

impl BetaLadder {
    pub fn validate(&self) -> Result<(), BetaError> {
        let m = &self.magnitudes;
        let increasing = m.windows(2).all(|w| w[1] > w[0]);
        if m.len() < 3 || !increasing || m[0] <= 0.0 || *m.last().unwrap() < 1e3 {
            return Err(BetaError::InvalidLadder);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaLimit {
    Finite { value: f64, error: f64 },
    PosInfinity,
    NegInfinity,
}

impl BetaLimit {
    /// The limit as an extended real.
    pub fn as_f64(&self) -> f64 {
        match self {
            Self::Finite { value, .. } => *value,
            Self::PosInfinity => f64::INFINITY,
            Self::NegInfinity => f64::NEG_INFINITY,
        }
    }
}

/// Evaluates `β(x)`. Closed forms are used when the model has one; otherwise
/// `b(T) = ½ f T − F` is sampled along the ladder (both signs unless the model
/// is odd) and either extrapolated in `1/T²` or classified as divergent.
pub fn beta_eval(model: &dyn Nonlinearity, x: &[f64], ladder: &BetaLadder) -> Result<BetaLimit, BetaError> {
    ladder.validate()?;
    if let Some(value) = model.beta_closed_form(x) {
        return Ok(BetaLimit::Finite { value, error: 0.0 });
    }
    beta_numeric(model, x, ladder)
}

/// The sampled limit, ignoring any closed form the model provides.
pub fn beta_numeric(model: &dyn Nonlinearity, x: &[f64], ladder: &BetaLadder) -> Result<BetaLimit, BetaError> {
    ladder.validate()?;
    let side = |sign: f64| {
        let bs: Vec<f64> = ladder
            .magnitudes
            .iter()
            .map(|t| model.nehari_integrand(x, sign * t))
            .collect();
        one_sided(&ladder.magnitudes, &bs, ladder.cap)
            .map_err(|reason| BetaError::Undecided { x: x.to_vec(), reason })
    };
    let plus = side(1.0)?;
    if model.is_odd() {
        return Ok(plus);
    }
    let minus = side(-1.0)?;
    match (plus, minus) {
        (BetaLimit::Finite { value: a, error: ea }, BetaLimit::Finite { value: b, error: eb }) => {
            let spread = (a - b).abs();
            if spread <= 10.0 * (ea + eb) + 1e-10 * (1.0 + a.abs()) {
                Ok(BetaLimit::Finite {
                    value: 0.5 * (a + b),
                    error: ea.max(eb).max(spread),
                })
            } else {
                Err(BetaError::Undecided {
                    x: x.to_vec(),
                    reason: format!("limits at +inf ({a}) and -inf ({b}) differ"),
                })
            }
        }
        (p, m) if p == m => Ok(p),
        (p, m) => Err(BetaError::Undecided {
            x: x.to_vec(),
            reason: format!("limits at +inf ({p:?}) and -inf ({m:?}) differ"),
        }),
    }
}

fn one_sided(ts: &[f64], bs: &[f64], cap: f64) -> Result<BetaLimit, String> {
    if let Some(k) = bs.iter().position(|b| !b.is_finite()) {
        return Err(format!("non-finite sample at |t| = {}", ts[k]));
    }
    let n = bs.len();
    let tail = &bs[n.saturating_sub(5)..];
    let rising = tail.windows(2).all(|w| w[1] >= w[0]);
    let falling = tail.windows(2).all(|w| w[1] <= w[0]);
    let last = bs[n - 1];
    if last > cap && rising {
        return Ok(BetaLimit::PosInfinity);
    }
    if last < -cap && falling {
        return Ok(BetaLimit::NegInfinity);
    }
    let d_last = bs[n - 1] - bs[n - 2];
    let d_prev = bs[n - 2] - bs[n - 3];
    let scale = 1.0 + last.abs();
    if d_last.abs() <= 1e-12 * scale || d_last.abs() <= 0.5 * d_prev.abs() {
        let extrapolate = |i: usize| {
            let (s1, s0) = (1.0 / (ts[i] * ts[i]), 1.0 / (ts[i - 1] * ts[i - 1]));
            bs[i] + (bs[i] - bs[i - 1]) * s1 / (s0 - s1)
        };
        let value = extrapolate(n - 1);
        let error = (value - extrapolate(n - 2))
            .abs()
            .min(d_last.abs())
            .max(f64::EPSILON * scale);
        return Ok(BetaLimit::Finite { value, error });
    }
    // Non-decaying one-signed increments along a geometric ladder: growth at
    // least logarithmic, which never reaches the cap in floating point.
    if d_last > 0.0 && d_prev > 0.0 && rising {
        return Ok(BetaLimit::PosInfinity);
    }
    if d_last < 0.0 && d_prev < 0.0 && falling {
        return Ok(BetaLimit::NegInfinity);
    }
    Err(format!(
        "samples neither settle nor diverge monotonically (last increments {d_prev:e}, {d_last:e})"
    ))
}
