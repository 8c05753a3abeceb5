//! Certificates for the finite-`β` condition, the level gap, and the
//! end-to-end audit of the piecewise model's inequality chain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{sup_norm, Grid, GridField};
use crate::model::{beta_eval, beta_numeric, BetaError, BetaLadder, BetaLimit, ModelError, Nonlinearity, Section5Model};
use crate::nehari::{Functional, NehariError};
use crate::report::ext_real;
use crate::solve::{tau_m, SolveError, TauResult};
use crate::spectrum::{node_sample, weighted_eigs, Spectrum, SpectrumError};
use crate::stiffness::StiffnessForm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("the Sobolev exponent 2N/(N-2) is undefined for N = {dim}; supply the constant with --sobolev <value>")]
    DimensionUnsupported { dim: usize },
    #[error("missing ingredient: {0}")]
    MissingIngredient(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Beta(#[from] BetaError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Nehari(#[from] NehariError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("inner-branch regime not attained: t* = {t_star} but the branch needs t* <= {t_limit}")]
    RegimeNotAttained { t_star: f64, t_limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolevProvenance {
    User,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevInput {
    pub value: f64,
    pub provenance: SobolevProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevEstimate {
    pub value: f64,
    pub exponent: f64,
    pub iterations: usize,
    /// Relative dual residual of the Rayleigh quotient at exit.
    pub residual: f64,
    pub converged: bool,
}

/// Discrete minimum of `‖u‖² / |u|_p²`, `p = 2N/(N − 2)`, by projected
/// descent from the Laplacian's first eigenfunction. Minimizers concentrate
/// under refinement, so the value drifts slowly downward with the mesh.
pub fn sobolev_estimate(grid: &Grid, form: &StiffnessForm, max_iter: usize) -> Result<SobolevEstimate, VerifyError> {
    let n = grid.dim();
    if n <= 2 {
        return Err(VerifyError::DimensionUnsupported { dim: n });
    }
    let p = 2.0 * n as f64 / (n as f64 - 2.0);
    let vol = grid.cell_volume();
    let lp = |u: &[f64]| (vol * u.iter().map(|x| x.abs().powf(p)).sum::<f64>()).powf(1.0 / p);
    let normalize = |u: &[f64]| -> GridField {
        let s = lp(u);
        u.iter().map(|x| x / s).collect::<Vec<_>>().into()
    };
    let start = weighted_eigs(form, &grid.constant(1.0), 1)?.first().vector.clone();
    let mut u = normalize(&start);
    let mut r = form.q(&u, &u);
    let mut step = 1.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let tol = 1e-8;
    while iterations < max_iter {
        // Riesz gradient of q(u,u)/|u|_p² at |u|_p = 1
        let rhs: Vec<f64> = u.iter().map(|x| vol * x.abs().powf(p - 2.0) * x).collect();
        let z = form.solve(&rhs);
        let g: Vec<f64> = u.iter().zip(&z).map(|(ui, zi)| 2.0 * (ui - r * zi)).collect();
        let gn2 = form.q(&g, &g);
        residual = gn2.sqrt() / r;
        if residual <= tol {
            break;
        }
        iterations += 1;
        let mut moved = false;
        let mut s = step;
        while s > 1e-16 {
            let cand = normalize(&u.axpy(-s, &g));
            let rc = form.q(&cand, &cand);
            if rc <= r - 1e-4 * s * gn2 {
                u = cand;
                r = rc;
                moved = true;
                break;
            }
            s *= 0.5;
        }
        if !moved {
            break;
        }
        step = 2.0 * s;
    }
    Ok(SobolevEstimate {
        value: r,
        exponent: p,
        iterations,
        residual,
        converged: residual <= tol,
    })
}

/// `|η|_∞^{N/2} τ² / (2 λ_1(η − α) S^{N/2})`.
pub fn beta_threshold(eta_sup: f64, tau: f64, lambda1_gap: f64, sobolev: f64, dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    eta_sup.powf(half) * tau * tau / (2.0 * lambda1_gap * sobolev.powf(half))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelGap {
    pub c_n: f64,
    /// `(S/|η|_∞)^{N/2} · essinf β`.
    #[serde(serialize_with = "ext_real")]
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaCertificate {
    #[serde(serialize_with = "ext_real")]
    pub essinf_beta: f64,
    pub beta_nodes_sampled: usize,
    pub eta_sup: f64,
    pub tau_m: f64,
    pub lambda1_gap: f64,
    pub sobolev: SobolevInput,
    pub dim: usize,
    #[serde(serialize_with = "ext_real")]
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: bool,
    /// `essinf β = +∞`, so the inequality holds trivially.
    pub vacuous: bool,
    /// `N ≤ 2`: the Sobolev constant was supplied for an undefined exponent.
    pub extrapolated: bool,
    pub level_gap: Option<LevelGap>,
}

impl BetaCertificate {
    pub fn recompute_rhs(&self) -> f64 {
        beta_threshold(self.eta_sup, self.tau_m, self.lambda1_gap, self.sobolev.value, self.dim)
    }
}

/// `min β` over sampled nodes (one node for autonomous models).
pub fn essinf_beta(model: &dyn Nonlinearity, grid: &Grid, ladder: &BetaLadder) -> Result<(f64, usize), VerifyError> {
    let nodes = if model.is_autonomous() {
        vec![0]
    } else {
        (0..grid.len()).collect()
    };
    let mut m = f64::INFINITY;
    for &i in &nodes {
        m = m.min(beta_eval(model, grid.point(i), ladder)?.as_f64());
    }
    Ok((m, nodes.len()))
}

#[allow(clippy::too_many_arguments)]
pub fn beta_certificate(
    model: &dyn Nonlinearity,
    grid: &Grid,
    s_gap: &Spectrum,
    tau: &TauResult,
    sobolev: SobolevInput,
    c_n: Option<f64>,
    ladder: &BetaLadder,
) -> Result<BetaCertificate, VerifyError> {
    if !(sobolev.value > 0.0 && sobolev.value.is_finite()) {
        return Err(VerifyError::MissingIngredient(format!(
            "sobolev constant must be positive (got {})",
            sobolev.value
        )));
    }
    if s_gap.is_empty() {
        return Err(VerifyError::MissingIngredient("lambda_1(eta - alpha)".into()));
    }
    if !(tau.tau > 0.0) {
        return Err(VerifyError::MissingIngredient("tau_m".into()));
    }
    let dim = grid.dim();
    let (essinf, sampled) = essinf_beta(model, grid, ladder)?;
    let eta_sup = (0..grid.len())
        .map(|i| model.eta(grid.point(i)).abs())
        .fold(0.0, f64::max);
    let lambda1_gap = s_gap.first().value;
    let rhs = beta_threshold(eta_sup, tau.tau, lambda1_gap, sobolev.value, dim);
    let lhs = essinf;
    let level_gap = c_n.map(|c| {
        let bound = (sobolev.value / eta_sup).powf(dim as f64 / 2.0) * lhs;
        LevelGap {
            c_n: c,
            bound,
            holds: c < bound,
        }
    });
    Ok(BetaCertificate {
        essinf_beta: essinf,
        beta_nodes_sampled: sampled,
        eta_sup,
        tau_m: tau.tau,
        lambda1_gap,
        sobolev,
        dim,
        lhs,
        rhs,
        verdict: lhs > rhs,
        vacuous: lhs == f64::INFINITY,
        extrapolated: dim <= 2,
        level_gap,
    })
}

/// Whether `½ f t − F → +∞` at every sampled node.
pub fn check_ff(model: &dyn Nonlinearity, grid: &Grid) -> Result<bool, BetaError> {
    let nodes = if model.is_autonomous() {
        vec![0]
    } else {
        node_sample(grid, 16)
    };
    let ladder = BetaLadder::default();
    for i in nodes {
        if beta_eval(model, grid.point(i), &ladder)? != BetaLimit::PosInfinity {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    fn greater(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs > rhs,
        }
    }

    fn at_least(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Regime {
    /// `t_* |u_*|_∞ ≤ θ`: the fiber stays on the cubic branch.
    Attained { t_star: f64, t_limit: f64 },
    NotAttained { t_star: f64, t_limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section5Report {
    pub eta: f64,
    pub dim: usize,
    pub measure: f64,
    pub lambda1: f64,
    pub u_star_sup: f64,
    pub theta: f64,
    pub theta_from_u_star: bool,
    pub a: f64,
    pub beta_closed_form: f64,
    pub beta_numeric: f64,
    pub beta_numeric_error: f64,
    /// `|f(θ⁻) − f(θ⁺)|`.
    pub continuity_gap: f64,
    pub cube_integral: f64,
    pub t_star: f64,
    pub t_star_oracle: f64,
    pub regime: Regime,
    /// `∫|u_*|³ > η^{−3/2}|Ω|^{−1/2}`.
    pub cube_lower_bound: Inequality,
    /// `t_* < η^{−3/2}|Ω|^{−1/2}` as printed.
    pub t_star_bound_printed: Inequality,
    /// `t_* < η^{3/2}|Ω|^{1/2}`, the bound the cube estimate actually gives.
    pub t_star_bound_consistent: Inequality,
    /// `π√a/(2η) − (√a/η) arctan(θ²/√a) − 2θ³/(3η²)`.
    pub tail_bracket: f64,
    /// `tail_bracket · η^{1/2}`, the constant implied at this `η`.
    pub implied_c5: f64,
    pub m: usize,
    pub tau_m: f64,
    pub sobolev: Option<SobolevInput>,
    /// `S^{N/2}·[θ²/η − (√a/η) arctan(θ²/√a) − 2θ³/(3η²) + π√a/(2η)] > τ^{N/2}`.
    pub target_printed: Option<Inequality>,
    /// `β > η^{N/2+1} τ² / (2 λ_1 S^{N/2})`.
    pub target_rearranged: Option<Inequality>,
    pub target_forms_agree: Option<bool>,
    /// `S^{N/2}·[…] ≥ tail_bracket`.
    pub sobolev_bracket_bound: Option<Inequality>,
    /// `C5/η^{1/2} > η^{−3N/4}|Ω|^{−N/4}`.
    pub final_step: Inequality,
}

impl Section5Report {
    pub fn regime_error(&self) -> Option<VerifyError> {
        match self.regime {
            Regime::NotAttained { t_star, t_limit } => Some(VerifyError::RegimeNotAttained { t_star, t_limit }),
            Regime::Attained { .. } => None,
        }
    }
}

/// Runs the piecewise-model chain with `u_* = e_1(η)` and `θ = |u_*|_∞`
/// unless `theta` is given.
pub fn section5_pipeline(
    eta: f64,
    theta: Option<f64>,
    grid: &Grid,
    form: &StiffnessForm,
    sobolev: Option<SobolevInput>,
    m: usize,
) -> Result<Section5Report, VerifyError> {
    let s_eta = weighted_eigs(form, &grid.constant(eta), m.max(1) + 1)?;
    let lambda_eta = s_eta.first().value;
    if lambda_eta >= 1.0 {
        return Err(VerifyError::Precondition(format!(
            "eta = {eta} does not exceed the first Laplacian eigenvalue {}",
            lambda_eta * eta
        )));
    }
    let u_star = s_eta.first().vector.clone();
    let sup = u_star.sup_norm();
    let theta_value = theta.unwrap_or(sup);
    let model = Section5Model::new(theta_value, eta)?;
    let f = Functional::new(grid, form, &model);
    let ladder = BetaLadder::default();
    let beta_closed = model.beta();
    let (beta_num, beta_err) = match beta_numeric(&model, grid.point(0), &ladder)? {
        BetaLimit::Finite { value, error } => (value, error),
        other => (other.as_f64(), f64::NAN),
    };
    let (left, right) = model.one_sided_at_theta();
    let vol = grid.cell_volume();
    let cube = vol * u_star.iter().map(|x| x.abs().powi(3)).sum::<f64>();
    let fib = f.project_fiber(&u_star, 1e-13)?;
    let t_star = fib.t_u;
    let t_limit = theta_value / sup;
    let regime = if t_star * sup <= theta_value {
        Regime::Attained { t_star, t_limit }
    } else {
        Regime::NotAttained { t_star, t_limit }
    };
    let measure = grid.measure();
    let n = grid.dim();
    let half = n as f64 / 2.0;
    let a = model.a();
    let ra = a.sqrt();
    let th = theta_value;
    let arc = (th * th / ra).atan();
    let tail = std::f64::consts::PI * ra / (2.0 * eta) - ra / eta * arc - 2.0 * th.powi(3) / (3.0 * eta * eta);
    let bracket = th * th / eta + tail;

    let tau = tau_m(&f, &s_eta, m.max(1), 0, 0, 1e-13)?;
    let lambda1 = lambda_eta * eta;
    let (target_printed, target_rearranged, agree, sob_bound) = match sobolev {
        Some(s) => {
            let sp = s.value.powf(half);
            let printed = Inequality::greater(sp * bracket, tau.tau.powf(half));
            let rearranged =
                Inequality::greater(beta_closed, eta.powf(half + 1.0) * tau.tau * tau.tau / (2.0 * lambda1 * sp));
            let agree = printed.holds == rearranged.holds;
            (
                Some(printed),
                Some(rearranged),
                Some(agree),
                Some(Inequality::at_least(sp * bracket, tail)),
            )
        }
        None => (None, None, None, None),
    };
    Ok(Section5Report {
        eta,
        dim: n,
        measure,
        lambda1,
        u_star_sup: sup,
        theta: theta_value,
        theta_from_u_star: theta.is_none(),
        a,
        beta_closed_form: beta_closed,
        beta_numeric: beta_num,
        beta_numeric_error: beta_err,
        continuity_gap: (left - right).abs(),
        cube_integral: cube,
        t_star,
        t_star_oracle: 1.0 / cube,
        regime,
        cube_lower_bound: Inequality::greater(cube, 1.0 / (eta.powf(1.5) * measure.sqrt())),
        t_star_bound_printed: Inequality::greater(1.0 / (eta.powf(1.5) * measure.sqrt()), t_star),
        t_star_bound_consistent: Inequality::greater(eta.powf(1.5) * measure.sqrt(), t_star),
        tail_bracket: tail,
        implied_c5: tail * eta.sqrt(),
        m: m.max(1),
        tau_m: tau.tau,
        sobolev,
        target_printed,
        target_rearranged,
        target_forms_agree: agree,
        sobolev_bracket_bound: sob_bound,
        final_step: Inequality::greater(tail, 1.0 / (eta.powf(0.75 * n as f64) * measure.powf(n as f64 / 4.0))),
    })
}

/// `|[u ≠ 0]|` with the nodal threshold `1e-12 · |u|_∞`.
pub fn support_measure(grid: &Grid, u: &[f64]) -> f64 {
    let cut = 1e-12 * sup_norm(u);
    u.iter().filter(|x| x.abs() > cut).count() as f64 * grid.cell_volume()
}

/// `(S/|η|_∞)^{N/2}`, the lower bound on the support of boundary points.
pub fn support_bound(sobolev: f64, eta_sup: f64, dim: usize) -> f64 {
    (sobolev / eta_sup).powf(dim as f64 / 2.0)
}
