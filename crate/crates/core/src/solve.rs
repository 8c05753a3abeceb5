//! Minimizations: the ground state by descent of `Ψ` on the unit sphere,
//! `τ_m` over an eigenspace sphere, and the global minimum in the coercive
//! regime.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{sup_norm, GridField};
use crate::nehari::{Functional, NehariError, PsiGradient};
use crate::spectrum::{Spectrum, SpectrumError};

/// Environment variable capping multistart parallelism.
pub const THREADS_ENV: &str = "NEHARI_LAB_THREADS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("start point: {0}")]
    Start(NehariError),
    #[error("fibering failed at iteration {iteration}: {source}")]
    Fiber { iteration: usize, source: NehariError },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("no negative energy along the start direction (I(t e1)/t^2 = {ratio:e} at t = {t:e})")]
    FailedNegativeStart { t: f64, ratio: f64 },
    #[error("invalid solver options: {0}")]
    Options(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Dual-norm tolerance on the (tangent) gradient and the Nehari identity.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of descents; the first starts unperturbed.
    pub restarts: usize,
    pub seed: u64,
    /// Steps with `delta < delta_min · ∫ηv²` are rejected.
    pub delta_min: f64,
    pub fiber_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    /// Size of the multistart perturbation relative to the start.
    pub perturbation: f64,
    /// Run even when the hypothesis report fails.
    pub override_hypotheses: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            restarts: 1,
            seed: 0,
            delta_min: 1e-10,
            fiber_tol: 1e-12,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            perturbation: 0.3,
            override_hypotheses: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Options(m.into()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iter == 0 || self.restarts == 0 {
            return bad("max_iter and restarts must be at least 1");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0 && self.delta_min >= 0.0 && self.fiber_tol > 0.0) {
            return bad("initial_step and fiber_tol must be positive, delta_min nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    Nonnegative,
    Nonpositive,
    SignChanging,
}

pub fn sign_of(u: &[f64], tol: f64) -> SignClass {
    let sup = sup_norm(u);
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if sup == 0.0 || min >= -tol * sup {
        SignClass::Nonnegative
    } else if max <= tol * sup {
        SignClass::Nonpositive
    } else {
        SignClass::SignChanging
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignAudit {
    pub class: SignClass,
    /// `u ≡ 0`.
    pub degenerate: bool,
    pub energy_plus: f64,
    pub energy_minus: f64,
}

/// Sign class of `u` with `I(u⁺)` and `I(u⁻)`.
pub fn sign_audit(f: &Functional, u: &[f64], tol: f64) -> SignAudit {
    let plus: Vec<f64> = u.iter().map(|x| x.max(0.0)).collect();
    let minus: Vec<f64> = u.iter().map(|x| x.min(0.0)).collect();
    SignAudit {
        class: sign_of(u, tol),
        degenerate: u.iter().all(|x| *x == 0.0),
        energy_plus: f.energy(&plus),
        energy_minus: f.energy(&minus),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    NonConvergence { reason: String },
    /// The margin to the boundary of the admissible set collapsed while
    /// `t_v` kept growing: the level is approached only at infinity.
    BoundaryEscape { iteration: usize, delta: f64, t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentTrace {
    pub psi: Vec<f64>,
    pub delta: Vec<f64>,
    pub t: Vec<f64>,
    pub residual: Vec<f64>,
    /// Step accepted from iterate `k`; one entry shorter when the run stops.
    pub step: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSummary {
    pub index: usize,
    pub c_n: f64,
    pub iterations: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateReport {
    #[serde(skip)]
    pub u_star: GridField,
    #[serde(skip)]
    pub v_star: GridField,
    /// `I(u_star)`.
    pub c_n: f64,
    pub t_star: f64,
    /// `Ψ` at the unperturbed start.
    pub psi_start: f64,
    /// Dual norm of the tangent gradient of `Ψ`.
    pub dual_residual: f64,
    /// Dual norm of `I′(u_star)`.
    pub energy_residual: f64,
    /// `|‖u‖² − ∫f(u)u| / ‖u‖²`.
    pub nehari_residual: f64,
    pub sign: SignAudit,
    /// Signed minimizers are expected; a sign-changing one with
    /// `I(u⁺) + I(u⁻) < 2c_N` would contradict minimality.
    pub sign_audit_consistent: bool,
    pub iterations: usize,
    pub converged: bool,
    pub outcome: Outcome,
    pub trace: DescentTrace,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
}

struct Descent {
    v: GridField,
    pg: PsiGradient,
    iterations: usize,
    outcome: Outcome,
    trace: DescentTrace,
}

/// Armijo test with a fallback for decreases below the rounding of `value`:
/// then the change is estimated by the trapezoid rule on the directional
/// derivatives at both ends.
fn sufficient_decrease(value: f64, new_value: f64, s: f64, slope0: f64, slope_s: f64, c: f64) -> bool {
    let target = c * s * slope0;
    if (new_value - value).abs() <= 1e3 * f64::EPSILON * value.abs().max(f64::MIN_POSITIVE) {
        return 0.5 * s * (slope0 + slope_s) <= target;
    }
    new_value - value <= target
}

fn descend(f: &Functional, start: &[f64], opts: &SolveOptions) -> Result<Descent, SolveError> {
    let form = f.form();
    let mut v = f.unit(start);
    let mut pg = f.psi_grad(&v, opts.fiber_tol).map_err(SolveError::Start)?;
    let delta0 = f.admissibility(&v).delta;
    let mut trace = DescentTrace {
        psi: Vec::new(),
        delta: Vec::new(),
        t: Vec::new(),
        residual: Vec::new(),
        step: Vec::new(),
    };
    let mut step = opts.initial_step;
    let mut low_margin_run = 0usize;
    let mut run_start_t = 0.0;
    let mut iterations = 0;
    let outcome = loop {
        let adm = f.admissibility(&v);
        trace.psi.push(pg.value);
        trace.delta.push(adm.delta);
        trace.t.push(pg.t);
        trace.residual.push(pg.dual_norm);
        if pg.dual_norm <= opts.tol && nehari_residual(f, &v, pg.t) <= opts.tol {
            break Outcome::Converged;
        }
        if adm.delta < 1e-6 * delta0 {
            if low_margin_run == 0 {
                run_start_t = pg.t;
            }
            low_margin_run += 1;
            if low_margin_run >= 20 && pg.t >= 2.0 * run_start_t {
                break Outcome::BoundaryEscape {
                    iteration: iterations,
                    delta: adm.delta,
                    t: pg.t,
                };
            }
        } else {
            low_margin_run = 0;
        }
        if iterations >= opts.max_iter {
            break Outcome::NonConvergence {
                reason: format!("iteration limit {} reached", opts.max_iter),
            };
        }
        iterations += 1;

        let g2 = pg.dual_norm * pg.dual_norm;
        let mut s = step;
        let accepted = loop {
            if s < 1e-20 * opts.initial_step {
                break None;
            }
            let w = v.axpy(-s, &pg.tangent);
            let wn = form.norm(&w);
            let cand = w.scaled(1.0 / wn);
            let adm = f.admissibility(&cand);
            if adm.delta < opts.delta_min * adm.weighted {
                s *= opts.shrink;
                continue;
            }
            let next = match f.psi_grad(&cand, opts.fiber_tol) {
                Ok(p) => p,
                Err(NehariError::NotInA { .. } | NehariError::BracketOverflow { .. }) => {
                    s *= opts.shrink;
                    continue;
                }
                Err(source) => {
                    return Err(SolveError::Fiber {
                        iteration: iterations,
                        source,
                    })
                }
            };
            let slope_s = -form.q(&next.tangent, &pg.tangent) / wn;
            if sufficient_decrease(pg.value, next.value, s, -g2, slope_s, opts.armijo) {
                break Some((cand, next, s));
            }
            s *= opts.shrink;
        };
        let Some((cand, next, s)) = accepted else {
            break Outcome::NonConvergence {
                reason: format!("line search stalled at iteration {iterations}"),
            };
        };
        trace.step.push(s);
        v = cand;
        pg = next;
        step = 2.0 * s;
    };
    Ok(Descent {
        v,
        pg,
        iterations,
        outcome,
        trace,
    })
}

fn nehari_residual(f: &Functional, v: &[f64], t: f64) -> f64 {
    let w: Vec<f64> = v.iter().map(|x| t * x).collect();
    let ns = f.form().q(&w, &w);
    (ns - f.nonlinear_pairing(&w)).abs() / ns
}

/// Worker count for multistart runs.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

fn run_parallel<T: Send>(count: usize, job: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap().unwrap_or(0))
        .build();
    match pool {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&job).collect()),
        Err(_) => (0..count).map(job).collect(),
    }
}

/// Start of restart `index`: `v0` plus a seeded combination of the
/// eigenfunctions with `λ < 1`, shrunk until admissible.
fn perturbed_start(f: &Functional, v0: &[f64], s_eta: &Spectrum, opts: &SolveOptions, index: usize) -> GridField {
    let base = f.unit(v0);
    if index == 0 {
        return base;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(index as u64));
    let dirs: Vec<&GridField> = s_eta
        .pairs
        .iter()
        .filter(|p| p.value < 1.0)
        .map(|p| &p.vector)
        .collect();
    let mut pert = vec![0.0; base.len()];
    for d in &dirs {
        let c: f64 = rng.random_range(-1.0..1.0);
        for (p, x) in pert.iter_mut().zip(d.iter()) {
            *p += c * x;
        }
    }
    let flip = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
    let pn = f.form().norm(&pert);
    if pn == 0.0 {
        return base.scaled(flip);
    }
    let mut scale = opts.perturbation / pn;
    for _ in 0..60 {
        let cand = f.unit(&base.axpy(scale, &pert)).scaled(flip);
        if f.admissibility(&cand).in_a {
            return cand;
        }
        scale *= 0.5;
    }
    base.scaled(flip)
}

/// Ground state by Riemannian descent of `Ψ` from `v0` (default: the first
/// eigenfunction of `η`), with `opts.restarts` seeded restarts.
pub fn ground_state(
    f: &Functional,
    s_eta: &Spectrum,
    v0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<GroundStateReport, SolveError> {
    opts.validate()?;
    let v0: &[f64] = match v0 {
        Some(v) => v,
        None => &s_eta.first().vector,
    };
    let psi_start = f.psi(&f.unit(v0), opts.fiber_tol).map_err(SolveError::Start)?.value;
    let runs = run_parallel(opts.restarts, |k| {
        let start = perturbed_start(f, v0, s_eta, opts, k);
        descend(f, &start, opts)
    });
    let runs: Vec<Descent> = runs.into_iter().collect::<Result<_, _>>()?;
    let summaries: Vec<RestartSummary> = runs
        .iter()
        .enumerate()
        .map(|(index, d)| RestartSummary {
            index,
            c_n: d.pg.value,
            iterations: d.iterations,
            outcome: d.outcome.clone(),
        })
        .collect();
    let rank = |d: &Descent| (!matches!(d.outcome, Outcome::Converged), d.pg.value);
    let best = (0..runs.len())
        .min_by(|&a, &b| rank(&runs[a]).partial_cmp(&rank(&runs[b])).unwrap())
        .unwrap();
    let d = runs.into_iter().nth(best).unwrap();
    let t = d.pg.t;
    let u: GridField = d.v.scaled(t);
    let c_n = f.energy(&u);
    let sign = sign_audit(f, &u, 1e-10);
    let tol = opts.tol;
    let sign_audit_consistent = sign.class != SignClass::SignChanging
        || sign.energy_plus + sign.energy_minus >= 2.0 * c_n - tol;
    Ok(GroundStateReport {
        c_n,
        t_star: t,
        psi_start,
        dual_residual: d.pg.dual_norm,
        energy_residual: f.gradient(&u).dual_norm,
        nehari_residual: nehari_residual(f, &d.v, t),
        sign,
        sign_audit_consistent,
        iterations: d.iterations,
        converged: d.outcome == Outcome::Converged,
        outcome: d.outcome,
        trace: d.trace,
        best_restart: best,
        restarts: summaries,
        u_star: u,
        v_star: d.v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauResult {
    pub tau: f64,
    /// Coefficients of the minimizer in the eigenbasis (unit Euclidean norm).
    pub coefficients: Vec<f64>,
    pub chi: usize,
    /// `t_{e_j}` for every basis function.
    pub basis_values: Vec<f64>,
    pub restarts: usize,
}

/// `τ_m = inf t_u` over the unit sphere of the first `m` eigenspaces of `η`,
/// by finite-difference projected descent on the coefficient sphere.
pub fn tau_m(
    f: &Functional,
    s_eta: &Spectrum,
    m: usize,
    restarts: usize,
    seed: u64,
    fiber_tol: f64,
) -> Result<TauResult, SolveError> {
    let basis = s_eta.eigenspace_basis(m)?;
    let chi = basis.len();
    let field = |c: &[f64]| -> Vec<f64> {
        let mut u = vec![0.0; basis[0].len()];
        for (cj, e) in c.iter().zip(&basis) {
            for (ui, ei) in u.iter_mut().zip(e.iter()) {
                *ui += cj * ei;
            }
        }
        u
    };
    let normalize = |c: &[f64]| -> Vec<f64> {
        let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        c.iter().map(|x| x / n).collect()
    };
    let value = |c: &[f64]| -> Result<f64, SolveError> {
        f.project_fiber(&field(c), fiber_tol)
            .map(|r| r.t_u)
            .map_err(|source| SolveError::Fiber { iteration: 0, source })
    };

    let mut basis_values = Vec::with_capacity(chi);
    for j in 0..chi {
        let mut c = vec![0.0; chi];
        c[j] = 1.0;
        basis_values.push(value(&c)?);
    }
    let (mut best_c, mut best) = {
        let j = (0..chi)
            .min_by(|&a, &b| basis_values[a].total_cmp(&basis_values[b]))
            .unwrap();
        let mut c = vec![0.0; chi];
        c[j] = 1.0;
        (c, basis_values[j])
    };
    if chi == 1 {
        return Ok(TauResult {
            tau: best,
            coefficients: best_c,
            chi,
            basis_values,
            restarts: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Vec<f64>> = vec![best_c.clone()];
    for _ in 0..restarts {
        let c: Vec<f64> = (0..chi).map(|_| rng.random_range(-1.0..1.0)).collect();
        starts.push(normalize(&c));
    }
    for start in starts {
        let mut c = start;
        let mut val = value(&c)?;
        let mut step = 0.5;
        for _ in 0..200 {
            let h = 1e-6;
            let mut grad = vec![0.0; chi];
            for j in 0..chi {
                let mut p = c.clone();
                let mut q = c.clone();
                p[j] += h;
                q[j] -= h;
                grad[j] = (value(&normalize(&p))? - value(&normalize(&q))?) / (2.0 * h);
            }
            let along: f64 = grad.iter().zip(&c).map(|(g, x)| g * x).sum();
            for (g, x) in grad.iter_mut().zip(&c) {
                *g -= along * x;
            }
            let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gn <= 1e-10 * val {
                break;
            }
            let mut moved = false;
            while step > 1e-14 {
                let trial: Vec<f64> = c.iter().zip(&grad).map(|(x, g)| x - step * g / gn).collect();
                let trial = normalize(&trial);
                let tv = value(&trial)?;
                if tv < val - 1e-4 * step * gn {
                    c = trial;
                    val = tv;
                    moved = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if val < best {
            best = val;
            best_c = c;
        }
    }
    Ok(TauResult {
        tau: best,
        coefficients: best_c,
        chi,
        basis_values,
        restarts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoerciveReport {
    #[serde(skip)]
    pub u_star: GridField,
    pub energy: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub outcome: Outcome,
    /// Scale of the start point `t0 · e1`.
    pub t0: f64,
    pub start_energy: f64,
    /// `(t, I(t e1)/t²)` along the start direction.
    pub scan: Vec<(f64, f64)>,
    /// The start direction was the Laplacian's first eigenfunction because
    /// `α` has no positive part.
    pub laplacian_start: bool,
    pub energy_trace: Vec<f64>,
}

/// Global minimum of `I` in the coercive regime, by Riesz-gradient descent
/// from the most negative point of a scan along `e1(α)`.
pub fn coercive_min(
    f: &Functional,
    e1: &[f64],
    laplacian_start: bool,
    opts: &SolveOptions,
) -> Result<CoerciveReport, SolveError> {
    opts.validate()?;
    let form = f.form();
    let e1 = f.unit(e1);
    let scan: Vec<(f64, f64)> = (0..=40)
        .map(|k| {
            let t = 10f64.powf(-6.0 + 0.25 * k as f64);
            (t, f.energy(&e1.scaled(t)) / (t * t))
        })
        .collect();
    let (t_min, r_min) = scan[0];
    if !(r_min < 0.0) {
        return Err(SolveError::FailedNegativeStart { t: t_min, ratio: r_min });
    }
    let &(t0, _) = scan
        .iter()
        .min_by(|a, b| (a.1 * a.0 * a.0).total_cmp(&(b.1 * b.0 * b.0)))
        .unwrap();
    let mut u = e1.scaled(t0);
    let start_energy = f.energy(&u);
    let mut value = start_energy;
    let mut g = f.gradient(&u);
    let mut step = opts.initial_step;
    let mut iterations = 0;
    let mut energy_trace = vec![value];
    let outcome = loop {
        if g.dual_norm <= opts.tol {
            break Outcome::Converged;
        }
        if iterations >= opts.max_iter {
            break Outcome::NonConvergence {
                reason: format!("iteration limit {} reached", opts.max_iter),
            };
        }
        iterations += 1;
        let g2 = g.dual_norm * g.dual_norm;
        let mut s = step;
        let accepted = loop {
            if s < 1e-20 * opts.initial_step {
                break None;
            }
            let cand = u.axpy(-s, &g.riesz);
            let cv = f.energy(&cand);
            let cg = f.gradient(&cand);
            let slope_s = -form.q(&cg.riesz, &g.riesz);
            if sufficient_decrease(value, cv, s, -g2, slope_s, opts.armijo) {
                break Some((cand, cv, cg, s));
            }
            s *= opts.shrink;
        };
        let Some((cand, cv, cg, s)) = accepted else {
            break Outcome::NonConvergence {
                reason: format!("line search stalled at iteration {iterations}"),
            };
        };
        u = cand;
        value = cv;
        g = cg;
        energy_trace.push(value);
        step = 2.0 * s;
    };
    Ok(CoerciveReport {
        energy: value,
        dual_residual: g.dual_norm,
        iterations,
        converged: outcome == Outcome::Converged,
        outcome,
        t0,
        start_energy,
        scan,
        laplacian_start,
        energy_trace,
        u_star: u,
    })
}
