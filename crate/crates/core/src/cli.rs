//! Command-line front end. Exit codes: 0 ok, 1 configuration error,
//! 2 boundary escape, 3 nonconvergence, 4 failed precondition or hypothesis.

use std::fmt::{self, Display, Write as _};
use std::fs;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{RunConfig, SobolevSetting};
use crate::grid::{Grid, GridField};
use crate::model::{check_hypotheses, Check, HypothesisReport, ModelConfig, Nonlinearity, SampleLattice, Verdict};
use crate::nehari::{geometric_grid, AdmissibilityMargin, FiberingResult, Functional, LandscapeRow, NehariError, DEFAULT_FIBER_TOL};
use crate::report::to_json;
use crate::solve::{coercive_min, ground_state, tau_m, CoerciveReport, DescentTrace, GroundStateReport, Outcome, SolveError, TauResult};
use crate::spectrum::{classify_resonance, weighted_eigs, Resonance, Spectrum, SpectrumError};
use crate::stiffness::StiffnessForm;
use crate::verify::{
    beta_certificate, check_ff, section5_pipeline, sobolev_estimate, BetaCertificate, SobolevEstimate,
    SobolevInput, SobolevProvenance, VerifyError,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_ESCAPE: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;
pub const EXIT_PRECONDITION: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "nehari-lab",
    version,
    about = "Nehari-manifold ground states for -Δu = f(x,u) with zero Dirichlet data on boxes",
    after_help = "Exit codes: 0 ok, 1 configuration error, 2 boundary escape, 3 nonconvergence, \
                  4 failed precondition or hypothesis.\nNEHARI_LAB_THREADS caps multistart parallelism."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weighted eigenvalues λ_j(θ) of -Δu = λθu.
    Spectrum(SpectrumArgs),
    /// Hypothesis checks, resonance class and whether ½ft − F diverges.
    Classify(ClassifyArgs),
    /// Fiber projection t_u along one direction.
    Fiber(FiberArgs),
    /// Fiber map h(t) = I(tu) and h'(t) on a geometric t grid, as CSV.
    Landscape(LandscapeArgs),
    /// Ground state on the Nehari manifold.
    Solve(SolveArgs),
    /// Global minimum of I in the coercive regime.
    Minimize(SolveArgs),
    /// Certificate for the finite-β condition and the level gap.
    VerifyBeta(VerifyArgs),
    /// Inequality chain of the piecewise model with u* = e_1(η).
    Section5(Section5Args),
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long)]
    config: String,
    /// alpha, eta or custom:<field csv>
    #[arg(long, default_value = "eta")]
    weight: String,
    /// Number of eigenpairs.
    #[arg(short = 'm', default_value_t = 5)]
    m: usize,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    config: String,
    /// Relative tolerance for λ_j(η) = 1.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct FiberArgs {
    #[arg(long)]
    config: String,
    /// e1, e:<j> (j-th eigenfunction of η) or file:<field csv>
    #[arg(long, default_value = "e1")]
    direction: String,
    #[arg(long, default_value_t = DEFAULT_FIBER_TOL)]
    tol: f64,
    /// t_min,t_max,k
    #[arg(long)]
    landscape: Option<String>,
    /// JSON report (stdout when absent).
    #[arg(long)]
    out: Option<String>,
    /// Landscape CSV (stdout when absent).
    #[arg(long)]
    csv: Option<String>,
}

#[derive(Debug, Args)]
struct LandscapeArgs {
    #[arg(long)]
    config: String,
    #[arg(long, default_value = "e1")]
    direction: String,
    /// t_min,t_max,k
    #[arg(long, default_value = "1e-3,1e3,61")]
    range: String,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    config: String,
    #[arg(long)]
    out: Option<String>,
    /// Minimizer as a field CSV.
    #[arg(long)]
    field: Option<String>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<String>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    config: String,
    /// A positive value or `discrete`; overrides the config.
    #[arg(long)]
    sobolev: Option<SobolevSetting>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct Section5Args {
    #[arg(long)]
    eta: f64,
    /// Defaults to |e_1(η)|_∞.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Interior nodes per axis.
    #[arg(long, default_value_t = 255)]
    n: usize,
    /// A positive value or `discrete` (N = 3 only).
    #[arg(long)]
    sobolev: Option<SobolevSetting>,
    #[arg(short = 'm', default_value_t = 1)]
    m: usize,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl Failure {
    fn config(m: impl Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: m.to_string(),
        }
    }

    fn precondition(m: impl Display) -> Self {
        Self {
            code: EXIT_PRECONDITION,
            message: m.to_string(),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match &e {
            SolveError::Options(_) => EXIT_CONFIG,
            // the descent left the admissible set or t_v overflowed
            SolveError::Fiber { .. } => EXIT_ESCAPE,
            _ => EXIT_PRECONDITION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Solve(s) => s.into(),
            VerifyError::Model(m) => Failure::config(m),
            other => Failure::precondition(other),
        }
    }
}

fn outcome_code(o: &Outcome) -> u8 {
    match o {
        Outcome::Converged => EXIT_OK,
        Outcome::BoundaryEscape { .. } => EXIT_ESCAPE,
        Outcome::NonConvergence { .. } => EXIT_NONCONVERGENCE,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Messages go to stderr; reports go to files or stdout.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Fiber(a) => cmd_fiber(a),
        Command::Landscape(a) => cmd_landscape(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Minimize(a) => cmd_minimize(a),
        Command::VerifyBeta(a) => cmd_verify(a),
        Command::Section5(a) => cmd_section5(a),
    }
}

fn emit(path: Option<&str>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::config(format!("cannot write {p}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(path: Option<&str>, value: &T) -> Result<(), Failure> {
    let text = to_json(value).map_err(|e| Failure::config(format!("report serialization: {e}")))?;
    emit(path, &text)
}

struct Context {
    cfg: RunConfig,
    grid: Grid,
    form: StiffnessForm,
    model: Box<dyn Nonlinearity>,
}

fn load(path: &str) -> Result<Context, Failure> {
    let cfg = RunConfig::from_path(path).map_err(Failure::config)?;
    let grid = cfg.grid();
    let form = StiffnessForm::assemble(&grid).map_err(Failure::config)?;
    let default_theta = match &cfg.model {
        ModelConfig::Section5 { theta: None, eta } => Some(
            weighted_eigs(&form, &grid.constant(*eta), 1)
                .map_err(Failure::precondition)?
                .first()
                .vector
                .sup_norm(),
        ),
        _ => None,
    };
    let model = cfg
        .model
        .build(default_theta)
        .map_err(|e| Failure::config(format!("model: {e}")))?;
    Ok(Context { cfg, grid, form, model })
}

impl Context {
    fn functional(&self) -> Functional<'_> {
        Functional::new(&self.grid, &self.form, self.model.as_ref())
    }

    fn alpha_field(&self) -> GridField {
        self.grid.sample(|x| self.model.alpha(x))
    }

    fn eta_field(&self) -> GridField {
        self.grid.sample(|x| self.model.eta(x))
    }

    /// Spectra of `α` and `η` (`None` without a positive part), each
    /// extended past the eigenvalue 1.
    fn spectra(&self) -> Result<(Option<Spectrum>, Option<Spectrum>), Failure> {
        let m = self.cfg.verify.m;
        Ok((
            spectrum_past_one(&self.form, &self.alpha_field(), m)?,
            spectrum_past_one(&self.form, &self.eta_field(), m)?,
        ))
    }

    fn hypotheses(&self, sa: Option<&Spectrum>, se: Option<&Spectrum>) -> HypothesisReport {
        check_hypotheses(
            self.model.as_ref(),
            &self.grid,
            sa,
            se,
            self.cfg.verify.m,
            &SampleLattice::standard(),
        )
    }
}

/// Smallest spectrum holding at least `min_pairs` pairs, one complete
/// cluster beyond the eigenvalue 1, or every positive eigenvalue.
fn spectrum_past_one(form: &StiffnessForm, weight: &[f64], min_pairs: usize) -> Result<Option<Spectrum>, Failure> {
    let positive = weight.iter().filter(|&&w| w > 0.0).count();
    if positive == 0 {
        return Ok(None);
    }
    let mut k = min_pairs.max(8).min(positive);
    loop {
        let s = match weighted_eigs(form, weight, k) {
            Ok(s) => s,
            Err(SpectrumError::InsufficientSpectrum { available, .. }) if available > 0 && available < k => {
                k = available;
                continue;
            }
            Err(e) => return Err(Failure::precondition(e)),
        };
        let below = s.clusters.iter().filter(|c| c.value < 1.0).count();
        if s.exhaustive || k >= positive || (s.pairs.len() >= min_pairs && s.complete_clusters() > below) {
            return Ok(Some(s));
        }
        k = (2 * k).min(positive);
    }
}

fn gate(checks: &[(&str, &Check)], overridden: bool) -> Result<(), Failure> {
    for (name, c) in checks {
        if c.verdict != Verdict::Pass && !overridden {
            let detail = c
                .witness
                .as_ref()
                .and_then(|w| serde_json::to_string(w).ok())
                .or_else(|| c.note.clone())
                .unwrap_or_default();
            return Err(Failure::precondition(format!(
                "hypothesis ({name}) is {:?} {detail}; set solve.override_hypotheses to run anyway",
                c.verdict
            )));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    weight: &'a str,
    spectrum: &'a Spectrum,
}

fn cmd_spectrum(a: SpectrumArgs) -> Result<u8, Failure> {
    let ctx = load(&a.config)?;
    let weight = match a.weight.as_str() {
        "alpha" => ctx.alpha_field(),
        "eta" => ctx.eta_field(),
        other => match other.strip_prefix("custom:") {
            Some(path) => read_field(&ctx.grid, path)?,
            None => return Err(Failure::config(format!("--weight: expected alpha, eta or custom:<file>, got `{other}`"))),
        },
    };
    let s = weighted_eigs(&ctx.form, &weight, a.m).map_err(Failure::precondition)?;
    emit_json(
        a.out.as_deref(),
        &SpectrumReport {
            weight: &a.weight,
            spectrum: &s,
        },
    )?;
    eprintln!(
        "spectrum: {} pairs in {} clusters, lambda_1 = {:.12e}",
        s.pairs.len(),
        s.clusters.len(),
        s.first().value
    );
    Ok(EXIT_OK)
}

fn read_field(grid: &Grid, path: &str) -> Result<GridField, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {path}: {e}")))?;
    grid.read_csv(&text).map_err(|e| Failure::config(format!("{path}: {e}")))
}

#[derive(Serialize)]
struct ClassifyReport {
    hypotheses: HypothesisReport,
    resonance: Option<Resonance>,
    resonance_error: Option<String>,
    ff_holds: Option<bool>,
    ff_error: Option<String>,
}

fn cmd_classify(a: ClassifyArgs) -> Result<u8, Failure> {
    let ctx = load(&a.config)?;
    let (sa, se) = ctx.spectra()?;
    let hypotheses = ctx.hypotheses(sa.as_ref(), se.as_ref());
    let (resonance, resonance_error) = match &se {
        Some(s) => match classify_resonance(ctx.model.as_ref(), &ctx.grid, s, a.tol) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, Some("eta has no positive part".into())),
    };
    let (ff_holds, ff_error) = match check_ff(ctx.model.as_ref(), &ctx.grid) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = ClassifyReport {
        hypotheses,
        resonance,
        resonance_error,
        ff_holds,
        ff_error,
    };
    emit_json(a.out.as_deref(), &report)?;
    eprintln!(
        "classify: {} f1={:?} f2={:?} f1'={:?} f2'={:?} fF={:?}",
        report.hypotheses.model,
        report.hypotheses.f1_ok.verdict,
        report.hypotheses.f2_ok.verdict,
        report.hypotheses.f1p_ok.verdict,
        report.hypotheses.f2p_ok.verdict,
        report.ff_holds
    );
    Ok(EXIT_OK)
}

fn direction(ctx: &Context, spec: &str) -> Result<GridField, Failure> {
    let eigen = |j: usize| -> Result<GridField, Failure> {
        if j == 0 {
            return Err(Failure::config("--direction: eigenfunctions are numbered from 1"));
        }
        let s = weighted_eigs(&ctx.form, &ctx.eta_field(), j).map_err(Failure::precondition)?;
        Ok(s.pairs[j - 1].vector.clone())
    };
    if spec == "e1" {
        return eigen(1);
    }
    if let Some(j) = spec.strip_prefix("e:") {
        let j: usize = j
            .parse()
            .map_err(|_| Failure::config(format!("--direction: bad eigenfunction index `{j}`")))?;
        return eigen(j);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return read_field(&ctx.grid, path);
    }
    Err(Failure::config(format!("--direction: expected e1, e:<j> or file:<csv>, got `{spec}`")))
}

fn parse_range(s: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::config(format!("{flag}: expected t_min,t_max,k with 0 < t_min < t_max and k >= 2, got `{s}`"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [lo, hi, k] = parts[..] else {
        return Err(bad());
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let k: usize = k.parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || k < 2 {
        return Err(bad());
    }
    Ok(geometric_grid(lo, hi, k))
}

fn landscape_csv(rows: &[LandscapeRow]) -> String {
    let mut out = String::from("t,h,dh\n");
    for r in rows {
        let _ = writeln!(out, "{:.17e},{:.17e},{:.17e}", r.t, r.h, r.dh);
    }
    out
}

fn fiber_failure(e: NehariError) -> Failure {
    match e {
        NehariError::NotInA { .. } => Failure::precondition(e),
        NehariError::BracketOverflow { .. } => Failure {
            code: EXIT_ESCAPE,
            message: e.to_string(),
        },
        _ => Failure::config(e),
    }
}

#[derive(Serialize)]
struct FiberReport {
    direction: String,
    admissibility: AdmissibilityMargin,
    fiber: FiberingResult,
    /// `Ψ` at the normalized direction.
    psi: f64,
}

fn cmd_fiber(a: FiberArgs) -> Result<u8, Failure> {
    if !(a.tol > 0.0) {
        return Err(Failure::config("--tol must be positive"));
    }
    let ctx = load(&a.config)?;
    let f = ctx.functional();
    let u = direction(&ctx, &a.direction)?;
    let ts = a.landscape.as_deref().map(|s| parse_range(s, "--landscape")).transpose()?;
    let admissibility = f.admissibility(&u);
    let fiber = f.project_fiber(&u, a.tol).map_err(fiber_failure)?;
    let psi = f.psi(&f.unit(&u), a.tol).map_err(fiber_failure)?.value;
    emit_json(
        a.out.as_deref(),
        &FiberReport {
            direction: a.direction.clone(),
            admissibility,
            fiber,
            psi,
        },
    )?;
    if let Some(ts) = ts {
        emit(a.csv.as_deref(), &landscape_csv(&f.landscape(&u, &ts)))?;
    }
    eprintln!(
        "fiber: t_u = {:.15e}, h(t_u) = {:.15e}, |h'(t_u)| = {:.3e}",
        fiber.t_u, fiber.value, fiber.slope_residual
    );
    Ok(EXIT_OK)
}

/// Sign pattern of `h′` along the rows with runs merged, e.g. `"+0-"`.
pub fn sign_pattern(rows: &[LandscapeRow], t_u: f64) -> String {
    let mut out = String::new();
    for r in rows {
        let c = if (r.t - t_u).abs() <= 1e-9 * t_u {
            '0'
        } else if r.dh > 0.0 {
            '+'
        } else if r.dh < 0.0 {
            '-'
        } else {
            '0'
        };
        if !out.ends_with(c) {
            out.push(c);
        }
    }
    out
}

fn cmd_landscape(a: LandscapeArgs) -> Result<u8, Failure> {
    let ctx = load(&a.config)?;
    let f = ctx.functional();
    let u = direction(&ctx, &a.direction)?;
    let mut ts = parse_range(&a.range, "--range")?;
    let fiber = f.project_fiber(&u, DEFAULT_FIBER_TOL).map_err(fiber_failure)?;
    // include t_u so the zero of h′ appears as a row
    if ts[0] < fiber.t_u && fiber.t_u < ts[ts.len() - 1] {
        ts.push(fiber.t_u);
        ts.sort_by(f64::total_cmp);
    }
    let rows = f.landscape(&u, &ts);
    emit(a.out.as_deref(), &landscape_csv(&rows))?;
    eprintln!(
        "landscape: {} rows, t_u = {:.15e}, sign pattern of h' = {}",
        rows.len(),
        fiber.t_u,
        sign_pattern(&rows, fiber.t_u)
    );
    Ok(EXIT_OK)
}

fn trace_csv(t: &DescentTrace) -> String {
    let mut out = String::from("iteration,psi,delta,t,residual,step\n");
    for k in 0..t.psi.len() {
        let _ = write!(
            out,
            "{k},{:.17e},{:.17e},{:.17e},{:.17e},",
            t.psi[k], t.delta[k], t.t[k], t.residual[k]
        );
        // the final iterate has no accepted step
        match t.step.get(k) {
            Some(s) => {
                let _ = writeln!(out, "{s:.17e}");
            }
            None => out.push('\n'),
        }
    }
    out
}

#[derive(Serialize)]
struct SolveReport<'a> {
    config: &'a RunConfig,
    hypotheses: &'a HypothesisReport,
    ground_state: &'a GroundStateReport,
}

fn cmd_solve(a: SolveArgs) -> Result<u8, Failure> {
    let ctx = load(&a.config)?;
    let (sa, se) = ctx.spectra()?;
    let hyp = ctx.hypotheses(sa.as_ref(), se.as_ref());
    gate(&[("f1", &hyp.f1_ok), ("f2", &hyp.f2_ok)], ctx.cfg.solve.override_hypotheses)?;
    let se = se.ok_or_else(|| Failure::precondition("eta has no positive part"))?;
    let f = ctx.functional();
    let r = ground_state(&f, &se, None, &ctx.cfg.solve)?;
    emit_json(
        a.out.as_deref(),
        &SolveReport {
            config: &ctx.cfg,
            hypotheses: &hyp,
            ground_state: &r,
        },
    )?;
    if let Some(p) = &a.field {
        emit(Some(p), &ctx.grid.dump_csv(&r.u_star).map_err(Failure::config)?)?;
    }
    if let Some(p) = &a.trace {
        emit(Some(p), &trace_csv(&r.trace))?;
    }
    eprintln!(
        "solve: {:?} after {} iterations, c_N = {:.15e}, residual = {:.3e}, sign = {:?}",
        r.outcome, r.iterations, r.c_n, r.dual_residual, r.sign.class
    );
    Ok(outcome_code(&r.outcome))
}

#[derive(Serialize)]
struct MinimizeReport<'a> {
    config: &'a RunConfig,
    hypotheses: &'a HypothesisReport,
    minimum: &'a CoerciveReport,
}

fn cmd_minimize(a: SolveArgs) -> Result<u8, Failure> {
    let ctx = load(&a.config)?;
    let (sa, se) = ctx.spectra()?;
    let hyp = ctx.hypotheses(sa.as_ref(), se.as_ref());
    gate(&[("f1'", &hyp.f1p_ok), ("f2'", &hyp.f2p_ok)], ctx.cfg.solve.override_hypotheses)?;
    let (e1, laplacian_start) = match &sa {
        Some(s) => (s.first().vector.clone(), false),
        None => (
            weighted_eigs(&ctx.form, &ctx.grid.constant(1.0), 1)
                .map_err(Failure::precondition)?
                .first()
                .vector
                .clone(),
            true,
        ),
    };
    let f = ctx.functional();
    let r = coercive_min(&f, &e1, laplacian_start, &ctx.cfg.solve)?;
    emit_json(
        a.out.as_deref(),
        &MinimizeReport {
            config: &ctx.cfg,
            hypotheses: &hyp,
            minimum: &r,
        },
    )?;
    if let Some(p) = &a.field {
        emit(Some(p), &ctx.grid.dump_csv(&r.u_star).map_err(Failure::config)?)?;
    }
    if let Some(p) = &a.trace {
        let mut out = String::from("iteration,energy\n");
        for (k, e) in r.energy_trace.iter().enumerate() {
            let _ = writeln!(out, "{k},{e:.17e}");
        }
        emit(Some(p), &out)?;
    }
    eprintln!(
        "minimize: {:?} after {} iterations, I(u*) = {:.15e}, residual = {:.3e}",
        r.outcome, r.iterations, r.energy, r.dual_residual
    );
    Ok(outcome_code(&r.outcome))
}

fn sobolev_input(
    setting: Option<SobolevSetting>,
    grid: &Grid,
    form: &StiffnessForm,
    max_iter: usize,
) -> Result<(Option<SobolevInput>, Option<SobolevEstimate>), VerifyError> {
    match setting {
        None => Ok((None, None)),
        Some(SobolevSetting::Value(value)) => Ok((
            Some(SobolevInput {
                value,
                provenance: SobolevProvenance::User,
            }),
            None,
        )),
        Some(SobolevSetting::Mode(_)) => {
            let est = sobolev_estimate(grid, form, max_iter)?;
            Ok((
                Some(SobolevInput {
                    value: est.value,
                    provenance: SobolevProvenance::Discrete,
                }),
                Some(est),
            ))
        }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    config: &'a RunConfig,
    sobolev_estimate: Option<SobolevEstimate>,
    tau: TauResult,
    certificate: BetaCertificate,
    /// Why the level gap was not audited, when it was not.
    level_gap_note: Option<String>,
}

fn cmd_verify(a: VerifyArgs) -> Result<u8, Failure> {
    let ctx = load(&a.config)?;
    let (sobolev, estimate) = sobolev_input(
        a.sobolev.or(ctx.cfg.verify.sobolev),
        &ctx.grid,
        &ctx.form,
        ctx.cfg.verify.sobolev_max_iter,
    )?;
    let sobolev = sobolev.ok_or_else(|| {
        Failure::precondition("no Sobolev constant: pass --sobolev <value|discrete> or set verify.sobolev")
    })?;
    let se = spectrum_past_one(&ctx.form, &ctx.eta_field(), ctx.cfg.verify.m)?
        .ok_or_else(|| Failure::precondition("eta has no positive part"))?;
    let gap = ctx.grid.sample(|x| ctx.model.eta(x) - ctx.model.alpha(x));
    let s_gap = weighted_eigs(&ctx.form, &gap, 1).map_err(Failure::precondition)?;
    let f = ctx.functional();
    let opts = &ctx.cfg.solve;
    let tau = tau_m(&f, &se, ctx.cfg.verify.m, opts.restarts, opts.seed, opts.fiber_tol)?;
    let ladder = ctx.cfg.ladder();
    let mut cert = beta_certificate(ctx.model.as_ref(), &ctx.grid, &s_gap, &tau, sobolev, None, &ladder)?;
    let mut note = None;
    if cert.verdict {
        match ground_state(&f, &se, None, opts) {
            Ok(gs) if gs.converged => {
                cert = beta_certificate(ctx.model.as_ref(), &ctx.grid, &s_gap, &tau, sobolev, Some(gs.c_n), &ladder)?;
            }
            Ok(gs) => note = Some(format!("ground state did not converge: {:?}", gs.outcome)),
            Err(e) => note = Some(format!("ground state failed: {e}")),
        }
    } else {
        note = Some("verdict is false; the level gap is only audited under a true verdict".into());
    }
    eprintln!(
        "verify-beta: essinf beta = {:.10e}, rhs = {:.10e}, verdict = {}{}",
        cert.lhs,
        cert.rhs,
        cert.verdict,
        cert.level_gap
            .as_ref()
            .map(|g| format!(", level gap {} (c_N = {:.10e} vs {:.10e})", g.holds, g.c_n, g.bound))
            .unwrap_or_default()
    );
    emit_json(
        a.out.as_deref(),
        &VerifyReport {
            config: &ctx.cfg,
            sobolev_estimate: estimate,
            tau,
            certificate: cert,
            level_gap_note: note,
        },
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Section5Output {
    grid: Grid,
    sobolev_estimate: Option<SobolevEstimate>,
    report: crate::verify::Section5Report,
}

fn cmd_section5(a: Section5Args) -> Result<u8, Failure> {
    if a.m == 0 {
        return Err(Failure::config("-m must be at least 1"));
    }
    let grid = Grid::unit_box(a.dim, a.n).map_err(Failure::config)?;
    let form = StiffnessForm::assemble(&grid).map_err(Failure::config)?;
    let (sobolev, estimate) = sobolev_input(a.sobolev, &grid, &form, 2000)?;
    let report = section5_pipeline(a.eta, a.theta, &grid, &form, sobolev, a.m)?;
    let regime = report.regime_error();
    emit_json(
        a.out.as_deref(),
        &Section5Output {
            grid,
            sobolev_estimate: estimate,
            report,
        },
    )?;
    match regime {
        Some(e) => Err(e.into()),
        None => {
            eprintln!("section5: inner-branch regime attained");
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run(["nehari-lab", "--version"]), EXIT_OK);
        assert_eq!(run(["nehari-lab", "--help"]), EXIT_OK);
        assert_eq!(run(["nehari-lab", "frobnicate"]), EXIT_CONFIG);
    }

    #[test]
    fn range_parsing() {
        let ts = parse_range("1,100,3", "--r").unwrap();
        assert_eq!(ts.len(), 3);
        assert!((ts[1] - 10.0).abs() < 1e-12 && (ts[2] - 100.0).abs() < 1e-12);
        assert!(parse_range("1,0.5,3", "--r").is_err());
        assert!(parse_range("1,2", "--r").is_err());
    }

    #[test]
    fn sign_patterns_merge_runs() {
        let row = |t: f64, dh: f64| LandscapeRow { t, h: 0.0, dh };
        let rows = [row(1.0, 2.0), row(2.0, 1.0), row(3.0, 0.0), row(4.0, -1.0)];
        assert_eq!(sign_pattern(&rows, 3.0), "+0-");
    }

    #[test]
    fn missing_config_is_a_config_error() {
        assert_eq!(run(["nehari-lab", "solve", "--config", "/nonexistent/cfg.json"]), EXIT_CONFIG);
    }

    #[test]
    fn section5_regime_exit_codes() {
        let out = std::env::temp_dir().join(format!("nehari-s5-{}.json", std::process::id()));
        let out = out.to_str().unwrap();
        let args = |theta: Option<&str>| {
            let mut v = vec!["nehari-lab", "section5", "--eta", "1000", "--n", "127", "--out", out];
            if let Some(t) = theta {
                v.extend(["--theta", t]);
            }
            v.into_iter().map(String::from).collect::<Vec<_>>()
        };
        assert_eq!(run(args(Some("12"))), EXIT_OK);
        assert_eq!(run(args(None)), EXIT_PRECONDITION);
        let text = fs::read_to_string(out).unwrap();
        assert!(text.contains("not_attained"));
        let _ = fs::remove_file(out);
        // discrete Sobolev constant is undefined in one dimension
        let mut v = args(Some("12"));
        v.extend(["--sobolev".into(), "discrete".into()]);
        assert_eq!(run(v), EXIT_PRECONDITION);
    }
}
