//! Sampled verdicts on the structural hypotheses of a nonlinearity.

use serde::Serialize;

use super::{beta_eval, BetaError, BetaLadder, BetaLimit, Nonlinearity};
use crate::grid::Grid;
use crate::spectrum::{node_sample, Spectrum};

/// Relative size of a difference treated as a floating-point tie.
const TIE: f64 = 1e-12;
/// Relative decrease beyond which a monotonicity violation is real.
const VIOLATION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SampleLattice {
    /// Positive magnitudes; both signs are sampled.
    pub magnitudes: Vec<f64>,
    pub nodes: usize,
}

impl SampleLattice {
    pub fn log_spaced(lo: f64, hi: f64, count: usize, nodes: usize) -> Self {
        let (a, b) = (lo.log10(), hi.log10());
        let magnitudes = (0..count)
            .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1).max(1) as f64))
            .collect();
        Self { magnitudes, nodes }
    }

    pub fn standard() -> Self {
        Self::log_spaced(1e-6, 1e6, 64, 16)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Two samples `(t1, g1)`, `(t2, g2)` of a quantity that should increase.
    Pair {
        x: Vec<f64>,
        t1: f64,
        t2: f64,
        g1: f64,
        g2: f64,
    },
    Point { x: Vec<f64>, t: f64, value: f64 },
    /// `None` stands for `+∞`.
    Eigenvalue { label: String, value: Option<f64> },
    Coefficient { label: String, x: Vec<f64>, value: f64 },
    Limit { x: Vec<f64>, beta: BetaLimit },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Tightest margin seen (meaning depends on the check).
    pub margin: Option<f64>,
    pub note: Option<String>,
}

impl Check {
    fn pass(margin: Option<f64>) -> Self {
        Self {
            verdict: Verdict::Pass,
            witness: None,
            margin,
            note: None,
        }
    }

    fn fail(witness: Witness) -> Self {
        Self {
            verdict: Verdict::Fail,
            witness: Some(witness),
            margin: None,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Worst of two verdicts; the first failing witness is kept.
    fn and(self, other: Check) -> Check {
        use Verdict::*;
        match (self.verdict, other.verdict) {
            (Fail, _) => self,
            (_, Fail) => other,
            (Undecided, _) => self,
            (_, Undecided) => other,
            _ => {
                let margin = match (self.margin, other.margin) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                Check { margin, ..self }
            }
        }
    }
}

/// Eigenvalues the spectral hypotheses were judged with. `None` stands for
/// `+∞` (no positive eigenvalue because the weight has no positive part).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralInputs {
    pub m: usize,
    pub lambda_m_eta: Option<f64>,
    pub lambda_1_eta: Option<f64>,
    pub lambda_1_alpha: Option<f64>,
    pub lambda_m_alpha: Option<f64>,
    /// `α⁺ ≡ 0` on the grid, so `λ_1(α) = +∞` by convention.
    pub alpha_infinite_convention: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub model: String,
    /// `f/|t|` increasing on each half-line and `η⁺ ≢ 0`.
    pub f1_ok: Check,
    /// The `α⁺ ≢ 0` clause of the monotonicity hypothesis, read literally.
    pub f1_alpha_clause: Check,
    pub f2_ok: Check,
    pub f1p_ok: Check,
    pub f2p_ok: Check,
    pub ff_holds: Check,
    /// `½ f t − F` nondecreasing in `|t|`.
    pub integrand_monotone: Check,
    /// `F/t²` nondecreasing in `|t|`.
    pub ratio_monotone: Check,
    /// `f/t − 2F/t² > 0`; margin is the smallest sampled value.
    pub strict_gap: Check,
    pub spectral: SpectralInputs,
}

/// Checks that `g` is nondecreasing along the samples. `strict` also fails a
/// sequence with no increase at all.
fn monotone(x: &[f64], samples: &[(f64, f64)], strict: bool) -> Check {
    let mut worst: Option<(f64, usize)> = None;
    let mut any_rise = false;
    for (k, w) in samples.windows(2).enumerate() {
        let ((t1, g1), (t2, g2)) = (w[0], w[1]);
        if !(g1.is_finite() && g2.is_finite()) {
            let (t, value) = if g1.is_finite() { (t2, g2) } else { (t1, g1) };
            return Check::fail(Witness::Point { x: x.to_vec(), t, value });
        }
        let scale = g1.abs().max(g2.abs()).max(f64::MIN_POSITIVE);
        let rel = (g2 - g1) / scale;
        if rel > TIE {
            any_rise = true;
        }
        if rel < -VIOLATION {
            return Check::fail(Witness::Pair {
                x: x.to_vec(),
                t1,
                t2,
                g1,
                g2,
            });
        }
        if rel < -TIE && worst.is_none_or(|(r, _)| rel < r) {
            worst = Some((rel, k));
        }
    }
    if let Some((rel, k)) = worst {
        let ((t1, g1), (t2, g2)) = (samples[k], samples[k + 1]);
        return Check {
            verdict: Verdict::Undecided,
            witness: Some(Witness::Pair {
                x: x.to_vec(),
                t1,
                t2,
                g1,
                g2,
            }),
            margin: Some(rel),
            note: Some("decrease within the undecided band".into()),
        };
    }
    if strict && !any_rise && samples.len() >= 2 {
        let ((t1, g1), (t2, g2)) = (samples[0], samples[samples.len() - 1]);
        return Check::fail(Witness::Pair {
            x: x.to_vec(),
            t1,
            t2,
            g1,
            g2,
        })
        .with_note("constant on a half-line");
    }
    Check::pass(None)
}

/// The `k`-th distinct eigenvalue.
fn lambda(s: Option<&Spectrum>, k: usize) -> Result<Option<f64>, String> {
    match s {
        None => Ok(None),
        Some(s) if s.clusters.len() >= k => Ok(Some(s.clusters[k - 1].value)),
        Some(s) => Err(format!(
            "only {} distinct eigenvalues computed, need {k}",
            s.clusters.len()
        )),
    }
}

fn eig_witness(label: &str, v: Option<f64>) -> Witness {
    Witness::Eigenvalue {
        label: label.into(),
        value: v,
    }
}

/// `lo < 1 < hi` with `None` meaning `+∞`.
fn bracket_one(lo: (&str, Result<Option<f64>, String>), hi: (&str, Result<Option<f64>, String>)) -> Check {
    let undecided = |msg: String| Check {
        verdict: Verdict::Undecided,
        witness: None,
        margin: None,
        note: Some(msg),
    };
    let lo_v = match lo.1 {
        Ok(v) => v,
        Err(e) => return undecided(e),
    };
    let hi_v = match hi.1 {
        Ok(v) => v,
        Err(e) => return undecided(e),
    };
    match lo_v {
        None => return Check::fail(eig_witness(lo.0, None)),
        Some(v) if v >= 1.0 => return Check::fail(eig_witness(lo.0, Some(v))),
        _ => {}
    }
    if let Some(v) = hi_v {
        if v <= 1.0 {
            return Check::fail(eig_witness(hi.0, Some(v)));
        }
    }
    let lo_gap = 1.0 - lo_v.unwrap();
    let margin = hi_v.map_or(lo_gap, |h| lo_gap.min(h - 1.0));
    Check::pass(Some(margin))
}

/// Sampled checks of the hypotheses. `s_alpha`/`s_eta` are the weighted
/// spectra of `α` and `η` (`None` when the weight has no positive part);
/// `m` is the spectral index of the problem.
pub fn check_hypotheses(
    model: &dyn Nonlinearity,
    grid: &Grid,
    s_alpha: Option<&Spectrum>,
    s_eta: Option<&Spectrum>,
    m: usize,
    lattice: &SampleLattice,
) -> HypothesisReport {
    let nodes = node_sample(grid, lattice.nodes.max(1));
    let mut pos: Vec<f64> = lattice.magnitudes.clone();
    pos.sort_by(|a, b| a.total_cmp(b));

    let mut f1 = Check::pass(None);
    let mut integrand = Check::pass(None);
    let mut ratio = Check::pass(None);
    let mut gap = Check::pass(None);
    let mut f1p = Check::pass(None);
    let mut gap_min = f64::INFINITY;
    let mut ratio_sup: f64 = 0.0;
    for &i in &nodes {
        let x = grid.point(i);
        for sign in [1.0, -1.0] {
            let ts: Vec<f64> = pos.iter().map(|s| sign * s).collect();
            // as functions of |t|: f/|t| is increasing for t > 0 and
            // decreasing in |t| for t < 0
            let f_over: Vec<(f64, f64)> = ts
                .iter()
                .map(|&t| (t, sign * model.f(x, t) / t.abs()))
                .collect();
            f1 = f1.and(monotone(x, &f_over, true));
            let b: Vec<(f64, f64)> = ts.iter().map(|&t| (t, model.nehari_integrand(x, t))).collect();
            integrand = integrand.and(monotone(x, &b, false));
            let r: Vec<(f64, f64)> = ts
                .iter()
                .map(|&t| (t, model.primitive(x, t) / (t * t)))
                .collect();
            ratio = ratio.and(monotone(x, &r, false));
            for (&(t, rv), &(_, bv)) in r.iter().zip(&b) {
                if !rv.is_finite() {
                    f1p = f1p.and(Check::fail(Witness::Point {
                        x: x.to_vec(),
                        t,
                        value: rv,
                    }));
                } else {
                    ratio_sup = ratio_sup.max(rv.abs());
                }
                let g = 2.0 * bv / (t * t);
                if g.is_nan() || g <= 0.0 {
                    gap = gap.and(Check::fail(Witness::Point {
                        x: x.to_vec(),
                        t,
                        value: g,
                    }));
                } else {
                    gap_min = gap_min.min(g);
                }
            }
        }
    }
    if gap.verdict == Verdict::Pass {
        gap.margin = Some(gap_min);
    }
    if f1p.verdict == Verdict::Pass {
        f1p.margin = Some(ratio_sup);
    }

    let all_nodes = 0..grid.len();
    let alpha_pos = all_nodes.clone().any(|i| model.alpha(grid.point(i)) > 0.0);
    let eta_pos = all_nodes.clone().any(|i| model.eta(grid.point(i)) > 0.0);
    let x0 = grid.point(0).to_vec();
    if !eta_pos {
        f1 = f1.and(Check::fail(Witness::Coefficient {
            label: "eta".into(),
            x: x0.clone(),
            value: model.eta(&x0),
        }));
    }
    let f1_alpha_clause = if alpha_pos {
        Check::pass(None)
    } else {
        Check::fail(Witness::Coefficient {
            label: "alpha".into(),
            x: x0.clone(),
            value: model.alpha(&x0),
        })
        .with_note("alpha has no positive part")
    };

    let m = m.max(1);
    let s_alpha = if alpha_pos { s_alpha } else { None };
    let s_eta = if eta_pos { s_eta } else { None };
    let spectral = SpectralInputs {
        m,
        lambda_m_eta: lambda(s_eta, m).ok().flatten(),
        lambda_1_eta: lambda(s_eta, 1).ok().flatten(),
        lambda_1_alpha: lambda(s_alpha, 1).ok().flatten(),
        lambda_m_alpha: lambda(s_alpha, m).ok().flatten(),
        alpha_infinite_convention: !alpha_pos,
    };
    let mut f2 = bracket_one(("lambda_m(eta)", lambda(s_eta, m)), ("lambda_1(alpha)", lambda(s_alpha, 1)));
    if !alpha_pos && f2.verdict == Verdict::Pass {
        f2 = f2.with_note("lambda_1(alpha) = +inf by convention");
    }
    let f2p = bracket_one(("lambda_m(alpha)", lambda(s_alpha, m)), ("lambda_1(eta)", lambda(s_eta, 1)));

    let ff_nodes = if model.is_autonomous() { vec![0] } else { nodes.clone() };
    let ladder = BetaLadder::default();
    let mut ff = Check::pass(None);
    for &i in &ff_nodes {
        let x = grid.point(i);
        let c = match beta_eval(model, x, &ladder) {
            Ok(BetaLimit::PosInfinity) => Check::pass(None),
            Ok(beta) => Check::fail(Witness::Limit { x: x.to_vec(), beta }),
            Err(BetaError::Undecided { reason, .. }) => Check {
                verdict: Verdict::Undecided,
                witness: None,
                margin: None,
                note: Some(reason),
            },
            Err(e) => Check {
                verdict: Verdict::Undecided,
                witness: None,
                margin: None,
                note: Some(e.to_string()),
            },
        };
        ff = ff.and(c);
    }

    HypothesisReport {
        model: model.name(),
        f1_ok: f1,
        f1_alpha_clause,
        f2_ok: f2,
        f1p_ok: f1p,
        f2p_ok: f2p,
        ff_holds: ff,
        integrand_monotone: integrand,
        ratio_monotone: ratio,
        strict_gap: gap,
        spectral,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoerciveModel, ExprModel, LinearModel, RationalModel, Section5Model};
    use crate::spectrum::weighted_eigs;
    use crate::stiffness::StiffnessForm;

    struct Setup {
        grid: Grid,
        form: StiffnessForm,
    }

    fn setup() -> Setup {
        let grid = Grid::unit_interval(63).unwrap();
        let form = StiffnessForm::assemble(&grid).unwrap();
        Setup { grid, form }
    }

    fn report(model: &dyn Nonlinearity, s: &Setup, m: usize) -> HypothesisReport {
        let alpha = s.grid.sample(|x| model.alpha(x));
        let eta = s.grid.sample(|x| model.eta(x));
        let sa = weighted_eigs(&s.form, &alpha, m).ok();
        let se = weighted_eigs(&s.form, &eta, m).ok();
        check_hypotheses(model, &s.grid, sa.as_ref(), se.as_ref(), m, &SampleLattice::standard())
    }

    #[test]
    fn section5_report() {
        let s = setup();
        let m = Section5Model::new(12.0, 1000.0).unwrap();
        let r = report(&m, &s, 1);
        assert_eq!(r.f1_ok.verdict, Verdict::Pass, "{:?}", r.f1_ok);
        assert_eq!(r.f2_ok.verdict, Verdict::Pass, "{:?}", r.f2_ok);
        assert!(r.spectral.alpha_infinite_convention);
        assert!(r.spectral.lambda_1_alpha.is_none());
        let l1 = r.spectral.lambda_1_eta.unwrap();
        assert!((l1 - std::f64::consts::PI.powi(2) / 1000.0).abs() < 1e-4);
        assert_eq!(r.f1_alpha_clause.verdict, Verdict::Fail);
        assert!(r.f1_alpha_clause.witness.is_some());
        assert_eq!(r.ff_holds.verdict, Verdict::Fail);
        assert!(matches!(r.ff_holds.witness, Some(Witness::Limit { beta: BetaLimit::Finite { .. }, .. })));
        assert_eq!(r.f2p_ok.verdict, Verdict::Fail);
        assert_eq!(r.integrand_monotone.verdict, Verdict::Pass);
        assert_eq!(r.ratio_monotone.verdict, Verdict::Pass);
        assert_eq!(r.strict_gap.verdict, Verdict::Pass);
        assert!(r.strict_gap.margin.unwrap() > 0.0);
    }

    #[test]
    fn rational_between_first_two_eigenvalues() {
        let s = setup();
        // λ_1 ≈ π², λ_2 ≈ 4π²
        let m = RationalModel::new(0.0, 20.0).unwrap();
        let r = report(&m, &s, 1);
        assert_eq!(r.f1_ok.verdict, Verdict::Pass);
        assert_eq!(r.f2_ok.verdict, Verdict::Pass);
        assert_eq!(r.ff_holds.verdict, Verdict::Pass);
        assert_eq!(r.integrand_monotone.verdict, Verdict::Pass);
        assert_eq!(r.strict_gap.verdict, Verdict::Pass);
    }

    #[test]
    fn coercive_regime() {
        let s = setup();
        let m = CoerciveModel::new(20.0, 5.0).unwrap();
        let r = report(&m, &s, 1);
        assert_eq!(r.f2p_ok.verdict, Verdict::Pass, "{:?}", r.f2p_ok);
        assert_eq!(r.f1p_ok.verdict, Verdict::Pass);
        assert!(r.f1p_ok.margin.unwrap() <= 10.0 + 1e-9);
        // f/|t| decreases here
        assert_eq!(r.f1_ok.verdict, Verdict::Fail);
        assert!(matches!(r.f1_ok.witness, Some(Witness::Pair { .. })));
        assert_eq!(r.f2_ok.verdict, Verdict::Fail);
        assert_eq!(r.ff_holds.verdict, Verdict::Fail);
    }

    #[test]
    fn linear_model_is_not_strict() {
        let s = setup();
        let m = LinearModel::new(5.0).unwrap();
        let r = report(&m, &s, 1);
        assert_eq!(r.f1_ok.verdict, Verdict::Fail);
        assert_eq!(r.f1_ok.note.as_deref(), Some("constant on a half-line"));
        assert_eq!(r.strict_gap.verdict, Verdict::Fail);
        assert_eq!(r.ff_holds.verdict, Verdict::Fail);
    }

    #[test]
    fn violations_inside_the_band_are_undecided() {
        let x = [0.5];
        let samples = [(1.0, 1.0), (2.0, 1.0 - 1e-10), (3.0, 2.0)];
        let c = monotone(&x, &samples, true);
        assert_eq!(c.verdict, Verdict::Undecided);
        assert!((c.margin.unwrap() + 1e-10).abs() < 1e-12);
        let big = [(1.0, 1.0), (2.0, 0.9)];
        assert_eq!(monotone(&x, &big, true).verdict, Verdict::Fail);
        let ties = [(1.0, 1.0), (2.0, 1.0 - 1e-14), (3.0, 2.0)];
        assert_eq!(monotone(&x, &ties, true).verdict, Verdict::Pass);
    }

    #[test]
    fn piecewise_violation_is_caught() {
        // f/|t| dips between 1.5 and 2.5
        let s = setup();
        let m = ExprModel::parse("t*abs(t) - 5*t*exp(-(abs(t)-3)^2/2)", None, None, None).unwrap();
        let r = report(&m, &s, 1);
        assert_eq!(r.f1_ok.verdict, Verdict::Fail);
    }

    #[test]
    fn short_spectrum_is_undecided() {
        let s = setup();
        let m = RationalModel::new(0.0, 20.0).unwrap();
        let eta = s.grid.constant(20.0);
        let se = weighted_eigs(&s.form, &eta, 1).unwrap();
        let r = check_hypotheses(&m, &s.grid, None, Some(&se), 2, &SampleLattice::standard());
        assert_eq!(r.f2_ok.verdict, Verdict::Undecided);
    }
}
