//! The energy `I(u) = ½‖u‖² − ∫F(x, u)`, its fibers `t ↦ I(tu)`, the Nehari
//! projection and the reduced functional `Ψ(v) = I(t_v v)` on the unit sphere.

use serde::Serialize;
use thiserror::Error;

use crate::grid::{Grid, GridField};
use crate::model::Nonlinearity;
use crate::stiffness::StiffnessForm;

pub const DEFAULT_FIBER_TOL: f64 = 1e-12;
/// Bracketing gives up beyond `[1/T_MAX, T_MAX]`.
const T_MAX: f64 = 1e12;
const MAX_ROOT_ITER: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NehariError {
    #[error("field is outside the admissible set (delta = {delta:e})")]
    NotInA { delta: f64 },
    #[error("no sign change of the fiber slope up to t = {t:e} (phi = {phi:e})")]
    BracketOverflow { t: f64, phi: f64 },
    #[error("field length {found} does not match the grid ({expected} nodes)")]
    Length { expected: usize, found: usize },
}

/// `∫ηu² − ‖u‖²`; positive exactly on the admissible set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityMargin {
    pub norm_sq: f64,
    pub weighted: f64,
    pub delta: f64,
    pub in_a: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberingResult {
    pub t_u: f64,
    /// `I(t_u u)`.
    pub value: f64,
    /// `|h_u′(t_u)| / ‖u‖²`.
    pub slope_residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// Nodal field `r` with `Σ r_i v_i · h^N = I′(u)v`.
    pub field: GridField,
    /// Riesz representative in the energy inner product.
    pub riesz: GridField,
    /// `sup_{‖v‖=1} I′(u)v`.
    pub dual_norm: f64,
    /// Euclidean norm of `field`.
    pub euclid_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiGradient {
    pub value: f64,
    pub t: f64,
    /// Tangent Riesz gradient of `Ψ` at `v`.
    pub tangent: GridField,
    /// `‖tangent‖`, the dual norm of `Ψ′(v)`.
    pub dual_norm: f64,
    /// Dual norm of `I′(t_v v)`.
    pub energy_residual: f64,
    pub fiber: FiberingResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandscapeRow {
    pub t: f64,
    pub h: f64,
    pub dh: f64,
}

/// Energy functional of a model on a grid.
#[derive(Debug, Clone, Copy)]
pub struct Functional<'a> {
    grid: &'a Grid,
    form: &'a StiffnessForm,
    model: &'a dyn Nonlinearity,
}

impl<'a> Functional<'a> {
    pub fn new(grid: &'a Grid, form: &'a StiffnessForm, model: &'a dyn Nonlinearity) -> Self {
        Self { grid, form, model }
    }

    pub fn grid(&self) -> &'a Grid {
        self.grid
    }

    pub fn form(&self) -> &'a StiffnessForm {
        self.form
    }

    pub fn model(&self) -> &'a dyn Nonlinearity {
        self.model
    }

    fn check(&self, u: &[f64]) -> Result<(), NehariError> {
        if u.len() != self.grid.len() {
            return Err(NehariError::Length {
                expected: self.grid.len(),
                found: u.len(),
            });
        }
        Ok(())
    }

    fn nodal_sum(&self, u: &[f64], g: impl Fn(&[f64], f64) -> f64) -> f64 {
        let s: f64 = u
            .iter()
            .enumerate()
            .map(|(i, &ui)| g(self.grid.point(i), ui))
            .sum();
        s * self.grid.cell_volume()
    }

    /// `∫F(x, u)`.
    pub fn primitive_integral(&self, u: &[f64]) -> f64 {
        self.nodal_sum(u, |x, ui| self.model.primitive(x, ui))
    }

    /// `∫f(x, u)u`.
    pub fn nonlinear_pairing(&self, u: &[f64]) -> f64 {
        self.nodal_sum(u, |x, ui| self.model.f(x, ui) * ui)
    }

    /// `∫[½ f(x, u)u − F(x, u)]`, equal to `I(u)` on the Nehari set.
    pub fn nehari_integral(&self, u: &[f64]) -> f64 {
        self.nodal_sum(u, |x, ui| self.model.nehari_integrand(x, ui))
    }

    /// `∫ηu²`.
    pub fn eta_weighted(&self, u: &[f64]) -> f64 {
        self.nodal_sum(u, |x, ui| self.model.eta(x) * ui * ui)
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        0.5 * self.form.q(u, u) - self.primitive_integral(u)
    }

    pub fn gradient(&self, u: &[f64]) -> Gradient {
        let vol = self.grid.cell_volume();
        let au = self.form.apply(u);
        let r: Vec<f64> = au
            .iter()
            .enumerate()
            .map(|(i, a)| a - vol * self.model.f(self.grid.point(i), u[i]))
            .collect();
        let riesz = self.form.solve(&r);
        let dual = r.iter().zip(&riesz).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        let field: Vec<f64> = r.iter().map(|v| v / vol).collect();
        let euclid_norm = field.iter().map(|v| v * v).sum::<f64>().sqrt();
        Gradient {
            field: field.into(),
            riesz: riesz.into(),
            dual_norm: dual,
            euclid_norm,
        }
    }

    /// `I′(u)v`.
    pub fn directional(&self, u: &[f64], v: &[f64]) -> f64 {
        let vol = self.grid.cell_volume();
        let pair: f64 = u
            .iter()
            .zip(v)
            .enumerate()
            .map(|(i, (ui, vi))| self.model.f(self.grid.point(i), *ui) * vi)
            .sum();
        self.form.q(u, v) - vol * pair
    }

    pub fn admissibility(&self, u: &[f64]) -> AdmissibilityMargin {
        let norm_sq = self.form.q(u, u);
        let weighted = self.eta_weighted(u);
        let delta = weighted - norm_sq;
        AdmissibilityMargin {
            norm_sq,
            weighted,
            delta,
            in_a: delta > 0.0,
        }
    }

    /// `φ(t) = h_u′(t)/t = ‖u‖² − (1/t)∫_{[u≠0]} f(x, tu)u`.
    pub fn fiber_slope(&self, u: &[f64], norm_sq: f64, t: f64) -> f64 {
        let s = self.nodal_sum(u, |x, ui| {
            if ui == 0.0 {
                0.0
            } else {
                self.model.f(x, t * ui) * ui
            }
        });
        norm_sq - s / t
    }

    /// Finds the unique maximizer `t_u` of `t ↦ I(tu)`.
    pub fn project_fiber(&self, u: &[f64], tol: f64) -> Result<FiberingResult, NehariError> {
        self.check(u)?;
        let adm = self.admissibility(u);
        if !adm.in_a {
            return Err(NehariError::NotInA { delta: adm.delta });
        }
        let ns = adm.norm_sq;
        let phi = |t: f64| self.fiber_slope(u, ns, t);

        let mut t = 1.0;
        let mut p = phi(t);
        let (mut lo, mut plo, mut hi, mut phi_hi);
        if p > 0.0 {
            lo = t;
            plo = p;
            loop {
                t *= 2.0;
                p = phi(t);
                if p <= 0.0 {
                    break;
                }
                lo = t;
                plo = p;
                if t > T_MAX {
                    return Err(NehariError::BracketOverflow { t, phi: p });
                }
            }
            hi = t;
            phi_hi = p;
        } else {
            hi = t;
            phi_hi = p;
            loop {
                t *= 0.5;
                p = phi(t);
                if p > 0.0 {
                    break;
                }
                hi = t;
                phi_hi = p;
                if t < 1.0 / T_MAX {
                    return Err(NehariError::BracketOverflow { t, phi: p });
                }
            }
            lo = t;
            plo = p;
        }
        let bracket = (lo, hi);

        // Illinois variant of regula falsi
        let mut side = 0i8;
        let mut iterations = 0;
        let (mut best_t, mut best_p) = if plo.abs() < phi_hi.abs() { (lo, plo) } else { (hi, phi_hi) };
        if phi_hi == 0.0 {
            best_t = hi;
            best_p = 0.0;
        }
        while iterations < MAX_ROOT_ITER && best_p != 0.0 {
            iterations += 1;
            let mut c = (lo * phi_hi - hi * plo) / (phi_hi - plo);
            if !(c > lo && c < hi) {
                c = 0.5 * (lo + hi);
            }
            let pc = phi(c);
            if pc.abs() < best_p.abs() {
                best_t = c;
                best_p = pc;
            }
            if pc > 0.0 {
                lo = c;
                plo = pc;
                if side == 1 {
                    phi_hi *= 0.5;
                }
                side = 1;
            } else {
                hi = c;
                phi_hi = pc;
                if side == -1 {
                    plo *= 0.5;
                }
                side = -1;
            }
            let slope = best_t * best_p.abs() / ns;
            if slope <= tol * (1.0 + best_t) || hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        let w: Vec<f64> = u.iter().map(|x| best_t * x).collect();
        Ok(FiberingResult {
            t_u: best_t,
            value: self.energy(&w),
            slope_residual: best_t * best_p.abs() / ns,
            bracket,
            iterations,
        })
    }

    /// `t_u u`, the point of the Nehari set on the ray of `u`.
    pub fn nehari_map(&self, u: &[f64], tol: f64) -> Result<(GridField, FiberingResult), NehariError> {
        let fib = self.project_fiber(u, tol)?;
        let w: Vec<f64> = u.iter().map(|x| fib.t_u * x).collect();
        Ok((w.into(), fib))
    }

    /// `u/‖u‖`, the inverse of the Nehari map on the unit sphere.
    pub fn unit(&self, u: &[f64]) -> GridField {
        let n = self.form.norm(u);
        u.iter().map(|x| x / n).collect::<Vec<_>>().into()
    }

    /// `Ψ(v) = I(t_v v)`.
    pub fn psi(&self, v: &[f64], tol: f64) -> Result<FiberingResult, NehariError> {
        self.project_fiber(v, tol)
    }

    /// `Ψ(v)` and its tangent gradient `t_v (g − q(v, g) v)` with `g` the
    /// Riesz representative of `I′(t_v v)`. `v` must be unit.
    pub fn psi_grad(&self, v: &[f64], tol: f64) -> Result<PsiGradient, NehariError> {
        let fib = self.project_fiber(v, tol)?;
        let t = fib.t_u;
        let w: Vec<f64> = v.iter().map(|x| t * x).collect();
        let g = self.gradient(&w);
        let along = self.form.q(v, &g.riesz);
        let tangent: Vec<f64> = g
            .riesz
            .iter()
            .zip(v)
            .map(|(gi, vi)| t * (gi - along * vi))
            .collect();
        let dual_norm = self.form.norm(&tangent);
        Ok(PsiGradient {
            value: fib.value,
            t,
            tangent: tangent.into(),
            dual_norm,
            energy_residual: g.dual_norm,
            fiber: fib,
        })
    }

    /// Samples of `h_u(t) = I(tu)` and `h_u′(t)`.
    pub fn landscape(&self, u: &[f64], ts: &[f64]) -> Vec<LandscapeRow> {
        let ns = self.form.q(u, u);
        ts.iter()
            .map(|&t| {
                let w: Vec<f64> = u.iter().map(|x| t * x).collect();
                let dh = if t == 0.0 { 0.0 } else { t * self.fiber_slope(u, ns, t) };
                LandscapeRow {
                    t,
                    h: self.energy(&w),
                    dh,
                }
            })
            .collect()
    }
}

/// Geometric `[lo, hi]` sample of `k` points.
pub fn geometric_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (k - 1) as f64;
    (0..k).map(|i| lo * (r * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearModel, RationalModel, Section5Model};
    use crate::spectrum::weighted_eigs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    struct Fixture {
        grid: Grid,
        form: StiffnessForm,
    }

    fn fixture(n: usize) -> Fixture {
        let grid = Grid::unit_interval(n).unwrap();
        let form = StiffnessForm::assemble(&grid).unwrap();
        Fixture { grid, form }
    }

    fn e1(fx: &Fixture, eta: f64) -> GridField {
        let s = weighted_eigs(&fx.form, &fx.grid.constant(eta), 1).unwrap();
        s.first().vector.clone()
    }

    fn cube_integral() -> f64 {
        8.0 * 2f64.sqrt() / (3.0 * PI.powi(4))
    }

    #[test]
    fn section5_fiber_on_first_eigenfunction() {
        let fx = fixture(1023);
        let m = Section5Model::new(12.0, 1000.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let u = e1(&fx, 1000.0);
        let fib = f.project_fiber(&u, DEFAULT_FIBER_TOL).unwrap();
        let expected = 1.0 / cube_integral();
        assert!((fib.t_u - expected).abs() / expected < 1e-4, "{}", fib.t_u);
        assert!(fib.t_u * u.sup_norm() <= 12.0);
        assert!((fib.value - expected * expected / 6.0).abs() / fib.value < 2e-4);
        assert!(fib.slope_residual <= DEFAULT_FIBER_TOL * (1.0 + fib.t_u));
        // the discrete identity holds exactly: t_u = ‖u‖²/∫|u|³
        let cube = fx.grid.cell_volume() * u.iter().map(|x| x.abs().powi(3)).sum::<f64>();
        assert!((fib.t_u - 1.0 / cube).abs() <= 1e-10 * fib.t_u);
        // scaling
        let u2 = u.scaled(2.0);
        let fib2 = f.project_fiber(&u2, DEFAULT_FIBER_TOL).unwrap();
        assert!((fib2.t_u * 2.0 - fib.t_u).abs() <= 1e-9 * fib.t_u);
    }

    #[test]
    fn energy_on_inner_branch() {
        let fx = fixture(255);
        let m = Section5Model::new(12.0, 1000.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let u = e1(&fx, 1000.0);
        let cube = fx.grid.cell_volume() * u.iter().map(|x| x.abs().powi(3)).sum::<f64>();
        for t in [0.5, 3.0, 20.0] {
            let i = f.energy(&u.scaled(t));
            let exact = t * t / 2.0 - t.powi(3) / 3.0 * cube;
            assert!((i - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        }
        assert_eq!(f.energy(&fx.grid.zeros()), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let fx = fixture(63);
        let m = RationalModel::new(0.5, 40.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let u: Vec<f64> = (0..fx.grid.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..fx.grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let eps = 1e-5;
            let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
            let fd = (f.energy(&up) - f.energy(&um)) / (2.0 * eps);
            let exact = f.directional(&u, &v);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
            let g = f.gradient(&u);
            let paired = fx.grid.cell_volume() * g.field.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            assert!((paired - exact).abs() <= 1e-9 * exact.abs().max(1.0));
            assert!((fx.form.q(&g.riesz, &v) - exact).abs() <= 1e-8 * exact.abs().max(1.0));
        }
        let zero = f.gradient(&fx.grid.zeros());
        assert_eq!(zero.dual_norm, 0.0);
    }

    #[test]
    fn linear_gradient_at_eigenfunction() {
        let fx = fixture(63);
        let lambda = weighted_eigs(&fx.form, &fx.grid.constant(1.0), 1).unwrap().first().value;
        let m = LinearModel::new(lambda).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let e = e1(&fx, 1.0);
        assert!(f.gradient(&e).dual_norm < 1e-9);
        let m2 = LinearModel::new(0.5 * lambda).unwrap();
        let f2 = Functional::new(&fx.grid, &fx.form, &m2);
        let v = fx.grid.sample(|x| x[0] * (1.0 - x[0]));
        let expect = 0.5 * fx.form.q(&e, &v);
        assert!((f2.directional(&e, &v) - expect).abs() < 1e-9);
    }

    #[test]
    fn admissibility_examples() {
        let fx = fixture(511);
        let m = Section5Model::new(12.0, 1000.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let u = e1(&fx, 1.0);
        let a = f.admissibility(&u);
        assert!(a.in_a);
        assert!((a.delta - (1000.0 / (PI * PI) - 1.0)).abs() < 1e-3 * a.delta);
        let low = LinearModel::new(5.0).unwrap();
        let fl = Functional::new(&fx.grid, &fx.form, &low);
        let b = fl.admissibility(&u);
        assert!(!b.in_a);
        assert!((b.delta - (5.0 / (PI * PI) - 1.0)).abs() < 1e-4);
        let z = f.admissibility(&fx.grid.zeros());
        assert_eq!((z.delta, z.in_a), (0.0, false));
        assert_eq!(
            fl.project_fiber(&u, DEFAULT_FIBER_TOL).unwrap_err(),
            NehariError::NotInA { delta: b.delta }
        );
    }

    #[test]
    fn linear_fiber_has_no_root() {
        let fx = fixture(31);
        let m = LinearModel::new(100.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let u = e1(&fx, 1.0);
        assert!(matches!(
            f.project_fiber(&u, DEFAULT_FIBER_TOL),
            Err(NehariError::BracketOverflow { .. })
        ));
    }

    #[test]
    fn scaling_law_on_random_fields() {
        let fx = fixture(63);
        let m = RationalModel::new(0.0, 200.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut tested = 0;
        while tested < 100 {
            let u: Vec<f64> = (0..fx.grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = fx.grid.sample(|x| (PI * x[0]).sin()).axpy(0.05, &u);
            if !f.admissibility(&u).in_a {
                continue;
            }
            tested += 1;
            let base = f.project_fiber(&u, DEFAULT_FIBER_TOL).unwrap().t_u;
            for s in [0.1, 0.5, 2.0, 10.0] {
                let ts = f.project_fiber(&u.scaled(s), DEFAULT_FIBER_TOL).unwrap().t_u;
                assert!((ts * s - base).abs() <= 1e-9 * base, "s={s}: {} vs {base}", ts * s);
            }
        }
    }

    #[test]
    fn nehari_point_properties() {
        let fx = fixture(127);
        let m = Section5Model::new(1.0, 200.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let v = f.unit(&fx.grid.sample(|x| (PI * x[0]).sin() + 0.3 * (2.0 * PI * x[0]).sin()));
        let (w, fib) = f.nehari_map(&v, DEFAULT_FIBER_TOL).unwrap();
        let ns = fx.form.q(&w, &w);
        assert!((ns - f.nonlinear_pairing(&w)).abs() <= 1e-10 * ns);
        assert!(f.admissibility(&w).delta > 0.0);
        assert!((f.energy(&w) - f.nehari_integral(&w)).abs() <= 1e-8 * f.energy(&w));
        assert!(fib.value > 0.0);
        let back = f.unit(&w);
        assert!(back.iter().zip(v.iter()).all(|(a, b)| (a - b).abs() <= 1e-12));
        let again = f.project_fiber(&w, DEFAULT_FIBER_TOL).unwrap();
        assert!((again.t_u - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn psi_is_the_fiber_maximum() {
        let fx = fixture(127);
        let m = Section5Model::new(1.0, 200.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let v = f.unit(&fx.grid.sample(|x| x[0] * (1.0 - x[0]).powi(2)));
        let psi = f.psi(&v, DEFAULT_FIBER_TOL).unwrap();
        let ts: Vec<f64> = (0..=20000).map(|k| psi.t_u * (0.5 + 1.5 * k as f64 / 20000.0)).collect();
        let best = ts
            .iter()
            .map(|&t| f.energy(&v.scaled(t)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - psi.value).abs() <= 1e-6 * psi.value);
        assert!(best <= psi.value * (1.0 + 1e-12));
    }

    #[test]
    fn psi_gradient_matches_finite_differences() {
        let fx = fixture(127);
        let m = Section5Model::new(1.0, 200.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let v = f.unit(&fx.grid.sample(|x| (PI * x[0]).sin() + 0.2 * x[0]));
        let pg = f.psi_grad(&v, DEFAULT_FIBER_TOL).unwrap();
        assert!(fx.form.q(&pg.tangent, &v).abs() <= 1e-10 * pg.dual_norm);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let raw: Vec<f64> = (0..fx.grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let smooth = fx.form.solve(&raw);
            let c = fx.form.q(&smooth, &v);
            let w: Vec<f64> = smooth.iter().zip(v.iter()).map(|(a, b)| a - c * b).collect();
            let w = f.unit(&w);
            let eps = 1e-4;
            let curve = |s: f64| f.unit(&v.axpy(s, &w));
            let fd = (f.psi(&curve(eps), 1e-14).unwrap().value - f.psi(&curve(-eps), 1e-14).unwrap().value)
                / (2.0 * eps);
            let exact = fx.form.q(&pg.tangent, &w);
            assert!(
                (fd - exact).abs() <= 1e-5 * exact.abs().max(pg.dual_norm),
                "{fd} vs {exact}"
            );
        }
    }

    #[test]
    fn landscape_sign_pattern() {
        let fx = fixture(63);
        let m = Section5Model::new(1.0, 200.0).unwrap();
        let f = Functional::new(&fx.grid, &fx.form, &m);
        let v = f.unit(&fx.grid.sample(|x| (PI * x[0]).sin()));
        let tu = f.project_fiber(&v, DEFAULT_FIBER_TOL).unwrap().t_u;
        let rows = f.landscape(&v, &geometric_grid(tu / 10.0, 10.0 * tu, 101));
        let changes = rows.windows(2).filter(|w| (w[0].dh > 0.0) != (w[1].dh > 0.0)).count();
        assert_eq!(changes, 1);
        assert!(rows[0].dh > 0.0);
        assert_eq!(f.landscape(&v, &[0.0])[0].h, 0.0);
        // outside A the slope never changes sign
        let low = LinearModel::new(1.0).unwrap();
        let fl = Functional::new(&fx.grid, &fx.form, &low);
        assert!(fl.landscape(&v, &geometric_grid(0.1, 100.0, 50)).iter().all(|r| r.dh > 0.0));
        // φ strictly decreasing
        let ns = fx.form.q(&v, &v);
        let phis: Vec<f64> = geometric_grid(0.01, 1e3, 60).iter().map(|&t| f.fiber_slope(&v, ns, t)).collect();
        assert!(phis.windows(2).all(|w| w[1] < w[0]));
    }
}
