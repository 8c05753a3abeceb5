//! Weighted Dirichlet eigenproblem `q(u, v) = λ ∫ θ u v`.
//!
//! With `A` the stiffness matrix and `B = diag(θ_i V)` the (possibly
//! indefinite) weighted mass matrix, the positive eigenvalues `λ` are the
//! reciprocals of the positive eigenvalues `μ` of `B u = μ A u`. Since `A` is
//! SPD this is solved either densely through the Cholesky-reduced symmetric
//! matrix `L⁻¹ B L⁻ᵀ`, or by block inverse iteration (`A⁻¹B`, shift zero) with
//! Rayleigh–Ritz for larger grids. Eigenfunctions are normalized in the energy
//! norm, `q(e_j, e_j) = 1`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{Grid, GridField};
use crate::model::{beta_eval, BetaError, BetaLadder, BetaLimit, Nonlinearity};
use crate::stiffness::StiffnessForm;

/// Grids up to this many nodes use the dense solver under [`EigenMethod::Auto`].
pub const DENSE_LIMIT: usize = 3000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("weight has no positive part: no positive eigenvalue exists")]
    NoPositiveWeight,
    #[error("requested {requested} positive eigenvalues but only {available} exist")]
    InsufficientSpectrum { requested: usize, available: usize },
    #[error("weight has {found} values, grid has {expected} nodes")]
    WeightMismatch { expected: usize, found: usize },
    #[error("weight is not finite at node {0}")]
    NonFiniteWeight(usize),
    #[error("eigensolver failed: {0}")]
    Solver(String),
    #[error("spectrum holds {clusters} complete clusters, {requested} requested")]
    TooFewClusters { requested: usize, clusters: usize },
    #[error("cannot decide resonance: all {computed} computed eigenvalues lie below 1 (largest {largest})")]
    SpectrumTooShort { computed: usize, largest: f64 },
    #[error(transparent)]
    Beta(#[from] BetaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    #[default]
    Auto,
    Dense,
    Subspace,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// Relative gap below which consecutive eigenvalues share an eigenspace.
    pub cluster_tol: f64,
    pub method: EigenMethod,
    pub max_iter: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            cluster_tol: 1e-6,
            method: EigenMethod::Auto,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub value: f64,
    #[serde(skip)]
    pub vector: GridField,
    /// `‖A e − λ B e‖_*` in the discrete dual norm.
    pub residual: f64,
    /// `|q(e, e) − 1|`.
    pub normalization_error: f64,
    /// `|q(e, e) − λ ∫θ e²|`.
    pub rayleigh_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cluster {
    pub value: f64,
    pub start: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub pairs: Vec<EigenPair>,
    pub clusters: Vec<Cluster>,
    pub cluster_tol: f64,
    /// First positive eigenvalue beyond the returned pairs, when known.
    pub next_value: Option<f64>,
    /// True when the returned pairs exhaust the positive discrete spectrum.
    pub exhaustive: bool,
    pub method: EigenMethod,
}

impl Spectrum {
    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn first(&self) -> &EigenPair {
        &self.pairs[0]
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Clusters whose full multiplicity is known from the computed pairs.
    pub fn complete_clusters(&self) -> usize {
        let Some(last) = self.clusters.last() else {
            return 0;
        };
        if self.exhaustive {
            return self.clusters.len();
        }
        match self.next_value {
            Some(next) if (next - last.value) / last.value >= self.cluster_tol => {
                self.clusters.len()
            }
            _ => self.clusters.len() - 1,
        }
    }

    /// `χ(θ)`: total dimension of the first `m` eigenspaces, returned
    /// together with `s_m` (the same cumulative count, indexed by `m`).
    pub fn chi(&self, m: usize) -> Result<(usize, usize), SpectrumError> {
        let complete = self.complete_clusters();
        if m == 0 || m > complete {
            return Err(SpectrumError::TooFewClusters {
                requested: m,
                clusters: complete,
            });
        }
        let chi: usize = self.clusters[..m].iter().map(|c| c.dim).sum();
        Ok((chi, chi))
    }

    /// Eigenfunctions spanning the first `m` eigenspaces.
    pub fn eigenspace_basis(&self, m: usize) -> Result<Vec<&GridField>, SpectrumError> {
        let (chi, _) = self.chi(m)?;
        Ok(self.pairs[..chi].iter().map(|p| &p.vector).collect())
    }
}

pub fn weighted_eigs(
    form: &StiffnessForm,
    theta: &[f64],
    m: usize,
) -> Result<Spectrum, SpectrumError> {
    weighted_eigs_with(form, theta, m, &SpectrumOptions::default())
}

pub fn weighted_eigs_with(
    form: &StiffnessForm,
    theta: &[f64],
    m: usize,
    opts: &SpectrumOptions,
) -> Result<Spectrum, SpectrumError> {
    let n = form.len();
    if theta.len() != n {
        return Err(SpectrumError::WeightMismatch {
            expected: n,
            found: theta.len(),
        });
    }
    if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
        return Err(SpectrumError::NonFiniteWeight(i));
    }
    if theta.iter().all(|&t| t <= 0.0) {
        return Err(SpectrumError::NoPositiveWeight);
    }
    let positive_nodes = theta.iter().filter(|&&t| t > 0.0).count();
    if m > positive_nodes {
        return Err(SpectrumError::InsufficientSpectrum {
            requested: m,
            available: positive_nodes,
        });
    }
    let mass: Vec<f64> = theta.iter().map(|t| t * form.cell_volume()).collect();
    let method = match opts.method {
        EigenMethod::Auto if n <= DENSE_LIMIT => EigenMethod::Dense,
        EigenMethod::Auto => EigenMethod::Subspace,
        other => other,
    };
    let raw = match method {
        EigenMethod::Dense => dense_pairs(form, &mass, m)?,
        _ => subspace_pairs(form, &mass, m, opts.max_iter)?,
    };
    Ok(finish(form, &mass, raw, opts.cluster_tol, method))
}

struct RawPairs {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    next_value: Option<f64>,
    exhaustive: bool,
}

fn positive_floor(mu: &[f64]) -> f64 {
    1e-12 * mu.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn dense_pairs(form: &StiffnessForm, mass: &[f64], m: usize) -> Result<RawPairs, SpectrumError> {
    let n = form.len();
    let a = form.to_dense();
    let chol = a
        .cholesky()
        .ok_or_else(|| SpectrumError::Solver("stiffness matrix is not SPD".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| SpectrumError::Solver("triangular solve failed".into()))?;
    let mut xd = x.clone();
    for (j, mut col) in xd.column_iter_mut().enumerate() {
        col *= mass[j];
    }
    let mut c = &xd * x.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let floor = positive_floor(&mu);
    let positive = mu.iter().take_while(|&&v| v > floor).count();
    if positive < m {
        return Err(SpectrumError::InsufficientSpectrum {
            requested: m,
            available: positive,
        });
    }
    let xt = x.transpose();
    let vectors = order[..m]
        .iter()
        .map(|&i| (&xt * eig.eigenvectors.column(i)).as_slice().to_vec())
        .collect();
    Ok(RawPairs {
        values: mu[..m].iter().map(|v| 1.0 / v).collect(),
        vectors,
        next_value: (positive > m).then(|| 1.0 / mu[m]),
        exhaustive: positive == m,
    })
}

/// Block inverse iteration with Rayleigh–Ritz; the block is wider than `m`
/// so that large negative `μ` (from an indefinite weight) cannot crowd out the
/// wanted positive ones.
fn subspace_pairs(
    form: &StiffnessForm,
    mass: &[f64],
    m: usize,
    max_iter: usize,
) -> Result<RawPairs, SpectrumError> {
    let n = form.len();
    let p = n.min((2 * m).max(m + 8));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut y = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let mut prev: Vec<f64> = vec![f64::NAN; p];
    let mut mu_sorted = Vec::new();
    let mut vecs = DMatrix::zeros(n, p);
    for _ in 0..max_iter {
        let mut by = y.clone();
        for (i, mut row) in by.row_iter_mut().enumerate() {
            row *= mass[i];
        }
        let z = form.solve_block(&by);
        let az = {
            let mut out = DMatrix::zeros(n, p);
            for j in 0..p {
                let col = form.apply(z.column(j).as_slice());
                out.column_mut(j).copy_from_slice(&col);
            }
            out
        };
        let ka = z.transpose() * &az;
        let ka = (&ka + ka.transpose()) * 0.5;
        let mut bz = z.clone();
        for (i, mut row) in bz.row_iter_mut().enumerate() {
            row *= mass[i];
        }
        let kb = z.transpose() * &bz;
        let kb = (&kb + kb.transpose()) * 0.5;
        let chol = ka
            .cholesky()
            .ok_or_else(|| SpectrumError::Solver("Ritz basis lost rank".into()))?;
        let r = chol.l();
        let rinv = r
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| SpectrumError::Solver("Ritz reduction failed".into()))?;
        let c = &rinv * kb * rinv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let coeffs = rinv.transpose() * &eig.eigenvectors;
        let ritz = &z * coeffs;
        mu_sorted = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        for (k, &i) in order.iter().enumerate() {
            vecs.column_mut(k).copy_from(&ritz.column(i));
        }
        y = vecs.clone();
        let converged = (0..m.min(p)).all(|k| {
            let change = (mu_sorted[k] - prev[k]).abs();
            change <= 1e-14 * mu_sorted[0].abs()
        });
        prev.clone_from(&mu_sorted);
        if converged {
            break;
        }
    }
    let floor = positive_floor(&mu_sorted);
    let positive = mu_sorted.iter().take_while(|&&v| v > floor).count();
    if positive < m {
        return Err(SpectrumError::InsufficientSpectrum {
            requested: m,
            available: positive,
        });
    }
    Ok(RawPairs {
        values: mu_sorted[..m].iter().map(|v| 1.0 / v).collect(),
        vectors: (0..m).map(|k| vecs.column(k).as_slice().to_vec()).collect(),
        next_value: (positive > m && m < p).then(|| 1.0 / mu_sorted[m]),
        exhaustive: p == n && positive == m,
    })
}

fn finish(
    form: &StiffnessForm,
    mass: &[f64],
    raw: RawPairs,
    cluster_tol: f64,
    method: EigenMethod,
) -> Spectrum {
    let mut pairs = Vec::with_capacity(raw.values.len());
    for (value, mut v) in raw.values.into_iter().zip(raw.vectors) {
        let norm = form.norm(&v);
        v.iter_mut().for_each(|x| *x /= norm);
        let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * sup) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        let av = form.apply(&v);
        let r: Vec<f64> = av
            .iter()
            .zip(&v)
            .zip(mass)
            .map(|((a, x), b)| a - value * b * x)
            .collect();
        let energy = form.q(&v, &v);
        let weighted: f64 = v.iter().zip(mass).map(|(x, b)| b * x * x).sum();
        pairs.push(EigenPair {
            value,
            residual: form.dual_norm(&r),
            normalization_error: (energy - 1.0).abs(),
            rayleigh_error: (energy - value * weighted).abs(),
            vector: GridField::new(v),
        });
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for (k, p) in pairs.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if (p.value - pairs[k - 1].value) / pairs[k - 1].value < cluster_tol => {
                c.dim += 1;
            }
            _ => clusters.push(Cluster {
                value: p.value,
                start: k,
                dim: 1,
            }),
        }
    }
    Spectrum {
        pairs,
        clusters,
        cluster_tol,
        next_value: raw.next_value,
        exhaustive: raw.exhaustive,
        method,
    }
}

/// Position of `1` relative to the weighted spectrum of `η`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Resonance {
    NonResonant,
    /// `λ_index(η) = 1` within tolerance (1-based index).
    Resonant { index: usize, beta: BetaSample },
    /// Resonant with `β` finite on every sampled node.
    StronglyResonant {
        index: usize,
        beta_min: f64,
        beta_max: f64,
        sampled_nodes: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSample {
    Infinite,
    Undecided,
    Mixed,
}

/// Nodes used when a property is sampled over the grid (at most `count`,
/// evenly spread in index order).
pub(crate) fn node_sample(grid: &Grid, count: usize) -> Vec<usize> {
    let n = grid.len();
    if n <= count {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..count).map(|k| k * (n - 1) / (count - 1)).collect();
    idx.dedup();
    idx
}

pub fn classify_resonance(
    model: &dyn Nonlinearity,
    grid: &Grid,
    s_eta: &Spectrum,
    tol: f64,
) -> Result<Resonance, SpectrumError> {
    let hit = s_eta.pairs.iter().position(|p| (p.value - 1.0).abs() <= tol);
    let Some(pos) = hit else {
        let beyond = s_eta.pairs.iter().any(|p| p.value > 1.0 + tol)
            || s_eta.next_value.is_some_and(|v| v > 1.0 + tol)
            || s_eta.exhaustive;
        if beyond {
            return Ok(Resonance::NonResonant);
        }
        return Err(SpectrumError::SpectrumTooShort {
            computed: s_eta.len(),
            largest: s_eta.pairs.last().map_or(f64::NAN, |p| p.value),
        });
    };
    let nodes = if model.is_autonomous() {
        vec![0]
    } else {
        node_sample(grid, 16)
    };
    let ladder = BetaLadder::default();
    let mut finite = Vec::new();
    let mut infinite = false;
    let mut undecided = false;
    for &i in &nodes {
        match beta_eval(model, grid.point(i), &ladder) {
            Ok(BetaLimit::Finite { value, .. }) => finite.push(value),
            Ok(_) => infinite = true,
            Err(BetaError::Undecided { .. }) => undecided = true,
            Err(e) => return Err(e.into()),
        }
    }
    let index = pos + 1;
    if finite.len() == nodes.len() {
        let beta_min = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let beta_max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(Resonance::StronglyResonant {
            index,
            beta_min,
            beta_max,
            sampled_nodes: nodes.len(),
        });
    }
    let beta = match (infinite, undecided, finite.is_empty()) {
        (true, false, true) => BetaSample::Infinite,
        (false, true, true) => BetaSample::Undecided,
        _ => BetaSample::Mixed,
    };
    Ok(Resonance::Resonant { index, beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RationalModel, Section5Model};
    use std::f64::consts::PI;

    fn interval(n: usize) -> (Grid, StiffnessForm) {
        let g = Grid::unit_interval(n).unwrap();
        let a = StiffnessForm::assemble(&g).unwrap();
        (g, a)
    }

    #[test]
    fn constant_weight_matches_closed_form() {
        let (g, a) = interval(255);
        let s = weighted_eigs(&a, &g.constant(1.0), 5).unwrap();
        let h = g.spacing()[0];
        for (k, p) in s.pairs.iter().enumerate() {
            let exact = 4.0 / (h * h) * ((k + 1) as f64 * PI * h / 2.0).sin().powi(2);
            assert!((p.value - exact).abs() / exact < 1e-9);
            assert!(p.residual <= 1e-8 * p.value);
            assert!(p.normalization_error < 1e-12);
            assert!(p.rayleigh_error < 1e-10);
        }
        assert!((s.pairs[0].value - PI * PI).abs() / (PI * PI) < 1e-4);
        assert_eq!(s.chi(5).unwrap(), (5, 5));
    }

    #[test]
    fn scaling_law_for_constant_weights() {
        let (g, a) = interval(127);
        let base = weighted_eigs(&a, &g.constant(1.0), 4).unwrap();
        let doubled = weighted_eigs(&a, &g.constant(2.0), 4).unwrap();
        for (p, q) in base.pairs.iter().zip(&doubled.pairs) {
            assert!((q.value * 2.0 - p.value).abs() <= 1e-12 * p.value);
        }
    }

    #[test]
    fn sign_convention_and_orthogonality() {
        let (g, a) = interval(63);
        let theta = g.sample(|x| 1.0 + x[0]);
        let s = weighted_eigs(&a, &theta, 4).unwrap();
        for p in &s.pairs {
            let first = p.vector.iter().find(|v| v.abs() > 1e-10).unwrap();
            assert!(*first > 0.0);
        }
        for i in 0..4 {
            for j in 0..i {
                let w: Vec<f64> = theta.iter().zip(s.pairs[j].vector.iter()).map(|(t, v)| t * v).collect();
                let inner = g.integrate(
                    &w.iter().zip(s.pairs[i].vector.iter()).map(|(a, b)| a * b).collect::<Vec<_>>(),
                )
                .unwrap();
                assert!(inner.abs() <= 1e-8);
            }
        }
        assert!(s.pairs[0].vector.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn errors_on_nonpositive_weight() {
        let (g, a) = interval(15);
        assert_eq!(
            weighted_eigs(&a, &g.constant(-1.0), 1).unwrap_err(),
            SpectrumError::NoPositiveWeight
        );
        assert_eq!(
            weighted_eigs(&a, &g.zeros(), 1).unwrap_err(),
            SpectrumError::NoPositiveWeight
        );
    }

    #[test]
    fn indefinite_weight_reports_positive_part_only() {
        let (g, a) = interval(31);
        let theta = g.sample(|x| if x[0] < 0.25 { 1.0 } else { -1.0 });
        let positive_nodes = theta.iter().filter(|t| **t > 0.0).count();
        let s = weighted_eigs(&a, &theta, 3).unwrap();
        assert!(s.pairs.iter().all(|p| p.value > 0.0));
        assert!(matches!(
            weighted_eigs(&a, &theta, positive_nodes + 1),
            Err(SpectrumError::InsufficientSpectrum { .. })
        ));
    }

    #[test]
    fn subspace_iteration_agrees_with_dense() {
        let g = Grid::new(2, &[(0.0, 1.0), (0.0, 1.3)], &[9, 11]).unwrap();
        let a = StiffnessForm::assemble(&g).unwrap();
        let theta = g.sample(|x| 2.0 + x[0] - x[1]);
        let dense = weighted_eigs_with(
            &a,
            &theta,
            4,
            &SpectrumOptions { method: EigenMethod::Dense, ..Default::default() },
        )
        .unwrap();
        let iter = weighted_eigs_with(
            &a,
            &theta,
            4,
            &SpectrumOptions { method: EigenMethod::Subspace, ..Default::default() },
        )
        .unwrap();
        for (p, q) in dense.pairs.iter().zip(&iter.pairs) {
            assert!((p.value - q.value).abs() <= 1e-10 * p.value);
            assert!(q.residual <= 1e-8 * q.value);
        }
    }

    #[test]
    fn chi_on_unit_square_counts_degenerate_modes() {
        let g = Grid::unit_box(2, 15).unwrap();
        let a = StiffnessForm::assemble(&g).unwrap();
        let s = weighted_eigs(&a, &g.constant(1.0), 4).unwrap();
        assert_eq!(s.chi(1).unwrap(), (1, 1));
        assert_eq!(s.chi(2).unwrap(), (3, 3));
        // the (2,2) mode is simple; four pairs plus the lookahead close cluster 3
        assert_eq!(s.chi(3).unwrap(), (4, 4));
    }

    #[test]
    fn chi_in_one_dimension_is_m() {
        let (g, a) = interval(63);
        let s = weighted_eigs(&a, &g.constant(1.0), 6).unwrap();
        for m in 1..=6 {
            assert_eq!(s.chi(m).unwrap().0, m);
        }
    }

    #[test]
    fn resonance_classification() {
        let (g, a) = interval(255);
        let rational = RationalModel::new(0.0, 1000.0).unwrap();
        let s = weighted_eigs(&a, &g.constant(1000.0), 12).unwrap();
        assert_eq!(
            classify_resonance(&rational, &g, &s, 1e-6).unwrap(),
            Resonance::NonResonant
        );
        let short = weighted_eigs(&a, &g.constant(1000.0), 5).unwrap();
        assert!(matches!(
            classify_resonance(&rational, &g, &short, 1e-6),
            Err(SpectrumError::SpectrumTooShort { .. })
        ));

        let lambda1 = weighted_eigs(&a, &g.constant(1.0), 1).unwrap().pairs[0].value;
        let s = weighted_eigs(&a, &g.constant(lambda1), 2).unwrap();
        assert!(matches!(
            classify_resonance(&rational, &g, &s, 1e-9).unwrap(),
            Resonance::Resonant { index: 1, beta: BetaSample::Infinite }
        ));
        let s = weighted_eigs(&a, &g.constant(PI * PI), 2).unwrap();
        let s5 = Section5Model::new(1.0, PI * PI).unwrap();
        assert!(matches!(
            classify_resonance(&s5, &g, &s, 1e-4).unwrap(),
            Resonance::StronglyResonant { index: 1, .. }
        ));
    }
}
