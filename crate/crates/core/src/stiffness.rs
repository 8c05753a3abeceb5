//! The discrete Dirichlet energy `q(u, v) ≈ ∫ ∇u·∇v`.
//!
//! Second-order `2N+1`-point stencil with boundary nodes eliminated, scaled by
//! the cell volume so that `q(u, u) = Σ_links ((u_i − u_j)/h)² · V`, links to
//! the (zero) boundary included.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CscMatrix, CsrMatrix};
use thiserror::Error;

use crate::grid::{Grid, GridError};

#[derive(Debug, Error)]
pub enum StiffnessError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("stiffness factorization failed: {0}")]
    Factorization(String),
}

/// Symmetric positive definite energy form of a grid, with its sparse
/// Cholesky factor.
pub struct StiffnessForm {
    matrix: CsrMatrix<f64>,
    cholesky: CscCholesky<f64>,
    cell_volume: f64,
}

impl std::fmt::Debug for StiffnessForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StiffnessForm")
            .field("nodes", &self.matrix.nrows())
            .field("nnz", &self.matrix.nnz())
            .field("cell_volume", &self.cell_volume)
            .finish()
    }
}

impl StiffnessForm {
    pub fn assemble(grid: &Grid) -> Result<Self, StiffnessError> {
        let n = grid.len();
        let vol = grid.cell_volume();
        let inv_h2: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
        let diag: f64 = 2.0 * vol * inv_h2.iter().sum::<f64>();

        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(n * (2 * grid.dim() + 1));
        let mut vals = Vec::with_capacity(n * (2 * grid.dim() + 1));
        offsets.push(0);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * grid.dim() + 1);
        for idx in 0..n {
            row.clear();
            row.push((idx, diag));
            for (axis, w) in inv_h2.iter().enumerate() {
                for forward in [false, true] {
                    if let Some(j) = grid.neighbour(idx, axis, forward) {
                        row.push((j, -vol * w));
                    }
                }
            }
            row.sort_unstable_by_key(|&(j, _)| j);
            for &(j, v) in &row {
                cols.push(j);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        let matrix = CsrMatrix::try_from_csr_data(n, n, offsets.clone(), cols.clone(), vals.clone())
            .map_err(|e| StiffnessError::Factorization(e.to_string()))?;
        // symmetric: the CSR arrays are also a valid CSC description
        let csc = CscMatrix::try_from_csc_data(n, n, offsets, cols, vals)
            .map_err(|e| StiffnessError::Factorization(e.to_string()))?;
        let cholesky =
            CscCholesky::factor(&csc).map_err(|e| StiffnessError::Factorization(e.to_string()))?;
        Ok(Self {
            matrix,
            cholesky,
            cell_volume: vol,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    /// `A u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        out
    }

    pub(crate) fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let (offsets, cols, vals) = self.matrix.csr_data();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in offsets[i]..offsets[i + 1] {
                acc += vals[k] * u[cols[k]];
            }
            *o = acc;
        }
    }

    /// `q(u, v) = uᵀ A v`.
    pub fn q(&self, u: &[f64], v: &[f64]) -> f64 {
        let (offsets, cols, vals) = self.matrix.csr_data();
        let mut total = 0.0;
        for (i, ui) in u.iter().enumerate() {
            let mut acc = 0.0;
            for k in offsets[i]..offsets[i + 1] {
                acc += vals[k] * v[cols[k]];
            }
            total += ui * acc;
        }
        total
    }

    /// `‖u‖ = sqrt(q(u, u))`.
    pub fn norm(&self, u: &[f64]) -> f64 {
        self.q(u, u).max(0.0).sqrt()
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = DMatrix::from_column_slice(rhs.len(), 1, rhs);
        self.cholesky.solve_mut(&mut b);
        b.data.into()
    }

    /// Solves `A X = B` for a block of right-hand sides.
    pub fn solve_block(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.cholesky.solve(rhs)
    }

    /// Dual norm `sqrt(rᵀ A⁻¹ r)` of a Euclidean residual vector.
    pub fn dual_norm(&self, r: &[f64]) -> f64 {
        let x = self.solve(r);
        r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    pub(crate) fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.matrix.triplet_iter() {
            m[(i, j)] = *v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn hand_computed_energy() {
        let g = Grid::unit_interval(3).unwrap();
        let a = StiffnessForm::assemble(&g).unwrap();
        let one = g.constant(1.0);
        assert!((a.q(&one, &one) - 8.0).abs() < 1e-12);
        let zero = g.zeros();
        assert_eq!(a.q(&zero, &zero), 0.0);
    }

    #[test]
    fn rayleigh_quotient_of_sine() {
        let g = Grid::unit_interval(255).unwrap();
        let a = StiffnessForm::assemble(&g).unwrap();
        let s = g.sample(|x| (PI * x[0]).sin());
        let ratio = a.q(&s, &s) / g.weighted_l2(&g.constant(1.0), &s).unwrap();
        assert!((ratio - PI * PI).abs() / (PI * PI) < 1e-3);
    }

    #[test]
    fn mesh_convergence_is_second_order() {
        let err = |n: usize| {
            let g = Grid::unit_interval(n).unwrap();
            let a = StiffnessForm::assemble(&g).unwrap();
            let s = g.sample(|x| (PI * x[0]).sin());
            let ratio = a.q(&s, &s) / g.weighted_l2(&g.constant(1.0), &s).unwrap();
            (ratio - PI * PI).abs()
        };
        let (e1, e2) = (err(63), err(127));
        let ratio = e1 / e2;
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn solve_inverts_apply() {
        let g = Grid::new(3, &[(0.0, 1.0), (0.0, 2.0), (-1.0, 1.0)], &[4, 5, 3]).unwrap();
        let a = StiffnessForm::assemble(&g).unwrap();
        let u = g.sample(|x| x[0] * x[1] - x[2] * x[2] + 0.3);
        let back = a.solve(&a.apply(&u));
        for (p, q) in u.iter().zip(&back) {
            assert!((p - q).abs() < 1e-10);
        }
        let r = a.apply(&u);
        assert!((a.dual_norm(&r) - a.norm(&u)).abs() < 1e-10 * a.norm(&u));
    }

    proptest! {
        #[test]
        fn symmetric_and_positive(seed in proptest::collection::vec(-1.0f64..1.0, 2 * 20)) {
            let g = Grid::new(2, &[(0.0, 1.0), (0.0, 1.5)], &[5, 4]).unwrap();
            let a = StiffnessForm::assemble(&g).unwrap();
            let (u, v) = seed.split_at(20);
            let quv = a.q(u, v);
            let qvu = a.q(v, u);
            prop_assert!((quv - qvu).abs() <= 1e-12 * (1.0 + quv.abs()));
            if u.iter().any(|x| *x != 0.0) {
                prop_assert!(a.q(u, u) > 0.0);
            }
        }
    }
}
