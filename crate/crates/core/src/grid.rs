//! Uniform tensor grids on boxes with homogeneous Dirichlet data.
//!
//! Only interior nodes carry unknowns; the boundary value zero is implicit in
//! the stencil, so every [`GridField`] is automatically an element of the
//! discrete `H_0^1` space. Integrals use the nodal rule `Σ v_i · V` with
//! `V = Π h_i` the cell volume.

use std::fmt::Write as _;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: dim = {dim}, {extents} extents, {counts} counts")]
    DimensionMismatch {
        dim: usize,
        extents: usize,
        counts: usize,
    },
    #[error("axis {axis}: need at least 3 interior nodes (got {count})")]
    TooFewNodes { axis: usize, count: usize },
    #[error("axis {axis}: empty or invalid interval [{lower}, {upper}]")]
    InvalidExtent { axis: usize, lower: f64, upper: f64 },
    #[error("field has {found} values, grid has {expected} nodes")]
    FieldMismatch { expected: usize, found: usize },
    #[error("field contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("norm exponent must satisfy p >= 1 (got {0})")]
    InvalidExponent(f64),
    #[error("field dump: {0}")]
    Dump(String),
}

/// Box domain discretization with lexicographic interior-node ordering
/// (axis 0 varies fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    extents: Vec<(f64, f64)>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    #[serde(skip)]
    coords: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, extents: &[(f64, f64)], counts: &[usize]) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::UnsupportedDimension(dim));
        }
        if extents.len() != dim || counts.len() != dim {
            return Err(GridError::DimensionMismatch {
                dim,
                extents: extents.len(),
                counts: counts.len(),
            });
        }
        for (axis, (&(lower, upper), &count)) in extents.iter().zip(counts).enumerate() {
            if !(lower.is_finite() && upper.is_finite() && upper > lower) {
                return Err(GridError::InvalidExtent { axis, lower, upper });
            }
            if count < 3 {
                return Err(GridError::TooFewNodes { axis, count });
            }
        }
        let spacing: Vec<f64> = extents
            .iter()
            .zip(counts)
            .map(|(&(a, b), &n)| (b - a) / (n as f64 + 1.0))
            .collect();
        let mut strides = vec![1usize; dim];
        for axis in 1..dim {
            strides[axis] = strides[axis - 1] * counts[axis - 1];
        }
        let len: usize = counts.iter().product();
        let mut coords = Vec::with_capacity(len * dim);
        for idx in 0..len {
            for axis in 0..dim {
                let k = (idx / strides[axis]) % counts[axis];
                coords.push(extents[axis].0 + (k as f64 + 1.0) * spacing[axis]);
            }
        }
        Ok(Self {
            dim,
            extents: extents.to_vec(),
            counts: counts.to_vec(),
            spacing,
            strides,
            coords,
        })
    }

    /// Unit interval `(0, 1)` with `n` interior nodes.
    pub fn unit_interval(n: usize) -> Result<Self, GridError> {
        Self::new(1, &[(0.0, 1.0)], &[n])
    }

    /// Unit cube `(0, 1)^dim` with `n` interior nodes per axis.
    pub fn unit_box(dim: usize, n: usize) -> Result<Self, GridError> {
        Self::new(dim, &vec![(0.0, 1.0); dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one node, `Π h_i`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Lebesgue measure of the box, `Π (b_i − a_i)`.
    pub fn measure(&self) -> f64 {
        self.extents.iter().map(|(a, b)| b - a).product()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim);
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|axis| (idx / self.strides[axis]) % self.counts[axis])
            .collect()
    }

    /// Coordinates of interior node `idx`.
    pub fn point(&self, idx: usize) -> &[f64] {
        &self.coords[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Index of the neighbour of `idx` one step along `axis`, if interior.
    pub(crate) fn neighbour(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let k = (idx / self.strides[axis]) % self.counts[axis];
        if forward {
            (k + 1 < self.counts[axis]).then(|| idx + self.strides[axis])
        } else {
            (k > 0).then(|| idx - self.strides[axis])
        }
    }

    pub fn zeros(&self) -> GridField {
        GridField::new(vec![0.0; self.len()])
    }

    pub fn constant(&self, value: f64) -> GridField {
        GridField::new(vec![value; self.len()])
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> GridField {
        GridField::new(self.points().map(f).collect())
    }

    pub fn check(&self, field: &[f64]) -> Result<(), GridError> {
        if field.len() != self.len() {
            return Err(GridError::FieldMismatch {
                expected: self.len(),
                found: field.len(),
            });
        }
        Ok(())
    }

    /// Nodal rule `Σ v_i · V`.
    pub fn integrate(&self, vals: &[f64]) -> Result<f64, GridError> {
        self.check(vals)?;
        Ok(self.quad(vals))
    }

    pub(crate) fn quad(&self, vals: &[f64]) -> f64 {
        vals.iter().sum::<f64>() * self.cell_volume()
    }

    /// `∫ θ u²`.
    pub fn weighted_l2(&self, theta: &[f64], u: &[f64]) -> Result<f64, GridError> {
        self.check(theta)?;
        self.check(u)?;
        Ok(self.weighted_sq(theta, u))
    }

    pub(crate) fn weighted_sq(&self, theta: &[f64], u: &[f64]) -> f64 {
        theta.iter().zip(u).map(|(w, v)| w * v * v).sum::<f64>() * self.cell_volume()
    }

    /// `(∫|u|^p)^{1/p}`; `p = ∞` gives the nodal maximum of `|u|`.
    pub fn lp_norm(&self, u: &[f64], p: f64) -> Result<f64, GridError> {
        self.check(u)?;
        if p.is_nan() || p < 1.0 {
            return Err(GridError::InvalidExponent(p));
        }
        if p.is_infinite() {
            return Ok(sup_norm(u));
        }
        let s: f64 = u.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.cell_volume();
        Ok(s.powf(1.0 / p))
    }

    /// Field dump: `# dim,N; extents,a1,b1,...; counts,n1,...` then one
    /// `coordinates..., value` row per node.
    pub fn dump_csv(&self, values: &[f64]) -> Result<String, GridError> {
        self.check(values)?;
        let mut out = String::new();
        let _ = write!(out, "# dim,{}; extents", self.dim);
        for (a, b) in &self.extents {
            let _ = write!(out, ",{a:.17e},{b:.17e}");
        }
        out.push_str("; counts");
        for n in &self.counts {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for (idx, v) in values.iter().enumerate() {
            for x in self.point(idx) {
                let _ = write!(out, "{x:.17e},");
            }
            let _ = writeln!(out, "{v:.17e}");
        }
        Ok(out)
    }

    /// Reads a field dump written by [`Grid::dump_csv`]; the header must match
    /// this grid's dimension and node counts.
    pub fn read_csv(&self, text: &str) -> Result<GridField, GridError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GridError::Dump("empty input".into()))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| GridError::Dump("missing '#' header".into()))?;
        let mut dim = None;
        let mut counts = None;
        for section in header.split(';') {
            let mut parts = section.split(',').map(str::trim);
            match parts.next() {
                Some("dim") => {
                    dim = parts.next().and_then(|s| s.parse::<usize>().ok());
                }
                Some("counts") => {
                    counts = parts
                        .map(|s| s.parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .ok();
                }
                _ => {}
            }
        }
        if dim != Some(self.dim) || counts.as_deref() != Some(&self.counts[..]) {
            return Err(GridError::Dump(format!(
                "header ({dim:?}, {counts:?}) does not match grid (dim {}, counts {:?})",
                self.dim, self.counts
            )));
        }
        let mut values = Vec::with_capacity(self.len());
        for (row, line) in lines.enumerate() {
            let last = line.rsplit(',').next().unwrap_or("").trim();
            let v: f64 = last
                .parse()
                .map_err(|_| GridError::Dump(format!("row {row}: cannot parse '{last}'")))?;
            if !v.is_finite() {
                return Err(GridError::NonFinite(row));
            }
            values.push(v);
        }
        self.check(&values)?;
        Ok(GridField::new(values))
    }
}

pub(crate) fn sup_norm(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Nodal values on the interior nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.values.iter().map(|v| s * v).collect())
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: f64, other: &[f64]) -> Self {
        Self::new(self.values.iter().zip(other).map(|(a, b)| a + s * b).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Deref for GridField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for GridField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl From<Vec<f64>> for GridField {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn one_dimensional_nodes() {
        let g = Grid::new(1, &[(0.0, 1.0)], &[3]).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.spacing(), &[0.25]);
        let xs: Vec<f64> = g.points().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
        assert_eq!(g.measure(), 1.0);
    }

    #[test]
    fn two_dimensional_nodes() {
        let g = Grid::unit_box(2, 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.spacing(), &[0.25, 0.25]);
        for idx in 0..g.len() {
            assert_eq!(g.index(&g.multi_index(idx)), idx);
        }
        assert_eq!(g.point(1), &[0.5, 0.25]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            Grid::new(1, &[(0.0, 1.0)], &[2]),
            Err(GridError::TooFewNodes { axis: 0, count: 2 })
        );
        assert!(matches!(
            Grid::new(2, &[(0.0, 1.0)], &[3, 3]),
            Err(GridError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Grid::new(1, &[(1.0, 0.0)], &[5]),
            Err(GridError::InvalidExtent { .. })
        ));
        assert!(matches!(
            Grid::new(4, &[(0.0, 1.0); 4], &[3; 4]),
            Err(GridError::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn nodal_rule() {
        let g = Grid::unit_interval(3).unwrap();
        assert_eq!(g.integrate(&g.constant(1.0)).unwrap(), 0.75);
        assert_eq!(g.integrate(&g.zeros()).unwrap(), 0.0);
        assert!(g.integrate(&[1.0, 2.0]).is_err());

        let g = Grid::unit_interval(1023).unwrap();
        let s = g.sample(|x| (PI * x[0]).sin());
        assert!((g.integrate(&s).unwrap() - 2.0 / PI).abs() < 1e-5);
    }

    #[test]
    fn weighted_l2_of_first_eigenfunction() {
        let g = Grid::unit_interval(1023).unwrap();
        let e1 = g.sample(|x| 2f64.sqrt() / PI * (PI * x[0]).sin());
        let one = g.constant(1.0);
        assert!((g.weighted_l2(&one, &e1).unwrap() - 1.0 / (PI * PI)).abs() < 1e-5);
        assert_eq!(g.weighted_l2(&g.zeros(), &e1).unwrap(), 0.0);
        let two = g.constant(2.0);
        let lhs = g.weighted_l2(&two, &e1).unwrap();
        let rhs = 2.0 * g.weighted_l2(&one, &e1).unwrap();
        assert!((lhs - rhs).abs() <= 1e-15 * rhs);
    }

    #[test]
    fn lp_norms_of_first_eigenfunction() {
        let g = Grid::unit_interval(1023).unwrap();
        let e1 = g.sample(|x| 2f64.sqrt() / PI * (PI * x[0]).sin());
        let sup = g.lp_norm(&e1, f64::INFINITY).unwrap();
        assert!((sup - 2f64.sqrt() / PI).abs() < 1e-6);
        // ∫ sin³(πx) dx = 4/(3π)
        let cube = 8.0 * 2f64.sqrt() / (3.0 * PI.powi(4));
        let l3 = g.lp_norm(&e1, 3.0).unwrap();
        assert!((l3 - cube.powf(1.0 / 3.0)).abs() < 1e-6);
        assert_eq!(g.lp_norm(&g.zeros(), 3.0).unwrap(), 0.0);
        assert_eq!(g.lp_norm(&e1, 0.5), Err(GridError::InvalidExponent(0.5)));
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(2, &[(0.0, 2.0), (-1.0, 1.0)], &[3, 4]).unwrap();
        let u = g.sample(|x| x[0] * x[1] + 0.1);
        let text = g.dump_csv(&u).unwrap();
        assert!(text.starts_with("# dim,2; extents,"));
        assert_eq!(g.read_csv(&text).unwrap(), u);
        let other = Grid::unit_box(2, 3).unwrap();
        assert!(other.read_csv(&text).is_err());
    }
}
