//! Finite-dimensional real Hilbert space primitives.
//!
//! Points live in `R^d` with the Euclidean inner product, so the normalized
//! duality map is the identity and every pairing `<x, J(y)>` reduces to
//! [`inner`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative singular-value cutoff used for every rank decision.
pub const RANK_RTOL: f64 = 1e-10;

/// Builds a validated vector: at least one coordinate, all finite.
pub fn vector(coords: impl Into<Vec<f64>>) -> Result<Vector> {
    let coords = coords.into();
    if coords.is_empty() {
        return Err(Error::invalid("vector must have at least one coordinate"));
    }
    if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
        return Err(Error::invalid(format!("coordinate {i} is not finite")));
    }
    Ok(Vector::from_vec(coords))
}

/// Builds a matrix from row arrays, rejecting ragged or non-finite input.
pub fn matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::invalid("matrix must have at least one row"));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid("matrix rows must be non-empty and of equal length"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix entries must be finite"));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub fn inner(x: &Vector, y: &Vector) -> Result<f64> {
    check_dims(x.len(), y.len())?;
    Ok(x.dot(y))
}

pub fn norm(x: &Vector) -> f64 {
    x.norm()
}

pub fn distance(x: &Vector, y: &Vector) -> Result<f64> {
    check_dims(x.len(), y.len())?;
    Ok((x - y).norm())
}

pub fn all_finite(x: &Vector) -> bool {
    x.iter().all(|c| c.is_finite())
}

/// Spectral norm (largest singular value).
pub fn operator_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s))
}

/// Eigenvalues of the symmetric part `(M + M^T)/2`, ascending.
pub fn symmetric_part_eigenvalues(m: &Matrix) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// A nonempty affine subset `anchor + span(basis)` with an orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AffineSetSpec", into = "AffineSetSpec")]
pub struct AffineSet {
    anchor: Vector,
    basis: Vec<Vector>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSetSpec {
    pub anchor: Vec<f64>,
    #[serde(default)]
    pub basis: Vec<Vec<f64>>,
}

impl TryFrom<AffineSetSpec> for AffineSet {
    type Error = Error;

    fn try_from(spec: AffineSetSpec) -> Result<Self> {
        let anchor = vector(spec.anchor)?;
        let dirs = spec
            .basis
            .into_iter()
            .map(vector)
            .collect::<Result<Vec<_>>>()?;
        AffineSet::new(anchor, &dirs)
    }
}

impl From<AffineSet> for AffineSetSpec {
    fn from(set: AffineSet) -> Self {
        AffineSetSpec {
            anchor: set.anchor.iter().copied().collect(),
            basis: set.basis.iter().map(|b| b.iter().copied().collect()).collect(),
        }
    }
}

impl AffineSet {
    /// Orthonormalizes `directions` (dropping dependent ones) and moves the
    /// anchor to the point of the set closest to the origin.
    pub fn new(anchor: Vector, directions: &[Vector]) -> Result<Self> {
        let d = anchor.len();
        if d == 0 {
            return Err(Error::invalid("affine set needs a nonempty anchor"));
        }
        for dir in directions {
            check_dims(d, dir.len())?;
        }
        let basis = orthonormal_basis(d, directions);
        let mut set = AffineSet { anchor, basis };
        set.anchor = set.project_unchecked(&Vector::zeros(d));
        Ok(set)
    }

    pub fn point(p: Vector) -> Self {
        AffineSet {
            anchor: p,
            basis: Vec::new(),
        }
    }

    pub fn whole_space(dim: usize) -> Self {
        let basis = (0..dim)
            .map(|i| {
                let mut e = Vector::zeros(dim);
                e[i] = 1.0;
                e
            })
            .collect();
        AffineSet {
            anchor: Vector::zeros(dim),
            basis,
        }
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn dim_subspace(&self) -> usize {
        self.basis.len()
    }

    pub fn anchor(&self) -> &Vector {
        &self.anchor
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    fn project_unchecked(&self, x: &Vector) -> Vector {
        let offset = x - &self.anchor;
        let mut p = self.anchor.clone();
        for b in &self.basis {
            p.axpy(offset.dot(b), b, 1.0);
        }
        p
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        check_dims(self.dim(), x.len())?;
        Ok(self.project_unchecked(x))
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.len() == self.dim() && (x - self.project_unchecked(x)).norm() <= tol
    }

    /// `anchor + sum_i coeffs[i] * basis[i]`.
    pub fn point_at(&self, coeffs: &[f64]) -> Result<Vector> {
        check_dims(self.dim_subspace(), coeffs.len())?;
        let mut p = self.anchor.clone();
        for (c, b) in coeffs.iter().zip(&self.basis) {
            p.axpy(*c, b, 1.0);
        }
        Ok(p)
    }

    /// Component of `v` lying in the direction space.
    pub fn direction_component(&self, v: &Vector) -> Result<Vector> {
        check_dims(self.dim(), v.len())?;
        let mut out = Vector::zeros(self.dim());
        for b in &self.basis {
            out.axpy(v.dot(b), b, 1.0);
        }
        Ok(out)
    }

    /// Equality as point sets, up to `tol`.
    pub fn same_set(&self, other: &AffineSet, tol: f64) -> bool {
        if self.dim() != other.dim() || self.dim_subspace() != other.dim_subspace() {
            return false;
        }
        if !other.contains(&self.anchor, tol) {
            return false;
        }
        self.basis
            .iter()
            .all(|b| other.contains(&(&self.anchor + b), tol))
    }
}

fn orthonormal_basis(dim: usize, directions: &[Vector]) -> Vec<Vector> {
    if directions.is_empty() {
        return Vec::new();
    }
    let a = Matrix::from_columns(directions);
    let svd = a.svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, s| m.max(*s));
    if smax == 0.0 {
        return Vec::new();
    }
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > RANK_RTOL * smax)
        .map(|(i, _)| u.column(i).into_owned())
        .take(dim)
        .collect()
}

/// Solution set of `A x = b` for square `A`, or `None` when inconsistent.
pub(crate) fn solve_linear_set(a: &Matrix, b: &Vector) -> Result<Option<AffineSet>> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let d = a.nrows();
    check_dims(d, b.len())?;
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, s| m.max(*s));
    let cutoff = RANK_RTOL * smax;

    let mut particular = Vector::zeros(d);
    let mut null_dirs = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        let v_i = v_t.row(i).transpose();
        if smax > 0.0 && *s > cutoff {
            let coeff = u.column(i).dot(b) / s;
            particular.axpy(coeff, &v_i, 1.0);
        } else {
            null_dirs.push(v_i);
        }
    }
    let residual = (a * &particular - b).norm();
    if residual > 1e-8 * (1.0 + b.norm()) {
        return Ok(None);
    }
    Ok(Some(AffineSet::new(particular, &null_dirs)?))
}

/// Fixed-point set of the affine map `x -> M x + b`, i.e. the solutions of
/// `(I - M) x = b`. `M` must be nonexpansive (operator norm at most one).
pub fn solve_affine_fixed_set(m: &Matrix, b: &Vector) -> Result<Option<AffineSet>> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let norm = operator_norm(m);
    if norm > 1.0 + 1e-10 {
        return Err(Error::invalid(format!(
            "affine map is not nonexpansive (operator norm {norm})"
        )));
    }
    let a = Matrix::identity(m.nrows(), m.ncols()) - m;
    solve_linear_set(&a, b)
}
