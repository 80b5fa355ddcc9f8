//! Small-dimension tensor algebra for d ∈ {1, 2, 3}.
//!
//! [`SymTensor2`] stores only the d(d+1)/2 independent components of a
//! symmetric matrix, ordered `[11]`, `[11, 22, 12]` or
//! `[11, 22, 33, 23, 13, 12]`. The Frobenius product is that of the full
//! matrix, so off-diagonal components are counted twice.
//!
//! [`Tensor4`] is kept in the Mandel basis (off-diagonals scaled by √2), in
//! which the Frobenius product becomes the Euclidean one and major symmetry
//! is plain matrix symmetry.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of independent components (d = 3).
pub const MAX_COMPONENTS: usize = 6;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported spatial dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
}

/// Number of independent components of a symmetric d×d matrix.
pub const fn n_components(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Index pair `(i, j)` of independent component `k`.
pub fn component_index(dim: usize, k: usize) -> (usize, usize) {
    const D2: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];
    const D3: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
    match dim {
        1 => (0, 0),
        2 => D2[k],
        _ => D3[k],
    }
}

fn is_diagonal(dim: usize, k: usize) -> bool {
    k < dim
}

fn check_dim(dim: usize) -> Result<(), TensorError> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(TensorError::UnsupportedDimension(dim))
    }
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor2 {
    dim: usize,
    v: [f64; MAX_COMPONENTS],
}

impl SymTensor2 {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "unsupported dimension {dim}");
        Self { dim, v: [0.0; MAX_COMPONENTS] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..dim {
            t.v[k] = 1.0;
        }
        t
    }

    /// Builds a tensor from its independent components.
    pub fn from_components(dim: usize, comps: &[f64]) -> Result<Self, TensorError> {
        check_dim(dim)?;
        if comps.len() != n_components(dim) {
            return Err(TensorError::DimensionMismatch(comps.len(), n_components(dim)));
        }
        let mut t = Self::zeros(dim);
        t.v[..comps.len()].copy_from_slice(comps);
        Ok(t)
    }

    /// Symmetric part of a full row-major d×d matrix.
    pub fn sym_from_matrix(dim: usize, m: &[f64]) -> Result<Self, TensorError> {
        check_dim(dim)?;
        if m.len() != dim * dim {
            return Err(TensorError::DimensionMismatch(m.len(), dim * dim));
        }
        let mut t = Self::zeros(dim);
        for k in 0..n_components(dim) {
            let (i, j) = component_index(dim, k);
            t.v[k] = 0.5 * (m[i * dim + j] + m[j * dim + i]);
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        n_components(self.dim)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn components(&self) -> &[f64] {
        &self.v[..self.len()]
    }

    pub fn components_mut(&mut self) -> &mut [f64] {
        let n = self.len();
        &mut self.v[..n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        (0..self.len()).find(|&k| component_index(self.dim, k) == (i, j)).map(|k| self.v[k]).expect("index out of range")
    }

    /// Multiplicity of component `k` in the Frobenius product (1 or 2).
    pub fn weight(&self, k: usize) -> f64 {
        if is_diagonal(self.dim, k) {
            1.0
        } else {
            2.0
        }
    }

    /// Frobenius product; panics on dimension mismatch.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        (0..self.len()).map(|k| self.weight(k) * self.v[k] * other.v[k]).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.v[..self.dim].iter().sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut t = *self;
        t.v.iter_mut().for_each(|x| *x *= s);
        t
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut t = *self;
        for k in 0..self.len() {
            t.v[k] += s * other.v[k];
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.components().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Components in the Mandel basis.
    pub fn to_mandel(&self) -> [f64; MAX_COMPONENTS] {
        let mut m = [0.0; MAX_COMPONENTS];
        for k in 0..self.len() {
            m[k] = if is_diagonal(self.dim, k) { self.v[k] } else { SQRT2 * self.v[k] };
        }
        m
    }

    pub fn from_mandel(dim: usize, m: &[f64]) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..n_components(dim) {
            t.v[k] = if is_diagonal(dim, k) { m[k] } else { m[k] / SQRT2 };
        }
        t
    }
}

impl fmt::Debug for SymTensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymTensor2{:?}", self.components())
    }
}

impl Add for SymTensor2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for SymTensor2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.axpy(-1.0, &rhs)
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, rhs: Self) {
        *self = self.axpy(1.0, &rhs);
    }
}

impl SubAssign for SymTensor2 {
    fn sub_assign(&mut self, rhs: Self) {
        *self = self.axpy(-1.0, &rhs);
    }
}

impl Neg for SymTensor2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, rhs: SymTensor2) -> SymTensor2 {
        rhs.scale(self)
    }
}

/// Fourth-order tensor with minor and major symmetry, acting on
/// [`SymTensor2`].
#[derive(Clone, Copy, PartialEq)]
pub struct Tensor4 {
    dim: usize,
    m: [[f64; MAX_COMPONENTS]; MAX_COMPONENTS],
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "unsupported dimension {dim}");
        Self { dim, m: [[0.0; MAX_COMPONENTS]; MAX_COMPONENTS] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..n_components(dim) {
            t.m[k][k] = 1.0;
        }
        t
    }

    /// `a ↦ λ tr(a) Id + 2μ a`
    pub fn isotropic(dim: usize, lambda: f64, mu: f64) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..n_components(dim) {
            t.m[k][k] = 2.0 * mu;
        }
        for i in 0..dim {
            for j in 0..dim {
                t.m[i][j] += lambda;
            }
        }
        t
    }

    /// Builds from a Mandel-basis matrix; the matrix is symmetrized.
    pub fn from_mandel(dim: usize, rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        check_dim(dim)?;
        let n = n_components(dim);
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(TensorError::DimensionMismatch(rows.len(), n));
        }
        let mut t = Self::zeros(dim);
        for a in 0..n {
            for b in 0..n {
                t.m[a][b] = 0.5 * (rows[a][b] + rows[b][a]);
            }
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mandel(&self, a: usize, b: usize) -> f64 {
        self.m[a][b]
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut t = *self;
        t.m.iter_mut().flatten().for_each(|x| *x *= s);
        t
    }

    /// Panics on dimension mismatch; see [`apply_tensor4`] for the checked form.
    pub fn apply(&self, a: &SymTensor2) -> SymTensor2 {
        assert_eq!(self.dim, a.dim(), "dimension mismatch");
        let n = n_components(self.dim);
        let x = a.to_mandel();
        let mut y = [0.0; MAX_COMPONENTS];
        for (r, yr) in y.iter_mut().enumerate().take(n) {
            *yr = (0..n).map(|c| self.m[r][c] * x[c]).sum();
        }
        SymTensor2::from_mandel(self.dim, &y)
    }

    /// `a : K : a`
    pub fn quadratic(&self, a: &SymTensor2) -> f64 {
        self.apply(a).dot(a)
    }

    /// Frobenius norm of the tensor (Mandel matrix norm).
    pub fn norm(&self) -> f64 {
        let n = n_components(self.dim);
        (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| self.m[a][b] * self.m[a][b]).sum::<f64>().sqrt()
    }
}

impl fmt::Debug for Tensor4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = n_components(self.dim);
        let rows: Vec<&[f64]> = self.m[..n].iter().map(|r| &r[..n]).collect();
        write!(f, "Tensor4(mandel {:?})", rows)
    }
}

/// Admissible subspace S for the plastic strain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceS {
    #[default]
    FullSymmetric,
    Deviatoric,
}

impl SubspaceS {
    pub fn project(&self, a: &SymTensor2) -> SymTensor2 {
        match self {
            SubspaceS::FullSymmetric => *a,
            SubspaceS::Deviatoric => {
                let d = a.dim();
                a.axpy(-a.trace() / d as f64, &SymTensor2::identity(d))
            }
        }
    }

    pub fn contains(&self, a: &SymTensor2, tol: f64) -> bool {
        match self {
            SubspaceS::FullSymmetric => true,
            SubspaceS::Deviatoric => a.trace().abs() <= tol,
        }
    }

    /// Dimension of S inside the symmetric matrices.
    pub fn dimension(&self, dim: usize) -> usize {
        match self {
            SubspaceS::FullSymmetric => n_components(dim),
            SubspaceS::Deviatoric => n_components(dim) - 1,
        }
    }
}

/// Closed convex set K ⊂ S.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexSetK {
    #[default]
    #[serde(rename = "all-of-s")]
    AllOfS,
    FrobeniusBall {
        radius: f64,
    },
}

impl ConvexSetK {
    /// Assumes `a` already lies in S.
    pub fn project(&self, a: &SymTensor2) -> SymTensor2 {
        match *self {
            ConvexSetK::AllOfS => *a,
            ConvexSetK::FrobeniusBall { radius } => {
                let n = a.norm();
                if n <= radius {
                    return *a;
                }
                // radial scaling may overshoot by an ulp; membership must be exact
                let p = a.scale(radius / n);
                if p.norm() <= radius {
                    p
                } else {
                    a.scale(radius / n * (1.0 - 4.0 * f64::EPSILON))
                }
            }
        }
    }

    /// Exact membership test (no tolerance).
    pub fn contains(&self, a: &SymTensor2) -> bool {
        match *self {
            ConvexSetK::AllOfS => true,
            ConvexSetK::FrobeniusBall { radius } => a.norm() <= radius,
        }
    }

    /// Outward unit normal direction if `a` sits on the boundary of K.
    pub fn active_normal(&self, a: &SymTensor2, tol: f64) -> Option<SymTensor2> {
        match *self {
            ConvexSetK::AllOfS => None,
            ConvexSetK::FrobeniusBall { radius } => {
                let n = a.norm();
                (n >= radius * (1.0 - tol) && n > 0.0).then(|| a.scale(1.0 / n))
            }
        }
    }
}

/// Frobenius product with off-diagonal pairs counted twice.
pub fn frob_inner(a: &SymTensor2, b: &SymTensor2) -> Result<f64, TensorError> {
    if a.dim() != b.dim() {
        return Err(TensorError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(a.dot(b))
}

pub fn project_subspace(a: &SymTensor2, s: SubspaceS) -> SymTensor2 {
    s.project(a)
}

pub fn project_k(a: &SymTensor2, k: ConvexSetK) -> SymTensor2 {
    k.project(a)
}

pub fn apply_tensor4(k: &Tensor4, a: &SymTensor2) -> Result<SymTensor2, TensorError> {
    if k.dim() != a.dim() {
        return Err(TensorError::DimensionMismatch(k.dim(), a.dim()));
    }
    Ok(k.apply(a))
}
