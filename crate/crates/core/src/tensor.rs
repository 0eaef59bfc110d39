//! Points, matrices and fully symmetric covariant tensors of rank 1 to 4.
//!
//! [`SymTensor`] stores one value per non-decreasing multi-index
//! `i1 <= i2 <= ... <= ir`, laid out in lexicographic order, so permutation
//! symmetry is structural. [`DenseTensor`] is the plain `n^r` array used for
//! objects that are only partially symmetric (raised Christoffel-type
//! symbols, the A-tensor).

use std::fmt;
use std::ops::{Deref, Index};

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition numbers above this are rejected by [`invert_matrix`].
pub const MAX_CONDITION: f64 = 1e12;

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Chart coordinates of a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Dimension("a point needs at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate {bad}")));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.set(i, i, *d);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("matrix rows must form a non-empty square".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        Ok(Matrix { dim, data })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Matrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        Matrix::from_fn(self.dim, |i, j| {
            (0..self.dim).map(|k| self.get(i, k) * other.get(k, j)).sum()
        })
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.dim, |i, j| self.get(j, i))
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Quadratic form `v^T M w`.
    pub fn bilinear(&self, v: &[f64], w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += v[i] * self.get(i, j) * w[j];
            }
        }
        acc
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let sym = DMatrix::from_fn(self.dim, self.dim, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)));
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn to_sym_tensor(&self) -> SymTensor {
        let mut t = SymTensor::zeros(self.dim, 2);
        for i in 0..self.dim {
            for j in i..self.dim {
                t.set(&[i, j], 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        t
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

/// Iterates the non-decreasing multi-indices of length `rank` over `0..dim`
/// in lexicographic order. This is the storage order of [`SymTensor`].
pub fn sorted_multi_indices(dim: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..dim).combinations_with_replacement(rank)
}

/// Iterates all `dim^rank` index tuples in row-major order.
pub fn all_multi_indices(dim: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..rank).map(|_| 0..dim).multi_cartesian_product()
}

/// Fully symmetric covariant tensor stored by sorted multi-index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymTensorRecord", into = "SymTensorRecord")]
pub struct SymTensor {
    dim: usize,
    rank: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SymTensorRecord {
    dim: usize,
    rank: usize,
    values: Vec<f64>,
}

impl From<SymTensor> for SymTensorRecord {
    fn from(t: SymTensor) -> Self {
        SymTensorRecord {
            dim: t.dim,
            rank: t.rank,
            values: t.data,
        }
    }
}

impl TryFrom<SymTensorRecord> for SymTensor {
    type Error = Error;

    fn try_from(r: SymTensorRecord) -> Result<Self> {
        SymTensor::from_values(r.dim, r.rank, r.values)
    }
}

impl SymTensor {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        assert!(dim > 0 && (1..=4).contains(&rank), "SymTensor needs dim >= 1 and rank in 1..=4");
        SymTensor {
            dim,
            rank,
            data: vec![0.0; binomial(dim + rank - 1, rank)],
        }
    }

    /// Builds a tensor from values listed in sorted multi-index order.
    pub fn from_values(dim: usize, rank: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !(1..=4).contains(&rank) {
            return Err(Error::Dimension(format!("unsupported dim {dim} / rank {rank}")));
        }
        let expected = binomial(dim + rank - 1, rank);
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "rank-{rank} tensor in dimension {dim} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(SymTensor { dim, rank, data: values })
    }

    pub fn from_fn(dim: usize, rank: usize, f: impl Fn(&[usize]) -> f64) -> Self {
        let data = sorted_multi_indices(dim, rank).map(|idx| f(&idx)).collect();
        SymTensor { dim, rank, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Values in sorted multi-index order.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.rank {
            return Err(Error::Dimension(format!(
                "index of length {} for a rank-{} tensor",
                idx.len(),
                self.rank
            )));
        }
        if let Some(bad) = idx.iter().find(|&&i| i >= self.dim) {
            return Err(Error::Dimension(format!("index {bad} out of range 0..{}", self.dim)));
        }
        let mut sorted = [0usize; 4];
        sorted[..self.rank].copy_from_slice(idx);
        sorted[..self.rank].sort_unstable();
        Ok(lex_rank(&sorted[..self.rank], self.dim))
    }

    /// Value at any permutation of the index tuple.
    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(idx)?])
    }

    /// Panicking variant of [`SymTensor::get`] for internal loops over valid
    /// indices.
    #[inline]
    pub fn at(&self, idx: &[usize]) -> f64 {
        self.get(idx).expect("index within tensor bounds")
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx).expect("index within tensor bounds");
        self.data[o] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SymTensor) -> f64 {
        assert_eq!((self.dim, self.rank), (other.dim, other.rank));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, s: f64) -> SymTensor {
        SymTensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut d = DenseTensor::zeros(self.dim, self.rank);
        for (k, idx) in all_multi_indices(self.dim, self.rank).enumerate() {
            d.data[k] = self.at(&idx);
        }
        d
    }

    /// Rank-2 tensors as a matrix.
    pub fn to_matrix(&self) -> Matrix {
        assert_eq!(self.rank, 2, "to_matrix needs a rank-2 tensor");
        Matrix::from_fn(self.dim, |i, j| self.at(&[i, j]))
    }

    /// `T(v, ..., v)`.
    pub fn full_contraction(&self, v: &[f64]) -> f64 {
        self.to_dense().full_contraction(v)
    }
}

/// Position of a sorted multi-index in lexicographic order.
fn lex_rank(sorted: &[usize], dim: usize) -> usize {
    let r = sorted.len();
    let mut pos = 0;
    let mut lo = 0;
    for (k, &ik) in sorted.iter().enumerate() {
        let remaining = r - k - 1;
        for v in lo..ik {
            // multisets of size `remaining` drawn from v..dim
            pos += binomial(dim - v + remaining - 1, remaining);
        }
        lo = ik;
    }
    pos
}

impl fmt::Display for SymTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymTensor(dim={}, rank={}, {:?})", self.dim, self.rank, self.data)
    }
}

/// Dense `n^r` array, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dim: usize,
    rank: usize,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        DenseTensor {
            dim,
            rank,
            data: vec![0.0; dim.pow(rank as u32)],
        }
    }

    pub fn from_fn(dim: usize, rank: usize, f: impl Fn(&[usize]) -> f64) -> Self {
        let data = all_multi_indices(dim, rank).map(|idx| f(&idx)).collect();
        DenseTensor { dim, rank, data }
    }

    pub fn from_values(dim: usize, rank: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim.pow(rank as u32) {
            return Err(Error::Dimension(format!(
                "dense rank-{rank} array in dimension {dim} needs {} values, got {}",
                dim.pow(rank as u32),
                data.len()
            )));
        }
        Ok(DenseTensor { dim, rank, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.flat(idx);
        self.data[o] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        assert_eq!((self.dim, self.rank), (other.dim, other.rank));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn add_scaled(&self, other: &DenseTensor, s: f64) -> DenseTensor {
        assert_eq!((self.dim, self.rank), (other.dim, other.rank));
        DenseTensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    /// Contracts every slot with `v`.
    pub fn full_contraction(&self, v: &[f64]) -> f64 {
        let n = self.dim;
        let mut acc = self.data.clone();
        for _ in 0..self.rank {
            acc = acc
                .chunks(n)
                .map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect();
        }
        acc[0]
    }

    /// Contracts all slots but the first with `v`: `out_i = T_i v...v`.
    pub fn contract_trailing(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut acc = self.data.clone();
        for _ in 1..self.rank {
            acc = acc
                .chunks(n)
                .map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect();
        }
        acc
    }

    /// Contracts all slots but the first two with `v`: `out_ij = T_ij v...v`.
    pub fn contract_to_matrix(&self, v: &[f64]) -> Matrix {
        assert!(self.rank >= 2);
        let n = self.dim;
        let mut acc = self.data.clone();
        for _ in 2..self.rank {
            acc = acc
                .chunks(n)
                .map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect();
        }
        Matrix { dim: n, data: acc }
    }
}

impl Index<&[usize]> for DenseTensor {
    type Output = f64;

    fn index(&self, idx: &[usize]) -> &f64 {
        &self.data[self.flat(idx)]
    }
}

/// Symmetric part of a dense array: each sorted index receives the mean of
/// the array over all `r!` orderings of that index.
pub fn symmetrize(full: &DenseTensor) -> Result<SymTensor> {
    if full.dim == 0 || !(1..=4).contains(&full.rank) {
        return Err(Error::Dimension(format!(
            "cannot symmetrize a rank-{} array in dimension {}",
            full.rank, full.dim
        )));
    }
    let r = full.rank;
    let count: f64 = (1..=r).product::<usize>() as f64;
    Ok(SymTensor::from_fn(full.dim, r, |idx| {
        idx.iter()
            .copied()
            .permutations(r)
            .map(|p| full.get(&p))
            .sum::<f64>()
            / count
    }))
}

/// `out[i][j][k] = sum_l m_inv[i][l] t(l, j, k)`.
pub fn raise_first_index(m_inv: &Matrix, t: &SymTensor) -> Result<DenseTensor> {
    if t.rank() != 3 || t.dim() != m_inv.dim() {
        return Err(Error::Dimension(format!(
            "raise_first_index needs a rank-3 tensor of dim {}, got rank {} dim {}",
            m_inv.dim(),
            t.rank(),
            t.dim()
        )));
    }
    let n = t.dim();
    Ok(DenseTensor::from_fn(n, 3, |idx| {
        (0..n).map(|l| m_inv.get(idx[0], l) * t.at(&[l, idx[1], idx[2]])).sum()
    }))
}

fn eigen_of(m: &Matrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let asym = m.asymmetry();
    if asym > 1e-8 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let d = m.dim();
    let sym = DMatrix::from_fn(d, d, |i, j| 0.5 * (m.get(i, j) + m.get(j, i)));
    Ok(SymmetricEigen::new(sym))
}

fn condition_of(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> f64 {
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l.abs()), hi.max(l.abs())));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// 2-norm condition number of a symmetric matrix.
pub fn condition_number(m: &Matrix) -> Result<f64> {
    Ok(condition_of(&eigen_of(m)?))
}

/// Inverse of a symmetric matrix, rejecting condition numbers above
/// [`MAX_CONDITION`].
pub fn invert_matrix(m: &Matrix) -> Result<Matrix> {
    invert_matrix_bounded(m, MAX_CONDITION)
}

pub fn invert_matrix_bounded(m: &Matrix, max_condition: f64) -> Result<Matrix> {
    let eig = eigen_of(m)?;
    let condition = condition_of(&eig);
    if !(condition <= max_condition) {
        return Err(Error::Singular { condition });
    }
    let d = m.dim();
    let vecs = &eig.eigenvectors;
    let vals = &eig.eigenvalues;
    Ok(Matrix::from_fn(d, |i, j| {
        (0..d).map(|k| vecs[(i, k)] * vecs[(j, k)] / vals[k]).sum()
    }))
}

/// Solves `m x = rhs` for symmetric `m`; returns the solution and the
/// condition estimate.
pub fn solve_symmetric(m: &Matrix, rhs: &[f64], max_condition: f64) -> Result<(Vec<f64>, f64)> {
    let eig = eigen_of(m)?;
    let condition = condition_of(&eig);
    if !(condition <= max_condition) {
        return Err(Error::Singular { condition });
    }
    let d = m.dim();
    let vecs = &eig.eigenvectors;
    let proj: Vec<f64> = (0..d)
        .map(|k| (0..d).map(|i| vecs[(i, k)] * rhs[i]).sum::<f64>() / eig.eigenvalues[k])
        .collect();
    let x = (0..d).map(|i| (0..d).map(|k| vecs[(i, k)] * proj[k]).sum()).collect();
    Ok((x, condition))
}

/// Solves a general (not necessarily symmetric) square system by LU.
pub(crate) fn solve_general(m: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let d = m.dim();
    let a = DMatrix::from_fn(d, d, |i, j| m.get(i, j));
    let b = nalgebra::DVector::from_column_slice(rhs);
    a.lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or(Error::Singular {
            condition: f64::INFINITY,
        })
}
