//! Dense complex matrices on the joint Hilbert space.
//!
//! Tensor order is always transmon ⊗ resonator: the joint basis index of
//! `|k⟩ ⊗ |n⟩` is `k * n_fock + n`.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.cols),
                found: format!("{} rows", other.rows),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("vector of length {}", self.cols),
                found: format!("length {}", v.len()),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().into_iter().sum()
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// `max |M - M†|` over entries; zero for an exactly Hermitian matrix.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut err = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = self.data[i * n + j] - self.data[j * n + i].conj();
                err = err.max(d.norm());
            }
        }
        err
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Eigenvalues of a Hermitian matrix in ascending order.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_square("hermitian_eigenvalues")?;
        let mut v: Vec<f64> = self
            .to_nalgebra()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Matrix exponential.
    pub fn expm(&self) -> Result<Self> {
        self.require_square("expm")?;
        Ok(Self::from_nalgebra(&self.to_nalgebra().exp()))
    }

    fn require_square(&self, what: &'static str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: format!("square matrix for {what}"),
                found: format!("{}x{}", self.rows, self.cols),
            })
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Panics on a shape mismatch; use [`ComplexMatrix::matmul`] for a checked product.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows, b.cols);
    ComplexMatrix::from_fn(a.rows * br, a.cols * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// Truncated ladder operator: `a[n, n+1] = sqrt(n+1)`.
pub fn annihilation(dim: usize) -> Result<ComplexMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension {
            what: "annihilation operator",
            value: dim,
        });
    }
    let mut a = ComplexMatrix::zeros(dim, dim);
    for n in 0..dim - 1 {
        a[(n, n + 1)] = C64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    Ok(a)
}

pub fn creation(dim: usize) -> Result<ComplexMatrix> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number(dim: usize) -> ComplexMatrix {
    let d: Vec<C64> = (0..dim).map(|n| C64::new(n as f64, 0.0)).collect();
    ComplexMatrix::from_diagonal(&d)
}

/// `|i⟩⟨j|` in a space of dimension `dim`.
pub fn projector(dim: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    m[(i, j)] = ONE;
    m
}

/// Truncated coherent state, renormalized after truncation.
pub fn coherent_state(alpha: C64, dim: usize) -> Vec<C64> {
    let mut v = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        v.push(c);
    }
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

pub fn expectation(op: &ComplexMatrix, rho: &DensityMatrix) -> Result<C64> {
    let m = rho.matrix();
    if op.rows != m.rows || op.cols != m.cols {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} operator", m.rows),
            found: format!("{}x{}", op.rows, op.cols),
        });
    }
    // tr(A ρ) = Σ_ij A_ij ρ_ji
    let n = m.rows;
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += op.data[i * n + j] * m.data[j * n + i];
        }
    }
    Ok(acc)
}

/// A Hermitian, unit-trace operator. Positivity is not enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Accepts a matrix that is Hermitian to 1e-9 and has trace 1 to 1e-6.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square density matrix".into(),
                found: format!("{}x{}", matrix.rows, matrix.cols),
            });
        }
        let herm = matrix.hermiticity_error();
        if herm > 1e-9 {
            return Err(Error::OutOfRange {
                what: "density matrix hermiticity error",
                value: herm,
            });
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > 1e-6 {
            return Err(Error::OutOfRange {
                what: "density matrix trace",
                value: tr.re,
            });
        }
        let mut rho = Self { matrix };
        rho.symmetrize();
        Ok(rho)
    }

    pub(crate) fn from_raw(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::OutOfRange {
                what: "state norm",
                value: norm,
            });
        }
        let n = psi.len();
        Ok(Self {
            matrix: ComplexMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj()),
        })
    }

    /// `|level⟩ ⊗ |resonator⟩` with transmon first.
    pub fn product(n_transmon: usize, level: usize, resonator: &[C64]) -> Result<Self> {
        if level >= n_transmon {
            return Err(Error::InvalidDimension {
                what: "transmon level",
                value: level,
            });
        }
        let nf = resonator.len();
        let mut psi = vec![ZERO; n_transmon * nf];
        psi[level * nf..(level + 1) * nf].copy_from_slice(resonator);
        Self::pure(&psi)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Replace ρ with (ρ + ρ†)/2, which also zeroes the imaginary diagonal.
    pub fn symmetrize(&mut self) {
        symmetrize_in_place(&mut self.matrix.data, self.matrix.rows);
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.matrix.hermiticity_error()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .hermitian_eigenvalues()
            .map(|v| v[0])
            .unwrap_or(f64::NAN)
    }
}

pub(crate) fn symmetrize_in_place(data: &mut [C64], n: usize) {
    for i in 0..n {
        data[i * n + i].im = 0.0;
        for j in i + 1..n {
            let avg = (data[i * n + j] + data[j * n + i].conj()) * 0.5;
            data[i * n + j] = avg;
            data[j * n + i] = avg.conj();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn kron_identities() {
        let k = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3));
        assert_eq!(k, ComplexMatrix::identity(6));

        let d = ComplexMatrix::from_diagonal(&[c(0.0), c(1.0)]);
        let k = kron(&d, &ComplexMatrix::identity(2));
        assert_eq!(k.diagonal(), vec![c(0.0), c(0.0), c(1.0), c(1.0)]);
    }

    #[test]
    fn kron_of_two_level_lowering() {
        let a = annihilation(2).unwrap();
        let k = kron(&a, &ComplexMatrix::identity(2));
        for i in 0..4 {
            for j in 0..4 {
                let want = if (i, j) == (0, 2) || (i, j) == (1, 3) {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(k[(i, j)], c(want));
            }
        }
    }

    #[test]
    fn ladder_entries() {
        let a = annihilation(2).unwrap();
        assert_eq!(a.as_slice(), &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!((annihilation(3).unwrap()[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            annihilation(1),
            Err(Error::InvalidDimension { .. })
        ));
    }

    #[test]
    fn coherent_expectations() {
        let alpha = C64::from_polar(0.5, 0.7);
        let rho = DensityMatrix::pure(&coherent_state(alpha, 30)).unwrap();
        let a = annihilation(30).unwrap();
        let got = expectation(&a, &rho).unwrap();
        assert!((got - alpha).norm() < 1e-10);

        let rho = DensityMatrix::pure(&coherent_state(c(0.3), 30)).unwrap();
        let n = expectation(&number(30), &rho).unwrap();
        assert!((n.re - 0.09).abs() < 1e-12);
    }

    #[test]
    fn vacuum_and_identity() {
        let rho = DensityMatrix::pure(&coherent_state(ZERO, 5)).unwrap();
        assert_eq!(expectation(&annihilation(5).unwrap(), &rho).unwrap(), ZERO);
        let one = expectation(&ComplexMatrix::identity(5), &rho).unwrap();
        assert!((one - ONE).norm() < 1e-15);
        assert!(expectation(&ComplexMatrix::identity(4), &rho).is_err());
    }

    #[test]
    fn expm_of_diagonal() {
        let d = ComplexMatrix::from_diagonal(&[I * 0.3, c(-1.0)]);
        let e = d.expm().unwrap();
        assert!((e[(0, 0)] - (I * 0.3).exp()).norm() < 1e-12);
        assert!((e[(1, 1)].re - (-1f64).exp()).abs() < 1e-12);
    }
}
