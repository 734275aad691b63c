//! Minimal sparse and banded linear algebra for the truth discretization.
//!
//! The truth matrices arising from 1D interval meshes and structured 2D
//! triangulations have small bandwidth when vertices are numbered
//! lexicographically, so a banded LU (without pivoting, valid for the
//! diagonally dominant backward-Euler system matrices) and a banded Cholesky
//! (for the symmetric positive definite inner-product matrices) cover all
//! large solves. Everything parameter-dependent is formed as a linear
//! combination of parameter-independent CSR components.

use nalgebra::{DMatrix, DVector};

use crate::error::{RbMpcError, Result};

/// Compressed-sparse-row matrix with `f64` entries.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet out of bounds");
            per_row[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in &mut per_row {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut last_col = usize::MAX;
            for &(c, v) in row.iter() {
                if c == last_col {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last_col = c;
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Number of rows.
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    /// Number of columns.
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Iterates over the stored entries of one row as `(col, value)` pairs.
    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.indptr[row];
        let hi = self.indptr[row + 1];
        self.indices[lo..hi]
            .iter()
            .copied()
            .zip(self.data[lo..hi].iter().copied())
    }

    /// Matrix-vector product `A x`.
    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = DVector::zeros(self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for (c, v) in self.row_entries(r) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
        y
    }

    /// Transposed matrix-vector product `Aᵀ x`.
    pub fn matvec_t(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = DVector::zeros(self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row_entries(r) {
                y[c] += v * x[r];
            }
        }
        y
    }

    /// Quadratic form `xᵀ A y`.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.matvec(y))
    }

    /// Linear combination `Σ cᵢ Aᵢ` of same-shape matrices.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        assert!(!terms.is_empty());
        let (nrows, ncols) = (terms[0].1.nrows, terms[0].1.ncols);
        let mut triplets = Vec::new();
        for &(coeff, mat) in terms {
            assert_eq!((mat.nrows, mat.ncols), (nrows, ncols));
            for r in 0..nrows {
                for (c, v) in mat.row_entries(r) {
                    triplets.push((r, c, coeff * v));
                }
            }
        }
        CsrMatrix::from_triplets(nrows, ncols, &triplets)
    }

    /// Dense copy (intended for small matrices and test oracles).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row_entries(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Maximum relative asymmetry `|A - Aᵀ|_∞ / |A|_∞`; zero for symmetric matrices.
    pub fn asymmetry(&self) -> f64 {
        let mut max_entry: f64 = 0.0;
        let mut max_diff: f64 = 0.0;
        let d = self.to_dense();
        for r in 0..self.nrows {
            for c in 0..self.ncols {
                max_entry = max_entry.max(d[(r, c)].abs());
                max_diff = max_diff.max((d[(r, c)] - d[(c, r)]).abs());
            }
        }
        if max_entry == 0.0 {
            0.0
        } else {
            max_diff / max_entry
        }
    }

    /// Half bandwidths `(lower, upper)` of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for r in 0..self.nrows {
            for (c, _) in self.row_entries(r) {
                if r > c {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }
}

/// LU factorization (no pivoting) of a banded square matrix.
///
/// Valid for the diagonally dominant system matrices `M + τA(μ)` produced by
/// backward Euler on the shipped problems; a vanishing pivot is reported as a
/// [`RbMpcError::SingularSystem`] error rather than silently producing NaNs.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band storage: entry (i, j) lives at `band[i][j - i + kl]`.
    band: Vec<f64>,
}

impl BandedLu {
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * self.width() + (j + self.kl - i)
    }

    /// Factorizes a banded square matrix given in CSR form.
    pub fn factorize(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            band: vec![0.0; n * (kl + ku + 1)],
        };
        for r in 0..n {
            for (c, v) in a.row_entries(r) {
                let k = lu.idx(r, c);
                lu.band[k] += v;
            }
        }
        for k in 0..n {
            let pivot = lu.band[lu.idx(k, k)];
            if pivot.abs() < 1e-300 {
                return Err(RbMpcError::SingularSystem(format!(
                    "zero pivot at row {k} during banded LU"
                )));
            }
            let imax = (k + kl).min(n - 1);
            let jmax = (k + ku).min(n - 1);
            for i in (k + 1)..=imax {
                let ik = lu.idx(i, k);
                let lik = lu.band[ik] / pivot;
                lu.band[ik] = lik;
                if lik != 0.0 {
                    for j in (k + 1)..=jmax {
                        let ukj = lu.band[lu.idx(k, j)];
                        if ukj != 0.0 {
                            let t = lu.idx(i, j);
                            lu.band[t] -= lik * ukj;
                        }
                    }
                }
            }
        }
        Ok(lu)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.clone();
        // Forward substitution with unit-diagonal L.
        for i in 0..self.n {
            let jlo = i.saturating_sub(self.kl);
            let mut acc = x[i];
            for j in jlo..i {
                acc -= self.band[self.idx(i, j)] * x[j];
            }
            x[i] = acc;
        }
        // Backward substitution with U.
        for i in (0..self.n).rev() {
            let jhi = (i + self.ku).min(self.n - 1);
            let mut acc = x[i];
            for j in (i + 1)..=jhi {
                acc -= self.band[self.idx(i, j)] * x[j];
            }
            x[i] = acc / self.band[self.idx(i, i)];
        }
        x
    }

    /// Solves `Aᵀ x = b` using the same factors (`Aᵀ = Uᵀ Lᵀ`).
    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.clone();
        // Forward substitution with Uᵀ (lower triangular, non-unit diagonal).
        for i in 0..self.n {
            let jlo = i.saturating_sub(self.ku);
            let mut acc = x[i];
            for j in jlo..i {
                acc -= self.band[self.idx(j, i)] * x[j];
            }
            x[i] = acc / self.band[self.idx(i, i)];
        }
        // Backward substitution with Lᵀ (unit diagonal).
        for i in (0..self.n).rev() {
            let jhi = (i + self.kl).min(self.n - 1);
            let mut acc = x[i];
            for j in (i + 1)..=jhi {
                acc -= self.band[self.idx(j, i)] * x[j];
            }
            x[i] = acc;
        }
        x
    }
}

/// Cholesky factorization `A = L Lᵀ` of a banded symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    kl: usize,
    /// Lower-band storage: entry (i, j), j ≤ i, lives at `band[i][j - i + kl]`.
    band: Vec<f64>,
}

impl BandedCholesky {
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && j + self.kl >= i);
        i * (self.kl + 1) + (j + self.kl - i)
    }

    /// Factorizes a symmetric positive definite banded matrix; fails if a
    /// nonpositive pivot is encountered (matrix not positive definite).
    pub fn factorize(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let kl = kl.max(ku);
        let mut ch = BandedCholesky {
            n,
            kl,
            band: vec![0.0; n * (kl + 1)],
        };
        for r in 0..n {
            for (c, v) in a.row_entries(r) {
                if c <= r {
                    let k = ch.idx(r, c);
                    ch.band[k] += v;
                }
            }
        }
        for j in 0..n {
            let jlo = j.saturating_sub(kl);
            for k in jlo..j {
                let ljk = ch.band[ch.idx(j, k)];
                if ljk != 0.0 {
                    for i in j..=(k + kl).min(n - 1) {
                        let lik = ch.band[ch.idx(i, k)];
                        let t = ch.idx(i, j);
                        ch.band[t] -= lik * ljk;
                    }
                }
            }
            let d = ch.band[ch.idx(j, j)];
            if d <= 0.0 {
                return Err(RbMpcError::SingularSystem(format!(
                    "nonpositive pivot {d:.3e} at row {j}: matrix is not positive definite"
                )));
            }
            let s = d.sqrt();
            for i in j..=(j + kl).min(n - 1) {
                let t = ch.idx(i, j);
                ch.band[t] /= s;
            }
            let t = ch.idx(j, j);
            ch.band[t] = s;
        }
        Ok(ch)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.clone();
        for i in 0..self.n {
            let jlo = i.saturating_sub(self.kl);
            let mut acc = x[i];
            for j in jlo..i {
                acc -= self.band[self.idx(i, j)] * x[j];
            }
            x[i] = acc / self.band[self.idx(i, i)];
        }
        for i in (0..self.n).rev() {
            let jhi = (i + self.kl).min(self.n - 1);
            let mut acc = x[i];
            for j in (i + 1)..=jhi {
                acc -= self.band[self.idx(j, i)] * x[j];
            }
            x[i] = acc / self.band[self.idx(i, i)];
        }
        x
    }
}
