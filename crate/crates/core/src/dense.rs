//! Dense classical reference implementations.
//!
//! Everything in this module is deliberately direct: circulant matrices are
//! materialized entry by entry, eigenvalues come from the O(N^2) discrete
//! Fourier sum rather than an FFT, and matrix functions go through explicit
//! diagonalization. These routines are the ground truth that the statevector
//! pipelines are checked against, so they must not share code with them.

use num_complex::Complex64;

use crate::error::{Result, SimError};

/// Relative cutoff below which an eigenvalue is treated as zero when
/// computing condition numbers.
pub const SINGULAR_EIGENVALUE_CUTOFF: f64 = 1e-12;

/// How the leading (diagonal) weight of a circulant parameter vector enters
/// the realized operator: as-is, or with its sign flipped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignMode {
    Plain,
    NegateV0,
}

/// Dense complex matrix in row-major order.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseOperator {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseOperator {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(SimError::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self.get(i, j) * x[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.cols != other.rows {
            return Err(SimError::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = DenseOperator::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn dagger(&self) -> DenseOperator {
        DenseOperator::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn kron(&self, other: &DenseOperator) -> DenseOperator {
        let mut out = DenseOperator::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        out.set(i * other.rows + p, j * other.cols + q, a * other.get(p, q));
                    }
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: Complex64) -> DenseOperator {
        DenseOperator::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * s)
    }

    pub fn add(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(SimError::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        Ok(DenseOperator::from_fn(self.rows, self.cols, |i, j| {
            self.get(i, j) + other.get(i, j)
        }))
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max-entry deviation of `U† U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let gram = self.dagger().matmul(self).expect("square");
        gram.max_abs_diff(&DenseOperator::identity(self.rows))
    }
}

/// Symmetric DFT matrix `F` with entries `e^{2 pi i j k / n} / sqrt(n)`.
pub fn dft_matrix(n: usize) -> DenseOperator {
    let norm = 1.0 / (n as f64).sqrt();
    DenseOperator::from_fn(n, n, |k, j| {
        let angle = 2.0 * std::f64::consts::PI * (j as f64) * (k as f64) / (n as f64);
        Complex64::from_polar(norm, angle)
    })
}

/// Cyclic shift `V_j`, mapping `|k>` to `|(k - j) mod n>`.
pub fn shift_matrix(n: usize, j: usize) -> DenseOperator {
    let mut m = DenseOperator::zeros(n, n);
    for col in 0..n {
        let row = (col + n - (j % n)) % n;
        m.set(row, col, Complex64::new(1.0, 0.0));
    }
    m
}

fn signed_weights(c: &[f64], sign_mode: SignMode) -> Vec<f64> {
    let mut w = c.to_vec();
    if sign_mode == SignMode::NegateV0 && !w.is_empty() {
        w[0] = -w[0];
    }
    w
}

/// Dense circulant with entry `(k, m) = c_{(m - k) mod N}`; row 0 reads off
/// the parameter vector in order.
pub fn dense_circulant(c: &[f64], sign_mode: SignMode) -> DenseOperator {
    let n = c.len();
    let w = signed_weights(c, sign_mode);
    DenseOperator::from_fn(n, n, |k, m| Complex64::new(w[(m + n - k) % n], 0.0))
}

/// Eigenvalues `Lambda_k = sum_j c_j e^{2 pi i j k / N}` by the direct
/// Fourier sum. Index order matches the DFT matrix columns.
pub fn dft_eigenvalues(c: &[f64], sign_mode: SignMode) -> Vec<Complex64> {
    let n = c.len();
    let w = signed_weights(c, sign_mode);
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &cj) in w.iter().enumerate() {
                let angle = 2.0 * std::f64::consts::PI * (j as f64) * (k as f64) / (n as f64);
                acc += Complex64::from_polar(1.0, angle) * cj;
            }
            acc
        })
        .collect()
}

/// `F . diag(f(Lambda)) . F†` for an arbitrary scalar function of the
/// eigenvalues: matrix functions of circulants (apply, exp, inverse) in one
/// place.
pub fn oracle_matfun(
    c: &[f64],
    sign_mode: SignMode,
    f: impl Fn(Complex64) -> Complex64,
) -> Result<DenseOperator> {
    let n = c.len();
    let eigs = dft_eigenvalues(c, sign_mode);
    let fmat = dft_matrix(n);
    let mut diag = DenseOperator::zeros(n, n);
    for (k, lam) in eigs.iter().enumerate() {
        diag.set(k, k, f(*lam));
    }
    fmat.matmul(&diag)?.matmul(&fmat.dagger())
}

/// Cyclic convolution `(a * b)_j = sum_{j1 + j2 = j mod N} a_{j1} b_{j2}`
/// by the direct double loop.
pub fn cyclic_convolution(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(SimError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    let mut out = vec![0.0; n];
    for (j1, &x) in a.iter().enumerate() {
        for (j2, &y) in b.iter().enumerate() {
            out[(j1 + j2) % n] += x * y;
        }
    }
    Ok(out)
}

/// `max |Lambda| / min |Lambda|`, with `f64::INFINITY` marking a singular
/// spectrum.
pub fn condition_number(eigenvalues: &[Complex64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for lam in eigenvalues {
        let m = lam.norm();
        lo = lo.min(m);
        hi = hi.max(m);
    }
    if lo <= SINGULAR_EIGENVALUE_CUTOFF * hi.max(1.0) {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn banded_len_to_dim(len: usize) -> Result<usize> {
    if len == 0 || len % 2 == 0 {
        return Err(SimError::InvalidInput(format!(
            "banded parameter vector must have odd length 2N-1, got {len}"
        )));
    }
    Ok((len + 1) / 2)
}

/// Dense Toeplitz matrix `T_{ik} = t_{i-k}` from parameters indexed
/// `-(N-1) .. N-1`, stored as a slice of length `2N-1` with `t_j` at
/// position `j + N - 1`.
pub fn dense_toeplitz(t: &[f64]) -> Result<DenseOperator> {
    let n = banded_len_to_dim(t.len())?;
    Ok(DenseOperator::from_fn(n, n, |i, k| {
        Complex64::new(t[i + (n - 1) - k], 0.0)
    }))
}

/// Dense Hankel matrix `H_{ik} = h_{N-1-i-k}` from parameters indexed
/// `-(N-1) .. N-1`, stored like [`dense_toeplitz`].
pub fn dense_hankel(h: &[f64]) -> Result<DenseOperator> {
    let n = banded_len_to_dim(h.len())?;
    Ok(DenseOperator::from_fn(n, n, |i, k| {
        Complex64::new(h[2 * (n - 1) - i - k], 0.0)
    }))
}

/// `sum_j c_j V_j (x) U_j` with explicit unitary blocks.
pub fn dense_block_unitary(c: &[f64], blocks: &[DenseOperator]) -> Result<DenseOperator> {
    if c.len() != blocks.len() {
        return Err(SimError::DimensionMismatch {
            expected: c.len(),
            got: blocks.len(),
        });
    }
    let n = c.len();
    let bdim = blocks[0].rows();
    let mut acc = DenseOperator::zeros(n * bdim, n * bdim);
    for (j, &cj) in c.iter().enumerate() {
        if blocks[j].rows() != bdim || blocks[j].cols() != bdim {
            return Err(SimError::DimensionMismatch {
                expected: bdim,
                got: blocks[j].rows(),
            });
        }
        let term = shift_matrix(n, j).kron(&blocks[j]).scaled(cj.into());
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

/// Phase-rule blocks `U_j = e^{i j theta}`: scalar factors on each shift.
pub fn dense_block_phase(c: &[f64], theta: f64) -> DenseOperator {
    let n = c.len();
    let mut acc = DenseOperator::zeros(n, n);
    for (j, &cj) in c.iter().enumerate() {
        let phase = Complex64::from_polar(cj, theta * j as f64);
        let term = shift_matrix(n, j).scaled(phase);
        acc = acc.add(&term).expect("same dims");
    }
    acc
}

/// `sum_{j j'} c_{j j'} V_j (x) V_{j'}` from a rectangular weight table
/// (`weights[j][j']`, first index driving the first tensor factor).
pub fn dense_block_circulant(weights: &[Vec<f64>]) -> Result<DenseOperator> {
    let n = weights.len();
    if n == 0 {
        return Err(SimError::InvalidInput("empty weight table".into()));
    }
    let np = weights[0].len();
    let mut acc = DenseOperator::zeros(n * np, n * np);
    for (j, row) in weights.iter().enumerate() {
        if row.len() != np {
            return Err(SimError::DimensionMismatch {
                expected: np,
                got: row.len(),
            });
        }
        for (jp, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let term = shift_matrix(n, j)
                .kron(&shift_matrix(np, jp))
                .scaled(w.into());
            acc = acc.add(&term)?;
        }
    }
    Ok(acc)
}

/// Euclidean norm of a complex vector.
pub fn l2_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Plain Euclidean distance between complex vectors.
pub fn l2_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Distance after aligning global phase: `sqrt(2 - 2 |<a|b>|)` for unit
/// vectors, generalized through the overlap for unnormalized input.
pub fn phase_aligned_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let na = l2_norm(a);
    let nb = l2_norm(b);
    let d2 = na * na + nb * nb - 2.0 * overlap.norm();
    d2.max(0.0).sqrt()
}

/// Normalize a complex vector in place; errors on (near-)zero input.
pub fn normalized(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = l2_norm(x);
    if n < 1e-300 {
        return Err(SimError::InvalidInput("cannot normalize zero vector".into()));
    }
    Ok(x.iter().map(|a| a / n).collect())
}
