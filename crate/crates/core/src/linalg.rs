//! Dense kernels shared by the orthonormalization and least-squares code.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, which is column-major, so every
//! Householder reflector and every column update below runs over a contiguous
//! slice.

use nalgebra::{DMatrix, DVector};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Compact Householder factorization of a tall matrix.
///
/// Column `k` of `work` holds the reflector `v_k` in rows `k..m`; the strict
/// upper triangle holds `R`, whose diagonal lives in `diag`.
pub(crate) struct Householder {
    work: DMatrix<f64>,
    diag: Vec<f64>,
    betas: Vec<f64>,
}

impl Householder {
    pub(crate) fn new(a: DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        assert!(m >= n, "Householder QR needs rows >= cols");
        let mut work = a;
        let mut diag = vec![0.0; n];
        let mut betas = vec![0.0; n];
        let data = work.as_mut_slice();
        for k in 0..n {
            let (head, rest) = data.split_at_mut((k + 1) * m);
            let v = &mut head[k * m + k..];
            let norm_sq = dot(v, v);
            if norm_sq == 0.0 {
                continue;
            }
            let norm = norm_sq.sqrt();
            let x0 = v[0];
            let alpha = if x0 > 0.0 { -norm } else { norm };
            v[0] = x0 - alpha;
            let vtv = norm_sq - x0 * x0 + v[0] * v[0];
            let beta = 2.0 / vtv;
            let v: &[f64] = v;
            for j in (k + 1)..n {
                let col = &mut rest[(j - k - 1) * m + k..(j - k) * m];
                let s = beta * dot(v, col);
                axpy(-s, v, col);
            }
            diag[k] = alpha;
            betas[k] = beta;
        }
        Self { work, diag, betas }
    }

    pub(crate) fn ncols(&self) -> usize {
        self.work.ncols()
    }

    /// Diagonal of `R` before any sign normalization.
    pub(crate) fn raw_diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Upper-triangular factor, with rows flipped so that its diagonal is
    /// nonnegative when `positive` is set.
    pub(crate) fn r(&self, positive: bool) -> DMatrix<f64> {
        let n = self.ncols();
        let mut r = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..j {
                r[(i, j)] = self.work[(i, j)];
            }
            r[(j, j)] = self.diag[j];
        }
        if positive {
            for i in 0..n {
                if self.diag[i] < 0.0 {
                    for j in i..n {
                        r[(i, j)] = -r[(i, j)];
                    }
                }
            }
        }
        r
    }

    /// Thin orthonormal factor (`m x n`), consistent with [`Householder::r`].
    pub(crate) fn thin_q(&self, positive: bool) -> DMatrix<f64> {
        let (m, n) = self.work.shape();
        let mut q = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            q[(j, j)] = 1.0;
        }
        let work = self.work.as_slice();
        let qd = q.as_mut_slice();
        for k in (0..n).rev() {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let v = &work[k * m + k..(k + 1) * m];
            for j in k..n {
                let col = &mut qd[j * m + k..(j + 1) * m];
                let s = beta * dot(v, col);
                axpy(-s, v, col);
            }
        }
        if positive {
            for j in 0..n {
                if self.diag[j] < 0.0 {
                    for x in &mut qd[j * m..(j + 1) * m] {
                        *x = -*x;
                    }
                }
            }
        }
        q
    }

    /// Overwrites `b` with `Q_full^T b`.
    pub(crate) fn apply_qt(&self, b: &mut [f64]) {
        let (m, n) = self.work.shape();
        assert_eq!(b.len(), m);
        let work = self.work.as_slice();
        for k in 0..n {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let v = &work[k * m + k..(k + 1) * m];
            let tail = &mut b[k..];
            let s = beta * dot(v, tail);
            axpy(-s, v, tail);
        }
    }
}

/// Smallest singular value of a matrix with at least as many rows as columns.
///
/// Tall inputs are first reduced to their triangular factor, which has the
/// same singular values.
pub(crate) fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    let (m, n) = a.shape();
    if n == 0 {
        return f64::INFINITY;
    }
    if m < n {
        return 0.0;
    }
    let square = if m > n {
        Householder::new(a.clone()).r(false)
    } else {
        a.clone()
    };
    square
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solves `R x = c` for upper-triangular `R` by back substitution.
pub(crate) fn solve_upper(r: &DMatrix<f64>, c: &DVector<f64>) -> Option<DVector<f64>> {
    r.solve_upper_triangular(c)
}

/// Returns `X = Y R^{-1}` for upper-triangular `R`, i.e. solves `X R = Y`.
pub(crate) fn right_solve_upper(y: &DMatrix<f64>, r: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    r.tr_solve_upper_triangular(&y.transpose()).map(|x| x.transpose())
}

pub(crate) fn frobenius(a: &DMatrix<f64>) -> f64 {
    dot(a.as_slice(), a.as_slice()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorization_reproduces_input() {
        let a = DMatrix::from_fn(7, 3, |i, j| ((i * 3 + j * 5) % 7) as f64 - 2.5 + (i as f64) * 0.1);
        let h = Householder::new(a.clone());
        let q = h.thin_q(true);
        let r = h.r(true);
        assert!((&q * &r - &a).abs().max() < 1e-12);
        assert!((q.transpose() * &q - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        assert!((0..3).all(|i| r[(i, i)] > 0.0));
    }

    #[test]
    fn apply_qt_matches_explicit_q() {
        let a = DMatrix::from_fn(6, 2, |i, j| (i as f64 + 1.0).powi(j as i32));
        let h = Householder::new(a);
        let q = h.thin_q(false);
        let b: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let mut qtb = b.clone();
        h.apply_qt(&mut qtb);
        let expected = q.transpose() * DVector::from_vec(b);
        assert!((qtb[0] - expected[0]).abs() < 1e-13);
        assert!((qtb[1] - expected[1]).abs() < 1e-13);
    }

    #[test]
    fn zero_column_is_skipped() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let h = Householder::new(a);
        assert_eq!(h.raw_diagonal()[1], 0.0);
    }
}
