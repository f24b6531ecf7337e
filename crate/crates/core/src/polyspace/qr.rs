use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::DomainEstimate;
use crate::linalg::{frobenius, Householder};

/// Relative size below which a diagonal entry of `R` counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Thin QR factorization `B = Q R` with `diag(R) > 0`.
///
/// When `B = diag(sqrt(tau)) C` for a basis matrix `C` over a domain
/// estimate, the columns of `C R^{-1}` are the values of an orthonormal
/// basis of the spanned space in `L^2(tau)`, and `q_kj / sqrt(tau_k)` is the
/// `j`-th orthonormal function at the `k`-th active point.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl QrFactors {
    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    /// Factors of the first `n` columns of the factored matrix.
    ///
    /// Householder QR processes columns left to right, so these coincide with
    /// the factorization of the leading `n` columns computed on its own.
    pub fn prefix(&self, n: usize) -> QrFactors {
        assert!(n <= self.ncols());
        QrFactors {
            q: self.q.columns(0, n).into_owned(),
            r: self.r.view((0, 0), (n, n)).into_owned(),
        }
    }

    /// Orthonormal basis values `phi_j(z_k) = q_kj / sqrt(w_k)` at the
    /// active points of `estimate`.
    pub fn orthonormal_values(&self, estimate: &DomainEstimate) -> DMatrix<f64> {
        let mut phi = self.q.clone();
        for (k, &w) in estimate.weights().iter().enumerate() {
            let s = 1.0 / w.sqrt();
            phi.row_mut(k).scale_mut(s);
        }
        phi
    }
}

/// Thin QR with the positive-diagonal sign convention.
///
/// Fails with [`Error::RankDeficient`] when some `|R_ii|` falls below
/// `1e-12 * ||B||_F`.
pub fn qr_factor(b: DMatrix<f64>) -> Result<QrFactors> {
    let nested = qr_factor_nested(b)?;
    if nested.rank < nested.factors.ncols() {
        let i = nested.rank;
        return Err(Error::RankDeficient {
            column: i,
            value: nested.factors.r[(i, i)].abs(),
            threshold: nested.thresholds[i],
        });
    }
    Ok(nested.factors)
}

/// Factorization of a matrix whose leading column blocks are used on their
/// own, e.g. a basis matrix for nested subspaces over a fixed estimate.
#[derive(Debug, Clone)]
pub struct NestedQr {
    pub factors: QrFactors,
    /// Largest `n` such that the first `n` columns pass the rank test.
    pub rank: usize,
    thresholds: Vec<f64>,
}

impl NestedQr {
    /// Factors for the leading `n` columns, or the rank failure that blocks
    /// them.
    pub fn leading(&self, n: usize) -> Result<QrFactors> {
        if n > self.factors.ncols() {
            return Err(Error::RankDeficient {
                column: self.factors.ncols(),
                value: 0.0,
                threshold: 0.0,
            });
        }
        if n > self.rank {
            let i = self.rank;
            return Err(Error::RankDeficient {
                column: i,
                value: self.factors.r[(i, i)].abs(),
                threshold: self.thresholds[i],
            });
        }
        Ok(self.factors.prefix(n))
    }
}

pub fn qr_factor_nested(b: DMatrix<f64>) -> Result<NestedQr> {
    let (m, n) = b.shape();
    if m < n {
        return Err(Error::InvalidInput(format!(
            "QR needs at least as many rows as columns, got {m} x {n}"
        )));
    }
    // Threshold for the leading n columns uses the norm of those columns.
    let mut thresholds = Vec::with_capacity(n);
    let mut acc = 0.0;
    for j in 0..n {
        let c = b.column(j);
        acc += c.dot(&c);
        thresholds.push(RANK_TOLERANCE * acc.sqrt());
    }
    debug_assert!((acc.sqrt() - frobenius(&b)).abs() <= 1e-12 * acc.sqrt().max(1.0));
    let h = Householder::new(b);
    let rank = h
        .raw_diagonal()
        .iter()
        .zip(&thresholds)
        .position(|(d, t)| d.abs() < *t || !d.is_finite())
        .unwrap_or(n);
    Ok(NestedQr {
        factors: QrFactors {
            q: h.thin_q(true),
            r: h.r(true),
        },
        rank,
        thresholds,
    })
}
