//! Hyperbolic-cross index sets, tensor Legendre bases and their
//! orthonormalization over a domain estimate.

mod index_set;
mod legendre;
mod qr;

use nalgebra::{DMatrix, DVector};

pub use index_set::{
    hyperbolic_cross, hyperbolic_cross_ladder, hyperbolic_cross_with_capacity, IndexSet,
    DEFAULT_CAPACITY,
};
pub use legendre::{legendre, legendre_normalized};
pub use qr::{qr_factor, qr_factor_nested, NestedQr, QrFactors, RANK_TOLERANCE};

use crate::error::{Error, Result};
use crate::grid::DomainEstimate;
use crate::linalg::solve_upper;

/// Basis values `psi_j(z_i)` at a list of points, one row per point.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub values: DMatrix<f64>,
}

impl BasisEval {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Rows for the given point indices and the first `ncols` basis functions.
    pub fn select_rows(&self, rows: &[usize], ncols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), ncols, |i, j| self.values[(rows[i], j)])
    }
}

/// Evaluates the tensor-product normalized Legendre basis of `set` at
/// `points` (each of length `set.dim()`, inside `[-1, 1]^d`).
pub fn eval_basis<'a>(set: &IndexSet, points: impl IntoIterator<Item = &'a [f64]>) -> Result<BasisEval> {
    let dim = set.dim();
    let stride = set.max_degree() + 1;
    let points: Vec<&[f64]> = points.into_iter().collect();
    let mut values = DMatrix::zeros(points.len(), set.len());
    let mut table = vec![0.0; dim * stride];
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::InvalidInput(format!(
                "point of dimension {} for a {dim}-dimensional basis",
                p.len()
            )));
        }
        for (k, &y) in p.iter().enumerate() {
            if !(-1.0..=1.0).contains(&y) {
                return Err(Error::InvalidInput(format!("coordinate {y} outside [-1, 1]")));
            }
            legendre_normalized(y, &mut table[k * stride..(k + 1) * stride]);
        }
        for (j, nu) in set.indices().iter().enumerate() {
            values[(i, j)] = nu
                .iter()
                .enumerate()
                .map(|(k, &deg)| table[k * stride + deg as usize])
                .product();
        }
    }
    Ok(BasisEval { values })
}

/// `B = diag(sqrt(w)) C` where the rows of `basis` are the basis values at
/// the active points of `estimate`, in order.
pub fn assemble_b(estimate: &DomainEstimate, basis: &BasisEval) -> Result<DMatrix<f64>> {
    if basis.nrows() != estimate.len() {
        return Err(Error::InvalidInput(format!(
            "{} basis rows for {} active points",
            basis.nrows(),
            estimate.len()
        )));
    }
    let mut b = basis.values.clone();
    for (k, &w) in estimate.weights().iter().enumerate() {
        b.row_mut(k).scale_mut(w.sqrt());
    }
    Ok(b)
}

/// Same as [`assemble_b`], gathering the active rows and the first `ncols`
/// columns from a basis evaluated on the whole grid.
pub fn assemble_b_from_grid(estimate: &DomainEstimate, grid_basis: &BasisEval, ncols: usize) -> DMatrix<f64> {
    let active = estimate.active();
    let sqrt_w: Vec<f64> = estimate.weights().iter().map(|w| w.sqrt()).collect();
    let mut b = DMatrix::zeros(active.len(), ncols);
    for j in 0..ncols {
        let src = grid_basis.values.column(j);
        let mut dst = b.column_mut(j);
        for (k, &g) in active.iter().enumerate() {
            dst[k] = sqrt_w[k] * src[g];
        }
    }
    b
}

/// Values of `sum_i c_i phi_i` at every row of `basis`, computed as
/// `C (R^{-1} c)` with a triangular solve.
///
/// Only the first `r.ncols()` columns of `basis` are used.
pub fn eval_on_grid(basis: &BasisEval, r: &DMatrix<f64>, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = r.ncols();
    if coeffs.len() != n || basis.ncols() < n || r.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "nonconformal evaluation: basis has {} columns, R is {}x{}, {} coefficients",
            basis.ncols(),
            r.nrows(),
            n,
            coeffs.len()
        )));
    }
    let psi_coeffs = solve_upper(r, coeffs).ok_or(Error::RankDeficient {
        column: 0,
        value: 0.0,
        threshold: 0.0,
    })?;
    Ok(basis.values.columns(0, n) * psi_coeffs)
}
