//! Weighted least-squares fits in an orthonormal basis.
//!
//! Row `i` of the design matrix is `sqrt(w(y_i) / M) phi_j(y_i)` and the
//! right-hand side is `sqrt(w(y_i) / M) f(y_i)`. With Christoffel weights
//! `w = 1 / K` and a uniform base measure this is the matrix of rows of `Q`
//! scaled by `1 / sqrt((M/N) sum_t q_t^2)`, with right-hand side
//! `f / sqrt((M K_est / N) sum_t q_t^2)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::DomainEstimate;
use crate::linalg::{right_solve_upper, smallest_singular_value, Householder};
use crate::polyspace::QrFactors;

/// Relative threshold on `sigma_min / sigma_max` below which a fit is
/// flagged as numerically singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-14;

/// Sample weighting in the least-squares functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// `w = 1 / K`, the reciprocal of the normalized reciprocal Christoffel
    /// function of the space over the estimate.
    Christoffel,
    /// `w = 1`, plain least squares.
    Unit,
}

/// Design matrix, right-hand side and the sample bookkeeping behind them.
#[derive(Debug, Clone)]
pub struct LsSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Grid index of each row's sample point.
    pub sample_indices: Vec<usize>,
    /// `w(y_i)` for each row.
    pub weights: Vec<f64>,
}

fn scale_rows(phi: DMatrix<f64>, values: &[f64], weighting: Weighting, sample_indices: Vec<usize>) -> LsSystem {
    let (m, n) = phi.shape();
    let mut a = phi;
    let mut b = DVector::zeros(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let w = match weighting {
            Weighting::Christoffel => {
                let s: f64 = a.row(i).iter().map(|x| x * x).sum();
                n as f64 / s
            }
            Weighting::Unit => 1.0,
        };
        let scale = (w / m as f64).sqrt();
        a.row_mut(i).scale_mut(scale);
        b[i] = scale * values[i];
        weights.push(w);
    }
    LsSystem {
        a,
        b,
        sample_indices,
        weights,
    }
}

fn check_values(samples: &[(usize, f64)]) -> Result<()> {
    if let Some((g, v)) = samples.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite sample value {v} at grid index {g}")));
    }
    Ok(())
}

/// Builds the system from the rows of `Q` at the samples' positions in the
/// estimate that `qr` was computed over.
///
/// `samples` holds `(grid index, f value)` pairs; repeated points give
/// repeated rows.
pub fn assemble(
    qr: &QrFactors,
    estimate: &DomainEstimate,
    samples: &[(usize, f64)],
    weighting: Weighting,
) -> Result<LsSystem> {
    check_values(samples)?;
    if qr.q.nrows() != estimate.len() {
        return Err(Error::InvalidInput("Q was not built over this estimate".into()));
    }
    let n = qr.ncols();
    let tau = estimate.weights();
    let mut phi = DMatrix::zeros(samples.len(), n);
    for (i, &(g, _)) in samples.iter().enumerate() {
        let p = estimate.position(g).ok_or(Error::SampleOutsideEstimate(g))?;
        let s = 1.0 / tau[p].sqrt();
        for j in 0..n {
            phi[(i, j)] = qr.q[(p, j)] * s;
        }
    }
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(scale_rows(phi, &values, weighting, samples.iter().map(|s| s.0).collect()))
}

/// Builds the system from raw basis values at the sample points, mapping them
/// to the orthonormal basis through `phi = psi R^{-1}`.
///
/// Unlike [`assemble`], samples need not belong to the estimate the factor
/// `r` was computed over.
pub fn assemble_from_basis(
    psi_rows: &DMatrix<f64>,
    r: &DMatrix<f64>,
    samples: &[(usize, f64)],
    weighting: Weighting,
) -> Result<LsSystem> {
    check_values(samples)?;
    if psi_rows.nrows() != samples.len() || psi_rows.ncols() != r.ncols() {
        return Err(Error::InvalidInput("basis rows do not match samples and R".into()));
    }
    let phi = right_solve_upper(psi_rows, r).ok_or(Error::RankDeficient {
        column: 0,
        value: 0.0,
        threshold: 0.0,
    })?;
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(scale_rows(phi, &values, weighting, samples.iter().map(|s| s.0).collect()))
}

/// Least-squares coefficients in the orthonormal basis and the smallest
/// singular value of the design matrix.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coeffs: DVector<f64>,
    pub sigma_min: f64,
    /// Set when `sigma_min < 1e-14 sigma_max`; the coefficients are then the
    /// minimum-norm solution.
    pub singular: bool,
    /// Fitted values on the whole grid, once evaluated.
    pub grid_values: Option<DVector<f64>>,
}

/// Solves `min ||A x - b||_2` through a Householder QR of `A`.
pub fn solve(system: &LsSystem) -> Result<FitResult> {
    let (m, n) = system.a.shape();
    if m < n {
        return Err(Error::Underdetermined { rows: m, cols: n });
    }
    let h = Householder::new(system.a.clone());
    let mut qtb = system.b.as_slice().to_vec();
    h.apply_qt(&mut qtb);
    let rhs = DVector::from_column_slice(&qtb[..n]);
    let r = h.r(false);
    let svd = r.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let singular = !(sigma_min >= SINGULAR_TOLERANCE * sigma_max) || sigma_max == 0.0;
    let coeffs = if singular {
        svd.solve(&rhs, SINGULAR_TOLERANCE * sigma_max)
            .map_err(|e| Error::InvalidInput(e.to_string()))?
    } else {
        r.solve_upper_triangular(&rhs)
            .ok_or(Error::Underdetermined { rows: m, cols: n })?
    };
    Ok(FitResult {
        coeffs,
        sigma_min,
        singular,
        grid_values: None,
    })
}

/// The stability constant `alpha`: smallest singular value of
/// `(sqrt(w(y_i) / M) phi_j(y_i))` where `phi = psi R_Omega^{-1}` is
/// orthonormal over the true domain and `w` are the weights used by the fit.
pub fn stability_alpha(omega_r: &DMatrix<f64>, psi_rows: &DMatrix<f64>, weights: &[f64]) -> Result<f64> {
    let (m, n) = psi_rows.shape();
    if weights.len() != m || omega_r.ncols() != n {
        return Err(Error::InvalidInput("alpha: mismatched dimensions".into()));
    }
    if m < n {
        return Err(Error::Underdetermined { rows: m, cols: n });
    }
    let mut b = right_solve_upper(psi_rows, omega_r).ok_or(Error::RankDeficient {
        column: 0,
        value: 0.0,
        threshold: 0.0,
    })?;
    for (i, &w) in weights.iter().enumerate() {
        b.row_mut(i).scale_mut((w / m as f64).sqrt());
    }
    Ok(smallest_singular_value(&b))
}
