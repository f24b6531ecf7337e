//! Per-level quality measures and their aggregation over trials.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::driver::Method;
use crate::error::{Error, Result};
use crate::lsq::{stability_alpha, LsSystem};

/// Metrics of one level of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    /// Subspace dimension `N_l`.
    pub dim: usize,
    /// Samples used by the fit, `M_l`.
    pub samples: usize,
    /// Cumulative oracle calls `F_l`.
    pub evaluations: u64,
    /// `E_l`, relative `L2` error over the true discrete domain.
    pub rel_error: f64,
    /// `V_l`, mismatch between the true domain and the estimate sampled at
    /// this level.
    pub mismatch: f64,
    /// `R_l = (F_l - M_l) / F_l`.
    pub rejection_rate: f64,
    /// `1 / alpha`; NaN when the true domain cannot support the space.
    pub inv_alpha: f64,
    /// `1 / beta`.
    pub inv_beta: f64,
    /// The least-squares matrix was numerically singular.
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub trial: u64,
    pub master_seed: u64,
    pub levels: Vec<LevelRecord>,
}

/// `||f - f~|| / ||f||` in the discrete `L2` norm with weights `weights`.
pub fn relative_error(f_true: &[f64], f_approx: &[f64], weights: &[f64]) -> Result<f64> {
    if f_true.len() != f_approx.len() || f_true.len() != weights.len() {
        return Err(Error::InvalidInput("relative_error: length mismatch".into()));
    }
    let mut num = NeumaierSum::default();
    let mut den = NeumaierSum::default();
    for ((&f, &g), &w) in f_true.iter().zip(f_approx).zip(weights) {
        num.add(w * (f - g) * (f - g));
        den.add(w * f * f);
    }
    let den = den.value();
    if den == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((num.value() / den).sqrt())
}

/// `|true_set Δ estimate| / |true_set|` for sorted, deduplicated index sets.
pub fn mismatch_volume(true_set: &[usize], estimate: &[usize]) -> Result<f64> {
    if true_set.is_empty() {
        return Err(Error::EmptyTrueDomain);
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < true_set.len() && j < estimate.len() {
        match true_set[i].cmp(&estimate[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let sym = true_set.len() + estimate.len() - 2 * common;
    Ok(sym as f64 / true_set.len() as f64)
}

/// `(F - M) / F`.
pub fn rejection_rate(evaluations: u64, samples: u64) -> Result<f64> {
    if evaluations == 0 {
        return Err(Error::InvalidInput("rejection rate of a run with no evaluations".into()));
    }
    if samples > evaluations {
        return Err(Error::InvalidInput(format!(
            "{samples} samples from only {evaluations} evaluations"
        )));
    }
    Ok((evaluations - samples) as f64 / evaluations as f64)
}

/// `1 / sigma`, with `+inf` standing for a vanishing singular value.
pub fn reciprocal(sigma: f64) -> f64 {
    if sigma > 0.0 {
        1.0 / sigma
    } else {
        f64::INFINITY
    }
}

/// `1 / beta = 1 / sigma_min(A)`.
pub fn inv_beta(system: &LsSystem) -> f64 {
    reciprocal(crate::linalg::smallest_singular_value(&system.a))
}

/// `1 / alpha`, using the basis orthonormalized over the true domain (via
/// its triangular factor) and the fit's sample weights.
pub fn inv_alpha(omega_r: &DMatrix<f64>, psi_rows: &DMatrix<f64>, weights: &[f64]) -> Result<f64> {
    stability_alpha(omega_r, psi_rows, weights).map(reciprocal)
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        if self.sum.is_finite() {
            self.sum + self.comp
        } else {
            self.sum
        }
    }
}

/// How per-trial values are averaged at a fixed level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MeanKind {
    #[default]
    Arithmetic,
    Geometric,
}

fn mean(values: impl Iterator<Item = f64>, kind: MeanKind) -> f64 {
    let mut s = NeumaierSum::default();
    let mut n = 0usize;
    for v in values {
        match kind {
            MeanKind::Arithmetic => s.add(v),
            MeanKind::Geometric => s.add(v.ln()),
        }
        n += 1;
    }
    let m = s.value() / n as f64;
    match kind {
        MeanKind::Arithmetic => m,
        MeanKind::Geometric => m.exp(),
    }
}

/// Mean of each metric over trials at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub dim: usize,
    pub samples: usize,
    pub evaluations: f64,
    pub rel_error: f64,
    pub mismatch: f64,
    pub rejection_rate: f64,
    pub inv_alpha: f64,
    pub inv_beta: f64,
    pub trials: usize,
}

/// Level-wise means over runs that all completed the same levels.
///
/// Evaluation counts are always averaged arithmetically; `kind` applies to
/// the metrics.
pub fn aggregate(runs: &[RunRecord], kind: MeanKind) -> Result<Vec<LevelSummary>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    let levels = first.levels.len();
    if runs.iter().any(|r| r.levels.len() != levels) {
        return Err(Error::InvalidInput("runs have different numbers of levels".into()));
    }
    let out = (0..levels)
        .map(|l| {
            let at = || runs.iter().map(move |r| &r.levels[l]);
            let lv = &first.levels[l];
            LevelSummary {
                level: lv.level,
                dim: lv.dim,
                samples: lv.samples,
                evaluations: mean(at().map(|x| x.evaluations as f64), MeanKind::Arithmetic),
                rel_error: mean(at().map(|x| x.rel_error), kind),
                mismatch: mean(at().map(|x| x.mismatch), kind),
                rejection_rate: mean(at().map(|x| x.rejection_rate), kind),
                inv_alpha: mean(at().map(|x| x.inv_alpha), kind),
                inv_beta: mean(at().map(|x| x.inv_beta), kind),
                trials: runs.len(),
            }
        })
        .collect();
    Ok(out)
}
