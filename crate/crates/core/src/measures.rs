//! Christoffel-function weights, the per-basis-function sampling measures
//! and the hierarchical sample schedule.
//!
//! With an orthonormal basis `phi_1..phi_N` of the current space over the
//! current estimate, the sample with global number `i` is drawn from
//! `|phi_j|^2 dtau`, whose discrete form is the squared column `j` of `Q`.
//! Between levels, basis functions that already existed receive
//! `k_l - k_{l-1}` new draws each and new basis functions receive `k_l`
//! draws each; earlier samples are kept.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::DomainEstimate;
use crate::polyspace::QrFactors;

/// Subspace dimension `N_l`, sampling ratio `k_l` and cumulative sample
/// count `M_l = k_l N_l` of one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ScheduleLevel {
    pub dim: usize,
    pub ratio: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Schedule {
    levels: Vec<ScheduleLevel>,
}

impl Schedule {
    /// Checks `0 < N_1 < N_2 < ...`, `1 <= k_1 <= k_2 <= ...` and
    /// `M_l = k_l N_l`.
    pub fn new(levels: Vec<ScheduleLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("schedule needs at least one level".into()));
        }
        let mut prev = ScheduleLevel {
            dim: 0,
            ratio: 1,
            samples: 0,
        };
        for (l, lv) in levels.iter().enumerate() {
            if lv.dim <= prev.dim || lv.ratio < prev.ratio || lv.ratio == 0 || lv.samples != lv.dim * lv.ratio {
                return Err(Error::InvalidInput(format!("invalid schedule at level {}: {lv:?}", l + 1)));
            }
            prev = *lv;
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[ScheduleLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level `l` (1-based).
    pub fn level(&self, l: usize) -> ScheduleLevel {
        self.levels[l - 1]
    }

    /// Level `l - 1`, with level 0 being all zeros.
    pub fn previous(&self, l: usize) -> ScheduleLevel {
        if l <= 1 {
            ScheduleLevel {
                dim: 0,
                ratio: 0,
                samples: 0,
            }
        } else {
            self.levels[l - 2]
        }
    }

    pub fn max_dim(&self) -> usize {
        self.levels.last().map_or(0, |l| l.dim)
    }
}

/// `k_l` is the closest integer to `ln N_l`, clamped below by 1 and made
/// non-decreasing by a running maximum.
pub fn build_schedule(dims: &[usize]) -> Result<Schedule> {
    let mut ratio = 1;
    let levels = dims
        .iter()
        .map(|&n| {
            let k = ((n as f64).ln().round() as usize).max(1);
            ratio = ratio.max(k);
            ScheduleLevel {
                dim: n,
                ratio,
                samples: n * ratio,
            }
        })
        .collect();
    Schedule::new(levels)
}

/// Normalized reciprocal Christoffel function `K = (1/N) sum_j |phi_j|^2` and
/// the least-squares weight `w = 1/K`, at the active points of an estimate.
#[derive(Debug, Clone)]
pub struct ChristoffelWeights {
    pub kvals: Vec<f64>,
    pub wvals: Vec<f64>,
}

pub fn christoffel(qr: &QrFactors, estimate: &DomainEstimate) -> Result<ChristoffelWeights> {
    let (rows, n) = qr.q.shape();
    if rows != estimate.len() {
        return Err(Error::InvalidInput(format!(
            "Q has {rows} rows for an estimate of {} points",
            estimate.len()
        )));
    }
    let mut row_sq = vec![0.0; rows];
    for col in qr.q.column_iter() {
        for (acc, q) in row_sq.iter_mut().zip(col.iter()) {
            *acc += q * q;
        }
    }
    let kvals: Vec<f64> = row_sq
        .iter()
        .zip(estimate.weights())
        .map(|(s, w)| s / (n as f64 * w))
        .collect();
    if let Some(position) = kvals.iter().position(|&k| !(k > 0.0)) {
        return Err(Error::ZeroChristoffel { position });
    }
    let wvals = kvals.iter().map(|k| 1.0 / k).collect();
    Ok(ChristoffelWeights { kvals, wvals })
}

/// Basis function assigned to every new sample of one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureAssignment {
    pub level: usize,
    /// Global 1-based number of the first new sample, `M_{l-1} + 1`.
    pub first_sample: usize,
    /// 0-based basis index for samples `first_sample, first_sample + 1, ...`.
    pub basis: Vec<usize>,
}

impl MeasureAssignment {
    /// `(global sample number, 0-based basis index)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.basis
            .iter()
            .enumerate()
            .map(|(offset, &j)| (self.first_sample + offset, j))
    }
}

pub fn assign_measures(schedule: &Schedule, level: usize) -> Result<MeasureAssignment> {
    if level == 0 || level > schedule.len() {
        return Err(Error::InvalidInput(format!(
            "level {level} outside 1..={}",
            schedule.len()
        )));
    }
    let cur = schedule.level(level);
    let prev = schedule.previous(level);
    let extra = cur.ratio - prev.ratio;
    let mut basis = Vec::with_capacity(cur.samples - prev.samples);
    for j in 0..prev.dim {
        basis.extend(std::iter::repeat(j).take(extra));
    }
    for j in prev.dim..cur.dim {
        basis.extend(std::iter::repeat(j).take(cur.ratio));
    }
    debug_assert_eq!(basis.len(), cur.samples - prev.samples);
    Ok(MeasureAssignment {
        level,
        first_sample: prev.samples + 1,
        basis,
    })
}

/// Inverse-CDF draw: the first index whose cumulative probability strictly
/// exceeds `u` (with `u` scaled by the total mass).
pub fn draw_index(probabilities: &[f64], u: f64) -> usize {
    let total: f64 = probabilities.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        acc += p;
        if p > 0.0 {
            last_positive = i;
        }
        if acc > target {
            return i;
        }
    }
    last_positive
}

/// Reusable inverse-CDF sampler over a fixed discrete distribution.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    cdf: Vec<f64>,
}

impl DiscreteSampler {
    pub fn new(probabilities: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = probabilities
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::InvalidInput("distribution has no positive mass".into()));
        }
        Ok(Self { cdf })
    }

    /// Distribution `{|q_kj|^2}_k` of column `j` of `Q`.
    pub fn for_column(qr: &QrFactors, j: usize) -> Result<Self> {
        Self::new(qr.q.column(j).iter().map(|q| q * q))
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().expect("sampler is nonempty")
    }

    pub fn sample_with(&self, u: f64) -> usize {
        let target = u * self.total();
        let i = self.cdf.partition_point(|&c| c <= target);
        if i < self.cdf.len() {
            i
        } else {
            // u * total rounded up to the total; take the last point with mass.
            let mut j = self.cdf.len() - 1;
            while j > 0 && self.cdf[j] == self.cdf[j - 1] {
                j -= 1;
            }
            j
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sample_with(rng.gen::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{restrict_measure, Grid};
    use crate::polyspace::{assemble_b_from_grid, eval_basis, hyperbolic_cross, qr_factor};

    #[test]
    fn schedule_examples() {
        let s = build_schedule(&[3, 7, 20]).unwrap();
        let ks: Vec<_> = s.levels().iter().map(|l| l.ratio).collect();
        let ms: Vec<_> = s.levels().iter().map(|l| l.samples).collect();
        assert_eq!(ks, vec![1, 2, 3]);
        assert_eq!(ms, vec![3, 14, 60]);

        let s = build_schedule(&[1]).unwrap();
        assert_eq!(s.level(1), ScheduleLevel { dim: 1, ratio: 1, samples: 1 });

        let s = build_schedule(&[100]).unwrap();
        assert_eq!(s.level(1).ratio, 5);
        assert_eq!(s.level(1).samples, 500);
    }

    #[test]
    fn schedule_validation() {
        assert!(build_schedule(&[5, 5]).is_err());
        assert!(build_schedule(&[0]).is_err());
        assert!(build_schedule(&[]).is_err());
        assert!(Schedule::new(vec![ScheduleLevel { dim: 2, ratio: 2, samples: 3 }]).is_err());
    }

    #[test]
    fn first_level_assignment() {
        let s = Schedule::new(vec![ScheduleLevel { dim: 3, ratio: 2, samples: 6 }]).unwrap();
        let a = assign_measures(&s, 1).unwrap();
        assert_eq!(a.first_sample, 1);
        assert_eq!(a.basis, vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn equal_ratios_draw_only_new_functions() {
        let s = Schedule::new(vec![
            ScheduleLevel { dim: 2, ratio: 2, samples: 4 },
            ScheduleLevel { dim: 4, ratio: 2, samples: 8 },
        ])
        .unwrap();
        let a = assign_measures(&s, 2).unwrap();
        assert_eq!(a.first_sample, 5);
        assert_eq!(a.basis, vec![2, 2, 3, 3]);
    }

    #[test]
    fn growing_ratio_assignment() {
        let s = Schedule::new(vec![
            ScheduleLevel { dim: 2, ratio: 1, samples: 2 },
            ScheduleLevel { dim: 3, ratio: 2, samples: 6 },
        ])
        .unwrap();
        let a = assign_measures(&s, 2).unwrap();
        assert_eq!(a.basis, vec![0, 1, 2, 2]);
        let pairs: Vec<_> = a.pairs().collect();
        assert_eq!(pairs, vec![(3, 0), (4, 1), (5, 2), (6, 2)]);
        assert!(assign_measures(&s, 3).is_err());
    }

    #[test]
    fn draw_index_examples() {
        assert_eq!(draw_index(&[1.0, 0.0, 0.0], 0.0), 0);
        assert_eq!(draw_index(&[1.0, 0.0, 0.0], 0.999), 0);
        assert_eq!(draw_index(&[0.25, 0.25, 0.5], 0.5), 2);
        assert_eq!(draw_index(&[0.25, 0.25, 0.5], 0.49), 1);
        let s = DiscreteSampler::new([0.25, 0.25, 0.5]).unwrap();
        assert_eq!(s.sample_with(0.5), 2);
        assert_eq!(s.sample_with(0.0), 0);
        let s = DiscreteSampler::new([0.5, 0.5, 0.0]).unwrap();
        assert_eq!(s.sample_with(1.0), 1);
    }

    #[test]
    fn constant_basis_christoffel_is_one() {
        let g = Grid::build(2, 20, 1).unwrap();
        let est = restrict_measure(&g, 0..12).unwrap();
        let set = hyperbolic_cross(2, 0).unwrap();
        let basis = eval_basis(&set, g.points()).unwrap();
        let qr = qr_factor(assemble_b_from_grid(&est, &basis, 1)).unwrap();
        let c = christoffel(&qr, &est).unwrap();
        assert!(c.kvals.iter().all(|k| (k - 1.0).abs() < 1e-14));
        assert!(c.wvals.iter().all(|w| (w - 1.0).abs() < 1e-14));
    }

    #[test]
    fn linear_christoffel_matches_closed_form() {
        // On a dense grid over [-1, 1], phi = {1, sqrt(3) y} is nearly
        // orthonormal, so K(y) ~ (1 + 3 y^2) / 2.
        let g = Grid::build(1, 20000, 2).unwrap();
        let est = DomainEstimate::full(&g);
        let set = hyperbolic_cross(1, 1).unwrap();
        let basis = eval_basis(&set, g.points()).unwrap();
        let qr = qr_factor(assemble_b_from_grid(&est, &basis, 2)).unwrap();
        let c = christoffel(&qr, &est).unwrap();
        for (k, p) in g.points().enumerate().take(200) {
            let y = p[0];
            assert!((c.kvals[k] - (1.0 + 3.0 * y * y) / 2.0).abs() < 0.05);
        }
        let s: f64 = c.kvals.iter().zip(est.weights()).map(|(k, w)| k * w).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
