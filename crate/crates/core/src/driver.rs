//! The sampling/fitting/domain-update loop for the four methods.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blackbox::{BlackBox, EvalResult, Indicator, Problem};
use crate::error::{Error, Result};
use crate::grid::{restrict_measure, trial_rng, DomainEstimate, Grid};
use crate::lsq::{assemble, assemble_from_basis, solve, FitResult, LsSystem, Weighting};
use crate::measures::{assign_measures, christoffel, ChristoffelWeights, DiscreteSampler, Schedule};
use crate::metrics::{inv_alpha, mismatch_volume, reciprocal, rejection_rate, relative_error, LevelRecord, RunRecord};
use crate::polyspace::{
    assemble_b_from_grid, eval_basis, eval_on_grid, qr_factor, qr_factor_nested, BasisEval, IndexSet, NestedQr,
    QrFactors,
};

/// Default cap on consecutive rejected draws for one sample slot.
pub const DEFAULT_MAX_REDRAWS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Uniform Monte Carlo sampling with unweighted least squares.
    #[serde(rename = "MC-LS")]
    McLs,
    /// Christoffel sampling over the known true domain.
    #[serde(rename = "ASGD-LS")]
    AsgdLs,
    /// Christoffel sampling over a learned domain estimate.
    #[serde(rename = "ASUD-LS")]
    AsudLs,
    /// As `AsudLs`, also fitting finite values observed outside the domain.
    #[serde(rename = "ASUD-ALS")]
    AsudAls,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::McLs, Method::AsgdLs, Method::AsudLs, Method::AsudAls];

    pub fn name(self) -> &'static str {
        match self {
            Method::McLs => "MC-LS",
            Method::AsgdLs => "ASGD-LS",
            Method::AsudLs => "ASUD-LS",
            Method::AsudAls => "ASUD-ALS",
        }
    }

    pub fn mode(self) -> SamplingMode {
        match self {
            Method::AsudAls => SamplingMode::Augmented,
            _ => SamplingMode::Standard,
        }
    }

    /// Whether the method updates a domain estimate between levels.
    fn learns_domain(self) -> bool {
        matches!(self, Method::AsudLs | Method::AsudAls)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// Acceptance rule for a draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Keep only draws inside the domain of interest.
    Standard,
    /// Keep every finite draw; only undefined values are rejected.
    Augmented,
}

/// An accepted draw. `inside` is false only for finite values outside the
/// domain kept in augmented mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub grid_index: usize,
    pub value: f64,
    pub inside: bool,
}

/// Samples and rejections accumulated over the levels of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplingState {
    /// Accepted samples in draw order; never reordered or pruned.
    pub samples: Vec<Sample>,
    pub rejected: Vec<(usize, EvalResult)>,
    pub evaluations: u64,
}

impl SamplingState {
    /// Samples inside the domain.
    pub fn accepted(&self) -> impl Iterator<Item = &Sample> + '_ {
        self.samples.iter().filter(|s| s.inside)
    }

    /// Finite samples outside the domain (augmented mode only).
    pub fn accepted_outside(&self) -> impl Iterator<Item = &Sample> + '_ {
        self.samples.iter().filter(|s| !s.inside)
    }

    /// Number of rejected draws, `T`.
    pub fn rejected_count(&self) -> u64 {
        self.rejected.len() as u64
    }

    /// `(grid index, value)` pairs of every sample used by the fit.
    pub fn fit_samples(&self) -> Vec<(usize, f64)> {
        self.samples.iter().map(|s| (s.grid_index, s.value)).collect()
    }

    fn absorb(&mut self, slot: SlotOutcome) {
        self.samples.push(slot.sample);
        self.rejected.extend(slot.rejected);
        self.evaluations += slot.evaluations;
    }
}

/// Result of filling one sample slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub sample: Sample,
    pub rejected: Vec<(usize, EvalResult)>,
    pub evaluations: u64,
}

/// Draws from `sampler` (whose positions map to grid indices via `support`)
/// until a draw is accepted under `mode`.
pub fn rejection_sample<R: Rng + ?Sized>(
    sampler: &DiscreteSampler,
    support: &[usize],
    grid: &Grid,
    problem: &mut Problem<'_>,
    mode: SamplingMode,
    rng: &mut R,
    max_redraws: u64,
) -> Result<SlotOutcome> {
    if max_redraws == 0 {
        return Err(Error::InvalidInput("max_redraws must be at least 1".into()));
    }
    if sampler.len() != support.len() {
        return Err(Error::InvalidInput("sampler and support sizes differ".into()));
    }
    let mut rejected = Vec::new();
    let mut evaluations = 0;
    loop {
        let g = support[sampler.sample(rng)];
        let v = problem.evaluate(grid.point(g));
        evaluations += 1;
        let inside = problem.indicator().accepts(v);
        let keep = match mode {
            SamplingMode::Standard => inside.then_some(v),
            SamplingMode::Augmented => v.finite().map(EvalResult::Finite),
        };
        if let Some(EvalResult::Finite(value)) = keep {
            return Ok(SlotOutcome {
                sample: Sample {
                    grid_index: g,
                    value,
                    inside,
                },
                rejected,
                evaluations,
            });
        }
        rejected.push((g, v));
        if rejected.len() as u64 >= max_redraws {
            return Err(Error::RedrawLimit { limit: max_redraws });
        }
    }
}

/// Next domain estimate as sorted grid indices.
///
/// Standard: `({Q(f~) = 1} ∪ S) \ R`. Augmented: `({Q(f~) = 1} ∪ inside)
/// \ (outside ∪ R)`.
pub fn update_domain(
    grid_len: usize,
    grid_values: &[f64],
    indicator: &Indicator,
    state: &SamplingState,
    mode: SamplingMode,
) -> Result<Vec<usize>> {
    if grid_values.len() != grid_len {
        return Err(Error::InvalidInput(format!(
            "{} fitted values for a grid of {grid_len} points",
            grid_values.len()
        )));
    }
    let mut member: Vec<bool> = grid_values.iter().map(|&v| indicator.accepts_value(v)).collect();
    for s in &state.samples {
        member[s.grid_index] = s.inside || mode == SamplingMode::Standard;
    }
    for &(g, _) in &state.rejected {
        member[g] = false;
    }
    if mode == SamplingMode::Augmented {
        for s in state.accepted_outside() {
            member[s.grid_index] = false;
        }
    }
    let out: Vec<usize> = member.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
    if out.is_empty() {
        return Err(Error::EmptyEstimate);
    }
    Ok(out)
}

/// The true discrete domain and the function values on it. Evaluations
/// made here are instrumentation and never count towards `F_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub omega: Vec<usize>,
    pub values: Vec<f64>,
}

impl GroundTruth {
    pub fn compute(grid: &Grid, oracle: &dyn BlackBox, indicator: &Indicator) -> Self {
        let mut omega = Vec::new();
        let mut values = Vec::new();
        for i in 0..grid.len() {
            if let EvalResult::Finite(v) = oracle.eval(grid.point(i)) {
                if indicator.accepts_value(v) {
                    omega.push(i);
                    values.push(v);
                }
            }
        }
        Self { omega, values }
    }

    pub fn from_parts(omega: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if omega.len() != values.len() {
            return Err(Error::InvalidInput("ground truth indices and values differ in length".into()));
        }
        if omega.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("ground truth indices must be strictly increasing".into()));
        }
        Ok(Self { omega, values })
    }

    /// `|Z_Omega| / K`.
    pub fn fraction(&self, grid: &Grid) -> f64 {
        self.omega.len() as f64 / grid.len() as f64
    }
}

/// Everything shared by the trials of one (function, dimension) cell.
pub struct Setup {
    grid: Arc<Grid>,
    oracle: Arc<dyn BlackBox>,
    indicator: Indicator,
    index_set: IndexSet,
    schedule: Schedule,
    basis: BasisEval,
    truth: GroundTruth,
    full: DomainEstimate,
    omega: DomainEstimate,
    omega_qr: NestedQr,
    full_qr: OnceLock<std::result::Result<NestedQr, String>>,
    uniform: DiscreteSampler,
}

impl Setup {
    /// `truth` is computed from the oracle when not supplied.
    pub fn new(
        grid: Arc<Grid>,
        oracle: Arc<dyn BlackBox>,
        indicator: Indicator,
        index_set: IndexSet,
        schedule: Schedule,
        truth: Option<GroundTruth>,
    ) -> Result<Self> {
        let n_max = schedule.max_dim();
        if index_set.dim() != grid.dim() {
            return Err(Error::InvalidInput(format!(
                "index set of dimension {} on a {}-dimensional grid",
                index_set.dim(),
                grid.dim()
            )));
        }
        if index_set.len() < n_max {
            return Err(Error::InvalidInput(format!(
                "schedule needs {n_max} basis functions, index set has {}",
                index_set.len()
            )));
        }
        if grid.len() < n_max {
            return Err(Error::InvalidInput(format!(
                "grid of {} points cannot support {n_max} basis functions",
                grid.len()
            )));
        }
        let index_set = index_set.prefix(n_max);
        let basis = eval_basis(&index_set, grid.points())?;
        let truth = match truth {
            Some(t) => {
                if t.omega.last().is_some_and(|&g| g >= grid.len()) {
                    return Err(Error::InvalidInput("ground truth index outside the grid".into()));
                }
                t
            }
            None => GroundTruth::compute(&grid, oracle.as_ref(), &indicator),
        };
        if truth.omega.is_empty() {
            return Err(Error::EmptyTrueDomain);
        }
        let omega = restrict_measure(&grid, truth.omega.iter().copied())?;
        let cols = n_max.min(omega.len());
        let omega_qr = qr_factor_nested(assemble_b_from_grid(&omega, &basis, cols))?;
        let full = DomainEstimate::full(&grid);
        let uniform = DiscreteSampler::new(grid.weights().iter().copied())?;
        Ok(Self {
            grid,
            oracle,
            indicator,
            index_set,
            schedule,
            basis,
            truth,
            full,
            omega,
            omega_qr,
            full_qr: OnceLock::new(),
            uniform,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn indicator(&self) -> &Indicator {
        &self.indicator
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn basis(&self) -> &BasisEval {
        &self.basis
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// The true domain as a restricted measure.
    pub fn omega(&self) -> &DomainEstimate {
        &self.omega
    }

    /// Factors of the basis orthonormalized over the true domain.
    pub fn omega_qr(&self, n: usize) -> Result<QrFactors> {
        self.omega_qr.leading(n)
    }

    fn full_qr(&self, n: usize) -> Result<QrFactors> {
        let nested = self.full_qr.get_or_init(|| {
            qr_factor_nested(self.basis.values.scale(1.0 / (self.grid.len() as f64).sqrt()))
                .map_err(|e| e.to_string())
        });
        match nested {
            Ok(q) => q.leading(n),
            Err(msg) => Err(Error::InvalidInput(msg.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodConfig {
    pub method: Method,
    pub max_redraws: u64,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            max_redraws: DEFAULT_MAX_REDRAWS,
        }
    }
}

/// Intermediate objects of one level, handed to an observer.
pub struct LevelSnapshot<'a> {
    pub level: usize,
    /// Estimate the level sampled from and orthonormalized over.
    pub estimate: &'a DomainEstimate,
    pub qr: &'a QrFactors,
    pub christoffel: &'a ChristoffelWeights,
    pub state: &'a SamplingState,
    pub system: &'a LsSystem,
    pub fit: &'a FitResult,
    pub record: &'a LevelRecord,
    /// Estimate produced by the domain update, for methods that learn one.
    pub next_estimate: Option<&'a DomainEstimate>,
}

/// A run that stopped early, with the levels completed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub level: usize,
    pub error: Error,
    pub partial: RunRecord,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} completed levels)", self.error, self.partial.levels.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub fn run(
    setup: &Setup,
    config: &MethodConfig,
    master_seed: u64,
    trial: u64,
) -> std::result::Result<RunRecord, RunFailure> {
    run_observed(setup, config, master_seed, trial, |_| {})
}

/// As [`run`], calling `observe` after every completed level.
pub fn run_observed(
    setup: &Setup,
    config: &MethodConfig,
    master_seed: u64,
    trial: u64,
    mut observe: impl FnMut(&LevelSnapshot<'_>),
) -> std::result::Result<RunRecord, RunFailure> {
    let mut record = RunRecord {
        method: config.method,
        trial,
        master_seed,
        levels: Vec::with_capacity(setup.schedule.len()),
    };
    let mut runner = Runner::new(setup, config, master_seed, trial);
    for l in 1..=setup.schedule.len() {
        match runner.level(l, &mut observe) {
            Ok(rec) => record.levels.push(rec),
            Err(e) => {
                return Err(RunFailure {
                    level: l,
                    error: e.at_level(l),
                    partial: record,
                })
            }
        }
    }
    Ok(record)
}

struct Runner<'s> {
    setup: &'s Setup,
    config: MethodConfig,
    problem: Problem<'s>,
    rng: rand_chacha::ChaCha8Rng,
    state: SamplingState,
    /// `Z_{l-1}`: the sampling estimate for ASUD methods, and the tracked
    /// learned domain used only for mismatch reporting by MC-LS.
    current: DomainEstimate,
}

impl<'s> Runner<'s> {
    fn new(setup: &'s Setup, config: &MethodConfig, master_seed: u64, trial: u64) -> Self {
        Self {
            setup,
            config: *config,
            problem: Problem::new(setup.oracle.as_ref(), setup.indicator),
            rng: trial_rng(master_seed, trial),
            state: SamplingState::default(),
            current: setup.full.clone(),
        }
    }

    fn level(&mut self, l: usize, observe: &mut impl FnMut(&LevelSnapshot<'_>)) -> Result<LevelRecord> {
        let setup = self.setup;
        let method = self.config.method;
        let lv = setup.schedule.level(l);
        let n = lv.dim;

        // Orthonormal basis over the sampling estimate.
        let estimate = match method {
            Method::McLs => &setup.full,
            Method::AsgdLs => &setup.omega,
            Method::AsudLs | Method::AsudAls => &self.current,
        };
        if estimate.len() < n {
            return Err(Error::RankDeficient {
                column: estimate.len(),
                value: 0.0,
                threshold: 0.0,
            });
        }
        let qr = match method {
            Method::McLs => setup.full_qr(n)?,
            Method::AsgdLs => setup.omega_qr(n)?,
            Method::AsudLs | Method::AsudAls => qr_factor(assemble_b_from_grid(estimate, &setup.basis, n))?,
        };
        let weights = christoffel(&qr, estimate)?;

        // New samples; earlier ones are kept.
        let mode = method.mode();
        let max_redraws = self.config.max_redraws;
        if method == Method::McLs {
            let draws = lv.samples - setup.schedule.previous(l).samples;
            for _ in 0..draws {
                let slot = rejection_sample(
                    &setup.uniform,
                    setup.full.active(),
                    &setup.grid,
                    &mut self.problem,
                    mode,
                    &mut self.rng,
                    max_redraws,
                )?;
                self.state.absorb(slot);
            }
        } else {
            let assignment = assign_measures(&setup.schedule, l)?;
            let mut samplers: Vec<Option<DiscreteSampler>> = vec![None; n];
            for &j in &assignment.basis {
                if samplers[j].is_none() {
                    samplers[j] = Some(DiscreteSampler::for_column(&qr, j)?);
                }
                let sampler = samplers[j].as_ref().expect("built above");
                let slot = rejection_sample(
                    sampler,
                    estimate.active(),
                    &setup.grid,
                    &mut self.problem,
                    mode,
                    &mut self.rng,
                    max_redraws,
                )?;
                self.state.absorb(slot);
            }
        }
        self.state.evaluations = self.problem.evaluations();

        // Fit on every retained sample.
        let samples = self.state.fit_samples();
        let sample_idx: Vec<usize> = samples.iter().map(|s| s.0).collect();
        let psi_rows = setup.basis.select_rows(&sample_idx, n);
        let system = match method {
            Method::McLs => assemble(&qr, estimate, &samples, Weighting::Unit)?,
            Method::AsgdLs | Method::AsudLs => assemble(&qr, estimate, &samples, Weighting::Christoffel)?,
            Method::AsudAls => assemble_from_basis(&psi_rows, &qr.r, &samples, Weighting::Christoffel)?,
        };
        let mut fit = solve(&system)?;
        let grid_values = eval_on_grid(&setup.basis, &qr.r, &fit.coeffs)?;

        // Metrics against the ground truth.
        let approx: Vec<f64> = setup.truth.omega.iter().map(|&g| grid_values[g]).collect();
        let rel_error = relative_error(&setup.truth.values, &approx, setup.omega.weights())?;
        let sampled_from = match method {
            Method::AsgdLs => &setup.omega,
            _ => &self.current,
        };
        let mismatch = mismatch_volume(&setup.truth.omega, sampled_from.active())?;
        let m = samples.len();
        let f = self.state.evaluations;
        let inv_a = match setup.omega_qr(n) {
            Ok(oq) => inv_alpha(&oq.r, &psi_rows, &system.weights)?,
            Err(_) => f64::NAN,
        };
        let rec = LevelRecord {
            level: l,
            dim: n,
            samples: m,
            evaluations: f,
            rel_error,
            mismatch,
            rejection_rate: rejection_rate(f, m as u64)?,
            inv_alpha: inv_a,
            inv_beta: reciprocal(fit.sigma_min),
            singular: fit.singular,
        };

        // Domain update. MC-LS tracks one for reporting only.
        let next = if method.learns_domain() || method == Method::McLs {
            let members = update_domain(
                setup.grid.len(),
                grid_values.as_slice(),
                &setup.indicator,
                &self.state,
                mode,
            )?;
            Some(restrict_measure(&setup.grid, members)?)
        } else {
            None
        };
        fit.grid_values = Some(grid_values);
        observe(&LevelSnapshot {
            level: l,
            estimate,
            qr: &qr,
            christoffel: &weights,
            state: &self.state,
            system: &system,
            fit: &fit,
            record: &rec,
            next_estimate: next.as_ref(),
        });
        if let Some(next) = next {
            self.current = next;
        }
        Ok(rec)
    }
}
