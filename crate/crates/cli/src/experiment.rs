use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use asud_core::blackbox::TestFunction;
use asud_core::driver::{run, GroundTruth, Method, MethodConfig, Setup};
use asud_core::grid::Grid;
use asud_core::metrics::{aggregate, RunRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const TRIALS_HEADER: [&str; 13] = [
    "method", "function", "d", "trial", "l", "N_l", "M_l", "F_l", "E_l", "V_l", "R_l", "inv_alpha", "inv_beta",
];

pub const AGGREGATE_HEADER: [&str; 13] = [
    "method", "function", "d", "l", "N_l", "M_l", "F_l", "E_l", "V_l", "R_l", "inv_alpha", "inv_beta", "trials_ok",
];

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialFailure {
    pub method: Method,
    pub d: usize,
    pub trial: u64,
    pub level: usize,
    pub completed_levels: usize,
    pub error: String,
}

/// All trials of one (dimension, method) pair.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub method: Method,
    pub d: usize,
    pub records: Vec<RunRecord>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub d: usize,
    pub trials_ok: usize,
    pub trials_failed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionInfo {
    pub ladder: Vec<usize>,
    pub true_domain_points: usize,
    pub true_domain_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    /// How the random streams derive from the master seed.
    pub streams: String,
    pub wall_time_seconds: f64,
    pub dimensions: BTreeMap<usize, DimensionInfo>,
    pub cells: Vec<CellSummary>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub cells: Vec<CellResult>,
    pub manifest: Manifest,
    pub trials_csv: PathBuf,
    pub aggregate_csv: PathBuf,
    pub manifest_json: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct TruthCache {
    function: u32,
    d: usize,
    grid_size: usize,
    seed: u64,
    truth: GroundTruth,
}

/// Loads the ground truth for this grid from `cache_dir`, computing and
/// storing it on a miss.
pub fn cached_truth(
    cache_dir: &Path,
    function: &TestFunction,
    grid: &Grid,
) -> anyhow::Result<GroundTruth> {
    let path = cache_dir.join(format!(
        "truth_f{}_d{}_K{}_seed{}.json",
        function.id(),
        grid.dim(),
        grid.len(),
        grid.seed()
    ));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<TruthCache>(&text) {
            if c.function == function.id() && c.d == grid.dim() && c.grid_size == grid.len() && c.seed == grid.seed() {
                return Ok(GroundTruth::from_parts(c.truth.omega, c.truth.values)?);
            }
        }
    }
    let truth = GroundTruth::compute(grid, function, &function.indicator());
    fs::create_dir_all(cache_dir)?;
    let c = TruthCache {
        function: function.id(),
        d: grid.dim(),
        grid_size: grid.len(),
        seed: grid.seed(),
        truth,
    };
    fs::write(&path, serde_json::to_string(&c)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(c.truth)
}

/// Builds the shared setup of dimension `d`.
pub fn build_setup(config: &ExperimentConfig, d: usize, cache_dir: Option<&Path>) -> anyhow::Result<Setup> {
    let f = TestFunction::new(config.function, d)?;
    let grid = Grid::build(d, config.grid_size, config.seed)?;
    let truth = match cache_dir {
        Some(dir) => cached_truth(dir, &f, &grid)?,
        None => GroundTruth::compute(&grid, &f, &f.indicator()),
    };
    let (set, schedule) = config.schedule_for(d)?;
    Ok(Setup::new(Arc::new(grid), Arc::new(f), f.indicator(), set, schedule, Some(truth))?)
}

/// Runs every trial of one method on a prepared setup.
pub fn run_cell(setup: &Setup, config: &ExperimentConfig, method: Method) -> CellResult {
    let mc = MethodConfig {
        method,
        max_redraws: config.max_redraws,
    };
    let outcomes: Vec<_> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| (t, run(setup, &mc, config.seed, t)))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (trial, outcome) in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(f) => failures.push(TrialFailure {
                method,
                d: setup.grid().dim(),
                trial,
                level: f.level,
                completed_levels: f.partial.levels.len(),
                error: f.error.to_string(),
            }),
        }
    }
    CellResult {
        method,
        d: setup.grid().dim(),
        records,
        failures,
    }
}

/// Runs all cells without touching the filesystem.
pub fn run_cells(config: &ExperimentConfig, cache_dir: Option<&Path>) -> anyhow::Result<Vec<CellResult>> {
    config.validate()?;
    let mut cells = Vec::new();
    for &d in &config.dims {
        let setup = build_setup(config, d, cache_dir)?;
        if config.parallel_cells {
            let done: Vec<_> = config.methods.par_iter().map(|&m| run_cell(&setup, config, m)).collect();
            cells.extend(done);
        } else {
            cells.extend(config.methods.iter().map(|&m| run_cell(&setup, config, m)));
        }
    }
    Ok(cells)
}

fn write_trials(path: &Path, function: u32, cells: &[CellResult]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(TRIALS_HEADER)?;
    for cell in cells {
        for run in &cell.records {
            for lv in &run.levels {
                w.write_record([
                    cell.method.name().to_string(),
                    function.to_string(),
                    cell.d.to_string(),
                    run.trial.to_string(),
                    lv.level.to_string(),
                    lv.dim.to_string(),
                    lv.samples.to_string(),
                    lv.evaluations.to_string(),
                    fmt_float(lv.rel_error),
                    fmt_float(lv.mismatch),
                    fmt_float(lv.rejection_rate),
                    fmt_float(lv.inv_alpha),
                    fmt_float(lv.inv_beta),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_aggregate(path: &Path, config: &ExperimentConfig, cells: &[CellResult]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(AGGREGATE_HEADER)?;
    for cell in cells {
        for s in aggregate(&cell.records, config.mean)? {
            w.write_record([
                cell.method.name().to_string(),
                config.function.to_string(),
                cell.d.to_string(),
                s.level.to_string(),
                s.dim.to_string(),
                s.samples.to_string(),
                fmt_float(s.evaluations),
                fmt_float(s.rel_error),
                fmt_float(s.mismatch),
                fmt_float(s.rejection_rate),
                fmt_float(s.inv_alpha),
                fmt_float(s.inv_beta),
                s.trials.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes `trials.csv`, `aggregate.csv` and
/// `manifest.json` into the configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    config.validate()?;
    let start = Instant::now();
    fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    let cache_dir = config.out.join("cache");
    let cells = run_cells(config, Some(&cache_dir))?;

    let mut dimensions = BTreeMap::new();
    for &d in &config.dims {
        let (_, schedule) = config.schedule_for(d)?;
        let f = TestFunction::new(config.function, d)?;
        let grid = Grid::build(d, config.grid_size, config.seed)?;
        let truth = cached_truth(&cache_dir, &f, &grid)?;
        dimensions.insert(
            d,
            DimensionInfo {
                ladder: schedule.levels().iter().map(|l| l.dim).collect(),
                true_domain_points: truth.omega.len(),
                true_domain_fraction: truth.fraction(&grid),
            },
        );
    }

    let trials_csv = config.out.join("trials.csv");
    let aggregate_csv = config.out.join("aggregate.csv");
    let manifest_json = config.out.join("manifest.json");
    write_trials(&trials_csv, config.function, &cells)?;
    write_aggregate(&aggregate_csv, config, &cells)?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        master_seed: config.seed,
        streams: "ChaCha8 seeded with the master seed; stream 0 builds the grid, trial t uses stream t + 1".into(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        dimensions,
        cells: cells
            .iter()
            .map(|c| CellSummary {
                method: c.method,
                d: c.d,
                trials_ok: c.records.len(),
                trials_failed: c.failures.len(),
            })
            .collect(),
        failures: cells.iter().flat_map(|c| c.failures.iter().cloned()).collect(),
    };
    fs::write(&manifest_json, serde_json::to_string_pretty(&manifest)?)?;
    Ok(ExperimentOutput {
        cells,
        manifest,
        trials_csv,
        aggregate_csv,
        manifest_json,
    })
}
