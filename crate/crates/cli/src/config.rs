use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use asud_core::blackbox::TestFunction;
use asud_core::driver::{Method, DEFAULT_MAX_REDRAWS};
use asud_core::measures::{build_schedule, Schedule};
use asud_core::metrics::MeanKind;
use asud_core::polyspace::{hyperbolic_cross, hyperbolic_cross_ladder, IndexSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// K = 3000, N_max = 150, 10 trials.
    Desk,
    /// K = 30000, N_max = 1000, 50 trials.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: u32,
    pub dims: Vec<usize>,
    pub methods: Vec<Method>,
    pub grid_size: usize,
    pub seed: u64,
    pub trials: usize,
    /// Largest subspace dimension of the default hyperbolic-cross ladder.
    pub n_max: usize,
    /// Explicit subspace dimensions `N_1 < N_2 < ...`, used instead of the
    /// hyperbolic-cross ladder when set.
    pub ladder: Option<Vec<usize>>,
    pub max_redraws: u64,
    pub out: PathBuf,
    /// Run (dimension, method) cells concurrently as well as trials.
    pub parallel_cells: bool,
    pub mean: MeanKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Desk)
    }
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (grid_size, n_max, trials) = match profile {
            Profile::Desk => (3000, 150, 10),
            Profile::Full => (30000, 1000, 50),
        };
        Self {
            function: 1,
            dims: vec![2],
            methods: Method::ALL.to_vec(),
            grid_size,
            seed: 1,
            trials,
            n_max,
            ladder: None,
            max_redraws: DEFAULT_MAX_REDRAWS,
            out: PathBuf::from("results"),
            parallel_cells: false,
            mean: MeanKind::Arithmetic,
        }
    }

    pub fn from_json_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.dims.is_empty() {
            bail!("no dimensions given");
        }
        if self.methods.is_empty() {
            bail!("no methods given");
        }
        for &d in &self.dims {
            TestFunction::new(self.function, d)?;
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.max_redraws == 0 {
            bail!("max_redraws must be at least 1");
        }
        if self.grid_size == 0 {
            bail!("grid_size must be at least 1");
        }
        let n_max = match &self.ladder {
            Some(l) => {
                build_schedule(l)?;
                *l.last().expect("validated non-empty")
            }
            None => self.n_max,
        };
        if n_max > self.grid_size {
            bail!("N_max = {n_max} exceeds the grid size {}", self.grid_size);
        }
        Ok(())
    }

    /// Basis index set and schedule for dimension `d`.
    pub fn schedule_for(&self, d: usize) -> anyhow::Result<(IndexSet, Schedule)> {
        match &self.ladder {
            None => {
                let (set, dims) = hyperbolic_cross_ladder(d, self.n_max)?;
                Ok((set, build_schedule(&dims)?))
            }
            Some(dims) => {
                let need = *dims.last().context("empty ladder")?;
                let mut order = 1;
                let set = loop {
                    let set = hyperbolic_cross(d, order)?;
                    if set.len() >= need {
                        break set;
                    }
                    order += 1;
                };
                Ok((set, build_schedule(dims)?))
            }
        }
    }
}
