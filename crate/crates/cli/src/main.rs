use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context};
use asud_cli::{export_plotdata, run_experiment, ExperimentConfig, Profile};
use asud_core::driver::Method;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asud", version, about = "Adaptive sampling experiments on unknown domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write trials.csv, aggregate.csv and manifest.json.
    Run(RunArgs),
    /// Reshape an aggregate CSV into plot-ready rows.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON file mirroring the experiment configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
    #[arg(long)]
    function: Option<u32>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Comma-separated methods: MC-LS, ASGD-LS, ASUD-LS, ASUD-ALS.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    max_redraws: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run the (dimension, method) cells concurrently.
    #[arg(long)]
    parallel_cells: bool,
}

impl RunArgs {
    fn resolve(self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::for_profile(self.profile);
        if let Some(path) = &self.config {
            // Keys present in the file replace the profile defaults.
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: serde_json::Value = serde_json::from_str(&text)?;
            let serde_json::Value::Object(file) = file else {
                bail!("{} must hold a JSON object", path.display());
            };
            let mut base = serde_json::to_value(&cfg)?;
            let obj = base.as_object_mut().expect("config serializes to an object");
            for (k, v) in file {
                obj.insert(k, v);
            }
            cfg = serde_json::from_value(base).with_context(|| format!("parsing {}", path.display()))?;
        }
        if let Some(v) = self.function {
            cfg.function = v;
        }
        if let Some(v) = self.dims {
            cfg.dims = v;
        }
        if let Some(v) = self.methods {
            cfg.methods = v.iter().map(|s| s.parse::<Method>()).collect::<Result<_, _>>()?;
        }
        if let Some(v) = self.grid_size {
            cfg.grid_size = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.n_max {
            cfg.n_max = v;
        }
        if let Some(v) = self.max_redraws {
            cfg.max_redraws = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        cfg.parallel_cells |= self.parallel_cells;
        Ok(cfg)
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out = run_experiment(&cfg)?;
            for c in &out.manifest.cells {
                eprintln!("{} d={}: {} ok, {} failed", c.method, c.d, c.trials_ok, c.trials_failed);
            }
            eprintln!(
                "wrote {} in {:.1}s",
                cfg.out.display(),
                out.manifest.wall_time_seconds
            );
        }
        Command::Export { input, output } => {
            let src = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let dst = BufWriter::new(File::create(&output)?);
            let rows = export_plotdata(src, dst)?;
            eprintln!("wrote {rows} rows to {}", output.display());
        }
    }
    Ok(())
}
