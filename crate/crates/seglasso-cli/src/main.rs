//! `seglasso` — fit, select, simulate and benchmark drivers around the
//! seglasso library. Exit codes: 0 success, 2 input error, 3 numerical
//! failure.

mod config;
mod dataset;
mod document;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seglasso::dictionary::assemble;
use seglasso::selection::{default_k_max, mbic_score, select_k, FitMethod};
use seglasso::sim::{run_grid, simulate, write_reports, GridOptions, Method, SimConfig};

use config::FileConfig;
use document::{build_document, write_document, DocumentInputs};

#[derive(Debug)]
pub enum CliError {
    /// Bad input: files, flags, config, data validation. Exit code 2.
    Input(String),
    /// Numerical failure inside the estimation. Exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn input(msg: String) -> Self {
        CliError::Input(msg)
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<seglasso::Error> for CliError {
    fn from(e: seglasso::Error) -> Self {
        match e {
            seglasso::Error::InvalidArgument(_) | seglasso::Error::Mismatch(_) => {
                CliError::Input(e.to_string())
            }
            seglasso::Error::NonFinite(_) | seglasso::Error::Numerical(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

#[derive(Parser)]
#[command(name = "seglasso", version, about = "Joint segmentation of multiple series sharing a functional bias")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model at a fixed total number of segments.
    Fit(FitArgs),
    /// Sweep K and pick the number of segments by mBIC.
    Select(SelectArgs),
    /// Generate one synthetic dataset with known ground truth.
    Simulate(SimulateArgs),
    /// Run a simulation grid and write metric reports.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct CommonFitArgs {
    /// Input dataset (CSV: series_id,time,value[,covariate]).
    #[arg(long)]
    input: PathBuf,
    /// Config file declaring the dictionary (and optional fit/selection
    /// sections); flags override its fields.
    #[arg(long, alias = "dict")]
    config: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Result document path.
    #[arg(long)]
    out: PathBuf,
    /// Optional tidy export of the fitted bias over the first series' grid.
    #[arg(long)]
    bias_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonFitArgs,
    /// Total number of segments K (overrides config fit.k).
    #[arg(long, short = 'K')]
    k: Option<usize>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    common: CommonFitArgs,
    /// Smallest K of the sweep (default: the number of series).
    #[arg(long)]
    kmin: Option<usize>,
    /// Largest K of the sweep (default: M·⌈n̄/10⌉ capped by feasibility).
    #[arg(long)]
    kmax: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Config file with a [simulation] section (defaults used if absent).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for dataset.csv and truth.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Grid file: one [[cell]] block per simulation configuration.
    #[arg(long)]
    grid: PathBuf,
    /// Overrides the replicate count of every cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated list of lasso, lasso_true_k, position.
    #[arg(long, default_value = "lasso,position")]
    methods: String,
    /// Output directory for summary.csv, replicates.csv and config.json.
    #[arg(long)]
    out: PathBuf,
}

fn merged_fit_section(common: &CommonFitArgs, file: &FileConfig) -> config::FitSection {
    let mut fit = file.fit.clone();
    if let Some(g) = common.gamma {
        fit.gamma = g;
    }
    if let Some(e) = common.epsilon {
        fit.epsilon = e;
    }
    fit
}

fn resolved_config(common: &CommonFitArgs, fit: &config::FitSection) -> FileConfig {
    let mut file = FileConfig::load(&common.config).unwrap_or_default();
    file.fit = fit.clone();
    file
}

fn run_fit(args: &FitArgs) -> Result<(), CliError> {
    let set = dataset::parse_dataset(&args.common.input)?;
    let file = FileConfig::load(&args.common.config)?;
    let fit_section = merged_fit_section(&args.common, &file);
    let k = args
        .k
        .or(fit_section.k)
        .ok_or_else(|| CliError::input("fit needs --K or a fit.k config entry".into()))?;
    let specs = file.dictionary_specs()?;
    let dict = assemble(&specs, &set)?;
    let cfg = fit_section.to_fit_config(k)?;
    let mut fit = seglasso::fit::fit_fixed_k(&set, &dict, &cfg)?;
    let ss = fit.sigma2 * set.total_len() as f64;
    fit.mbic = mbic_score(
        ss,
        set.total_len(),
        set.num_series(),
        &fit.segmentation.all_segment_lengths(),
    )
    .ok();
    let mut resolved = resolved_config(&args.common, &fit_section);
    resolved.fit.k = Some(k);
    let doc = build_document(&DocumentInputs {
        command: "fit",
        input_path: &args.common.input,
        config: &resolved,
        set: &set,
        dict: Some(&dict),
        fit: &fit,
        selection: None,
        chosen_k: k,
    })?;
    write_document(&doc, &args.common.out)?;
    if let Some(bias_path) = &args.common.bias_out {
        document::write_bias_export(&set, &fit, bias_path)?;
    }
    Ok(())
}

fn run_select(args: &SelectArgs) -> Result<(), CliError> {
    let set = dataset::parse_dataset(&args.common.input)?;
    let file = FileConfig::load(&args.common.config)?;
    let fit_section = merged_fit_section(&args.common, &file);
    let k_min = args.kmin.or(file.selection.k_min).unwrap_or(set.num_series());
    let k_max = args.kmax.or(file.selection.k_max).unwrap_or_else(|| default_k_max(&set));
    let specs = file.dictionary_specs()?;
    let dict = assemble(&specs, &set)?;
    let cfg = fit_section.to_fit_config(k_min.max(set.num_series()))?;
    let selection = select_k(&set, Some(&dict), k_min, k_max, &cfg, FitMethod::Lasso)?;
    let chosen = selection.chosen();
    let mut resolved = resolved_config(&args.common, &fit_section);
    resolved.selection.k_min = Some(k_min);
    resolved.selection.k_max = Some(k_max);
    let doc = build_document(&DocumentInputs {
        command: "select",
        input_path: &args.common.input,
        config: &resolved,
        set: &set,
        dict: Some(&dict),
        fit: &chosen.fit,
        selection: Some(&selection),
        chosen_k: selection.chosen_k,
    })?;
    write_document(&doc, &args.common.out)?;
    if let Some(bias_path) = &args.common.bias_out {
        document::write_bias_export(&set, &chosen.fit, bias_path)?;
    }
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut sim_cfg: SimConfig = match &args.config {
        Some(path) => FileConfig::load(path)?.simulation,
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        sim_cfg.seed = seed;
    }
    let (set, truth) = simulate(&sim_cfg, sim_cfg.seed)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::input(format!("{}: {e}", args.out.display())))?;
    dataset::write_dataset(&set, &args.out.join("dataset.csv"))?;
    let sidecar = serde_json::json!({
        "rng": "ChaCha8",
        "seed": sim_cfg.seed,
        "config": sim_cfg,
        "truth": {
            "breaks": truth.breaks,
            "means": truth.means,
            "bias": truth.bias,
            "sigma2": truth.sigma2,
        },
    });
    let mut text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| CliError::input(format!("truth sidecar: {e}")))?;
    text.push('\n');
    document::atomic_write(&args.out.join("truth.json"), text.as_bytes())
}

fn run_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let grid = config::GridFile::load(&args.grid)?;
    let mut cells = grid.cell;
    if let Some(reps) = args.reps {
        for cell in &mut cells {
            cell.replicates = reps;
        }
    }
    let methods = args
        .methods
        .split(',')
        .map(|s| Method::parse(s.trim()))
        .collect::<seglasso::Result<Vec<_>>>()
        .map_err(CliError::from)?;
    let opts = GridOptions::default();
    let results = run_grid(&cells, &methods, &opts)?;
    write_reports(&results, &opts, &args.out)?;
    for cell in &results {
        if let Some(err) = &cell.error {
            eprintln!(
                "warning: cell (M={}, sigma2={}, {}) aborted: {err}",
                cell.config.num_series,
                cell.config.sigma2,
                cell.method.name()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Select(args) => run_select(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Benchmark(args) => run_benchmark(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
