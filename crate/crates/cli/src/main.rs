use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hierfl::artifacts::{self, COST, COST_SUMMARY, MANIFEST};
use hierfl::config::ExperimentConfig;
use hierfl::experiment::{run_experiment, RunSummary};
use hierfl::manifest::Manifest;
use hierfl::sweep::{run_sweep, SweepSpec};
use hierfl_core::bounds::{bound_grid, BoundParams, HVariant, Theorem1};
use hierfl_core::costmodel::{accumulate, Accounting, AccuracyPoint};

#[derive(Parser)]
#[command(name = "hierfl", version, about = "Hierarchical federated averaging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its artifacts.
    Run(RunArgs),
    /// Run every point of a grid and write a combined summary.
    Sweep(SweepArgs),
    /// Evaluate the deviation and convergence bounds over a parameter grid.
    Bounds(BoundsArgs),
    /// Re-price an existing trace under a cost model.
    Cost(CostArgs),
    /// Check a config file and/or an artifact directory.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config; built-in defaults when absent.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value` override with a dotted key, e.g. `schedule.kappa1=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let mut config = base.with_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

fn output_dir(out: &Option<PathBuf>, config: &ExperimentConfig, prefix: &str) -> anyhow::Result<PathBuf> {
    Ok(match (out, &config.output_dir) {
        (Some(p), _) | (None, Some(p)) => p.clone(),
        (None, None) => PathBuf::from("runs").join(format!("{prefix}-{}", &config.hash()?[..12])),
    })
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-run the manifest in this file and compare checksums.
    #[arg(long, conflicts_with_all = ["config", "seed", "overrides"])]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// TOML file with the sweep axes.
    #[arg(long, required_unless_present = "replay")]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["config", "seed", "overrides", "spec"])]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
    kappa1: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
    kappa2: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01f64, 0.1])]
    eta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5f64, 1.0])]
    delta: Vec<f64>,
    #[arg(long = "big-delta", value_delimiter = ',', default_values_t = [0.5f64, 1.0])]
    big_delta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0f64])]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Cloud intervals `B` for the convex bound.
    #[arg(long, default_value_t = 1)]
    intervals: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    /// Use the h formula exactly as printed instead of the corrected one.
    #[arg(long)]
    as_printed: bool,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CostArgs {
    /// `trace.csv` from an earlier run.
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory for the re-priced cost files; summary on stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Artifact directory: checks every CSV and, if present, the manifest.
    #[arg(long)]
    artifacts: Option<PathBuf>,
}

fn print_summary(dir: &Path, s: &RunSummary) {
    println!("artifacts {}", dir.display());
    println!("final_accuracy {}", s.final_accuracy);
    println!("final_epochs {}", s.final_epochs);
    let show = |v: Option<f64>| v.map_or_else(|| "not_reached".to_string(), |v| v.to_string());
    println!("epochs_to_target {}", show(s.epochs_to_target));
    println!("t_alpha_s {}", show(s.t_alpha));
    println!("e_alpha_j {}", show(s.e_alpha));
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    if let Some(manifest) = &args.replay {
        let out = args.out.context("--replay needs --out for the re-executed artifacts")?;
        hierfl::replay(manifest, &out)?;
        println!("replay of {} reproduced every artifact in {}", manifest.display(), out.display());
        return Ok(());
    }
    let config = args.config.resolve()?;
    let out = output_dir(&args.out, &config, "run")?;
    let summary = run_experiment(&config, &out, None)?;
    print_summary(&out, &summary);
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    if let Some(manifest) = &args.replay {
        let out = args.out.context("--replay needs --out for the re-executed artifacts")?;
        hierfl::replay(manifest, &out)?;
        println!("replay of {} reproduced every artifact in {}", manifest.display(), out.display());
        return Ok(());
    }
    let config = args.config.resolve()?;
    let spec = SweepSpec::load(args.spec.as_deref().expect("required by clap"))?;
    spec.points(&config)?;
    let out = output_dir(&args.out, &config, "sweep")?;
    let rows = run_sweep(&config, &spec, &out)?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    println!("sweep {} points, {failed} failed, summary {}", rows.len(), out.join(artifacts::SWEEP).display());
    Ok(())
}

fn bounds(args: BoundsArgs) -> anyhow::Result<()> {
    let variant = if args.as_printed { HVariant::AsPrinted } else { HVariant::Corrected };
    let base = BoundParams::new(1.0, 0.0, 0.0, 0.01, 1, 1)
        .with_rho(args.rho)
        .with_intervals(args.intervals)
        .with_accuracy(args.epsilon, args.phi)
        .with_variant(variant);
    let rows = bound_grid(&base, &args.kappa1, &args.kappa2, &args.eta, &args.delta, &args.big_delta, &args.beta)?;
    if rows.is_empty() {
        bail!("bound grid is empty");
    }
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "kappa1",
        "kappa2",
        "eta",
        "delta",
        "big_delta",
        "beta",
        "g_c_end",
        "g_nc",
        "theorem1",
        "feasible",
    ])?;
    for r in rows {
        let p = &r.params;
        let theorem1 = match &r.theorem1 {
            Theorem1::Bound(v) => v.to_string(),
            Theorem1::Infeasible { .. } => String::new(),
        };
        w.write_record([
            p.kappa1.to_string(),
            p.kappa2.to_string(),
            p.eta.to_string(),
            p.delta.to_string(),
            p.big_delta.to_string(),
            p.beta.to_string(),
            r.g_c_end.to_string(),
            r.g_nc.to_string(),
            theorem1,
            r.theorem1.is_feasible().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cost(args: CostArgs) -> anyhow::Result<()> {
    let config = args.config.resolve()?;
    let rows = artifacts::read_trace(&args.trace)?;
    let points: Vec<AccuracyPoint> = rows.iter().map(AccuracyPoint::from).collect();
    let accounting = Accounting {
        kappa1: config.schedule.kappa1,
        kappa2: config.schedule.kappa2,
        scope: config.report.energy_scope,
        clients: config.topology.clients,
        edges: config.topology.edges,
    };
    let report = accumulate(&points, &accounting, &config.cost, &config.report.alphas)?;
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            artifacts::write_cost(&dir.join(COST), &report)?;
            artifacts::write_text(&dir.join(COST_SUMMARY), |w| Ok(report.write_summary(w)?))?;
            artifacts::validate_dir(dir)?;
            println!("cost files written to {}", dir.display());
        }
        None => report.write_summary(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn validate(args: ValidateArgs) -> anyhow::Result<()> {
    if args.config.is_none() && args.artifacts.is_none() {
        bail!("nothing to validate: pass --config and/or --artifacts");
    }
    if let Some(path) = &args.config {
        let config = ExperimentConfig::load(path)?.with_overrides(&args.overrides)?;
        config.validate()?;
        println!("config {} ok (hash {})", path.display(), config.hash()?);
    }
    if let Some(dir) = &args.artifacts {
        let checked = artifacts::validate_dir(dir)?;
        let manifest = dir.join(MANIFEST);
        if manifest.exists() {
            Manifest::load(&manifest)?.verify(dir)?;
            println!("artifacts {} ok ({checked} csv files, manifest checksums match)", dir.display());
        } else {
            println!("artifacts {} ok ({checked} csv files, no manifest)", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Bounds(a) => bounds(a),
        Command::Cost(a) => cost(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
