use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fidelity_audit::runner::{
    emit_plot_data, run_audit, run_probe, run_simulation, run_sweep, sweep_records, write_outputs, write_sweep_csv,
    ExperimentConfig, ReportBundle, SweepParam,
};
use fidelity_audit::sim::{write_sim_records, write_sim_summary};
use fidelity_audit::{Error, Result};

#[derive(Parser)]
#[command(name = "fidelity-audit", version, about = "Audit explanation fidelity across protected groups")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config, then `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train, explain and report fidelity gaps for every seed.
    Audit(ConfigArgs),
    /// Repeat the audit for each value of one explainer parameter.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Simulate user decision accuracy under unequal explanation fidelity.
    Simulate(ConfigArgs),
    /// Measure how predictable the group is from the features.
    Probe(ConfigArgs),
    /// Export the long-format fidelity table from a saved report.
    PlotData {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(args: &ConfigArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn print_summary(bundle: &ReportBundle) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    println!("{:<14} {:<10} {:>9} {:>9} {:>9} {:>9}", "explainer", "metric", "fidelity", "max_gap", "pair_gap", "p(max)");
    for s in &bundle.summary {
        println!(
            "{:<14} {:<10} {:>9} {:>9} {:>9} {:>9}",
            s.explainer,
            s.metric.name(),
            fmt(s.fidelity_mean),
            fmt(s.max_gap_mean),
            fmt(s.pairwise_gap_mean),
            fmt(s.max_gap_p)
        );
    }
    for c in bundle.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!("warning: {} seed {} failed: {}", c.explainer, c.seed, c.error.as_deref().unwrap_or(""));
    }
    for s in bundle.seeds.iter().filter(|s| s.error.is_some()) {
        eprintln!("warning: seed {}: {}", s.seed, s.error.as_deref().unwrap_or(""));
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::ConfigInvalid(format!("cannot configure {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Audit(args) => {
            let cfg = ExperimentConfig::from_file(&args.config)?;
            let bundle = run_audit(&cfg)?;
            let dir = out_dir(&args, &cfg);
            write_outputs(&bundle, &dir)?;
            print_summary(&bundle);
            println!("wrote {}", dir.display());
        }
        Command::Sweep { common, param, values } => {
            let cfg = ExperimentConfig::from_file(&common.config)?;
            let result = run_sweep(&cfg, param, &values)?;
            let dir = out_dir(&common, &cfg);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for p in &result.points {
                write_outputs(&p.bundle, dir.join(format!("{}_{}", param.name(), p.value)))?;
            }
            let path = dir.join("sweep.csv");
            write_sweep_csv(create(&path)?, &sweep_records(&result))?;
            println!("wrote {}", path.display());
        }
        Command::Simulate(args) => {
            let cfg = ExperimentConfig::from_file(&args.config)?;
            let result = run_simulation(&cfg)?;
            let dir = out_dir(&args, &cfg);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_sim_records(create(&dir.join("sim_records.csv"))?, &result.records)?;
            write_sim_summary(create(&dir.join("sim_summary.csv"))?, &result.summary)?;
            write_json(&dir.join("simulation.json"), &result)?;
            for (delta, gap) in &result.accuracy_gap {
                println!("delta {delta:.3}: decision accuracy gap {gap:+.4}");
            }
        }
        Command::Probe(args) => {
            let cfg = ExperimentConfig::from_file(&args.config)?;
            let outcome = run_probe(&cfg)?;
            let dir = out_dir(&args, &cfg);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_json(&dir.join("probe.json"), &outcome)?;
            for (name, auc) in outcome.probe.group_names.iter().zip(&outcome.probe.auroc) {
                println!("group {name}: probe AUROC {}", auc.map_or("-".into(), |a| format!("{a:.4}")));
            }
            let dropped: Vec<&str> = outcome
                .mi_filter
                .dropped
                .iter()
                .map(|&j| outcome.mi_filter.feature_names[j].as_str())
                .collect();
            println!("MI filter drops: {}", if dropped.is_empty() { "none".into() } else { dropped.join(", ") });
        }
        Command::PlotData { bundle, out } => {
            let b = ReportBundle::load(&bundle)?;
            let dir = out.unwrap_or_else(|| bundle.parent().map(Path::to_path_buf).unwrap_or_default());
            let path = emit_plot_data(&b, &dir)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ConfigInvalid(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
