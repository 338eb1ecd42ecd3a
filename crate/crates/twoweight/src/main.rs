use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use twoweight::config::{RunConfig, Settings};
use twoweight::ensemble::{ensemble, EnsembleKind, Instance};
use twoweight::hilbert::{HilbertForm, IntervalMode};
use twoweight::io::{format_measures, read_measures};
use twoweight::report::{analyze, run_report, write_report};
use twoweight::{Error, Result};

#[derive(Parser)]
#[command(name = "twoweight", version, about = "Two-weight constants and checks for the discrete Hilbert transform")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file with default settings; flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cell length 2^-m used to snap input positions
    #[arg(long, global = true, allow_hyphen_values = true)]
    scale_exponent: Option<i32>,
    /// Goodness parameter in (0, 1) of the dyadic system
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Goodness depth of the dyadic system
    #[arg(long, global = true)]
    r: Option<u32>,
    /// exhaustive or dyadic
    #[arg(long, global = true)]
    interval_mode: Option<IntervalMode>,
    /// Relative slack of the inequality verdicts
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Per-instance time budget
    #[arg(long, global = true)]
    budget_seconds: Option<f64>,
}

#[derive(Args)]
struct EnsembleArgs {
    /// lattice, random-atoms, common-mass, cantor or sparse-sequence
    #[arg(long)]
    kind: Option<EnsembleKind>,
    /// Atoms per measure (cantor: 2^depth)
    #[arg(long)]
    n: Option<usize>,
    /// Number of instances
    #[arg(long)]
    count: Option<usize>,
    /// Seed of the ensemble and of the test functions
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print every constant of a measure file as JSON
    Constants { file: PathBuf },
    /// Print the norm C of the form with its power-iteration and dense values
    Norm { file: PathBuf },
    /// Print the verdicts for a measure file; exit status 1 on a failure
    Verify { file: PathBuf },
    /// Write an ensemble of measure files
    Ensemble {
        #[command(flatten)]
        params: EnsembleArgs,
        /// Output directory
        #[arg(long, default_value = "ensemble")]
        out: PathBuf,
    },
    /// Analyse measure files or an ensemble and write a report directory
    Report {
        #[command(flatten)]
        params: EnsembleArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Measure files, analysed after the ensemble if both are given
        files: Vec<PathBuf>,
    },
}

fn settings(common: &Common, params: Option<&EnsembleArgs>) -> Result<Settings> {
    let file = match &common.config {
        Some(p) => Settings::read(p)?,
        None => Settings::default(),
    };
    let flags = Settings {
        scale_exponent: common.scale_exponent,
        gamma: common.gamma,
        r: common.r,
        interval_mode: common.interval_mode,
        tolerance: common.tolerance,
        budget_seconds: common.budget_seconds,
        kind: params.and_then(|p| p.kind),
        n: params.and_then(|p| p.n),
        count: params.and_then(|p| p.count),
        seed: params.and_then(|p| p.seed),
    };
    Ok(file.overlay(&flags))
}

fn load(path: &Path, cfg: &RunConfig) -> Result<Instance> {
    let m = read_measures(path, cfg.scale_exponent)?;
    Ok(Instance { label: path.display().to_string(), sigma: m.sigma, w: m.w })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Constants { file } | Command::Verify { file } => {
            let cfg = settings(&cli.common, None)?.resolve()?;
            let inst = load(file, &cfg)?;
            let (rep, _) = analyze(0, &inst.label, &inst.sigma, &inst.w, &cfg);
            if let Some(e) = &rep.error {
                return Err(Error::InvalidParameter(e.clone()));
            }
            if matches!(cli.command, Command::Constants { .. }) {
                print_json(&serde_json::json!({ "config": cfg, "constants": rep.constants, "ratios": rep.ratios }))?;
                return Ok(ExitCode::SUCCESS);
            }
            for v in &rep.verdicts {
                let sides = match (v.lhs, v.rhs) {
                    (Some(l), Some(r)) => format!("{l:.6e} <= {r:.6e}"),
                    _ => v.note.clone().unwrap_or_default(),
                };
                let witness = v.witness.as_deref().map(|w| format!("  [{w}]")).unwrap_or_default();
                println!("{:<15} {:<30} {sides}{witness}", v.status.name(), v.name);
            }
            Ok(if rep.failures().next().is_some() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Norm { file } => {
            let cfg = settings(&cli.common, None)?.resolve()?;
            let inst = load(file, &cfg)?;
            let form = HilbertForm::new(inst.sigma, inst.w)?;
            print_json(&form.operator_norm())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ensemble { params, out } => {
            let s = settings(&cli.common, Some(params))?;
            let p = s.ensemble().ok_or_else(|| Error::InvalidParameter("--kind is required".into()))?;
            std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
            for inst in ensemble(&p)? {
                let path = out.join(format!("{}.txt", inst.label));
                std::fs::write(&path, format_measures(&inst.sigma, &inst.w)?)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { params, out, files } => {
            let s = settings(&cli.common, Some(params))?;
            let cfg = s.resolve()?;
            let ens = s.ensemble();
            let mut instances = match &ens {
                Some(p) => ensemble(p)?,
                None => Vec::new(),
            };
            for f in files {
                instances.push(load(f, &cfg)?);
            }
            if instances.is_empty() {
                return Err(Error::InvalidParameter("nothing to analyse: give --kind or measure files".into()));
            }
            let report = run_report(&instances, &cfg, ens);
            write_report(&report, out)?;
            let s = &report.summary;
            println!("{} instances, {} with errors, {} failed verdicts -> {}", s.instances, s.errors, s.failures(), out.display());
            Ok(if s.failures() > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
