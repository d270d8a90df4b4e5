use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abplab::acceptance::run_acceptance;
use abplab::config::ExperimentConfig;
use abplab::experiments::{apply_overrides, run_experiment, ConstantsFlag, Experiment, Overrides};
use abplab::report::{config_hash, Emitter, RunManifest};
use abplab::{RunError, RunResult};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "abplab", version, about = "Numerical experiments for complex Monge-Ampere estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (the ABPLAB_OUT environment variable takes precedence).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for suites.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Primary resolution of the experiment (grid points or profile nodes).
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Check against the constants in the config instead of calibrating.
    #[arg(long, global = true, conflicts_with = "calibrate")]
    fixed_constants: bool,
    /// Fit the constants on the fit split and check the held-out split.
    #[arg(long, global = true)]
    calibrate: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    AbpVerify,
    DriftVerify,
    Trudinger,
    DirichletLinf,
    MaSolve,
    KolodziejProbe,
    Degiorgi,
    Flow,
    ParabolicAbp,
    Torus,
    /// Every experiment with its configured section, or the acceptance criteria.
    Suite {
        #[arg(long)]
        acceptance: bool,
    },
}

impl Command {
    fn experiment(self) -> Option<Experiment> {
        Some(match self {
            Command::AbpVerify => Experiment::AbpVerify,
            Command::DriftVerify => Experiment::DriftVerify,
            Command::Trudinger => Experiment::Trudinger,
            Command::DirichletLinf => Experiment::DirichletLinf,
            Command::MaSolve => Experiment::MaSolve,
            Command::KolodziejProbe => Experiment::KolodziejProbe,
            Command::Degiorgi => Experiment::DeGiorgi,
            Command::Flow => Experiment::Flow,
            Command::ParabolicAbp => Experiment::ParabolicAbp,
            Command::Torus => Experiment::Torus,
            Command::Suite { .. } => return None,
        })
    }
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(env) = std::env::var_os("ABPLAB_OUT").filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("abplab-out"))
}

fn overrides(cli: &Cli) -> Overrides {
    let constants = if cli.fixed_constants {
        Some(ConstantsFlag::Fixed)
    } else if cli.calibrate {
        Some(ConstantsFlag::Calibrate)
    } else {
        None
    };
    Overrides { seed: cli.seed, resolution: cli.resolution, constants }
}

fn print_manifest(m: &RunManifest) {
    for (name, ok) in &m.verdicts {
        println!("[{}] {} {name}", if *ok { "PASS" } else { "FAIL" }, m.experiment_id);
    }
}

fn jobs(cli: &Cli, cfg: &ExperimentConfig) -> usize {
    cli.jobs.or(cfg.jobs).unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run(cli: &Cli) -> RunResult<bool> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let out = out_dir(cli, &cfg);
    match cli.command {
        Command::Suite { acceptance: true } => {
            if cli.resolution.is_some() || cli.fixed_constants || cli.calibrate {
                return Err(RunError::Config("the acceptance suite has pinned resolutions and constants".into()));
            }
            let seed = cli.seed.or(cfg.seed).unwrap_or(0);
            let report = run_acceptance(seed, jobs(cli, &cfg))?;
            for line in report.lines() {
                println!("{line}");
            }
            let mut em = Emitter::new(&out)?;
            em.json("acceptance.json", &report)?;
            for c in &report.criteria {
                em.verdict(&format!("{:02}", c.id), c.passed);
            }
            let inputs = BTreeMap::from([("seed".to_string(), seed.to_string())]);
            let hash = config_hash(&BTreeMap::from([("acceptance-seed", seed)]))?;
            Ok(em.finish("acceptance", "suite", hash, inputs)?.passed)
        }
        Command::Suite { acceptance: false } => run_suite(cli, &mut cfg, &out),
        cmd => {
            let exp = cmd.experiment().expect("experiment subcommand");
            apply_overrides(&mut cfg, exp, &overrides(cli))?;
            let manifest = run_experiment(exp, &cfg, &out)?;
            print_manifest(&manifest);
            Ok(manifest.passed)
        }
    }
}

/// Every experiment into `out/<name>`, in parallel up to the job limit.
fn run_suite(cli: &Cli, cfg: &mut ExperimentConfig, out: &Path) -> RunResult<bool> {
    if cfg.subcommand.is_some() {
        return Err(RunError::Config("a suite config must not name a subcommand".into()));
    }
    let ov = overrides(cli);
    if ov.resolution.is_some() || ov.constants.is_some() {
        return Err(RunError::Config("--resolution and the constants flags apply to single experiments".into()));
    }
    if let Some(seed) = ov.seed {
        cfg.seed = Some(seed);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs(cli, cfg))
        .build()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    let results: Vec<(Experiment, RunResult<RunManifest>)> = pool.install(|| {
        Experiment::ALL.par_iter().map(|&exp| (exp, run_experiment(exp, cfg, &out.join(exp.name())))).collect()
    });
    let mut em = Emitter::new(out)?;
    let mut first_error = None;
    for (exp, r) in results {
        match r {
            Ok(m) => {
                print_manifest(&m);
                em.verdict(exp.name(), m.passed);
            }
            Err(e) => {
                eprintln!("{}: {e}", exp.name());
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let inputs = BTreeMap::from([("seed".to_string(), cfg.seed.unwrap_or(0).to_string())]);
    let hash = config_hash(cfg)?;
    Ok(em.finish(cfg.id.as_deref().unwrap_or("suite"), "suite", hash, inputs)?.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("abplab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
