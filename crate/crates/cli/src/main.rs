//! `polaron`: run one experiment and write CSV tables, a JSON summary and a
//! manifest into the output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polaron_core::runner::{self, ConfigFile, ExperimentConfig, ExperimentId};
use polaron_core::Error;

/// Environment variable overriding the output directory.
const OUT_ENV: &str = "POLARON_OUT";

#[derive(Parser, Debug)]
#[command(
    name = "polaron",
    version,
    about = "Coherence-void solvers and simulators",
    after_help = "Every experiment id is also a subcommand. `polaron defaults <experiment>` prints the default \
                  configuration; the manifest of each run echoes the fully resolved configuration."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Experiment {
    StationaryVoid,
    AgingVoid,
    Volterra,
    PolaronMsd,
    SlowBond,
    GasQss,
    Spectra,
    CloningBench,
}

impl From<Experiment> for ExperimentId {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::StationaryVoid => ExperimentId::StationaryVoid,
            Experiment::AgingVoid => ExperimentId::AgingVoid,
            Experiment::Volterra => ExperimentId::Volterra,
            Experiment::PolaronMsd => ExperimentId::PolaronMsd,
            Experiment::SlowBond => ExperimentId::SlowBond,
            Experiment::GasQss => ExperimentId::GasQss,
            Experiment::Spectra => ExperimentId::Spectra,
            Experiment::CloningBench => ExperimentId::CloningBench,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML configuration, or a JSON config/manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the file and POLARON_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; affects speed only.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment given by id.
    Run {
        experiment: Experiment,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Print the default configuration of an experiment as TOML.
    Defaults { experiment: Experiment },
    /// Stationary void profile and quasi-stationary decay rates.
    StationaryVoid(RunArgs),
    /// Noiseless aging void, survival and subdiffusive MSD.
    AgingVoid(RunArgs),
    /// Volterra rates and the dressed diffusivity.
    Volterra(RunArgs),
    /// Polaron translation and internal-mode MSDs.
    PolaronMsd(RunArgs),
    /// Slow-bond localization.
    SlowBond(RunArgs),
    /// Ballistic gas quasi-stationary rates.
    GasQss(RunArgs),
    /// KLS spectra, cascade bound and Airy constant.
    Spectra(RunArgs),
    /// Dense-vs-Monte-Carlo and cloning benchmarks.
    CloningBench(RunArgs),
}

fn load(path: &Path) -> Result<ConfigFile, Error> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        // A manifest carries the resolved configuration under `config`.
        if let Some(c) = v.get_mut("config") {
            v = c.take();
        }
        serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}

fn run(id: ExperimentId, RunArgs { config, seed, out, threads }: RunArgs) -> Result<(), Error> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let mut file = match &config {
        Some(p) => load(p)?,
        None => ConfigFile::default(),
    };
    match file.experiment {
        Some(e) if e != id => {
            return Err(Error::Config(format!("config is for `{e}`, not `{id}`")));
        }
        _ => file.experiment = Some(id),
    }
    if seed.is_some() {
        file.seed = seed;
    }
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let out_dir = out.or(env_out).or_else(|| file.out.clone()).unwrap_or_else(|| runner::default_out_dir(id));
    file.out = Some(out_dir.clone());
    let cfg = ExperimentConfig::try_from(file)?;
    let manifest = runner::execute(&cfg, &out_dir)?;
    for c in &manifest.checks {
        println!("{}", c.line());
    }
    println!("wrote {} files to {} in {:.1} s", manifest.outputs.len() + 1, out_dir.display(), manifest.wall_time_s);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { experiment, args } => run(experiment.into(), args),
        Command::Defaults { experiment } => {
            let cfg = ExperimentConfig::preset(experiment.into());
            match toml::to_string_pretty(&ConfigFile::from(cfg)) {
                Ok(s) => {
                    print!("{s}");
                    Ok(())
                }
                Err(e) => Err(Error::Config(e.to_string())),
            }
        }
        Command::StationaryVoid(a) => run(ExperimentId::StationaryVoid, a),
        Command::AgingVoid(a) => run(ExperimentId::AgingVoid, a),
        Command::Volterra(a) => run(ExperimentId::Volterra, a),
        Command::PolaronMsd(a) => run(ExperimentId::PolaronMsd, a),
        Command::SlowBond(a) => run(ExperimentId::SlowBond, a),
        Command::GasQss(a) => run(ExperimentId::GasQss, a),
        Command::Spectra(a) => run(ExperimentId::Spectra, a),
        Command::CloningBench(a) => run(ExperimentId::CloningBench, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
