use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use irs_wpcn_experiments::compare::{compare_files, render};
use irs_wpcn_experiments::props::{run_property_suite, PropsConfig};
use irs_wpcn_experiments::spec::{Axis, ExperimentSpec, Profile, Scheme};
use irs_wpcn_experiments::sweep::run_sweep;

/// Phase-shift and resource optimisation experiments for IRS-aided WPCNs.
#[derive(Parser)]
#[command(name = "irs-wpcn", version)]
struct Cli {
    /// Worker threads for sweeps and restarts. Defaults to all cores.
    #[arg(long, env = "IRS_WPCN_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfigKind {
    System,
    Spec,
    Props,
}

#[derive(Subcommand)]
enum Command {
    /// Print a template configuration as TOML.
    GenConfig {
        #[arg(long, value_enum, default_value = "system")]
        kind: ConfigKind,
        #[arg(long, value_enum, default_value = "desk")]
        profile: ProfileArg,
        /// Write to this file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a sweep spec and write its result and summary CSVs.
    Run { spec: PathBuf },
    /// Run the property suite; exits nonzero if any check fails.
    Props {
        /// Suite config TOML. Defaults to the built-in desk suite.
        config: Option<PathBuf>,
        /// Write the JSON report here as well as printing the summary.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare mean throughput across result CSVs.
    Compare {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

fn template(kind: ConfigKind, profile: Profile) -> anyhow::Result<String> {
    Ok(match kind {
        ConfigKind::System => profile.config().to_toml_string()?,
        ConfigKind::Spec => ExperimentSpec {
            base_config: None,
            profile,
            axis: Axis::HapPowerDbm,
            values: vec![30.0, 32.0, 34.0, 36.0, 38.0, 40.0, 42.0, 44.0],
            schemes: Scheme::ALL.to_vec(),
            seeds: (1..=5).collect(),
            output: PathBuf::from("results.csv"),
            summary: None,
            vectors: 2,
            random_trials: 1,
            sdr_samples: irs_wpcn::sdr::DEFAULT_SAMPLES,
            sdr_tol: 1e-9,
            solver: Default::default(),
        }
        .to_toml_string()?,
        ConfigKind::Props => PropsConfig {
            system: profile.config(),
            ..PropsConfig::default()
        }
        .to_toml_string()?,
    })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenConfig { kind, profile, output } => {
            let text = template(kind, profile.into())?;
            match output {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Run { spec } => {
            let spec = ExperimentSpec::load(&spec).with_context(|| format!("loading {}", spec.display()))?;
            let (rows, summary) = run_sweep(&spec)?;
            eprintln!(
                "wrote {} rows to {} and {} summary rows to {}",
                rows.len(),
                spec.output.display(),
                summary.len(),
                spec.summary_path().display()
            );
        }
        Command::Props { config, report } => {
            let cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    PropsConfig::from_toml_str(&text)?
                }
                None => PropsConfig::default(),
            };
            let rep = run_property_suite(&cfg);
            for line in rep.summary_lines() {
                println!("{line}");
            }
            let json = serde_json::to_string_pretty(&rep)?;
            match report {
                Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
                None => println!("{json}"),
            }
            if !rep.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Compare { csv } => {
            let rows = compare_files(&csv)?;
            print!("{}", render(&csv, &rows));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
