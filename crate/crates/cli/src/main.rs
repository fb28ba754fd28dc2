//! Command line for the WLAN coalition-matching mechanism.
//!
//! Subcommands: `generate` seeded scenarios, `run` the full mechanism,
//! `sweep` batches with statistics, `check-stability` the brute-force
//! oracles, and `compare` against the nearest-AP and optimal baselines.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use apmatch_core::config::RunConfig;
use apmatch_core::matching::bdaa;
use apmatch_core::model::Scenario;
use apmatch_core::pipeline::{
    self, ApLayout, CompareReport, Pipeline, SweepParams,
};
use apmatch_core::stability::{check_core, check_pairwise, StabilityReport};

#[derive(Parser)]
#[command(name = "apmatch", version, about = "Coalition matching for multi-rate WLAN association")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Layout {
    Random,
    Grid5,
}

impl From<Layout> for ApLayout {
    fn from(l: Layout) -> Self {
        match l {
            Layout::Random => ApLayout::Random,
            Layout::Grid5 => ApLayout::Grid5,
        }
    }
}

#[derive(Args)]
struct CommonIo {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random scenario.
    Generate {
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long, default_value_t = 5)]
        aps: usize,
        /// Square side in meters.
        #[arg(long, default_value_t = 200.0)]
        area: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Layout::Random)]
        layout: Layout,
        #[command(flatten)]
        io: CommonIo,
    },
    /// Run the full mechanism on a scenario.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the matcher's event trace (JSON lines).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        io: CommonIo,
    },
    /// Run many seeded scenarios and aggregate the metrics.
    Sweep {
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long, default_value_t = 5)]
        aps: usize,
        #[arg(long, default_value_t = 200.0)]
        area: f64,
        #[arg(long, value_enum, default_value_t = Layout::Grid5)]
        layout: Layout,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Compare runs against the exhaustive optimum (instances of at most
        /// 12 users).
        #[arg(long, default_value_t = false)]
        with_optimum: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        io: CommonIo,
    },
    /// Stability report for the mechanism's matching on a scenario.
    CheckStability {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        io: CommonIo,
    },
    /// Mechanism vs nearest-AP vs exhaustive optimum.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        io: CommonIo,
    },
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    scenario.validate().map_err(|e| e.to_string())?;
    Ok(scenario)
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, String> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            RunConfig::from_json(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn emit(io: &CommonIo, content: &str) -> Result<(), String> {
    match &io.out {
        None => {
            println!("{content}");
            Ok(())
        }
        Some(p) => fs::write(p, content).map_err(|e| format!("{}: {e}", p.display())),
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Generate { users, aps, area, seed, layout, io } => {
            let scenario = pipeline::generate_random(users, aps, area, seed, layout.into())
                .map_err(|e| e.to_string())?;
            emit(&io, &to_json(&scenario)?)
        }
        Command::Run { scenario, config, trace, format, io } => {
            let scenario = load_scenario(&scenario)?;
            let config = load_config(&config)?;
            let out = pipeline::run_pipeline(scenario, config).map_err(|e| e.to_string())?;
            if let Some(trace_path) = trace {
                let mut lines = String::new();
                for event in &out.trace {
                    lines.push_str(&serde_json::to_string(event).map_err(|e| e.to_string())?);
                    lines.push('\n');
                }
                fs::write(&trace_path, lines)
                    .map_err(|e| format!("{}: {e}", trace_path.display()))?;
            }
            match format {
                Format::Json => emit(&io, &to_json(&out.report)?),
                Format::Csv => Err("run reports are JSON only".into()),
            }
        }
        Command::Sweep { users, aps, area, layout, runs, seed, config, with_optimum, format, io } => {
            let config = load_config(&config)?;
            let params = SweepParams {
                n_users: users,
                n_aps: aps,
                area_m: area,
                layout: layout.into(),
                runs,
                base_seed: seed,
                with_optimum,
            };
            let result = pipeline::sweep(&params, &config).map_err(|e| e.to_string())?;
            match format {
                Format::Csv => emit(&io, &pipeline::sweep_to_csv(&result)),
                Format::Json => emit(&io, &to_json(&result)?),
            }
        }
        Command::CheckStability { scenario, config, io } => {
            let scenario = load_scenario(&scenario)?;
            let config = load_config(&config)?;
            let pipeline = Pipeline::new(scenario, config).map_err(|e| e.to_string())?;
            let outcome = bdaa(&pipeline.table, &pipeline.prefs).map_err(|e| e.to_string())?;
            let (is_pairwise_stable, pairwise_witness) =
                check_pairwise(&pipeline.table, &outcome.matching);
            // the exhaustive scans only run at desk scale
            let (core_member, weak_core_member, core_witness) =
                match check_core(&pipeline.table, &outcome.matching, false) {
                    Ok((core, w)) => {
                        let (weak, w2) = check_core(&pipeline.table, &outcome.matching, true)
                            .map_err(|e| e.to_string())?;
                        (Some(core), Some(weak), w.or(w2))
                    }
                    Err(apmatch_core::Error::SizeGuard { .. }) => (None, None, None),
                    Err(e) => return Err(e.to_string()),
                };
            let report = StabilityReport {
                is_pairwise_stable,
                core_member,
                weak_core_member,
                blocking_witness: pairwise_witness.or(core_witness),
            };
            emit(&io, &to_json(&report)?)
        }
        Command::Compare { scenario, config, io } => {
            let scenario = load_scenario(&scenario)?;
            let config = load_config(&config)?;
            let report: CompareReport =
                pipeline::compare(scenario, config).map_err(|e| e.to_string())?;
            emit(&io, &to_json(&report)?)
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
