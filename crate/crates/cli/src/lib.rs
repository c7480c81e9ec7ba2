//! Command-line workbench: scenario presets, CSV ingestion and report emission.

pub mod commands;
pub mod config;
pub mod report;
pub mod scenario;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{ConfigError, Preset, ScenarioConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NVSCC_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "nvscc",
    version,
    about = "NV-centre spin-to-charge readout workbench"
)]
pub struct Cli {
    /// Scenario preset applied before the config file.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Deep)]
    pub preset: Preset,
    /// Flat `key = value` file overriding preset values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: $NVSCC_OUT_DIR, else the current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PLE spectrum, transition table and field map.
    Ple,
    /// Infer (B, θ) from ODMR lines.
    OdmrInfer {
        /// `frequency_hz,label` file; synthesized from the config when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Simulate the twelve pumping traces.
    PumpSim,
    /// Global rate-model fit of a trace bundle.
    PumpFit {
        /// `family,variant,time_s,rate_cps` bundle; simulated when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit Poisson and Gaussian-mixture models to a count histogram.
    HistFit {
        /// `photon_count,occurrences` file; sampled from the NV⁻ model when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Charge-state threshold and fidelity.
    Threshold {
        /// NV⁻ histogram replacing the configured NV⁻ model.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// NV⁰ histogram replacing the configured NV⁰ model.
        #[arg(long)]
        csv_zero: Option<PathBuf>,
    },
    /// Readout error budget, fidelity and SNR.
    Protocol,
    /// Speed-up over conventional readout versus sensing time.
    Speedup,
    /// Monte Carlo of the full readout protocol.
    Mc,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ple => "ple",
            Command::OdmrInfer { .. } => "odmr-infer",
            Command::PumpSim => "pump-sim",
            Command::PumpFit { .. } => "pump-fit",
            Command::HistFit { .. } => "hist-fit",
            Command::Threshold { .. } => "threshold",
            Command::Protocol => "protocol",
            Command::Speedup => "speedup",
            Command::Mc => "mc",
        }
    }

    pub fn inputs(&self) -> Vec<&PathBuf> {
        match self {
            Command::OdmrInfer { csv } | Command::PumpFit { csv } | Command::HistFit { csv } => {
                csv.iter().collect()
            }
            Command::Threshold { csv, csv_zero } => csv.iter().chain(csv_zero.iter()).collect(),
            _ => vec![],
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(nvscc_core::Error),
    /// Failure writing an output file.
    Output(nvscc_core::Error),
}

impl From<nvscc_core::Error> for CliError {
    fn from(e: nvscc_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Output(e) => write!(f, "cannot write output: {e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use nvscc_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Output(_) => 1,
            CliError::Core(e) => match e {
                E::InvalidParameter(_) => 2,
                E::NonConvergence(_)
                | E::UnderDetermined(_)
                | E::RankDeficient(_)
                | E::Singular(_) => 3,
                E::MalformedInput(_) | E::Csv { .. } | E::Io { .. } => 4,
            },
        }
    }
}

/// Parse `argv` (program name first), run the command and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            eprint!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolve the configuration and run the subcommand.
pub fn execute(cli: &Cli) -> Result<report::RunReport, CliError> {
    let started = std::time::Instant::now();
    let mut config = ScenarioConfig::preset(cli.preset);
    if let Some(p) = &cli.config {
        config.apply_file(p).map_err(CliError::Config)?;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).map_err(|e| {
        CliError::Output(nvscc_core::Error::Io {
            path: out_dir.display().to_string(),
            source: e,
        })
    })?;
    let digest =
        report::input_digest(cli.command.name(), &config, cli.seed, &cli.command.inputs())?;
    let mut out = report::Outputs::new(out_dir);
    commands::dispatch(&cli.command, &config, cli.seed, &mut out)?;
    out.write_summary()?;
    Ok(report::RunReport {
        command: cli.command.name().to_string(),
        preset: cli.preset.name().to_string(),
        input_digest: digest,
        outputs: out.files().to_vec(),
        diagnostics: out.diagnostics().to_vec(),
        seed: cli.seed,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}
