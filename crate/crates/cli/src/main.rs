use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use skyway_core::evaluation::{evaluate, WeightsConfig};
use skyway_core::link::{link_metrics, link_metrics_csv, ModeTable};
use skyway_core::sim::{run_logged, sweep_csv, sweep_envelope, EventLog, Scenario, SimError, TrialOverrides};

/// Low-altitude airspace simulator.
#[derive(Parser)]
#[command(name = "skyway", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print its event log as NDJSON, ending with the result record.
    Run {
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Avoidance probability over a grid of safety margins and aircraft counts, as CSV.
    SweepEnvelope {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        margins: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Effective range and data rate per monitoring mode, as CSV.
    LinkMetrics { modes: PathBuf },
    /// Indicator, weight and composite-score report for a run log, as JSON.
    Evaluate { log: PathBuf, weights: PathBuf },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
}

/// Exit status 1 marks bad input, 2 a failure while running.
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Scenario(e) => Failure::Invalid(e.into()),
            e @ SimError::Runtime(_) => Failure::Runtime(e.into()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::from_path(path).map_err(|e| Failure::Invalid(anyhow::Error::new(e).context(path.display().to_string())))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Invalid)
}

fn execute(command: Command) -> Result<(), Failure> {
    let mut out = BufWriter::new(io::stdout().lock());
    match command {
        Command::Run { scenario, seed } => {
            let s = load_scenario(&scenario)?;
            let (_, log) = run_logged(&s, TrialOverrides { seed, ..Default::default() })?;
            log.write_ndjson(&mut out)?;
        }
        Command::SweepEnvelope { scenario, margins, counts, trials, seed } => {
            let s = load_scenario(&scenario)?;
            s.validate().map_err(SimError::from)?;
            if trials == 0 {
                return Err(Failure::Invalid(anyhow::anyhow!("--trials must be at least 1")));
            }
            let rows = sweep_envelope(&s, &margins, &counts, trials, seed)?;
            out.write_all(sweep_csv(&rows).as_bytes())?;
        }
        Command::LinkMetrics { modes } => {
            let table: ModeTable = toml::from_str(&read(&modes)?)
                .with_context(|| format!("parsing {}", modes.display()))
                .map_err(Failure::Invalid)?;
            table.validate().map_err(|e| Failure::Invalid(e.into()))?;
            let rows = link_metrics(&table.modes).map_err(|e| Failure::Runtime(e.into()))?;
            out.write_all(link_metrics_csv(&rows).as_bytes())?;
        }
        Command::Evaluate { log, weights } => {
            let file = fs::File::open(&log).with_context(|| format!("opening {}", log.display())).map_err(Failure::Invalid)?;
            let events = EventLog::read_ndjson(BufReader::new(file))
                .with_context(|| format!("reading {}", log.display()))
                .map_err(Failure::Invalid)?;
            let cfg = WeightsConfig::from_toml_str(&read(&weights)?).map_err(|e| Failure::Invalid(e.into()))?;
            let report = evaluate(&events, &cfg).map_err(|e| Failure::Invalid(e.into()))?;
            serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Failure::Runtime(e.into()))?;
            out.write_all(b"\n")?;
        }
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            s.validate().map_err(SimError::from)?;
            writeln!(out, "ok: {} ({})", s.name, s.sha256())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
