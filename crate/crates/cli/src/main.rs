use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coupled_cfmm::oracle::ClosedForms;
use coupled_cfmm::scenario::{self, ConfigError, ScenarioConfig};
use coupled_cfmm::Event;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

/// Coupled CFMM sweeps and verification.
#[derive(Parser)]
#[command(name = "coupled-cfmm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Basket value gap, indicator, z/y drift and curvatures per y/x drift.
    PurchaseSweep(Common),
    /// Basket value gap, y/x drift and curvatures per z/y drift.
    LiquidationSweep(Common),
    /// Marginal output surface over (mu_y, d_mu_y).
    Surface {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = EventArg::Purchase)]
        event: EventArg,
    },
    /// Drift transmitted to the other pool, both directions.
    Transmission(Common),
    /// Run the oracle suite; exits 1 if any check fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Replace one closed form by a skewed copy (exercises the failure path).
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON scenario file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled scenario.
    #[arg(long, value_parser = scenario::PRESETS)]
    preset: Option<String>,
    /// Output file; overrides the scenario's `output_path`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EventArg {
    Purchase,
    Liquidation,
}

impl From<EventArg> for Event {
    fn from(e: EventArg) -> Self {
        match e {
            EventArg::Purchase => Event::Purchase,
            EventArg::Liquidation => Event::Liquidation,
        }
    }
}

enum Failure {
    Config(String),
    Io(String),
    Verify(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(format!("invalid config: {e}"))
    }
}

impl From<coupled_cfmm::Error> for Failure {
    fn from(e: coupled_cfmm::Error) -> Self {
        Failure::Config(format!("scenario cannot be evaluated: {e}"))
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    match (&common.config, &common.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::from_json_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => ScenarioConfig::preset(name)
            .ok_or_else(|| Failure::Config(format!("unknown preset `{name}`"))),
        (None, None) => Err(Failure::Config(
            "either --config or --preset is required".into(),
        )),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn emit(common: &Common, cfg: &ScenarioConfig, csv: String) -> Result<(), Failure> {
    let path = common
        .out
        .clone()
        .unwrap_or_else(|| cfg.output_path.clone());
    write(&path, &csv)?;
    eprintln!(
        "wrote {} rows to {}",
        csv.lines().count().saturating_sub(1),
        path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::PurchaseSweep(common) => {
            let cfg = load(&common)?;
            let state = cfg.state()?;
            let grid = cfg.mu_grid();
            let outside = grid
                .iter()
                .filter(|&&mu| matches!(state.inflation_indicator(mu), Ok(i) if !i.in_regime))
                .count();
            if outside > 0 {
                eprintln!("warning: {outside} grid points exceed the indicator's trade-size regime (Δ > ½·P_y·y1)");
            }
            emit(&common, &cfg, scenario::purchase_sweep_csv(&state, &grid)?)
        }
        Command::LiquidationSweep(common) => {
            let cfg = load(&common)?;
            emit(
                &common,
                &cfg,
                scenario::sweep_for(&cfg, Event::Liquidation)?,
            )
        }
        Command::Transmission(common) => {
            let cfg = load(&common)?;
            emit(
                &common,
                &cfg,
                scenario::transmission_csv(&cfg.state()?, &cfg.mu_grid())?,
            )
        }
        Command::Surface { common, event } => {
            let cfg = load(&common)?;
            let csv = scenario::surface_for(&cfg, event.into())??;
            emit(&common, &cfg, csv)
        }
        Command::Verify { common, corrupt } => {
            let cfg = load(&common)?;
            let forms = match corrupt.as_deref() {
                Some(name) => {
                    ClosedForms::corrupted(name).map_err(|e| Failure::Config(e.to_string()))?
                }
                None => ClosedForms::default(),
            };
            let outcome = scenario::verify(&cfg, &forms)?;
            print!("{}", outcome.table());
            let path = common
                .out
                .clone()
                .unwrap_or_else(|| scenario::default_report_path(&cfg.output_path));
            write(&path, &outcome.to_json())?;
            eprintln!("report written to {}", path.display());
            if outcome.passed() {
                Ok(())
            } else {
                Err(Failure::Verify(format!(
                    "verification failed: {}",
                    outcome.failures().join(", ")
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Config(m) => (EXIT_CONFIG, m),
                Failure::Io(m) => (EXIT_IO, m),
                Failure::Verify(m) => (EXIT_VERIFY_FAILED, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
