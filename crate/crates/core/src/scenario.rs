//! Scenario configuration and the CSV/report generators behind the CLI.
//!
//! Every number is written with the shortest round-trip representation, rows
//! follow grid order, and nothing time-dependent enters an output, so the same
//! config always produces the same bytes.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::closed_form::{self, CrossCheck};
use crate::coupled::{CoupledState, Event};
use crate::error::Result;
use crate::oracle::{self, OracleReport};

pub const PRESET_PAPER_CASE_STUDY: &str = "paper-case-study";
pub const PRESETS: [&str; 1] = [PRESET_PAPER_CASE_STUDY];

/// States sampled by the randomized half of `verify`.
pub const VERIFY_RANDOM_STATES: usize = 1000;

pub const PURCHASE_COLUMNS: [&str; 9] = [
    "mu_y",
    "delta_x",
    "value_discrepancy",
    "indicator",
    "mu_z",
    "depth_marg_y",
    "kappa_y",
    "kappa_z",
    "a2",
];
pub const LIQUIDATION_COLUMNS: [&str; 8] = [
    "mu_y",
    "gamma_z",
    "value_discrepancy",
    "mu_x",
    "depth_marg_y",
    "kappa_y",
    "kappa_x",
    "b2",
];
pub const TRANSMISSION_COLUMNS: [&str; 3] = ["mu_y", "mu_z", "mu_x"];
pub const SURFACE_COLUMNS: [&str; 6] = [
    "mu_y",
    "d_mu_y",
    "marginal_output",
    "order1",
    "order2",
    "residual",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reserves {
    pub x: f64,
    pub y1: f64,
    pub y2: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fees {
    pub fee1: f64,
    pub fee2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub mu_min: f64,
    pub mu_max: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surface {
    pub d_mu_min: f64,
    pub d_mu_max: f64,
    pub d_mu_points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub reserves: Reserves,
    pub fees: Fees,
    pub sweep: Sweep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<Surface>,
    pub output_path: PathBuf,
}

/// Rejected configuration, with position (parse errors) or field (validation).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            line: None,
            column: None,
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l}, column {c}: ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "field `{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn positive(field: &str, v: f64) -> std::result::Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::field(
            field,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

fn fee(field: &str, v: f64) -> std::result::Result<(), ConfigError> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::field(
            field,
            format!("must lie in [0, 1), got {v}"),
        ))
    }
}

impl ScenarioConfig {
    /// Parses and validates a JSON scenario.
    pub fn from_json_str(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            line: Some(e.line()),
            column: Some(e.column()),
            field: None,
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            PRESET_PAPER_CASE_STUDY => Some(Self {
                reserves: Reserves {
                    x: 1e7,
                    y1: 4.5e8,
                    y2: 7.2e7,
                    z: 1e9,
                },
                fees: Fees {
                    fee1: 0.03,
                    fee2: 0.03,
                },
                sweep: Sweep {
                    mu_min: 0.0,
                    mu_max: 2.0,
                    points: 100,
                    spacing: Spacing::Linear,
                },
                // consecutive perturbations differ by exactly 2
                surface: Some(Surface {
                    d_mu_min: 0.1 / 128.0,
                    d_mu_max: 0.1,
                    d_mu_points: 8,
                    spacing: Spacing::Log,
                }),
                output_path: PathBuf::from("paper-case-study.csv"),
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let r = &self.reserves;
        positive("reserves.x", r.x)?;
        positive("reserves.y1", r.y1)?;
        positive("reserves.y2", r.y2)?;
        positive("reserves.z", r.z)?;
        fee("fees.fee1", self.fees.fee1)?;
        fee("fees.fee2", self.fees.fee2)?;

        let s = &self.sweep;
        if !(s.mu_min.is_finite() && s.mu_min >= 0.0) {
            return Err(ConfigError::field(
                "sweep.mu_min",
                format!("must be >= 0, got {}", s.mu_min),
            ));
        }
        if !(s.mu_max.is_finite() && s.mu_max > s.mu_min) {
            return Err(ConfigError::field(
                "sweep.mu_max",
                format!("must exceed mu_min ({}), got {}", s.mu_min, s.mu_max),
            ));
        }
        if s.points < 2 {
            return Err(ConfigError::field(
                "sweep.points",
                format!("must be >= 2, got {}", s.points),
            ));
        }
        if s.spacing == Spacing::Log && s.mu_min == 0.0 {
            return Err(ConfigError::field(
                "sweep.mu_min",
                "log spacing needs mu_min > 0",
            ));
        }

        if let Some(sf) = &self.surface {
            if !(sf.d_mu_min > 0.0 && sf.d_mu_min <= 0.1) {
                return Err(ConfigError::field(
                    "surface.d_mu_min",
                    format!("must lie in (0, 0.1], got {}", sf.d_mu_min),
                ));
            }
            if !(sf.d_mu_max >= sf.d_mu_min && sf.d_mu_max <= 0.1) {
                return Err(ConfigError::field(
                    "surface.d_mu_max",
                    format!("must lie in [d_mu_min, 0.1], got {}", sf.d_mu_max),
                ));
            }
            if sf.d_mu_points == 0 || (sf.d_mu_points == 1 && sf.d_mu_max != sf.d_mu_min) {
                return Err(ConfigError::field(
                    "surface.d_mu_points",
                    "must be >= 2, or 1 when d_mu_min == d_mu_max",
                ));
            }
        }
        if self.output_path.as_os_str().is_empty() {
            return Err(ConfigError::field("output_path", "must not be empty"));
        }
        self.state()
            .map_err(|e| ConfigError::field("reserves", e.to_string()))?;
        Ok(())
    }

    pub fn state(&self) -> Result<CoupledState> {
        let r = &self.reserves;
        CoupledState::new(
            r.x,
            r.y1,
            r.y2,
            r.z,
            1.0 - self.fees.fee1,
            1.0 - self.fees.fee2,
        )
    }

    pub fn mu_grid(&self) -> Vec<f64> {
        grid(
            self.sweep.mu_min,
            self.sweep.mu_max,
            self.sweep.points,
            self.sweep.spacing,
        )
    }

    pub fn d_mu_grid(&self) -> Option<Vec<f64>> {
        self.surface
            .as_ref()
            .map(|s| grid(s.d_mu_min, s.d_mu_max, s.d_mu_points, s.spacing))
    }
}

fn grid(lo: f64, hi: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    match spacing {
        Spacing::Linear => oracle::linear_grid(lo, hi, n),
        Spacing::Log => oracle::linear_grid(lo.ln(), hi.ln(), n)
            .into_iter()
            .enumerate()
            .map(|(i, t)| match i {
                0 => lo,
                i if i + 1 == n => hi,
                _ => t.exp(),
            })
            .collect(),
    }
}

// ---- CSV ------------------------------------------------------------------

struct Table {
    out: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(header).expect("in-memory write");
        Self { out }
    }

    fn row(&mut self, values: &[f64]) {
        self.out
            .write_record(values.iter().map(|v| v.to_string()))
            .expect("in-memory write");
    }

    fn finish(self) -> String {
        let bytes = self.out.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("ascii output")
    }
}

/// Figure 1–2 data: basket gap, indicator, transmission and curvatures per drift.
pub fn purchase_sweep_csv(state: &CoupledState, grid: &[f64]) -> Result<String> {
    let mut t = Table::new(&PURCHASE_COLUMNS);
    for &mu in grid {
        let m = state.purchase_metrics(mu)?;
        t.row(&[
            mu,
            m.amount_in,
            m.value_discrepancy,
            m.indicator.unwrap_or(f64::NAN),
            m.transmitted_drift,
            m.depth_marg_y,
            m.kappa_y,
            m.kappa_z_or_x,
            m.coefficient,
        ]);
    }
    Ok(t.finish())
}

/// Figure 4 data.
pub fn liquidation_sweep_csv(state: &CoupledState, grid: &[f64]) -> Result<String> {
    let mut t = Table::new(&LIQUIDATION_COLUMNS);
    for &mu in grid {
        let m = state.liquidation_metrics(mu)?;
        t.row(&[
            mu,
            m.amount_in,
            m.value_discrepancy,
            m.transmitted_drift,
            m.depth_marg_y,
            m.kappa_y,
            m.kappa_z_or_x,
            m.coefficient,
        ]);
    }
    Ok(t.finish())
}

pub fn transmission_csv(state: &CoupledState, grid: &[f64]) -> Result<String> {
    let mut t = Table::new(&TRANSMISSION_COLUMNS);
    for &mu in grid {
        t.row(&[
            mu,
            state.drift_transmission_purchase(mu)?,
            state.drift_transmission_liquidation(mu)?,
        ]);
    }
    Ok(t.finish())
}

/// Figure 3 / 5 data in long format, `d_mu` varying fastest.
pub fn surface_csv(
    state: &CoupledState,
    event: Event,
    grid: &[f64],
    d_mu: &[f64],
) -> Result<String> {
    let mut t = Table::new(&SURFACE_COLUMNS);
    for &mu in grid {
        for &d in d_mu {
            let r = state.marginal_output(event, mu, d)?;
            t.row(&[mu, d, r.marginal_output(), r.order1, r.order2, r.residual]);
        }
    }
    Ok(t.finish())
}

// ---- verify ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub reports: Vec<OracleReport>,
    /// Published closed forms next to the pipeline; informational only.
    pub diagnostics: Vec<CrossCheck>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.reports
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable table of the oracle reports and diagnostic summary.
    pub fn table(&self) -> String {
        let width = self
            .reports
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(4)
            .max(6);
        let mut s = format!(
            "{:<width$}  {:>6}  {:>8}  {:>11}  {:>11}\n",
            "oracle", "result", "samples", "max_error", "tolerance"
        );
        for r in &self.reports {
            s += &format!(
                "{:<width$}  {:>6}  {:>8}  {:>11.3e}  {:>11.3e}\n",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.samples,
                r.max_rel_error,
                r.tolerance
            );
        }
        let mut names: Vec<&str> = self.diagnostics.iter().map(|c| c.name).collect();
        names.dedup();
        for name in names {
            let rows: Vec<_> = self.diagnostics.iter().filter(|c| c.name == name).collect();
            let worst = rows.iter().map(|c| c.rel_error).fold(0.0, f64::max);
            let agree = rows.iter().filter(|c| c.agrees).count();
            s += &format!(
                "diagnostic {name}: agrees at {agree}/{} points, worst rel error {worst:.3e}\n",
                rows.len()
            );
        }
        s
    }
}

/// Grid suite on the configured state plus the seeded randomized suite.
pub fn verify(cfg: &ScenarioConfig, forms: &oracle::ClosedForms) -> Result<VerifyOutcome> {
    let state = cfg.state()?;
    let grid = cfg.mu_grid();
    let mut reports = oracle::run_suite_with(&state, &grid, forms);
    reports.extend(oracle::run_randomized_suite_with(
        oracle::DEFAULT_SEED,
        VERIFY_RANDOM_STATES,
        forms,
    ));
    let mut diagnostics = Vec::new();
    for &mu in &grid {
        diagnostics.extend(closed_form::printed_form_diagnostics(&state, mu)?);
    }
    diagnostics.sort_by(|a, b| a.name.cmp(b.name));
    Ok(VerifyOutcome {
        reports,
        diagnostics,
    })
}

/// `<stem>.verify.json` beside the configured output.
pub fn default_report_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    output.with_file_name(format!("{stem}.verify.json"))
}

/// Convenience for callers holding only a config.
pub fn sweep_for(cfg: &ScenarioConfig, event: Event) -> Result<String> {
    let state = cfg.state()?;
    match event {
        Event::Purchase => purchase_sweep_csv(&state, &cfg.mu_grid()),
        Event::Liquidation => liquidation_sweep_csv(&state, &cfg.mu_grid()),
    }
}

/// Surface for `event`, or an error when the config has no surface block.
pub fn surface_for(
    cfg: &ScenarioConfig,
    event: Event,
) -> std::result::Result<Result<String>, ConfigError> {
    let d_mu = cfg.d_mu_grid().ok_or_else(|| {
        ConfigError::field("surface", "the surface command needs a `surface` block")
    })?;
    Ok(cfg
        .state()
        .and_then(|s| surface_csv(&s, event, &cfg.mu_grid(), &d_mu)))
}
