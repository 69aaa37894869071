//! Independent numerical oracles: finite differences, sequential swap
//! execution, Gauss–Legendre quadrature and step-halving, plus the suite that
//! runs them against the analytics layer.
//!
//! Closed forms are reached through a [`ClosedForms`] table so a test build can
//! swap in a deliberately wrong expression and watch the suite fail.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::closed_form::{self, rel_diff};
use crate::coupled::{CoupledState, Event};
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x5EED;
pub const RANDOM_GAMMAS: [f64; 4] = [1.0, 0.997, 0.97, 0.9];
pub const RANDOM_RESERVE_RANGE: (f64, f64) = (1e3, 1e12);

pub const COMPOSITION_TOL: f64 = 1e-12;
pub const ROUND_TRIP_TOL: f64 = 1e-10;
pub const TRANSMISSION_TOL: f64 = 1e-9;
pub const VALUE_CLOSED_FORM_TOL: f64 = 1e-9;
pub const MARGINAL_PRICE_TOL: f64 = 1e-7;
pub const DEPTH_TOL: f64 = 1e-6;
pub const CURVATURE_TOL: f64 = 1e-6;
pub const EXPANSION_COEFF_TOL: f64 = 1e-6;
pub const TOTAL_DEPTH_TOL: f64 = 1e-9;
/// Accepted per-halving shrink factor of a cubic residual.
pub const STEP_HALVING_BAND: (f64, f64) = (6.0, 10.0);
pub const STEP_HALVING_DELTAS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Relative steps for first and second derivatives. After one Richardson level
/// truncation is `O(h⁴)`, so the rounding-optimal step is far larger than for a
/// plain central difference.
pub const FIRST_ORDER_STEP_FACTOR: f64 = 1e-4;
pub const SECOND_ORDER_STEP_FACTOR: f64 = 1e-3;
const MIN_STEP: f64 = 1e-9;
const GAUSS_NODES: usize = 48;

/// Outcome of one named oracle over a set of samples.
///
/// For tolerance checks `max_rel_error` is the worst relative error. For sign,
/// ordering and band checks it is the size of the worst violation (zero when
/// none), measured against a tolerance of zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub samples: usize,
    pub worst_case_input: Value,
    pub passed: bool,
}

struct Accumulator {
    name: String,
    tolerance: f64,
    max: f64,
    worst: Value,
    samples: usize,
    failed_eval: bool,
}

impl Accumulator {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            max: 0.0,
            worst: Value::Null,
            samples: 0,
            failed_eval: false,
        }
    }

    fn record(&mut self, input: Value, err: Result<f64>) {
        self.samples += 1;
        match err {
            Ok(e) if !e.is_nan() => {
                if !self.failed_eval && (e > self.max || self.worst.is_null()) {
                    self.max = e;
                    self.worst = input;
                }
            }
            Ok(_) => self.fail(input, "NaN".into()),
            Err(e) => self.fail(input, e.to_string()),
        }
    }

    fn fail(&mut self, input: Value, why: String) {
        if !self.failed_eval {
            self.failed_eval = true;
            self.max = f64::INFINITY;
            self.worst = json!({ "input": input, "error": why });
        }
    }

    fn finish(self) -> OracleReport {
        OracleReport {
            passed: !self.failed_eval && self.max <= self.tolerance,
            name: self.name,
            tolerance: self.tolerance,
            max_rel_error: self.max,
            samples: self.samples,
            worst_case_input: self.worst,
        }
    }
}

// ---- finite differences ---------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Central,
    /// One-sided, for functions only defined to the right of `at`.
    Forward,
}

fn eval<F: Fn(f64) -> f64>(f: &F, at: f64) -> Result<f64> {
    let v = f(at);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation { at })
    }
}

fn raw_difference<F: Fn(f64) -> f64>(
    f: &F,
    at: f64,
    order: u8,
    h: f64,
    stencil: Stencil,
) -> Result<f64> {
    let p = |k: f64| eval(f, at + k * h);
    Ok(match (stencil, order) {
        (Stencil::Central, 1) => (p(1.0)? - p(-1.0)?) / (2.0 * h),
        (Stencil::Central, _) => (p(1.0)? - 2.0 * p(0.0)? + p(-1.0)?) / (h * h),
        (Stencil::Forward, 1) => (-3.0 * p(0.0)? + 4.0 * p(1.0)? - p(2.0)?) / (2.0 * h),
        (Stencil::Forward, _) => {
            (2.0 * p(0.0)? - 5.0 * p(1.0)? + 4.0 * p(2.0)? - p(3.0)?) / (h * h)
        }
    })
}

/// Finite difference with step `h` and one level of Richardson extrapolation.
/// All stencils used have an `h²` leading error term.
pub fn fd_derivative_with<F: Fn(f64) -> f64>(
    f: F,
    at: f64,
    order: u8,
    h: f64,
    stencil: Stencil,
) -> Result<f64> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidParameter {
            what: "finite-difference order",
            value: order as f64,
        });
    }
    let coarse = raw_difference(&f, at, order, h, stencil)?;
    let fine = raw_difference(&f, at, order, 0.5 * h, stencil)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Default step for a derivative of `order` at inputs of magnitude `scale`.
pub fn fd_step_for(order: u8, scale: f64) -> f64 {
    let factor = if order == 1 {
        FIRST_ORDER_STEP_FACTOR
    } else {
        SECOND_ORDER_STEP_FACTOR
    };
    (factor * scale.abs()).max(MIN_STEP)
}

/// Central difference at `at`, scale taken as `max(|at|, 1)`.
pub fn fd_derivative<F: Fn(f64) -> f64>(f: F, at: f64, order: u8) -> Result<f64> {
    fd_derivative_scaled(f, at, order, at.abs().max(1.0))
}

/// Central difference with the step set from `scale`.
pub fn fd_derivative_scaled<F: Fn(f64) -> f64>(
    f: F,
    at: f64,
    order: u8,
    scale: f64,
) -> Result<f64> {
    fd_derivative_with(f, at, order, fd_step_for(order, scale), Stencil::Central)
}

/// For functions on `[0, ∞)`: central where the stencil fits, forward otherwise.
/// The forward stencil only reaches `O(h³)` after extrapolation, so it runs
/// at a quarter of the step.
pub fn fd_derivative_half_line<F: Fn(f64) -> f64>(
    f: F,
    at: f64,
    order: u8,
    scale: f64,
) -> Result<f64> {
    let h = fd_step_for(order, scale);
    if at >= h {
        fd_derivative_with(f, at, order, h, Stencil::Central)
    } else {
        fd_derivative_with(f, at, order, 0.25 * h, Stencil::Forward)
    }
}

fn or_nan(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

// ---- sequential execution -------------------------------------------------

/// Executes both legs with [`crate::PoolState::swap_exact_in`] only.
pub fn sequential_swap_oracle(
    state: &CoupledState,
    amount: f64,
    event: Event,
) -> Result<(f64, CoupledState)> {
    match event {
        Event::Purchase => {
            let t1 = state.first_pool().swap_exact_in(amount)?;
            let t2 = state.second_pool().swap_exact_in(t1.amount_out)?;
            Ok((
                t2.amount_out,
                CoupledState::from_pools(&t1.post_state, &t2.post_state),
            ))
        }
        Event::Liquidation => {
            let t1 = state.second_pool().flipped().swap_exact_in(amount)?;
            let t2 = state.first_pool().flipped().swap_exact_in(t1.amount_out)?;
            Ok((
                t2.amount_out,
                CoupledState::from_pools(&t2.post_state.flipped(), &t1.post_state.flipped()),
            ))
        }
    }
}

/// Drift of the second leg measured after executing the first leg by swap.
pub fn sequential_transmission(state: &CoupledState, mu_y: f64, event: Event) -> Result<f64> {
    let (first, second) = match event {
        Event::Purchase => (state.first_pool(), state.second_pool()),
        Event::Liquidation => (state.second_pool().flipped(), state.first_pool().flipped()),
    };
    let t1 = first.swap_exact_in(first.input_for_drift(mu_y)?)?;
    second.quote_drift(t1.amount_out)
}

fn state_rel_diff(a: &CoupledState, b: &CoupledState) -> f64 {
    [
        rel_diff(a.x(), b.x()),
        rel_diff(a.y1(), b.y1()),
        rel_diff(a.y2(), b.y2()),
        rel_diff(a.z(), b.z()),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

// ---- quadrature -----------------------------------------------------------

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (t * p1 - p0) / (t * t - 1.0);
            let step = p1 / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        rule.push((t, 2.0 / ((1.0 - t * t) * dp * dp)));
    }
    rule
}

/// Gauss–Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    gauss_legendre_rule(n)
        .into_iter()
        .map(|(t, w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

// ---- step halving ---------------------------------------------------------

/// Ratios `|r(δ_k)| / |r(δ_{k+1})|` for consecutive perturbations.
pub fn step_halving_ratios<F>(residual: F, deltas: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let r = deltas
        .iter()
        .map(|&d| residual(d))
        .collect::<Result<Vec<_>>>()?;
    Ok(r.windows(2).map(|w| w[0].abs() / w[1].abs()).collect())
}

fn band_violation(ratios: &[f64]) -> f64 {
    let (lo, hi) = STEP_HALVING_BAND;
    ratios
        .iter()
        .map(|&q| {
            if q.is_nan() {
                f64::INFINITY
            } else {
                (lo - q).max(q - hi).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

// ---- closed form table ----------------------------------------------------

pub type AmountForm = fn(&CoupledState, f64) -> f64;

/// The compound closed forms checked by the suite.
#[derive(Debug, Clone, Copy)]
pub struct ClosedForms {
    pub purchase_output: AmountForm,
    pub liquidation_output: AmountForm,
    pub transmission_purchase: AmountForm,
    pub transmission_liquidation: AmountForm,
    pub value_discrepancy_purchase: AmountForm,
    pub value_discrepancy_liquidation: AmountForm,
}

impl Default for ClosedForms {
    fn default() -> Self {
        Self {
            purchase_output: closed_form::purchase_output,
            liquidation_output: closed_form::liquidation_output,
            transmission_purchase: closed_form::transmission_purchase,
            transmission_liquidation: closed_form::transmission_liquidation,
            value_discrepancy_purchase: closed_form::value_discrepancy_purchase,
            value_discrepancy_liquidation: closed_form::value_discrepancy_liquidation,
        }
    }
}

fn skewed_purchase_output(s: &CoupledState, d: f64) -> f64 {
    closed_form::purchase_output(s, d) * (1.0 + 1e-6)
}
fn skewed_liquidation_output(s: &CoupledState, g: f64) -> f64 {
    closed_form::liquidation_output(s, g) * (1.0 + 1e-6)
}
fn skewed_transmission_purchase(s: &CoupledState, mu: f64) -> f64 {
    closed_form::transmission_purchase(s, mu) * (1.0 + 1e-6)
}
fn skewed_transmission_liquidation(s: &CoupledState, mu: f64) -> f64 {
    closed_form::transmission_liquidation(s, mu) * (1.0 + 1e-6)
}
fn skewed_value_discrepancy_purchase(s: &CoupledState, mu: f64) -> f64 {
    closed_form::value_discrepancy_purchase(s, mu) * (1.0 + 1e-6)
}
fn skewed_value_discrepancy_liquidation(s: &CoupledState, mu: f64) -> f64 {
    closed_form::value_discrepancy_liquidation(s, mu) * (1.0 + 1e-6)
}

impl ClosedForms {
    pub const NAMES: [&'static str; 6] = [
        "purchase_output",
        "liquidation_output",
        "transmission_purchase",
        "transmission_liquidation",
        "value_discrepancy_purchase",
        "value_discrepancy_liquidation",
    ];

    /// The default table with `name` off by one part per million.
    pub fn corrupted(name: &str) -> Result<Self> {
        let mut forms = Self::default();
        match name {
            "purchase_output" => forms.purchase_output = skewed_purchase_output,
            "liquidation_output" => forms.liquidation_output = skewed_liquidation_output,
            "transmission_purchase" => forms.transmission_purchase = skewed_transmission_purchase,
            "transmission_liquidation" => {
                forms.transmission_liquidation = skewed_transmission_liquidation
            }
            "value_discrepancy_purchase" => {
                forms.value_discrepancy_purchase = skewed_value_discrepancy_purchase
            }
            "value_discrepancy_liquidation" => {
                forms.value_discrepancy_liquidation = skewed_value_discrepancy_liquidation
            }
            other => return Err(Error::UnknownClosedForm(other.to_string())),
        }
        Ok(forms)
    }
}

// ---- suites ---------------------------------------------------------------

/// Every grid cross-check with the default closed forms.
pub fn run_suite(state: &CoupledState, grid: &[f64]) -> Vec<OracleReport> {
    run_suite_with(state, grid, &ClosedForms::default())
}

/// Every grid cross-check. Reports are sorted by name; an empty grid yields none.
pub fn run_suite_with(
    state: &CoupledState,
    grid: &[f64],
    forms: &ClosedForms,
) -> Vec<OracleReport> {
    if grid.is_empty() {
        return Vec::new();
    }
    let s = state;
    let mut reports = vec![
        composition(
            s,
            grid,
            Event::Purchase,
            forms.purchase_output,
            "composition_purchase",
        ),
        composition(
            s,
            grid,
            Event::Liquidation,
            forms.liquidation_output,
            "composition_liquidation",
        ),
        drift_round_trip(s, grid),
        marginal_price_fd(s, grid),
        marginal_depth_fd(s, grid),
        total_depth_quadrature(s, grid),
        transmission(
            s,
            grid,
            Event::Purchase,
            forms.transmission_purchase,
            "transmission_purchase",
        ),
        transmission(
            s,
            grid,
            Event::Liquidation,
            forms.transmission_liquidation,
            "transmission_liquidation",
        ),
        transmission_shape(s, grid, Event::Purchase, "transmission_shape_purchase"),
        transmission_shape(
            s,
            grid,
            Event::Liquidation,
            "transmission_shape_liquidation",
        ),
        value_closed_form(
            s,
            grid,
            "value_discrepancy_purchase",
            forms.value_discrepancy_purchase,
            CoupledState::value_discrepancy_purchase,
        ),
        value_closed_form(
            s,
            grid,
            "value_discrepancy_liquidation",
            forms.value_discrepancy_liquidation,
            CoupledState::value_discrepancy_liquidation,
        ),
        value_signs(s, grid),
        purchase_convexity(s, grid),
        indicator_sign(s, grid),
        curvature_fd(s, grid, Event::Purchase, "curvature_purchase_fd"),
        curvature_fd(s, grid, Event::Liquidation, "curvature_liquidation_fd"),
        expansion_coefficients(s, grid, Event::Purchase, "expansion_coefficients_purchase"),
        expansion_coefficients(
            s,
            grid,
            Event::Liquidation,
            "expansion_coefficients_liquidation",
        ),
        expansion_order(s, grid, Event::Purchase, "expansion_order_purchase"),
        expansion_order(s, grid, Event::Liquidation, "expansion_order_liquidation"),
    ];
    reports.sort_by(|a, b| a.name.cmp(&b.name));
    reports
}

fn composition(
    s: &CoupledState,
    grid: &[f64],
    event: Event,
    form: AmountForm,
    name: &str,
) -> OracleReport {
    let mut acc = Accumulator::new(name, COMPOSITION_TOL);
    let entry = match event {
        Event::Purchase => s.first_pool(),
        Event::Liquidation => s.second_pool().flipped(),
    };
    for &mu in grid {
        let err = (|| {
            let amount = entry.input_for_drift(mu)?;
            let (out, post) = sequential_swap_oracle(s, amount, event)?;
            let post_fn = match event {
                Event::Purchase => s.transition_purchase(amount)?,
                Event::Liquidation => s.transition_liquidation(amount)?,
            };
            Ok(rel_diff(form(s, amount), out).max(state_rel_diff(&post, &post_fn)))
        })();
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

fn drift_round_trip(s: &CoupledState, grid: &[f64]) -> OracleReport {
    let mut acc = Accumulator::new("drift_round_trip", ROUND_TRIP_TOL);
    for (label, pool) in [("y/x", s.first_pool()), ("z/y", s.second_pool().flipped())] {
        for &mu in grid {
            let err = pool
                .input_for_drift(mu)
                .and_then(|d| pool.quote_drift(d))
                .map(|back| rel_diff(back, mu));
            acc.record(json!({ "pool": label, "mu": mu }), err);
        }
    }
    acc.finish()
}

fn marginal_price_fd(s: &CoupledState, grid: &[f64]) -> OracleReport {
    let mut acc = Accumulator::new("marginal_exec_price_fd", MARGINAL_PRICE_TOL);
    let pool = s.first_pool();
    for &mu in grid {
        let err = (|| {
            let d = pool.input_for_drift(mu)?;
            let fd =
                fd_derivative_half_line(|t| or_nan(pool.amount_out(t)), d, 1, pool.reserve_base())?;
            Ok(rel_diff(pool.marginal_exec_price(d)?, fd))
        })();
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

fn marginal_depth_fd(s: &CoupledState, grid: &[f64]) -> OracleReport {
    let mut acc = Accumulator::new("marginal_depth_fd", DEPTH_TOL);
    for (label, pool) in [("y/x", s.first_pool()), ("z/y", s.second_pool().flipped())] {
        for &mu in grid {
            let err = (|| {
                let d = pool.input_for_drift(mu)?;
                let slope = fd_derivative_half_line(
                    |t| or_nan(pool.quote_drift(t)),
                    d,
                    1,
                    pool.reserve_base(),
                )?;
                Ok(rel_diff(pool.marginal_depth(mu)?, 1.0 / slope))
            })();
            acc.record(json!({ "pool": label, "mu": mu }), err);
        }
    }
    acc.finish()
}

fn total_depth_quadrature(s: &CoupledState, grid: &[f64]) -> OracleReport {
    let mut acc = Accumulator::new("total_depth_quadrature", TOTAL_DEPTH_TOL);
    let pool = s.first_pool();
    for &mu in grid {
        let err = pool.total_depth(mu).map(|t| {
            let gl = gauss_legendre(|m| or_nan(pool.marginal_depth(m)), 0.0, mu, GAUSS_NODES);
            rel_diff(t, gl)
        });
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

fn transmission(
    s: &CoupledState,
    grid: &[f64],
    event: Event,
    form: AmountForm,
    name: &str,
) -> OracleReport {
    let mut acc = Accumulator::new(name, TRANSMISSION_TOL);
    for &mu in grid {
        let err = (|| {
            let measured = sequential_transmission(s, mu, event)?;
            let pipeline = match event {
                Event::Purchase => s.drift_transmission_purchase(mu)?,
                Event::Liquidation => s.drift_transmission_liquidation(mu)?,
            };
            Ok(rel_diff(form(s, mu), measured).max(rel_diff(pipeline, measured)))
        })();
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

type DriftFn = fn(&CoupledState, f64) -> Result<f64>;

/// Zero at zero, strictly increasing along the grid, below the full-reserve bound.
fn transmission_shape(s: &CoupledState, grid: &[f64], event: Event, name: &str) -> OracleReport {
    let mut acc = Accumulator::new(name, 0.0);
    let (bound, f): (Result<f64>, DriftFn) = match event {
        Event::Purchase => (
            s.transmission_bound_purchase(),
            CoupledState::drift_transmission_purchase,
        ),
        Event::Liquidation => (
            s.transmission_bound_liquidation(),
            CoupledState::drift_transmission_liquidation,
        ),
    };
    let bound = match bound {
        Ok(b) => b,
        Err(e) => {
            acc.record(json!("bound"), Err(e));
            return acc.finish();
        }
    };
    let mut prev: Option<(f64, f64)> = None;
    for &mu in grid.iter().chain(std::iter::once(&1e6)) {
        let err = f(s, mu).map(|m| {
            let mut v = ((m - bound) / bound).max(0.0);
            if m == bound {
                v = f64::MIN_POSITIVE;
            }
            if mu == 0.0 && m != 0.0 {
                v = v.max(m.abs());
            }
            if let Some((pmu, pm)) = prev {
                if mu > pmu && m <= pm {
                    v = v
                        .max((pm - m) / pm.abs().max(f64::MIN_POSITIVE))
                        .max(f64::MIN_POSITIVE);
                }
            }
            prev = Some((mu, m));
            v
        });
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

type Pipeline = fn(&CoupledState, f64) -> Result<f64>;

fn value_closed_form(
    s: &CoupledState,
    grid: &[f64],
    name: &str,
    form: AmountForm,
    pipeline: Pipeline,
) -> OracleReport {
    let mut acc = Accumulator::new(name, VALUE_CLOSED_FORM_TOL);
    for &mu in grid {
        let err = pipeline(s, mu).map(|v| rel_diff(v, form(s, mu)));
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

/// Purchase value positive and liquidation value negative off zero, both zero at zero.
fn value_signs(s: &CoupledState, grid: &[f64]) -> OracleReport {
    let mut acc = Accumulator::new("value_discrepancy_signs", 0.0);
    let scale = s.x();
    for &mu in grid {
        let err = (|| {
            let vp = s.value_discrepancy_purchase(mu)?;
            let vl = s.value_discrepancy_liquidation(mu)?;
            Ok(if mu == 0.0 {
                (vp.abs() + vl.abs()) / scale
            } else if vp > 0.0 && vl < 0.0 {
                0.0
            } else {
                (vp.min(0.0).abs() + vl.max(0.0)) / scale + f64::MIN_POSITIVE
            })
        })();
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

/// Second divided difference of `v` in `√(μ+1)` positive at interior grid points.
fn purchase_convexity(s: &CoupledState, grid: &[f64]) -> OracleReport {
    let mut acc = Accumulator::new("value_discrepancy_purchase_convexity", 0.0);
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    for w in sorted.windows(3) {
        let err = (|| {
            let sq: Vec<f64> = w.iter().map(|m| (m + 1.0).sqrt()).collect();
            let v = w
                .iter()
                .map(|&m| s.value_discrepancy_purchase(m))
                .collect::<Result<Vec<_>>>()?;
            let d1 = (v[1] - v[0]) / (sq[1] - sq[0]);
            let d2 = (v[2] - v[1]) / (sq[2] - sq[1]);
            let second = (d2 - d1) / (sq[2] - sq[0]);
            Ok(if second > 0.0 {
                0.0
            } else {
                -second / s.x() + f64::MIN_POSITIVE
            })
        })();
        acc.record(json!({ "mu_y": w[1] }), err);
    }
    acc.finish()
}

fn sign_mismatch(l: f64, v: f64) -> f64 {
    if l.signum() == v.signum() || (l == 0.0 && v == 0.0) {
        0.0
    } else {
        1.0
    }
}

fn indicator_sign(s: &CoupledState, grid: &[f64]) -> OracleReport {
    let mut acc = Accumulator::new("indicator_sign", 0.0);
    for &mu in grid {
        let Ok(v) = s.purchase_valuation(mu) else {
            acc.record(json!({ "mu_y": mu }), s.purchase_valuation(mu).map(|_| 0.0));
            continue;
        };
        if v.in_regime {
            acc.record(
                json!({ "mu_y": mu }),
                Ok(sign_mismatch(v.indicator, v.value_discrepancy)),
            );
        }
    }
    acc.finish()
}

/// Leg curvatures against second differences of the single-pool swap outputs.
fn curvature_fd(s: &CoupledState, grid: &[f64], event: Event, name: &str) -> OracleReport {
    let mut acc = Accumulator::new(name, CURVATURE_TOL);
    let (p1, p2) = match event {
        Event::Purchase => (s.first_pool(), s.second_pool()),
        Event::Liquidation => (s.second_pool().flipped(), s.first_pool().flipped()),
    };
    for &mu in grid {
        let err = (|| {
            let c = match event {
                Event::Purchase => s.compound_curvature_purchase(mu)?,
                Event::Liquidation => s.compound_curvature_liquidation(mu)?,
            };
            let a = p1.input_for_drift(mu)?;
            let lam = p1.amount_out(a)?;
            let k1 =
                -fd_derivative_half_line(|t| or_nan(p1.amount_out(t)), a, 2, p1.reserve_base())?;
            let k2 =
                -fd_derivative_half_line(|t| or_nan(p2.amount_out(t)), lam, 2, p2.reserve_base())?;
            Ok(rel_diff(c.kappa_first, k1).max(rel_diff(c.kappa_second, k2)))
        })();
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

/// Output coordinate of the transition as a function of drift, by sequential swaps.
fn reserve_change(s: &CoupledState, event: Event, mu: f64) -> Result<f64> {
    let entry = match event {
        Event::Purchase => s.first_pool(),
        Event::Liquidation => s.second_pool().flipped(),
    };
    Ok(-sequential_swap_oracle(s, entry.input_for_drift(mu)?, event)?.0)
}

/// `order1` and `order2` against the first and half the second drift derivative.
fn expansion_coefficients(
    s: &CoupledState,
    grid: &[f64],
    event: Event,
    name: &str,
) -> OracleReport {
    let mut acc = Accumulator::new(name, EXPANSION_COEFF_TOL);
    for &mu in grid {
        let err = (|| {
            let r = s.marginal_output(event, mu, STEP_HALVING_DELTAS[0])?;
            let f = |m: f64| or_nan(reserve_change(s, event, m));
            let d1 = fd_derivative_half_line(f, mu, 1, 1.0)?;
            let d2 = fd_derivative_half_line(f, mu, 2, 2.0)?;
            Ok(rel_diff(r.order1, d1).max(rel_diff(r.order2, 0.5 * d2)))
        })();
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

fn expansion_order(s: &CoupledState, grid: &[f64], event: Event, name: &str) -> OracleReport {
    let mut acc = Accumulator::new(name, 0.0);
    for &mu in grid {
        let err = step_halving_ratios(
            |d| Ok(s.marginal_output(event, mu, d)?.residual),
            &STEP_HALVING_DELTAS,
        )
        .map(|q| band_violation(&q));
        acc.record(json!({ "mu_y": mu }), err);
    }
    acc.finish()
}

// ---- randomized -----------------------------------------------------------

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

/// `n` coupled constant product states with log-uniform reserves and fees
/// drawn from [`RANDOM_GAMMAS`].
pub fn random_states(seed: u64, n: usize) -> Vec<CoupledState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = RANDOM_RESERVE_RANGE;
    (0..n)
        .map(|_| {
            let r: [f64; 4] = std::array::from_fn(|_| log_uniform(&mut rng, lo, hi));
            let g1 = *RANDOM_GAMMAS.choose(&mut rng).unwrap();
            let g2 = *RANDOM_GAMMAS.choose(&mut rng).unwrap();
            CoupledState::new(r[0], r[1], r[2], r[3], g1, g2).expect("sampled state is valid")
        })
        .collect()
}

/// Largest y/x drift whose input stays inside the indicator's regime guard.
pub fn indicator_regime_limit(s: &CoupledState) -> f64 {
    let u = 1.0 + 0.5 * s.gamma1();
    u * u - 1.0
}

/// Composition and indicator checks over `n` random states.
pub fn run_randomized_suite(seed: u64, n: usize) -> Vec<OracleReport> {
    run_randomized_suite_with(seed, n, &ClosedForms::default())
}

pub fn run_randomized_suite_with(seed: u64, n: usize, forms: &ClosedForms) -> Vec<OracleReport> {
    let states = random_states(seed, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut buy = Accumulator::new("random_composition_purchase", COMPOSITION_TOL);
    let mut sell = Accumulator::new("random_composition_liquidation", COMPOSITION_TOL);
    let mut sign = Accumulator::new("random_indicator_sign", 0.0);
    for (i, s) in states.iter().enumerate() {
        let dx = s.x() * 10f64.powf(rng.gen_range(-6.0..0.5));
        let gz = s.z() * 10f64.powf(rng.gen_range(-6.0..0.5));
        let mu = rng.gen_range(1e-3..indicator_regime_limit(s));

        let err = sequential_swap_oracle(s, dx, Event::Purchase)
            .map(|(out, _)| rel_diff((forms.purchase_output)(s, dx), out));
        buy.record(json!({ "state": i, "amount": dx }), err);
        let err = sequential_swap_oracle(s, gz, Event::Liquidation)
            .map(|(out, _)| rel_diff((forms.liquidation_output)(s, gz), out));
        sell.record(json!({ "state": i, "amount": gz }), err);
        let err = s
            .purchase_valuation(mu)
            .map(|v| sign_mismatch(v.indicator, v.value_discrepancy));
        sign.record(json!({ "state": i, "mu_y": mu }), err);
    }
    vec![buy.finish(), sell.finish(), sign.finish()]
}

/// `n` points evenly spaced on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
