//! Closed forms for two chained constant product pools.
//!
//! These are independent of the pipeline in [`crate::coupled`], which composes
//! single-pool swaps. The [`printed`] submodule keeps the published variants
//! whose drift normalisation differs; [`printed_form_diagnostics`] reports how
//! far each one sits from the pipeline instead of silently picking a side.

use serde::Serialize;

use crate::coupled::CoupledState;
use crate::error::Result;

/// Tolerance used when comparing a closed form against the pipeline.
pub const CROSS_CHECK_TOL: f64 = 1e-9;

fn root_minus_one(mu: f64) -> f64 {
    mu / ((1.0 + mu).sqrt() + 1.0)
}

/// z received for `delta_x` routed x → y → z.
pub fn purchase_output(s: &CoupledState, delta_x: f64) -> f64 {
    let (g1, g2) = (s.gamma1(), s.gamma2());
    s.y1() * s.z() * g2 * g1 * delta_x / (s.x() * s.y2() + (s.y2() + g2 * s.y1()) * g1 * delta_x)
}

/// x received for `gamma_z` routed z → y → x.
pub fn liquidation_output(s: &CoupledState, gamma_z: f64) -> f64 {
    let (g1, g2) = (s.gamma1(), s.gamma2());
    s.x() * g1 * s.y2() * g2 * gamma_z
        / (s.y1() * (s.z() + g2 * gamma_z) + g1 * s.y2() * g2 * gamma_z)
}

/// z received when the y/x pool is treated as infinitely deep.
pub fn purchase_decoupled_output(s: &CoupledState, delta_x: f64) -> f64 {
    let lam = s.gamma1() * delta_x * s.y1() / s.x();
    s.z() * s.gamma2() * lam / (s.y2() + s.gamma2() * lam)
}

/// z/y drift caused by a purchase that drifts the y/x pool by `mu_y`.
pub fn transmission_purchase(s: &CoupledState, mu_y: f64) -> f64 {
    let u = (1.0 + mu_y).sqrt();
    let lift = s.gamma2() * s.y1() * root_minus_one(mu_y) / (u * s.y2());
    lift * (2.0 + lift)
}

/// y/x drift caused by a liquidation that drifts the z/y pool by `mu_y`.
pub fn transmission_liquidation(s: &CoupledState, mu_y: f64) -> f64 {
    let u = (1.0 + mu_y).sqrt();
    let lift = s.gamma1() * s.y2() * root_minus_one(mu_y) / (u * s.y1());
    lift * (2.0 + lift)
}

/// Purchase basket value discrepancy, `γ₂ x (√(μ+1) − 1)²`.
pub fn value_discrepancy_purchase(s: &CoupledState, mu_y: f64) -> f64 {
    let w = root_minus_one(mu_y);
    s.gamma2() * s.x() * w * w
}

/// Liquidation basket value discrepancy.
pub fn value_discrepancy_liquidation(s: &CoupledState, mu_y: f64) -> f64 {
    let u = (1.0 + mu_y).sqrt();
    let w = root_minus_one(mu_y);
    let g1 = s.gamma1();
    -s.x() * g1 * g1 * s.y2() * s.y2() * w * w / (u * s.y1() * (s.y1() * u + g1 * s.y2() * w))
}

/// The published case-study expressions, evaluated literally.
pub mod printed {
    use crate::coupled::CoupledState;
    use crate::pool::PoolState;

    pub fn quote_drift(p: &PoolState, delta: f64) -> f64 {
        let e = p.reserve_base() + p.gamma() * delta;
        e * e / (p.reserve_quote() * p.reserve_quote()) - 1.0
    }

    pub fn input_for_drift(p: &PoolState, mu: f64) -> f64 {
        p.reserve_quote() / p.gamma() * (mu + 1.0).sqrt() - p.reserve_base() / p.gamma()
    }

    pub fn marginal_depth(p: &PoolState, delta: f64) -> f64 {
        let y = p.reserve_quote();
        2.0 * p.gamma() * (p.reserve_base() + p.gamma() * delta) / (y * y)
    }

    pub fn value_discrepancy_purchase(s: &CoupledState, mu_y: f64) -> f64 {
        let (x, y1, y2, g2) = (s.x(), s.y1(), s.y2(), s.gamma2());
        let u = (mu_y + 1.0).sqrt();
        g2 * x / (y1 * y2)
            * (y1 / x * u - 1.0)
            * (u * (x * y2 + x * y1 * g2 - g2 * y1 * y1 * y1 / x) + g2 * (y1 * y1 - x * x)
                - y1 * y2)
    }

    pub fn transmission_purchase(s: &CoupledState, mu_y: f64) -> f64 {
        let (x, y1, y2, g2) = (s.x(), s.y1(), s.y2(), s.gamma2());
        let u = (mu_y + 1.0).sqrt();
        let num = y2 * x * u + g2 * y1 * x * (u - 1.0);
        num * num / (x * x * (mu_y + 1.0) * y2 * y2) - 1.0
    }

    pub fn value_discrepancy_liquidation(s: &CoupledState, mu_y: f64) -> f64 {
        let (x, y1, y2, z, g1, g2) = (s.x(), s.y1(), s.y2(), s.z(), s.gamma1(), s.gamma2());
        let u = (mu_y + 1.0).sqrt();
        let num = g1 * y2 * y2 * u - g1 * y2 * z;
        -x * num * num / (y1 * (z + g2) * (y1 * y2 * u + g1 * y2 * y2 * u - g1 * y2 * z))
    }

    pub fn transmission_liquidation(s: &CoupledState, mu_y: f64) -> f64 {
        let (y1, y2, z, g1) = (s.y1(), s.y2(), s.z(), s.gamma1());
        let u = (mu_y + 1.0).sqrt();
        let num = y1 * z * u + g1 * y2 * z * u - y2 * z;
        num * num / (y1 * y1 * z * z * (mu_y + 1.0)) - 1.0
    }
}

/// One closed form compared against the pipeline at a single point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub name: &'static str,
    pub mu_y: f64,
    pub pipeline: f64,
    pub closed_form: f64,
    pub rel_error: f64,
    pub agrees: bool,
}

impl CrossCheck {
    fn new(name: &'static str, mu_y: f64, pipeline: f64, closed_form: f64) -> Self {
        let rel_error = rel_diff(pipeline, closed_form);
        Self {
            name,
            mu_y,
            pipeline,
            closed_form,
            rel_error,
            agrees: rel_error <= CROSS_CHECK_TOL,
        }
    }
}

/// `|a − b| / max(|a|, |b|)`, zero when both are equal.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Compares every published case-study expression with the pipeline at `mu_y`.
pub fn printed_form_diagnostics(s: &CoupledState, mu_y: f64) -> Result<Vec<CrossCheck>> {
    let pool = s.first_pool();
    let delta = pool.input_for_drift(mu_y)?;
    Ok(vec![
        CrossCheck::new(
            "printed_quote_drift",
            mu_y,
            pool.quote_drift(delta)?,
            printed::quote_drift(&pool, delta),
        ),
        CrossCheck::new(
            "printed_input_for_drift",
            mu_y,
            delta,
            printed::input_for_drift(&pool, mu_y),
        ),
        CrossCheck::new(
            "printed_marginal_depth",
            mu_y,
            pool.depth_at_input(delta)?,
            printed::marginal_depth(&pool, delta),
        ),
        CrossCheck::new(
            "printed_value_discrepancy_purchase",
            mu_y,
            s.value_discrepancy_purchase(mu_y)?,
            printed::value_discrepancy_purchase(s, mu_y),
        ),
        CrossCheck::new(
            "printed_transmission_purchase",
            mu_y,
            s.drift_transmission_purchase(mu_y)?,
            printed::transmission_purchase(s, mu_y),
        ),
        CrossCheck::new(
            "printed_value_discrepancy_liquidation",
            mu_y,
            s.value_discrepancy_liquidation(mu_y)?,
            printed::value_discrepancy_liquidation(s, mu_y),
        ),
        CrossCheck::new(
            "printed_transmission_liquidation",
            mu_y,
            s.drift_transmission_liquidation(mu_y)?,
            printed::transmission_liquidation(s, mu_y),
        ),
    ])
}
