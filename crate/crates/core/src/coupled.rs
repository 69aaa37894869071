//! Two pools chained through a shared intermediate asset.
//!
//! The y/x pool holds `(x, y1)` and the z/y pool holds `(y2, z)`. A purchase
//! routes x → y → z, a liquidation routes z → y → x. Purchase metrics are
//! parameterised by the drift `μ_y` of the y/x pool; liquidation metrics by the
//! drift of y on the z/y pool.
//!
//! Every metric here is built from single-pool operations (inverse drift,
//! swaps, marginal prices, depths). Constant product closed forms live in
//! [`crate::closed_form`] and are only used for the compound outputs.

use serde::{Deserialize, Serialize};

use crate::closed_form;
use crate::error::{Error, Result};
use crate::pool::{Asset, InvariantKind, PoolState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    Purchase,
    Liquidation,
}

/// Shared four-reserve state `(x, y1, y2, z)` of both pools.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledState {
    x: f64,
    y1: f64,
    y2: f64,
    z: f64,
    gamma1: f64,
    gamma2: f64,
    kind1: InvariantKind,
    kind2: InvariantKind,
}

fn check_input(amount: f64) -> Result<()> {
    if amount.is_finite() && amount >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeInput(amount))
    }
}

fn check_drift(mu: f64) -> Result<()> {
    if mu.is_finite() && mu >= 0.0 {
        Ok(())
    } else {
        Err(Error::DriftOutOfDomain(mu))
    }
}

fn check_perturbation(d_mu: f64) -> Result<()> {
    if d_mu > 0.0 && d_mu <= 0.1 {
        Ok(())
    } else {
        Err(Error::PerturbationOutOfRange(d_mu))
    }
}

/// Basket valuation of a purchase at a given y/x drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PurchaseValuation {
    pub mu_y: f64,
    pub delta_x: f64,
    pub lambda_coupled: f64,
    pub lambda_decoupled: f64,
    pub gamma_coupled: f64,
    pub gamma_decoupled: f64,
    /// `P_y' Λ − γ₁ Δ`: the y basket gap before the z leg, x-denominated.
    pub intermediate_discrepancy: f64,
    /// x value of the coupled z basket; `value_discrepancy` is the difference
    /// of this and `decoupled_value`.
    pub coupled_value: f64,
    pub decoupled_value: f64,
    pub value_discrepancy: f64,
    pub indicator: f64,
    /// Whether `Δ ≤ ½ P_y y1`, the trade-size regime the indicator is meant for.
    pub in_regime: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiquidationValuation {
    pub mu_y: f64,
    pub gamma_z: f64,
    pub lambda: f64,
    pub delta_coupled: f64,
    /// `γ₁ P_y Λ`: x received if the y/x price could not move.
    pub delta_decoupled: f64,
    pub value_discrepancy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Indicator {
    pub value: f64,
    pub in_regime: bool,
}

/// Second-order expansion of the output coordinate of a transition in drift space.
///
/// `order2 = curvature_term + reparam_term`. The curvature term is the pool
/// curvature contribution `−c₂ D²` (with `c₂` the compound coefficient `a₂`
/// or `b₂`); the reparametrisation term `½ (order1/D) dD/dμ` comes from the
/// drift coordinate itself being nonlinear in the trade size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub mu_y: f64,
    pub d_mu: f64,
    pub order1: f64,
    pub order2: f64,
    pub curvature_term: f64,
    pub reparam_term: f64,
    pub exact_delta: f64,
    pub predicted_delta: f64,
    pub residual: f64,
}

impl ExpansionReport {
    /// Marginal output `o = −δR'` received for the extra drift.
    pub fn marginal_output(&self) -> f64 {
        -self.exact_delta
    }
}

/// Trade curvatures of both legs and the compound second-order coefficient
/// (`a₂` on purchase, `b₂` on liquidation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompoundCurvature {
    /// `κ` of the leg the drift is measured on (`κ_y` in both events).
    pub kappa_first: f64,
    /// `κ_z` on purchase, `κ_x` on liquidation.
    pub kappa_second: f64,
    pub coefficient: f64,
}

impl CompoundCurvature {
    /// `−2a₂` or `−2b₂`: second derivative of the compound output.
    pub fn compound(&self) -> f64 {
        -2.0 * self.coefficient
    }
}

/// One sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsSample {
    pub mu_y: f64,
    /// Input of the compound trade: `Δ` on purchase, `Γ` on liquidation.
    pub amount_in: f64,
    pub value_discrepancy: f64,
    /// Only defined for purchases.
    pub indicator: Option<f64>,
    pub in_regime: bool,
    /// `μ_z` on purchase, `μ_x` on liquidation.
    pub transmitted_drift: f64,
    /// Leading marginal output per unit drift, `|order1|`.
    pub marginal_output: f64,
    pub coefficient: f64,
    pub curvature_compound: f64,
    pub kappa_y: f64,
    pub kappa_z_or_x: f64,
    pub depth_marg_y: f64,
}

/// Quantities along a path at one drift coordinate, shared by the expansion
/// and curvature operations.
struct PathPoint {
    mu: f64,
    amount_in: f64,
    mu_second: f64,
    depth_first: f64,
    depth_second: f64,
    depth_slope: f64,
}

impl CoupledState {
    /// Two constant product pools.
    pub fn new(x: f64, y1: f64, y2: f64, z: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        Self::with_kinds(
            x,
            y1,
            y2,
            z,
            gamma1,
            gamma2,
            InvariantKind::ConstantProduct,
            InvariantKind::ConstantProduct,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_kinds(
        x: f64,
        y1: f64,
        y2: f64,
        z: f64,
        gamma1: f64,
        gamma2: f64,
        kind1: InvariantKind,
        kind2: InvariantKind,
    ) -> Result<Self> {
        PoolState::with_kind(x, y1, gamma1, kind1)?;
        PoolState::with_kind(y2, z, gamma2, kind2)?;
        Ok(Self {
            x,
            y1,
            y2,
            z,
            gamma1,
            gamma2,
            kind1,
            kind2,
        })
    }

    /// Rebuilds the coupled state from its y/x and z/y pools.
    pub fn from_pools(first: &PoolState, second: &PoolState) -> Self {
        Self {
            x: first.reserve_base(),
            y1: first.reserve_quote(),
            y2: second.reserve_base(),
            z: second.reserve_quote(),
            gamma1: first.gamma(),
            gamma2: second.gamma(),
            kind1: first.kind(),
            kind2: second.kind(),
        }
    }

    /// x = 1e7, y1 = 4.5e8, y2 = 7.2e7, z = 1e9, both fees 3%.
    pub fn paper_case_study() -> Self {
        Self {
            x: 1e7,
            y1: 4.5e8,
            y2: 7.2e7,
            z: 1e9,
            gamma1: 0.97,
            gamma2: 0.97,
            kind1: InvariantKind::ConstantProduct,
            kind2: InvariantKind::ConstantProduct,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    /// The y/x pool: base x, quote y.
    pub fn first_pool(&self) -> PoolState {
        PoolState::from_validated(self.x, self.y1, self.gamma1, self.kind1)
    }

    /// The z/y pool: base y, quote z.
    pub fn second_pool(&self) -> PoolState {
        PoolState::from_validated(self.y2, self.z, self.gamma2, self.kind2)
    }

    pub fn is_constant_product(&self) -> bool {
        self.kind1 == InvariantKind::ConstantProduct && self.kind2 == InvariantKind::ConstantProduct
    }

    // ---- purchase -------------------------------------------------------

    /// Applies the purchase transition `F`: `(x + Δ, y1 − Λ, y2 + Λ, z − Γ)`.
    pub fn transition_purchase(&self, delta_x: f64) -> Result<CoupledState> {
        Ok(self.purchase_legs(delta_x)?.2)
    }

    fn purchase_legs(&self, delta_x: f64) -> Result<(f64, f64, CoupledState)> {
        check_input(delta_x)?;
        let (lam, y1_left) = self.first_pool().output_and_remaining(delta_x)?;
        let (gam, z_left) = self.second_pool().output_and_remaining(lam)?;
        // y1 − Λ and z − Γ taken from each swap, which avoids the cancellation
        // of the literal subtraction when a leg nearly drains its pool
        let post = Self {
            x: self.x + delta_x,
            y1: y1_left,
            y2: self.y2 + lam,
            z: z_left,
            ..*self
        };
        Ok((lam, gam, post))
    }

    /// z received for `delta_x`, and the post-trade state.
    pub fn purchase_compound(&self, delta_x: f64) -> Result<(f64, CoupledState)> {
        let (_, gam, post) = self.purchase_legs(delta_x)?;
        if self.is_constant_product() {
            Ok((closed_form::purchase_output(self, delta_x), post))
        } else {
            Ok((gam, post))
        }
    }

    /// z received when the first leg executes at the pre-trade spot price.
    pub fn purchase_decoupled(&self, delta_x: f64) -> Result<f64> {
        check_input(delta_x)?;
        let lam = self.gamma1 * delta_x / self.first_pool().spot_price(Asset::Quote);
        self.second_pool().amount_out(lam)
    }

    /// Coupled and decoupled baskets for the purchase that drifts y/x by `mu_y`.
    pub fn purchase_valuation(&self, mu_y: f64) -> Result<PurchaseValuation> {
        check_drift(mu_y)?;
        let first = self.first_pool();
        let second = self.second_pool();
        let p_y = first.spot_price(Asset::Quote);
        let delta = first.input_for_drift(mu_y)?;
        let lam_c = first.amount_out(delta)?;
        let lam_d = self.gamma1 * delta / p_y;
        let gam_c = second.amount_out(lam_c)?;
        let gam_d = second.amount_out(lam_d)?;
        let slope_c = second.marginal_exec_price(lam_c)?;
        let slope_d = second.marginal_exec_price(lam_d)?;

        let first_slope = first.marginal_exec_price(delta)?;
        let intermediate = self.gamma1 * (lam_c / first_slope - delta);

        // each basket valued at its own post-trade z price P_z' = γ₂ / (dΓ/dΛ)
        let coupled = p_y * (mu_y + 1.0) * self.gamma2 * gam_c / slope_c;
        let decoupled = p_y * self.gamma2 * gam_d / slope_d;
        let indicator = if gam_c == 0.0 {
            0.0
        } else {
            mu_y + 1.0 - (gam_d / gam_c) * (slope_c / slope_d)
        };
        Ok(PurchaseValuation {
            mu_y,
            delta_x: delta,
            lambda_coupled: lam_c,
            lambda_decoupled: lam_d,
            gamma_coupled: gam_c,
            gamma_decoupled: gam_d,
            intermediate_discrepancy: intermediate,
            coupled_value: coupled,
            decoupled_value: decoupled,
            value_discrepancy: coupled - decoupled,
            indicator,
            in_regime: delta <= 0.5 * p_y * self.y1,
        })
    }

    /// x-denominated basket value gap, coupled minus decoupled.
    pub fn value_discrepancy_purchase(&self, mu_y: f64) -> Result<f64> {
        Ok(self.purchase_valuation(mu_y)?.value_discrepancy)
    }

    /// `l(μ_y)`: positive means inflation, negative deflation.
    pub fn inflation_indicator(&self, mu_y: f64) -> Result<Indicator> {
        let v = self.purchase_valuation(mu_y)?;
        Ok(Indicator {
            value: v.indicator,
            in_regime: v.in_regime,
        })
    }

    /// `μ_z(μ_y)`.
    pub fn drift_transmission_purchase(&self, mu_y: f64) -> Result<f64> {
        check_drift(mu_y)?;
        let delta = self.first_pool().input_for_drift(mu_y)?;
        let lam = self.first_pool().amount_out(delta)?;
        self.second_pool().quote_drift(lam)
    }

    /// Supremum of `μ_z`: the z/y drift from depositing the whole y1 reserve.
    pub fn transmission_bound_purchase(&self) -> Result<f64> {
        self.second_pool().quote_drift(self.y1)
    }

    fn purchase_point(&self, mu_y: f64) -> Result<PathPoint> {
        let first = self.first_pool();
        let second = self.second_pool();
        let delta = first.input_for_drift(mu_y)?;
        let lam = first.amount_out(delta)?;
        Ok(PathPoint {
            mu: mu_y,
            amount_in: delta,
            mu_second: second.quote_drift(lam)?,
            depth_first: first.depth_at_input(delta)?,
            depth_second: second.depth_at_input(lam)?,
            depth_slope: first.depth_slope_at_input(delta)?,
        })
    }

    fn purchase_terms(&self, pt: &PathPoint) -> (CompoundCurvature, f64) {
        let (g1, g2) = (self.gamma1, self.gamma2);
        let p_y = self.first_pool().spot_price(Asset::Quote);
        let p_z = self.second_pool().spot_price(Asset::Quote);
        let p_y_post = p_y * (pt.mu + 1.0);
        let p_z_post = p_z * (pt.mu_second + 1.0);
        let kappa_y = g1 / (p_y * (pt.mu + 1.0).powi(2) * pt.depth_first);
        let kappa_z = g2 / (p_z * (pt.mu_second + 1.0).powi(2) * pt.depth_second);
        let a2 = -0.5 * (kappa_y * g2 / p_z_post + kappa_z * g1 * g1 / (p_y_post * p_y_post));
        // d(z reserve)/dΔ
        let slope = -g1 * g2 / (p_z_post * p_y_post);
        (
            CompoundCurvature {
                kappa_first: kappa_y,
                kappa_second: kappa_z,
                coefficient: a2,
            },
            slope,
        )
    }

    /// `κ_y`, `κ_z` and `a₂` at drift `mu_y`.
    pub fn compound_curvature_purchase(&self, mu_y: f64) -> Result<CompoundCurvature> {
        check_drift(mu_y)?;
        Ok(self.purchase_terms(&self.purchase_point(mu_y)?).0)
    }

    fn purchase_output_at_drift(&self, mu_y: f64) -> Result<f64> {
        let delta = self.first_pool().input_for_drift(mu_y)?;
        let lam = self.first_pool().amount_out(delta)?;
        self.second_pool().amount_out(lam)
    }

    /// Expansion of the z reserve under `F` for extra drift `d_mu` at `mu_y`.
    pub fn marginal_output_purchase(&self, mu_y: f64, d_mu: f64) -> Result<ExpansionReport> {
        check_drift(mu_y)?;
        check_perturbation(d_mu)?;
        let pt = self.purchase_point(mu_y)?;
        let (curv, slope) = self.purchase_terms(&pt);
        // z coordinate of F moves by −(Γ(μ+δ) − Γ(μ))
        let exact =
            self.purchase_output_at_drift(mu_y)? - self.purchase_output_at_drift(mu_y + d_mu)?;
        Ok(expansion(mu_y, d_mu, &pt, &curv, slope, exact))
    }

    pub fn purchase_metrics(&self, mu_y: f64) -> Result<MetricsSample> {
        let val = self.purchase_valuation(mu_y)?;
        let pt = self.purchase_point(mu_y)?;
        let (curv, slope) = self.purchase_terms(&pt);
        Ok(MetricsSample {
            mu_y,
            amount_in: pt.amount_in,
            value_discrepancy: val.value_discrepancy,
            indicator: Some(val.indicator),
            in_regime: val.in_regime,
            transmitted_drift: pt.mu_second,
            marginal_output: (slope * pt.depth_first).abs(),
            coefficient: curv.coefficient,
            curvature_compound: curv.compound(),
            kappa_y: curv.kappa_first,
            kappa_z_or_x: curv.kappa_second,
            depth_marg_y: pt.depth_first,
        })
    }

    // ---- liquidation ----------------------------------------------------

    /// z/y pool with z as the input side.
    fn liquidation_first(&self) -> PoolState {
        self.second_pool().flipped()
    }

    /// y/x pool with y as the input side.
    fn liquidation_second(&self) -> PoolState {
        self.first_pool().flipped()
    }

    fn liquidation_legs(&self, gamma_z: f64) -> Result<(f64, f64, CoupledState)> {
        check_input(gamma_z)?;
        let (lam, y2_left) = self.liquidation_first().output_and_remaining(gamma_z)?;
        let (dx, x_left) = self.liquidation_second().output_and_remaining(lam)?;
        let post = Self {
            x: x_left,
            y1: self.y1 + lam,
            y2: y2_left,
            z: self.z + gamma_z,
            ..*self
        };
        Ok((lam, dx, post))
    }

    /// Applies the liquidation transition `F_l`: `(x − Δ, y1 + Λ, y2 − Λ, z + Γ)`.
    pub fn transition_liquidation(&self, gamma_z: f64) -> Result<CoupledState> {
        Ok(self.liquidation_legs(gamma_z)?.2)
    }

    /// x received for selling `gamma_z`, and the post-trade state.
    pub fn liquidate_compound(&self, gamma_z: f64) -> Result<(f64, CoupledState)> {
        let (_, dx, post) = self.liquidation_legs(gamma_z)?;
        if self.is_constant_product() {
            Ok((closed_form::liquidation_output(self, gamma_z), post))
        } else {
            Ok((dx, post))
        }
    }

    pub fn liquidation_valuation(&self, mu_y: f64) -> Result<LiquidationValuation> {
        check_drift(mu_y)?;
        let first = self.liquidation_first();
        let gam = first.input_for_drift(mu_y)?;
        let lam = first.amount_out(gam)?;
        let dx = self.liquidation_second().amount_out(lam)?;
        let decoupled = self.gamma1 * self.first_pool().spot_price(Asset::Quote) * lam;
        Ok(LiquidationValuation {
            mu_y,
            gamma_z: gam,
            lambda: lam,
            delta_coupled: dx,
            delta_decoupled: decoupled,
            value_discrepancy: dx - decoupled,
        })
    }

    /// `Δ(Λ(Γ)) − γ₁ P_y Λ(Γ)` at the sale size that drifts y on the z/y pool by `mu_y`.
    pub fn value_discrepancy_liquidation(&self, mu_y: f64) -> Result<f64> {
        Ok(self.liquidation_valuation(mu_y)?.value_discrepancy)
    }

    /// `μ_x(μ_y)`.
    pub fn drift_transmission_liquidation(&self, mu_y: f64) -> Result<f64> {
        check_drift(mu_y)?;
        let first = self.liquidation_first();
        let lam = first.amount_out(first.input_for_drift(mu_y)?)?;
        self.liquidation_second().quote_drift(lam)
    }

    /// Supremum of `μ_x`: the y/x drift from selling the whole y2 reserve.
    pub fn transmission_bound_liquidation(&self) -> Result<f64> {
        self.liquidation_second().quote_drift(self.y2)
    }

    fn liquidation_point(&self, mu_y: f64) -> Result<PathPoint> {
        let first = self.liquidation_first();
        let second = self.liquidation_second();
        let gam = first.input_for_drift(mu_y)?;
        let lam = first.amount_out(gam)?;
        Ok(PathPoint {
            mu: mu_y,
            amount_in: gam,
            mu_second: second.quote_drift(lam)?,
            depth_first: first.depth_at_input(gam)?,
            depth_second: second.depth_at_input(lam)?,
            depth_slope: first.depth_slope_at_input(gam)?,
        })
    }

    fn liquidation_terms(&self, pt: &PathPoint) -> (CompoundCurvature, f64) {
        let (g1, g2) = (self.gamma1, self.gamma2);
        // P_y = x/y1 and P_z = y2/z, both x-ward prices
        let p_y = self.liquidation_second().spot_price(Asset::Base);
        let p_z = self.liquidation_first().spot_price(Asset::Base);
        let (mu1, mu2) = (pt.mu + 1.0, pt.mu_second + 1.0);
        let kappa_y = g2 * p_z / (mu1 * mu1 * pt.depth_first);
        let kappa_x = g1 * p_y / (mu2 * mu2 * pt.depth_second);
        let b2 = -0.5 * (g2 * g2 * p_z * p_z * kappa_x / (mu1 * mu1) + kappa_y * g1 * p_y / mu2);
        // d(x reserve)/dΓ
        let slope = -g1 * g2 * p_y * p_z / (mu1 * mu2);
        (
            CompoundCurvature {
                kappa_first: kappa_y,
                kappa_second: kappa_x,
                coefficient: b2,
            },
            slope,
        )
    }

    /// `κ_y`, `κ_x` and `b₂` at drift `mu_y` on the z/y pool.
    pub fn compound_curvature_liquidation(&self, mu_y: f64) -> Result<CompoundCurvature> {
        check_drift(mu_y)?;
        Ok(self.liquidation_terms(&self.liquidation_point(mu_y)?).0)
    }

    fn liquidation_output_at_drift(&self, mu_y: f64) -> Result<f64> {
        let first = self.liquidation_first();
        let lam = first.amount_out(first.input_for_drift(mu_y)?)?;
        self.liquidation_second().amount_out(lam)
    }

    /// Expansion of the x reserve under `F_l` for extra drift `d_mu` at `mu_y`.
    pub fn marginal_output_liquidation(&self, mu_y: f64, d_mu: f64) -> Result<ExpansionReport> {
        check_drift(mu_y)?;
        check_perturbation(d_mu)?;
        let pt = self.liquidation_point(mu_y)?;
        let (curv, slope) = self.liquidation_terms(&pt);
        let exact = self.liquidation_output_at_drift(mu_y)?
            - self.liquidation_output_at_drift(mu_y + d_mu)?;
        Ok(expansion(mu_y, d_mu, &pt, &curv, slope, exact))
    }

    pub fn liquidation_metrics(&self, mu_y: f64) -> Result<MetricsSample> {
        let val = self.liquidation_valuation(mu_y)?;
        let pt = self.liquidation_point(mu_y)?;
        let (curv, slope) = self.liquidation_terms(&pt);
        Ok(MetricsSample {
            mu_y,
            amount_in: pt.amount_in,
            value_discrepancy: val.value_discrepancy,
            indicator: None,
            in_regime: true,
            transmitted_drift: pt.mu_second,
            marginal_output: (slope * pt.depth_first).abs(),
            coefficient: curv.coefficient,
            curvature_compound: curv.compound(),
            kappa_y: curv.kappa_first,
            kappa_z_or_x: curv.kappa_second,
            depth_marg_y: pt.depth_first,
        })
    }

    pub fn metrics(&self, event: Event, mu_y: f64) -> Result<MetricsSample> {
        match event {
            Event::Purchase => self.purchase_metrics(mu_y),
            Event::Liquidation => self.liquidation_metrics(mu_y),
        }
    }

    pub fn marginal_output(&self, event: Event, mu_y: f64, d_mu: f64) -> Result<ExpansionReport> {
        match event {
            Event::Purchase => self.marginal_output_purchase(mu_y, d_mu),
            Event::Liquidation => self.marginal_output_liquidation(mu_y, d_mu),
        }
    }
}

fn expansion(
    mu_y: f64,
    d_mu: f64,
    pt: &PathPoint,
    curv: &CompoundCurvature,
    slope: f64,
    exact: f64,
) -> ExpansionReport {
    // R(μ) = R(Δ(μ)): R_μ = R_Δ D, R_μμ = R_ΔΔ D² + R_Δ dD/dμ, with ½R_ΔΔ = −c₂
    let order1 = slope * pt.depth_first;
    let curvature_term = -curv.coefficient * pt.depth_first * pt.depth_first;
    let reparam_term = 0.5 * slope * pt.depth_slope;
    let order2 = curvature_term + reparam_term;
    let predicted = order1 * d_mu + order2 * d_mu * d_mu;
    ExpansionReport {
        mu_y,
        d_mu,
        order1,
        order2,
        curvature_term,
        reparam_term,
        exact_delta: exact,
        predicted_delta: predicted,
        residual: exact - predicted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::rel_diff;

    fn case() -> CoupledState {
        CoupledState::paper_case_study()
    }

    #[test]
    fn rejects_invalid_state() {
        assert!(CoupledState::new(1.0, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(CoupledState::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.5).is_err());
        assert_eq!(
            CoupledState::new(1e7, 4.5e8, 7.2e7, 1e9, 0.97, 0.97).unwrap(),
            case()
        );
    }

    #[test]
    fn zero_trades_leave_state_unchanged() {
        let s = case();
        let (g, post) = s.purchase_compound(0.0).unwrap();
        assert_eq!(g, 0.0);
        assert_eq!(post, s);
        let (d, post) = s.liquidate_compound(0.0).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(post, s);
        assert_eq!(s.purchase_decoupled(0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_amounts_are_rejected() {
        let s = case();
        assert!(matches!(
            s.purchase_compound(-1.0),
            Err(Error::NegativeInput(_))
        ));
        assert!(matches!(
            s.liquidate_compound(-1.0),
            Err(Error::NegativeInput(_))
        ));
        assert!(matches!(
            s.purchase_decoupled(-1.0),
            Err(Error::NegativeInput(_))
        ));
        assert!(matches!(
            s.value_discrepancy_purchase(-0.1),
            Err(Error::DriftOutOfDomain(_))
        ));
        assert!(matches!(
            s.drift_transmission_liquidation(f64::NAN),
            Err(Error::DriftOutOfDomain(_))
        ));
    }

    #[test]
    fn perturbation_range_is_enforced() {
        let s = case();
        assert!(s.marginal_output_purchase(0.1, 0.0).is_err());
        assert!(s.marginal_output_purchase(0.1, 0.2).is_err());
        assert!(s.marginal_output_liquidation(0.1, -0.01).is_err());
        assert!(s.marginal_output_purchase(0.1, 0.1).is_ok());
    }

    #[test]
    fn case_study_purchase_matches_sequential_swaps() {
        let s = case();
        let t1 = s.first_pool().swap_exact_in(1e5).unwrap();
        let t2 = s.second_pool().swap_exact_in(t1.amount_out).unwrap();
        let (g, post) = s.purchase_compound(1e5).unwrap();
        assert!(rel_diff(g, t2.amount_out) < 1e-14);
        assert_eq!(post.x(), 1e7 + 1e5);
        assert_eq!(post.y1(), t1.post_state.reserve_quote());
        assert_eq!(post.y2(), 7.2e7 + t1.amount_out);
        assert_eq!(post.z(), t2.post_state.reserve_quote());
        assert!(rel_diff(post.z(), 1e9 - t2.amount_out) < 1e-15);
        let dec = s.purchase_decoupled(1e5).unwrap();
        let single = s
            .second_pool()
            .amount_out(0.97 * 1e5 * 4.5e8 / 1e7)
            .unwrap();
        assert_eq!(dec, single);
        assert!(dec > g);
    }

    #[test]
    fn y_is_conserved_across_transitions() {
        let s = case();
        let before = s.y1() + s.y2();
        let p = s.transition_purchase(3e6).unwrap();
        let l = s.transition_liquidation(2e8).unwrap();
        assert!(rel_diff(before, p.y1() + p.y2()) <= 2.0 * f64::EPSILON);
        assert!(rel_diff(before, l.y1() + l.y2()) <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn value_discrepancies_have_expected_signs() {
        let s = case();
        assert_eq!(s.value_discrepancy_purchase(0.0).unwrap(), 0.0);
        assert_eq!(s.value_discrepancy_liquidation(0.0).unwrap(), 0.0);
        assert!(s.value_discrepancy_purchase(0.2).unwrap() > 0.0);
        assert!(s.value_discrepancy_liquidation(0.2).unwrap() < 0.0);
        let ind = s.inflation_indicator(0.1).unwrap();
        assert!(ind.value > 0.0 && ind.in_regime);
        assert_eq!(s.inflation_indicator(0.0).unwrap().value, 0.0);
        // Δ(2) ≈ 0.755 x is past the ½ P_y y1 = ½ x guard
        assert!(!s.inflation_indicator(2.0).unwrap().in_regime);
    }

    #[test]
    fn pipeline_matches_corrected_closed_forms() {
        let s = case();
        for mu in [1e-4, 0.05, 0.5, 1.5, 4.0] {
            let v = s.value_discrepancy_purchase(mu).unwrap();
            assert!(
                rel_diff(v, closed_form::value_discrepancy_purchase(&s, mu)) < 1e-9,
                "{mu}"
            );
            let v = s.value_discrepancy_liquidation(mu).unwrap();
            assert!(
                rel_diff(v, closed_form::value_discrepancy_liquidation(&s, mu)) < 1e-9,
                "{mu}"
            );
        }
    }

    #[test]
    fn intermediate_discrepancy_is_quadratic_in_trade() {
        // v1 = γ₁² Δ² / x for the constant product first leg
        let s = case();
        let v = s.purchase_valuation(0.3).unwrap();
        let expect = 0.97 * 0.97 * v.delta_x * v.delta_x / 1e7;
        assert!(rel_diff(v.intermediate_discrepancy, expect) < 1e-12);
    }

    #[test]
    fn transmission_is_bounded() {
        let s = case();
        assert_eq!(s.drift_transmission_purchase(0.0).unwrap(), 0.0);
        assert_eq!(s.drift_transmission_liquidation(0.0).unwrap(), 0.0);
        assert!(
            s.drift_transmission_purchase(1e6).unwrap() < s.transmission_bound_purchase().unwrap()
        );
        assert!(
            s.drift_transmission_liquidation(1e6).unwrap()
                < s.transmission_bound_liquidation().unwrap()
        );
    }

    #[test]
    fn curvature_signs() {
        let s = case();
        for mu in [0.0, 0.1, 1.0, 3.0] {
            let c = s.compound_curvature_purchase(mu).unwrap();
            assert!(c.kappa_first > 0.0 && c.kappa_second > 0.0 && c.coefficient < 0.0);
            let c = s.compound_curvature_liquidation(mu).unwrap();
            assert!(c.kappa_first > 0.0 && c.kappa_second > 0.0 && c.coefficient < 0.0);
        }
    }

    #[test]
    fn case_study_expansion_report() {
        let r = case().marginal_output_purchase(0.1, 0.01).unwrap();
        for v in [
            r.order1,
            r.order2,
            r.exact_delta,
            r.predicted_delta,
            r.residual,
        ] {
            assert!(v.is_finite());
        }
        assert!(r.order1 < 0.0);
        assert!(rel_diff(r.residual, r.exact_delta - r.predicted_delta) == 0.0);
        assert!(r.marginal_output() > 0.0);
    }

    #[test]
    fn metrics_sample_at_zero_drift() {
        let m = case().purchase_metrics(0.0).unwrap();
        assert_eq!(m.transmitted_drift, 0.0);
        assert_eq!(m.value_discrepancy, 0.0);
        assert_eq!(m.amount_in, 0.0);
        let m = case().liquidation_metrics(0.0).unwrap();
        assert_eq!(m.transmitted_drift, 0.0);
        assert!(m.indicator.is_none());
    }
}
