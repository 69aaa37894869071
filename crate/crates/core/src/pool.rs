//! Single-pool CFMM primitives: invariant, swap execution, prices, drift and
//! depth. Every swap sends the base asset in and takes the quote asset out; use
//! [`PoolState::flipped`] to trade the other way.
//!
//! The constant product pool runs on closed forms. Other invariants solve the
//! swap with a bracketed root finder and differentiate implicitly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, ROOT_MAX_ITER, ROOT_REL_TOL};

/// Which invariant `φ(base, quote) = k` the pool enforces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InvariantKind {
    /// `φ = base · quote`
    ConstantProduct,
    /// `φ = base^w · quote^(1-w)` with `w = base_weight`.
    WeightedProduct { base_weight: f64 },
}

impl InvariantKind {
    fn validate(self) -> Result<()> {
        match self {
            InvariantKind::ConstantProduct => Ok(()),
            InvariantKind::WeightedProduct { base_weight } => {
                if base_weight > 0.0 && base_weight < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        what: "base weight",
                        value: base_weight,
                    })
                }
            }
        }
    }

    fn flipped(self) -> Self {
        match self {
            InvariantKind::ConstantProduct => InvariantKind::ConstantProduct,
            InvariantKind::WeightedProduct { base_weight } => InvariantKind::WeightedProduct {
                base_weight: 1.0 - base_weight,
            },
        }
    }
}

/// One side of a two-asset pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Asset {
    Base,
    Quote,
}

/// Relative drift of one asset's reported price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftPoint {
    pub mu: f64,
    pub asset: Asset,
}

/// Derivatives of the swap output `Λ(Δ)` with respect to the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputDerivatives {
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeResult {
    pub amount_in: f64,
    pub amount_out: f64,
    /// Reserves after the trade with the full input credited to the pool.
    pub post_state: PoolState,
    /// `amount_in / amount_out`; the zero-size limit `P_quote / γ` for an empty trade.
    pub effective_price: f64,
    /// `dΛ/dΔ` at the executed size.
    pub marginal_exec_price: f64,
}

/// Reserves, fee discount and invariant of one two-asset pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolState {
    reserve_base: f64,
    reserve_quote: f64,
    gamma: f64,
    kind: InvariantKind,
}

fn check_reserve(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { what, value })
    }
}

fn check_input(delta: f64) -> Result<()> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeInput(delta))
    }
}

fn check_drift(mu: f64) -> Result<()> {
    if mu.is_finite() && mu >= 0.0 {
        Ok(())
    } else {
        Err(Error::DriftOutOfDomain(mu))
    }
}

impl PoolState {
    /// Constant product pool.
    pub fn new(reserve_base: f64, reserve_quote: f64, gamma: f64) -> Result<Self> {
        Self::with_kind(
            reserve_base,
            reserve_quote,
            gamma,
            InvariantKind::ConstantProduct,
        )
    }

    pub fn with_kind(
        reserve_base: f64,
        reserve_quote: f64,
        gamma: f64,
        kind: InvariantKind,
    ) -> Result<Self> {
        check_reserve("base reserve", reserve_base)?;
        check_reserve("quote reserve", reserve_quote)?;
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter {
                what: "fee discount",
                value: gamma,
            });
        }
        kind.validate()?;
        Ok(Self {
            reserve_base,
            reserve_quote,
            gamma,
            kind,
        })
    }

    /// Caller guarantees the arguments already passed [`PoolState::with_kind`].
    pub(crate) fn from_validated(
        reserve_base: f64,
        reserve_quote: f64,
        gamma: f64,
        kind: InvariantKind,
    ) -> Self {
        Self {
            reserve_base,
            reserve_quote,
            gamma,
            kind,
        }
    }

    pub fn reserve_base(&self) -> f64 {
        self.reserve_base
    }

    pub fn reserve_quote(&self) -> f64 {
        self.reserve_quote
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kind(&self) -> InvariantKind {
        self.kind
    }

    /// The same pool seen from the other side: quote becomes base.
    pub fn flipped(&self) -> Self {
        Self {
            reserve_base: self.reserve_quote,
            reserve_quote: self.reserve_base,
            gamma: self.gamma,
            kind: self.kind.flipped(),
        }
    }

    /// `φ(base, quote)` for this pool's invariant.
    pub fn invariant_at(&self, base: f64, quote: f64) -> f64 {
        match self.kind {
            InvariantKind::ConstantProduct => base * quote,
            InvariantKind::WeightedProduct { base_weight: w } => base.powf(w) * quote.powf(1.0 - w),
        }
    }

    /// The invariant constant `k` of the current reserves.
    pub fn invariant(&self) -> f64 {
        self.invariant_at(self.reserve_base, self.reserve_quote)
    }

    /// Ratio of invariant partials at the given reserves, quote per base.
    fn base_price_at(&self, base: f64, quote: f64) -> f64 {
        match self.kind {
            InvariantKind::ConstantProduct => quote / base,
            InvariantKind::WeightedProduct { base_weight: w } => w * quote / ((1.0 - w) * base),
        }
    }

    /// Spot price. `Asset::Base` gives `P_x = φ_x/φ_y` (quote units per base),
    /// `Asset::Quote` gives `P_y = φ_y/φ_x`.
    pub fn spot_price(&self, denominated_in: Asset) -> f64 {
        match (self.kind, denominated_in) {
            (InvariantKind::ConstantProduct, Asset::Base) => self.reserve_quote / self.reserve_base,
            (InvariantKind::ConstantProduct, Asset::Quote) => {
                self.reserve_base / self.reserve_quote
            }
            (_, Asset::Base) => self.base_price_at(self.reserve_base, self.reserve_quote),
            (_, Asset::Quote) => 1.0 / self.base_price_at(self.reserve_base, self.reserve_quote),
        }
    }

    /// Output and post-trade quote reserve for a (validated) input.
    fn solve_output(&self, delta: f64) -> Result<(f64, f64)> {
        let (x, y, g) = (self.reserve_base, self.reserve_quote, self.gamma);
        if delta == 0.0 {
            return Ok((0.0, y));
        }
        match self.kind {
            InvariantKind::ConstantProduct => {
                let eff = x + g * delta;
                Ok((y * g * delta / eff, y * (x / eff)))
            }
            InvariantKind::WeightedProduct { base_weight: w } => {
                let lift = w * (g * delta / x).ln_1p();
                // solve for whichever of output and remaining reserve is smaller
                let gap = |out: f64| lift + (1.0 - w) * (-out / y).ln_1p();
                if gap(0.5 * y) <= 0.0 {
                    let out = numeric::find_root(gap, 0.0, 0.5 * y, ROOT_REL_TOL, ROOT_MAX_ITER)?;
                    Ok((out, y - out))
                } else {
                    let gap_left = |left: f64| lift + (1.0 - w) * (left / y).ln();
                    let left =
                        numeric::find_root(gap_left, 0.0, 0.5 * y, ROOT_REL_TOL, ROOT_MAX_ITER)?;
                    Ok((y - left, left))
                }
            }
        }
    }

    /// Swap output `Λ(Δ)` without building a full [`TradeResult`].
    pub fn amount_out(&self, delta_in: f64) -> Result<f64> {
        check_input(delta_in)?;
        Ok(self.solve_output(delta_in)?.0)
    }

    /// `(Λ, y − Λ)`, with the remaining reserve computed without cancellation.
    pub fn output_and_remaining(&self, delta_in: f64) -> Result<(f64, f64)> {
        check_input(delta_in)?;
        self.solve_output(delta_in)
    }

    /// Executes a base-in swap, solving `φ(x + γΔ, y − Λ) = k`.
    pub fn swap_exact_in(&self, delta_in: f64) -> Result<TradeResult> {
        check_input(delta_in)?;
        let (out, post_quote) = self.solve_output(delta_in)?;
        let marginal = self.output_derivatives(delta_in)?.first;
        let effective_price = if delta_in == 0.0 {
            self.spot_price(Asset::Quote) / self.gamma
        } else {
            delta_in / out
        };
        let post_state = Self::with_kind(
            self.reserve_base + delta_in,
            post_quote,
            self.gamma,
            self.kind,
        )?;
        Ok(TradeResult {
            amount_in: delta_in,
            amount_out: out,
            post_state,
            effective_price,
            marginal_exec_price: marginal,
        })
    }

    /// Reserves `(x + γΔ, y − Λ)` on which the invariant is enforced.
    pub fn discounted_reserves(&self, delta_in: f64) -> Result<(f64, f64)> {
        check_input(delta_in)?;
        let (_, post_quote) = self.solve_output(delta_in)?;
        Ok((self.reserve_base + self.gamma * delta_in, post_quote))
    }

    fn second_derivative(&self, delta: f64) -> Result<f64> {
        let g = self.gamma;
        match self.kind {
            InvariantKind::ConstantProduct => {
                let eff = self.reserve_base + g * delta;
                Ok(-2.0 * g * g * self.reserve_base * self.reserve_quote / (eff * eff * eff))
            }
            InvariantKind::WeightedProduct { base_weight: w } => {
                let (_, yq) = self.solve_output(delta)?;
                let xb = self.reserve_base + g * delta;
                let first = g * self.base_price_at(xb, yq);
                // implicit differentiation of φ(X, Y) = k with partials scaled by 1/φ
                let fy = (1.0 - w) / yq;
                let fxx = w * (w - 1.0) / (xb * xb);
                let fxy = w * (1.0 - w) / (xb * yq);
                let fyy = -w * (1.0 - w) / (yq * yq);
                Ok((g * g * fxx - 2.0 * g * fxy * first + fyy * first * first) / fy)
            }
        }
    }

    /// `Λ'`, `Λ''`, `Λ'''` at input `delta_in`. The first derivative is always
    /// `γ · P_x` at the discounted reserves.
    pub fn output_derivatives(&self, delta_in: f64) -> Result<OutputDerivatives> {
        check_input(delta_in)?;
        let (x, y, g) = (self.reserve_base, self.reserve_quote, self.gamma);
        match self.kind {
            InvariantKind::ConstantProduct => {
                let eff = x + g * delta_in;
                let first = g * x * y / (eff * eff);
                Ok(OutputDerivatives {
                    first,
                    second: -2.0 * g * first / eff,
                    third: 6.0 * g * g * first / (eff * eff),
                })
            }
            InvariantKind::WeightedProduct { .. } => {
                let (_, yq) = self.solve_output(delta_in)?;
                let first = g * self.base_price_at(x + g * delta_in, yq);
                let second = self.second_derivative(delta_in)?;
                let h = numeric::fd_step(x + g * delta_in);
                let third = numeric::first_derivative(|d| self.second_derivative(d), delta_in, h)?;
                Ok(OutputDerivatives {
                    first,
                    second,
                    third,
                })
            }
        }
    }

    /// `dΛ/dΔ` at `delta_in`: the fee-discounted post-trade price.
    pub fn marginal_exec_price(&self, delta_in: f64) -> Result<f64> {
        Ok(self.output_derivatives(delta_in)?.first)
    }

    /// Relative price drift of both assets caused by a swap of `delta_in`:
    /// `μ_x = 1 − Λ'/(γ P_x)` and `μ_y = γ/(P_y Λ') − 1`.
    pub fn price_drift(&self, delta_in: f64) -> Result<(DriftPoint, DriftPoint)> {
        check_input(delta_in)?;
        let (base, quote) = if delta_in == 0.0 {
            (0.0, 0.0)
        } else {
            match self.kind {
                InvariantKind::ConstantProduct => {
                    let r = self.gamma * delta_in / self.reserve_base;
                    let mu_quote = r * (2.0 + r);
                    (mu_quote / ((1.0 + r) * (1.0 + r)), mu_quote)
                }
                InvariantKind::WeightedProduct { .. } => {
                    // price ratio P_x(R)/P_x(R') in log form to keep small drifts accurate
                    let (out, left) = self.solve_output(delta_in)?;
                    let y = self.reserve_quote;
                    let log_left = if out < 0.5 * y {
                        (-out / y).ln_1p()
                    } else {
                        (left / y).ln()
                    };
                    let log_ratio = (self.gamma * delta_in / self.reserve_base).ln_1p() - log_left;
                    let mu_quote = log_ratio.exp_m1();
                    (-(-log_ratio).exp_m1(), mu_quote)
                }
            }
        };
        Ok((
            DriftPoint {
                mu: base,
                asset: Asset::Base,
            },
            DriftPoint {
                mu: quote,
                asset: Asset::Quote,
            },
        ))
    }

    /// Quote-asset drift `μ_y(Δ)`.
    pub fn quote_drift(&self, delta_in: f64) -> Result<f64> {
        Ok(self.price_drift(delta_in)?.1.mu)
    }

    /// Input that moves the quote price by `target_mu_quote`.
    pub fn input_for_drift(&self, target_mu_quote: f64) -> Result<f64> {
        check_drift(target_mu_quote)?;
        if target_mu_quote == 0.0 {
            return Ok(0.0);
        }
        match self.kind {
            InvariantKind::ConstantProduct => {
                let root_minus_one = target_mu_quote / ((1.0 + target_mu_quote).sqrt() + 1.0);
                Ok(self.reserve_base * root_minus_one / self.gamma)
            }
            InvariantKind::WeightedProduct { .. } => {
                let mut hi = self.reserve_base / self.gamma;
                while self.quote_drift(hi)? < target_mu_quote {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(Error::DriftOutOfDomain(target_mu_quote));
                    }
                }
                let gap = |d: f64| {
                    self.quote_drift(d)
                        .map(|mu| (mu - target_mu_quote) / (1.0 + target_mu_quote))
                        .unwrap_or(f64::NAN)
                };
                numeric::find_root(gap, 0.0, hi, ROOT_REL_TOL, ROOT_MAX_ITER)
            }
        }
    }

    /// Trade curvature `κ = −Λ''(Δ)`.
    pub fn curvature_at_input(&self, delta_in: f64) -> Result<f64> {
        Ok(-self.output_derivatives(delta_in)?.second)
    }

    /// Marginal depth `D = −(P_y/γ) Λ'^2 / Λ''` at a given input size.
    pub fn depth_at_input(&self, delta_in: f64) -> Result<f64> {
        let d = self.output_derivatives(delta_in)?;
        if d.second >= 0.0 {
            return Err(Error::NotConcave {
                input: delta_in,
                second: d.second,
            });
        }
        Ok(-self.spot_price(Asset::Quote) / self.gamma * d.first * d.first / d.second)
    }

    /// `dD/dμ` at a given input size, i.e. `d²Δ/dμ²`.
    pub fn depth_slope_at_input(&self, delta_in: f64) -> Result<f64> {
        let d = self.output_derivatives(delta_in)?;
        if d.second >= 0.0 {
            return Err(Error::NotConcave {
                input: delta_in,
                second: d.second,
            });
        }
        let scale = self.spot_price(Asset::Quote) / self.gamma;
        let depth = -scale * d.first * d.first / d.second;
        let d_depth_d_input =
            -scale * (2.0 * d.first - d.first * d.first * d.third / (d.second * d.second));
        Ok(depth * d_depth_d_input)
    }

    /// Marginal swap depth at quote drift `mu_quote`: the reciprocal of `dμ_y/dΔ`.
    pub fn marginal_depth(&self, mu_quote: f64) -> Result<f64> {
        self.depth_at_input(self.input_for_drift(mu_quote)?)
    }

    /// Total depth: marginal depth integrated over drift on `[0, mu_quote]`.
    pub fn total_depth(&self, mu_quote: f64) -> Result<f64> {
        check_drift(mu_quote)?;
        numeric::adaptive_simpson(
            |mu| self.marginal_depth(mu),
            0.0,
            mu_quote,
            1e-12 * self.reserve_base,
        )
    }
}
