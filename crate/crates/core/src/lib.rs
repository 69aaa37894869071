//! Analytics for two constant function market makers chained through a shared
//! intermediate asset: single-pool swap metrics, compound purchase and
//! liquidation, basket value discrepancy, drift transmission and the
//! second-order marginal output expansion.

pub mod closed_form;
pub mod coupled;
pub mod error;
pub mod numeric;
pub mod oracle;
pub mod pool;
pub mod scenario;

pub use coupled::{
    CompoundCurvature, CoupledState, Event, ExpansionReport, Indicator, LiquidationValuation,
    MetricsSample, PurchaseValuation,
};
pub use error::{Error, Result};
pub use pool::{Asset, DriftPoint, InvariantKind, OutputDerivatives, PoolState, TradeResult};
