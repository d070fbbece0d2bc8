//! Market parameters, trading state and the quoting decision.

use crate::error::{domain, Result};

/// Single-asset market parameters together with the inventory-penalty weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketEnv {
    /// Order-arrival intensity scale `A` (events per unit time).
    pub arrival_rate: f64,
    /// Intensity decay rate `k` (1/price).
    pub decay: f64,
    /// Half market spread `z`.
    pub half_spread: f64,
    /// Mid-price volatility (price/sqrt(time)).
    pub sigma: f64,
    /// Per-share transaction cost; negative values are rebates.
    pub cost: f64,
    /// Inventory-risk perturbation parameter `epsilon`.
    pub inventory_risk: f64,
    /// Weight `eta` of the terminal liquidation penalty.
    pub terminal_penalty: f64,
    /// Weight `nu` of the running volatility penalty.
    pub running_penalty: f64,
}

impl Default for MarketEnv {
    fn default() -> Self {
        Self {
            arrival_rate: 1000.0,
            decay: 1.0,
            half_spread: 0.5,
            sigma: 0.5,
            cost: 0.05,
            inventory_risk: 0.001,
            terminal_penalty: 1.0,
            running_penalty: 1.0,
        }
    }
}

/// Violated constraints of a [`MarketEnv`]; empty when the environment is usable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.contains(needle))
    }

    fn require(&mut self, ok: bool, msg: &str) {
        if !ok {
            self.violations.push(msg.to_owned());
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.violations.join("; "))
    }
}

pub fn validate_env(env: &MarketEnv) -> ValidationReport {
    let mut report = ValidationReport::default();
    // `!(x > 0)` also catches NaN.
    report.require(env.arrival_rate > 0.0, "A must be > 0");
    report.require(env.decay > 0.0, "k must be > 0");
    report.require(env.sigma > 0.0, "sigma must be > 0");
    report.require(env.half_spread >= 0.0, "z must be >= 0");
    report.require(env.inventory_risk >= 0.0, "epsilon must be >= 0");
    report.require(env.terminal_penalty >= 0.0, "eta must be >= 0");
    report.require(env.running_penalty >= 0.0, "nu must be >= 0");
    report.require(env.cost.is_finite(), "alpha must be finite");
    report
}

/// Terminal time `T` of the trading session.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Horizon(f64);

impl Horizon {
    pub fn new(end: f64) -> Result<Self> {
        if !(end > 0.0) || !end.is_finite() {
            return domain(format!("horizon must be a positive finite time, got {end}"));
        }
        Ok(Self(end))
    }

    pub fn end(self) -> f64 {
        self.0
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Self(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    pub t: f64,
    /// Mid-price.
    pub mid: f64,
    /// Signed inventory; fills move it by one share.
    pub inventory: i64,
    pub cash: f64,
}

impl MarketState {
    pub fn new(t: f64, mid: f64, inventory: i64, cash: f64) -> Self {
        Self { t, mid, inventory, cash }
    }
}

/// A two-sided quote around the mid-price.
///
/// `psi` is the quoted spread and `centre` its midpoint; both are derived
/// from the half spreads when the set is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSet {
    /// Distance from the mid-price to the ask.
    pub delta_plus: f64,
    /// Distance from the mid-price to the bid.
    pub delta_minus: f64,
    pub psi: f64,
    pub centre: f64,
}

impl ControlSet {
    pub fn from_half_spreads(delta_plus: f64, delta_minus: f64, mid: f64) -> Self {
        Self {
            delta_plus,
            delta_minus,
            psi: delta_plus + delta_minus,
            centre: mid + 0.5 * (delta_plus - delta_minus),
        }
    }

    pub fn from_spread_and_centre(psi: f64, centre: f64, mid: f64) -> Self {
        let skew = centre - mid;
        Self {
            delta_plus: 0.5 * psi + skew,
            delta_minus: 0.5 * psi - skew,
            psi,
            centre,
        }
    }

    pub fn ask(&self, mid: f64) -> f64 {
        mid + self.delta_plus
    }

    pub fn bid(&self, mid: f64) -> f64 {
        mid - self.delta_minus
    }
}
