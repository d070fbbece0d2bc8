//! Optimal market-making quotes under inventory risk.
//!
//! The crate computes closed-form bid/ask half spreads for a market-maker
//! facing exponential fill intensities (exactly at zero inventory risk, to
//! first order in the inventory-risk parameter otherwise), simulates the
//! resulting controlled fill process, and checks every closed form against
//! brute-force oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod error;
pub mod multi;
pub mod output;
pub mod price;
pub mod quadrature;
pub mod quote;
pub mod sim;
pub mod stats;
pub mod verify;

pub use nalgebra;

pub use env::{validate_env, ControlSet, Horizon, MarketEnv, MarketState, ValidationReport};
pub use error::{Error, Result};
pub use price::{GaussianLaw, PriceModel};
pub use quote::{Mode, Policy};
