//! Closed-form optimal quotes.
//!
//! Three layers of the same control family:
//! - zero inventory risk: `delta± = 1/k ± Delta`, exact;
//! - first order in the inventory-risk parameter `epsilon`, with the unitary
//!   penalty `pi = eta z + nu sigma^2 (T - t)` and the sinh bias integral
//!   `E[int_t^T H pi dxi]`, `H = (4/e) A e^{-kz} sinh(k Delta)`;
//! - per-share transaction costs, which add `alpha` to both half spreads and
//!   replace `z` by `z + alpha` inside `H`.
//!
//! Expectations over the future mid-price are Gaussian because the bet
//! `Delta(xi, S(xi))` is affine in `S(xi)`; the integrals over `xi` use
//! Gauss-Legendre quadrature.

use std::f64::consts::E;

use crate::env::{ControlSet, Horizon, MarketEnv, MarketState};
use crate::error::{check_time, Result};
use crate::price::{GaussianLaw, PriceModel};
use crate::quadrature::Quadrature;

/// How much of the first-order correction to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Full,
    /// Drops the sinh bias integral and the running-volatility part of the penalty.
    Simplified,
}

/// Quoting rule applied by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    ZeroOrder,
    FirstOrderFull,
    FirstOrderSimplified,
    WithCosts,
}

impl Policy {
    pub const ALL: [Policy; 4] =
        [Policy::ZeroOrder, Policy::FirstOrderFull, Policy::FirstOrderSimplified, Policy::WithCosts];

    pub fn name(self) -> &'static str {
        match self {
            Policy::ZeroOrder => "zero-order",
            Policy::FirstOrderFull => "first-order-full",
            Policy::FirstOrderSimplified => "first-order-simplified",
            Policy::WithCosts => "with-costs",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub(crate) fn mode(self) -> Mode {
        match self {
            Policy::FirstOrderSimplified => Mode::Simplified,
            _ => Mode::Full,
        }
    }

    pub fn charges_costs(self) -> bool {
        self == Policy::WithCosts
    }
}

/// First-order penalty inputs of the controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyTerms {
    pub pi_tilde: f64,
    pub bias_integral: f64,
}

/// Value at zero inventory risk split into buy-and-hold and market-making parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueDecomposition {
    pub u_hold: f64,
    pub u_mm: f64,
}

impl ValueDecomposition {
    pub fn total(&self) -> f64 {
        self.u_hold + self.u_mm
    }
}

/// First-order coefficients of the value expansion in `q` (the `q^2` and `q` terms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderThetas {
    pub quadratic: f64,
    pub linear: f64,
}

/// Fill intensity `A e^{-k (z + delta)}`; extrapolated for `delta <= -z`.
pub fn intensity(env: &MarketEnv, delta: f64) -> f64 {
    env.arrival_rate * (-env.decay * (env.half_spread + delta)).exp()
}

pub fn quotes_zero_order(
    env: &MarketEnv,
    model: &PriceModel,
    t: f64,
    mid: f64,
    horizon: Horizon,
) -> Result<ControlSet> {
    let bet = model.directional_bet(t, mid, horizon.end())?;
    Ok(assemble(1.0 / env.decay, 0.0, bet, 0.0, 0.0, 0.0, 0.0, mid))
}

/// `pi = eta z + nu sigma^2 (T - t)` for constant spread and volatility.
pub fn unitary_penalty(env: &MarketEnv, t: f64, horizon: Horizon) -> Result<f64> {
    check_time(t, horizon.end())?;
    Ok(penalty_at(env, t, horizon.end()))
}

fn penalty_at(env: &MarketEnv, t: f64, horizon: f64) -> f64 {
    env.terminal_penalty * env.half_spread + env.running_penalty * (env.sigma * env.sigma) * (horizon - t)
}

/// `E[int_t^T H pi dxi]` evaluated with `quad_nodes` Gauss-Legendre nodes.
pub fn bias_integral(
    env: &MarketEnv,
    model: &PriceModel,
    t: f64,
    mid: f64,
    horizon: Horizon,
    quad_nodes: usize,
) -> Result<f64> {
    check_time(t, horizon.end())?;
    let quad = Quadrature::new(quad_nodes)?;
    let kernel = BiasKernel::single(env, env.half_spread, model, t, horizon.end(), &quad);
    Ok(kernel.eval(mid))
}

pub fn penalty_terms(
    env: &MarketEnv,
    model: &PriceModel,
    t: f64,
    mid: f64,
    horizon: Horizon,
    quad_nodes: usize,
) -> Result<PenaltyTerms> {
    Ok(PenaltyTerms {
        pi_tilde: unitary_penalty(env, t, horizon)?,
        bias_integral: bias_integral(env, model, t, mid, horizon, quad_nodes)?,
    })
}

/// First-order quotes without transaction costs.
pub fn quotes_first_order(
    env: &MarketEnv,
    model: &PriceModel,
    state: &MarketState,
    horizon: Horizon,
    mode: Mode,
) -> Result<ControlSet> {
    check_time(state.t, horizon.end())?;
    let policy = match mode {
        Mode::Full => Policy::FirstOrderFull,
        Mode::Simplified => Policy::FirstOrderSimplified,
    };
    let rule = QuoteRule::new(env, model, state.t, horizon.end(), policy, Quadrature::standard());
    Ok(rule.quote(state.mid, state.inventory))
}

/// First-order quotes with the per-share cost `env.cost`.
pub fn quotes_with_costs(
    env: &MarketEnv,
    model: &PriceModel,
    state: &MarketState,
    horizon: Horizon,
    mode: Mode,
) -> Result<ControlSet> {
    check_time(state.t, horizon.end())?;
    let rule = QuoteRule::with_mode(env, model, state.t, horizon.end(), mode, true, Quadrature::standard());
    Ok(rule.quote(state.mid, state.inventory))
}

pub fn value_function_zero(
    env: &MarketEnv,
    model: &PriceModel,
    state: &MarketState,
    horizon: Horizon,
    quad_nodes: usize,
) -> Result<ValueDecomposition> {
    let bet = model.directional_bet(state.t, state.mid, horizon.end())?;
    let quad = Quadrature::new(quad_nodes)?;
    let nodes = BetNodes::new(model, env.decay, state.t, horizon.end(), &quad);
    let prefactor = 2.0 / E * (env.arrival_rate / env.decay) * (-env.decay * env.half_spread).exp();
    let x = nodes.anchor - state.mid;
    let integral: f64 = nodes.nodes.iter().map(|n| n.weight * n.moment(x).expected_cosh()).sum();
    Ok(ValueDecomposition {
        u_hold: state.cash + state.inventory as f64 * (state.mid + bet),
        u_mm: prefactor * integral,
    })
}

/// `(theta_2, theta_1)` of the first-order term: `-pi` and `-E[int H pi]`.
pub fn theta_first_order(
    env: &MarketEnv,
    model: &PriceModel,
    t: f64,
    mid: f64,
    horizon: Horizon,
    quad_nodes: usize,
) -> Result<FirstOrderThetas> {
    let terms = penalty_terms(env, model, t, mid, horizon, quad_nodes)?;
    Ok(FirstOrderThetas { quadratic: -terms.pi_tilde, linear: -terms.bias_integral })
}

/// Half spreads from their ingredients. Shared by the single- and multi-asset
/// paths so a one-asset portfolio reproduces the scalar quotes bit for bit.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    inv_decay: f64,
    cost: f64,
    bet: f64,
    eps: f64,
    bias: f64,
    pi_own: f64,
    pi_inventory: f64,
    mid: f64,
) -> ControlSet {
    let base = inv_decay + cost;
    let delta_plus = base + bet + eps * (-bias - 2.0 * pi_inventory + pi_own);
    let delta_minus = base - bet + eps * (bias + 2.0 * pi_inventory + pi_own);
    ControlSet::from_half_spreads(delta_plus, delta_minus, mid)
}

/// Quadrature nodes carrying the Gaussian law of `k Delta(xi, S(xi))`.
///
/// With `phi(a, b)` the model's decay factor, `k Delta(xi, S)` equals
/// `k (1 - phi(xi, T)) (mu - S)` and `S(xi)` has mean `phi(t, xi) s + (1 - phi) mu`,
/// so the law has mean `gain * (mu - s)` and a variance free of `s`.
#[derive(Debug, Clone)]
pub(crate) struct BetNodes {
    pub(crate) anchor: f64,
    pub(crate) nodes: Vec<BetNode>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BetNode {
    pub(crate) xi: f64,
    pub(crate) weight: f64,
    gain: f64,
    var: f64,
}

impl BetNode {
    fn moment(&self, offset: f64) -> GaussianLaw {
        GaussianLaw { mean: self.gain * offset, var: self.var }
    }
}

impl BetNodes {
    pub(crate) fn new(model: &PriceModel, decay: f64, t: f64, horizon: f64, quad: &Quadrature) -> Self {
        let nodes = quad
            .mapped(t, horizon)
            .map(|(xi, weight)| {
                let slope = decay * (1.0 - model.decay(xi, horizon));
                let spread_var = model.transition_law(t, 0.0, xi).map(|l| l.var).unwrap_or(0.0);
                BetNode { xi, weight, gain: slope * model.decay(t, xi), var: slope * slope * spread_var }
            })
            .collect();
        Self { anchor: model.anchor(), nodes }
    }
}

/// `E[int_t^T H pi dxi]` as a function of the current mid-price.
#[derive(Debug, Clone, Default)]
pub struct BiasKernel {
    anchor: f64,
    terms: Vec<(f64, f64)>,
}

impl BiasKernel {
    /// Kernel whose value is identically zero.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds the kernel for one asset.
    ///
    /// `spread` enters only the `e^{-k spread}` prefactor (it is `z + alpha`
    /// under costs); `penalty(xi)` is the unitary penalty weight at `xi`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        arrival_rate: f64,
        decay: f64,
        spread: f64,
        model: &PriceModel,
        t: f64,
        horizon: f64,
        quad: &Quadrature,
        penalty: impl Fn(f64) -> f64,
    ) -> Self {
        if model.is_martingale() {
            return Self::zero();
        }
        let nodes = BetNodes::new(model, decay, t, horizon, quad);
        let prefactor = 4.0 / E * arrival_rate * (-decay * spread).exp();
        let terms = nodes
            .nodes
            .iter()
            .map(|n| (n.weight * prefactor * (0.5 * n.var).exp() * penalty(n.xi), n.gain))
            .collect();
        Self { anchor: nodes.anchor, terms }
    }

    fn single(env: &MarketEnv, spread: f64, model: &PriceModel, t: f64, horizon: f64, quad: &Quadrature) -> Self {
        Self::new(env.arrival_rate, env.decay, spread, model, t, horizon, quad, |xi| penalty_at(env, xi, horizon))
    }

    pub fn eval(&self, mid: f64) -> f64 {
        let offset = self.anchor - mid;
        self.terms.iter().map(|&(coef, gain)| coef * (gain * offset).sinh()).sum()
    }
}

/// Everything in the quotes that depends on time only, for one policy at one `t`.
#[derive(Debug, Clone)]
pub struct QuoteRule {
    model: PriceModel,
    t: f64,
    horizon: f64,
    inv_decay: f64,
    cost: f64,
    eps: f64,
    pi: f64,
    bias: BiasKernel,
}

impl QuoteRule {
    pub fn new(
        env: &MarketEnv,
        model: &PriceModel,
        t: f64,
        horizon: f64,
        policy: Policy,
        quad: &Quadrature,
    ) -> Self {
        if policy == Policy::ZeroOrder {
            return Self {
                model: *model,
                t,
                horizon,
                inv_decay: 1.0 / env.decay,
                cost: 0.0,
                eps: 0.0,
                pi: 0.0,
                bias: BiasKernel::zero(),
            };
        }
        Self::with_mode(env, model, t, horizon, policy.mode(), policy.charges_costs(), quad)
    }

    fn with_mode(
        env: &MarketEnv,
        model: &PriceModel,
        t: f64,
        horizon: f64,
        mode: Mode,
        costs: bool,
        quad: &Quadrature,
    ) -> Self {
        let cost = if costs { env.cost } else { 0.0 };
        let (pi, bias) = match mode {
            Mode::Full => (
                penalty_at(env, t, horizon),
                BiasKernel::single(env, env.half_spread + cost, model, t, horizon, quad),
            ),
            Mode::Simplified => (env.terminal_penalty * env.half_spread, BiasKernel::zero()),
        };
        Self { model: *model, t, horizon, inv_decay: 1.0 / env.decay, cost, eps: env.inventory_risk, pi, bias }
    }

    pub fn quote(&self, mid: f64, inventory: i64) -> ControlSet {
        let bet = self.model.bet_unchecked(self.t, mid, self.horizon);
        let bias = if self.eps == 0.0 { 0.0 } else { self.bias.eval(mid) };
        assemble(self.inv_decay, self.cost, bet, self.eps, bias, self.pi, self.pi * inventory as f64, mid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::DEFAULT_QUAD_NODES;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const H: f64 = 1.0;

    fn hz() -> Horizon {
        Horizon::new(H).unwrap()
    }

    fn env() -> MarketEnv {
        MarketEnv::default()
    }

    fn bm() -> PriceModel {
        PriceModel::martingale(0.5).unwrap()
    }

    fn ou() -> PriceModel {
        PriceModel::ornstein_uhlenbeck(0.5, 0.1, 3009.0).unwrap()
    }

    fn state(t: f64, mid: f64, q: i64) -> MarketState {
        MarketState::new(t, mid, q, 0.0)
    }

    /// Independent oracle for `E[int H pi]` under the OU model: trapezoid in
    /// `xi`, midpoint rule over the textbook OU transition density.
    #[allow(clippy::too_many_arguments)]
    fn bias_oracle(env: &MarketEnv, a: f64, mu: f64, sigma: f64, t: f64, s: f64, horizon: f64, cost: f64) -> f64 {
        let n_xi = 2000;
        let h = (horizon - t) / n_xi as f64;
        let mut total = 0.0;
        for i in 0..=n_xi {
            let xi = t + i as f64 * h;
            let tau = xi - t;
            let m = mu + (s - mu) * (-a * tau).exp();
            let v = sigma * sigma * (1.0 - (-2.0 * a * tau).exp()) / (2.0 * a);
            let expected_sinh = if v == 0.0 {
                (env.decay * (mu - m) * (1.0 - (-a * (horizon - xi)).exp())).sinh()
            } else {
                let sd = v.sqrt();
                let n_s = 4000;
                let hs = 20.0 * sd / n_s as f64;
                (0..n_s)
                    .map(|j| {
                        let x = m - 10.0 * sd + (j as f64 + 0.5) * hs;
                        let pdf = (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                        let bet = (mu - x) * (1.0 - (-a * (horizon - xi)).exp());
                        (env.decay * bet).sinh() * pdf * hs
                    })
                    .sum()
            };
            let pi = env.terminal_penalty * env.half_spread + env.running_penalty * sigma * sigma * (horizon - xi);
            let integrand = 4.0 / E * env.arrival_rate * (-env.decay * (env.half_spread + cost)).exp() * expected_sinh * pi;
            let w = if i == 0 || i == n_xi { 0.5 } else { 1.0 };
            total += w * h * integrand;
        }
        total
    }

    #[test]
    fn intensity_values() {
        let e = env();
        assert_relative_eq!(intensity(&e, 1.0), 1000.0 * (-1.5f64).exp(), max_relative = 1e-15);
        assert!((intensity(&e, 1.0) - 223.13).abs() < 0.01);
        assert_eq!(intensity(&e, -0.5), 1000.0);
        // distance from -z doubled -> ratio squared (k = 1)
        let r1 = intensity(&e, 0.3) / 1000.0;
        let r2 = intensity(&e, 1.1) / 1000.0;
        assert_relative_eq!(r2, r1 * r1, max_relative = 1e-13);
        assert!(intensity(&e, -3.0) > 1000.0);
    }

    #[test]
    fn zero_order_martingale() {
        let c = quotes_zero_order(&env(), &bm(), 0.2, 3000.0, hz()).unwrap();
        assert_eq!((c.delta_plus, c.delta_minus, c.psi, c.centre), (1.0, 1.0, 2.0, 3000.0));
    }

    #[test]
    fn zero_order_ou() {
        let c = quotes_zero_order(&env(), &ou(), 0.0, 3000.0, hz()).unwrap();
        let bet = 9.0 * (1.0 - (-0.1f64).exp());
        assert_relative_eq!(c.delta_plus, 1.0 + bet, max_relative = 1e-12);
        assert_relative_eq!(c.delta_minus, 1.0 - bet, max_relative = 1e-12);
        assert_relative_eq!(c.centre, 3000.0 + bet, max_relative = 1e-15);
        assert!((c.centre - 3000.8565).abs() < 1e-4);
        let at_end = quotes_zero_order(&env(), &ou(), 1.0, 3000.0, hz()).unwrap();
        assert_eq!((at_end.delta_plus, at_end.centre), (1.0, 3000.0));
        assert!(quotes_zero_order(&env(), &ou(), 1.01, 3000.0, hz()).is_err());
    }

    #[test]
    fn unitary_penalty_values() {
        assert_relative_eq!(unitary_penalty(&env(), 0.0, hz()).unwrap(), 0.75, max_relative = 1e-15);
        let off = MarketEnv { terminal_penalty: 0.0, running_penalty: 0.0, ..env() };
        assert_eq!(unitary_penalty(&off, 0.0, hz()).unwrap(), 0.0);
        assert_eq!(unitary_penalty(&env(), 1.0, hz()).unwrap(), 0.5);
        assert!(unitary_penalty(&env(), 2.0, hz()).is_err());
    }

    #[test]
    fn bias_vanishes_for_martingale() {
        assert_eq!(bias_integral(&env(), &bm(), 0.0, 3000.0, hz(), 32).unwrap(), 0.0);
    }

    #[test]
    fn bias_vanishes_for_fast_reversion_at_mean() {
        let fast = PriceModel::ornstein_uhlenbeck(0.5, 1e4, 3009.0).unwrap();
        let b = bias_integral(&env(), &fast, 0.0, 3009.0, hz(), 32).unwrap();
        assert_eq!(b, 0.0);
        let slow = PriceModel::ornstein_uhlenbeck(0.5, 1e-3, 3009.0).unwrap();
        assert_eq!(bias_integral(&env(), &slow, 0.0, 3009.0, hz(), 32).unwrap(), 0.0);
    }

    #[test]
    fn bias_matches_brute_force_oracle() {
        let e = env();
        for &(t, s) in &[(0.0, 3000.0), (0.4, 3012.0), (0.9, 3005.5)] {
            let b = bias_integral(&e, &ou(), t, s, hz(), 32).unwrap();
            let oracle = bias_oracle(&e, 0.1, 3009.0, 0.5, t, s, H, 0.0);
            assert_relative_eq!(b, oracle, max_relative = 1e-6);
        }
    }

    #[test]
    fn bias_oracle_frozen_value() {
        // Frozen from `bias_oracle` at the default parameters, t = 0, s = 3000.
        let b = bias_integral(&env(), &ou(), 0.0, 3000.0, hz(), 32).unwrap();
        assert_relative_eq!(b, FROZEN_BIAS_T0, max_relative = 1e-6);
    }

    // Value of `bias_oracle(&env(), 0.1, 3009.0, 0.5, 0.0, 3000.0, 1.0, 0.0)`.
    const FROZEN_BIAS_T0: f64 = 267.141_779_223_014_6;

    #[test]
    fn bias_converges_in_node_count() {
        let e = env();
        let b32 = bias_integral(&e, &ou(), 0.0, 3000.0, hz(), 32).unwrap();
        let b64 = bias_integral(&e, &ou(), 0.0, 3000.0, hz(), 64).unwrap();
        assert!(((b32 - b64) / b64).abs() < 1e-10);
        let s = state(0.0, 3000.0, 0);
        let u32 = value_function_zero(&e, &ou(), &s, hz(), 32).unwrap().u_mm;
        let u64 = value_function_zero(&e, &ou(), &s, hz(), 64).unwrap().u_mm;
        assert!(((u32 - u64) / u64).abs() < 1e-10);
    }

    #[test]
    fn first_order_reduces_to_zero_order_without_risk() {
        let e = MarketEnv { inventory_risk: 0.0, ..env() };
        for model in [bm(), ou()] {
            for mode in [Mode::Full, Mode::Simplified] {
                for q in [-7, 0, 12] {
                    let st = state(0.3, 3004.0, q);
                    let a = quotes_first_order(&e, &model, &st, hz(), mode).unwrap();
                    let b = quotes_zero_order(&e, &model, 0.3, 3004.0, hz()).unwrap();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn first_order_martingale_spread_and_centre() {
        let e = env();
        let c0 = quotes_first_order(&e, &bm(), &state(0.0, 3000.0, 0), hz(), Mode::Full).unwrap();
        assert!((c0.psi - 2.0015).abs() < 1e-12);
        assert_eq!(c0.centre, 3000.0);
        let c10 = quotes_first_order(&e, &bm(), &state(0.0, 3000.0, 10), hz(), Mode::Full).unwrap();
        assert!((c10.centre - c0.centre + 0.015).abs() < 1e-9);
    }

    #[test]
    fn simplified_mode_keeps_terminal_penalty_only() {
        let e = env();
        let c = quotes_first_order(&e, &ou(), &state(0.0, 3000.0, 4), hz(), Mode::Simplified).unwrap();
        let bet = ou().directional_bet(0.0, 3000.0, 1.0).unwrap();
        let pi = 0.5;
        assert!((c.psi - (2.0 + 2.0 * 0.001 * pi)).abs() < 1e-12);
        assert!((c.centre - (3000.0 + bet - 0.001 * 2.0 * 4.0 * pi)).abs() < 1e-9);
    }

    #[test]
    fn full_mode_uses_bias_in_centre() {
        let e = env();
        let st = state(0.0, 3000.0, 3);
        let c = quotes_first_order(&e, &ou(), &st, hz(), Mode::Full).unwrap();
        let bet = ou().directional_bet(0.0, 3000.0, 1.0).unwrap();
        let b = bias_integral(&e, &ou(), 0.0, 3000.0, hz(), DEFAULT_QUAD_NODES).unwrap();
        let expected = 3000.0 + bet - 0.001 * (b + 2.0 * 3.0 * 0.75);
        assert!((c.centre - expected).abs() < 1e-9);
        assert!((c.delta_plus - (1.0 + bet + 0.001 * (-b + (1.0 - 6.0) * 0.75))).abs() < 1e-12);
        assert!((c.delta_minus - (1.0 - bet + 0.001 * (b + (1.0 + 6.0) * 0.75))).abs() < 1e-12);
    }

    #[test]
    fn costs_widen_spread() {
        let e = MarketEnv { inventory_risk: 0.0, cost: 0.05, ..env() };
        let c = quotes_with_costs(&e, &bm(), &state(0.0, 3000.0, 0), hz(), Mode::Full).unwrap();
        assert!((c.psi - 2.1).abs() < 1e-12);

        let no_cost = MarketEnv { cost: 0.0, ..env() };
        for model in [bm(), ou()] {
            let st = state(0.2, 3003.0, -5);
            assert_eq!(
                quotes_with_costs(&no_cost, &model, &st, hz(), Mode::Full).unwrap(),
                quotes_first_order(&no_cost, &model, &st, hz(), Mode::Full).unwrap()
            );
        }
    }

    #[test]
    fn rebate_can_close_the_spread() {
        let base = env();
        let pi = unitary_penalty(&base, 0.0, hz()).unwrap();
        let e = MarketEnv { cost: -1.0 / base.decay - base.inventory_risk * pi, ..base };
        let c = quotes_with_costs(&e, &bm(), &state(0.0, 3000.0, 2), hz(), Mode::Full).unwrap();
        assert!(c.psi.abs() < 1e-12, "psi = {}", c.psi);
    }

    #[test]
    fn costs_shift_only_the_bias_prefactor() {
        let e = env();
        let st = state(0.0, 3000.0, 0);
        let with = quotes_with_costs(&e, &ou(), &st, hz(), Mode::Full).unwrap();
        let oracle = bias_oracle(&e, 0.1, 3009.0, 0.5, 0.0, 3000.0, H, e.cost);
        let bet = ou().directional_bet(0.0, 3000.0, 1.0).unwrap();
        assert_relative_eq!(with.centre - 3000.0, bet - 0.001 * oracle, max_relative = 1e-7);
    }

    #[test]
    fn value_function_martingale() {
        let e = env();
        let v = value_function_zero(&e, &bm(), &state(0.25, 3000.0, 0), hz(), 32).unwrap();
        assert_eq!(v.u_hold, 0.0);
        let expected = 2.0 / E * 1000.0 * (-0.5f64).exp() * 0.75;
        assert_relative_eq!(v.u_mm, expected, max_relative = 1e-13);

        let end = value_function_zero(&e, &ou(), &MarketState::new(1.0, 3001.0, 4, 10.0), hz(), 32).unwrap();
        assert_eq!(end.u_mm, 0.0);
        assert_eq!(end.u_hold, 10.0 + 4.0 * 3001.0);
    }

    #[test]
    fn martingale_is_the_worst_dynamic() {
        let e = env();
        for &s in &[2990.0, 3000.0, 3009.0, 3020.0] {
            let st = MarketState::new(0.0, s, 3, -9000.0);
            let m = value_function_zero(&e, &bm(), &st, hz(), 32).unwrap();
            let o = value_function_zero(&e, &ou(), &st, hz(), 32).unwrap();
            assert!(o.u_mm >= m.u_mm);
            let floor = 2.0 / E * 1000.0 * (-0.5f64).exp();
            assert!(o.u_mm >= floor * (1.0 - 1e-14));
        }
    }

    #[test]
    fn u_mm_decreases_in_spread_but_quotes_do_not_depend_on_it() {
        let st = state(0.0, 3000.0, 0);
        let narrow = MarketEnv { half_spread: 0.2, ..env() };
        let wide = MarketEnv { half_spread: 0.8, ..env() };
        for model in [bm(), ou()] {
            let a = value_function_zero(&narrow, &model, &st, hz(), 32).unwrap().u_mm;
            let b = value_function_zero(&wide, &model, &st, hz(), 32).unwrap().u_mm;
            assert!(a > b);
            assert_eq!(
                quotes_zero_order(&narrow, &model, 0.0, 3000.0, hz()).unwrap(),
                quotes_zero_order(&wide, &model, 0.0, 3000.0, hz()).unwrap()
            );
        }
    }

    #[test]
    fn thetas() {
        let e = env();
        let th = theta_first_order(&e, &bm(), 0.0, 3000.0, hz(), 32).unwrap();
        assert!((th.quadratic + 0.75).abs() < 1e-15);
        assert_eq!(th.linear, 0.0);
        let off = MarketEnv { terminal_penalty: 0.0, running_penalty: 0.0, ..e };
        let th = theta_first_order(&off, &ou(), 0.0, 3000.0, hz(), 32).unwrap();
        assert_eq!((th.quadratic, th.linear), (0.0, 0.0));
        let th = theta_first_order(&e, &ou(), 0.0, 3000.0, hz(), 32).unwrap();
        assert_eq!(th.linear, -bias_integral(&e, &ou(), 0.0, 3000.0, hz(), 32).unwrap());
    }

    #[test]
    fn quote_rule_rejects_late_times() {
        let st = state(1.5, 3000.0, 0);
        assert!(quotes_first_order(&env(), &bm(), &st, hz(), Mode::Full).is_err());
        assert!(quotes_with_costs(&env(), &bm(), &st, hz(), Mode::Full).is_err());
    }

    fn arb_env() -> impl Strategy<Value = MarketEnv> {
        (0.3f64..3.0, 0.0f64..1.0, 0.1f64..1.0, -0.2f64..0.3, 0.0f64..0.01, 0.0f64..2.0, 0.0f64..2.0).prop_map(
            |(decay, half_spread, sigma, cost, inventory_risk, terminal_penalty, running_penalty)| MarketEnv {
                arrival_rate: 1000.0,
                decay,
                half_spread,
                sigma,
                cost,
                inventory_risk,
                terminal_penalty,
                running_penalty,
            },
        )
    }

    fn arb_model() -> impl Strategy<Value = PriceModel> {
        prop_oneof![
            Just(PriceModel::martingale(0.5).unwrap()),
            (0.01f64..2.0, 2990.0f64..3020.0)
                .prop_map(|(a, mu)| PriceModel::ornstein_uhlenbeck(0.5, a, mu).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn spread_ignores_inventory_and_bet(
            e in arb_env(), model in arb_model(), t in 0.0f64..1.0,
            s in 2990.0f64..3020.0, q in -200i64..200,
        ) {
            let c = quotes_first_order(&e, &model, &state(t, s, q), hz(), Mode::Full).unwrap();
            let flat = quotes_first_order(&e, &bm(), &state(t, 3000.0, 0), hz(), Mode::Full).unwrap();
            let pi = unitary_penalty(&e, t, hz()).unwrap();
            let tol = 1e-13 * (1.0 + c.delta_plus.abs() + c.delta_minus.abs());
            prop_assert!((c.psi - flat.psi).abs() < tol);
            prop_assert!((c.psi - (2.0 / e.decay + 2.0 * e.inventory_risk * pi)).abs() < tol);
        }

        #[test]
        fn centre_slope_in_inventory(
            e in arb_env(), model in arb_model(), t in 0.0f64..1.0, s in 2990.0f64..3020.0, q in -200i64..200,
        ) {
            let a = quotes_first_order(&e, &model, &state(t, s, q), hz(), Mode::Full).unwrap();
            let b = quotes_first_order(&e, &model, &state(t, s, q + 1), hz(), Mode::Full).unwrap();
            let pi = unitary_penalty(&e, t, hz()).unwrap();
            let slope = b.centre - a.centre;
            // centre carries the magnitude of the mid-price
            prop_assert!((slope + 2.0 * e.inventory_risk * pi).abs() < 1e-15 * (s + a.delta_plus.abs()) * 8.0);
            if e.inventory_risk * pi > 1e-9 {
                prop_assert!(b.centre < a.centre);
            }
        }

        #[test]
        fn costs_add_exactly_two_alpha(
            e in arb_env(), model in arb_model(), t in 0.0f64..1.0,
            s in 2990.0f64..3020.0, q in -200i64..200, simplified in any::<bool>(),
        ) {
            let mode = if simplified { Mode::Simplified } else { Mode::Full };
            let st = state(t, s, q);
            let with = quotes_with_costs(&e, &model, &st, hz(), mode).unwrap();
            let without = quotes_first_order(&e, &model, &st, hz(), mode).unwrap();
            let tol = 1e-13 * (1.0 + with.delta_plus.abs() + with.delta_minus.abs());
            prop_assert!((with.psi - without.psi - 2.0 * e.cost).abs() < tol);
        }

        #[test]
        fn spread_grows_with_penalty_weights(
            e in arb_env(), t in 0.0f64..1.0, bump in 0.0f64..1.0,
        ) {
            let st = state(t, 3000.0, 0);
            let base = quotes_first_order(&e, &bm(), &st, hz(), Mode::Full).unwrap().psi;
            for bumped in [
                MarketEnv { terminal_penalty: e.terminal_penalty + bump, ..e },
                MarketEnv { running_penalty: e.running_penalty + bump, ..e },
                MarketEnv { inventory_risk: e.inventory_risk + bump * 0.01, ..e },
            ] {
                let psi = quotes_first_order(&bumped, &bm(), &st, hz(), Mode::Full).unwrap().psi;
                prop_assert!(psi >= base - 1e-15);
            }
        }

        #[test]
        fn u_mm_minimised_at_zero_bet(mu in 2980.0f64..3040.0, a in 0.01f64..3.0, t in 0.0f64..1.0) {
            let st = state(t, 3009.0, 0);
            let model = PriceModel::ornstein_uhlenbeck(0.5, a, mu).unwrap();
            let v = value_function_zero(&env(), &model, &st, hz(), 32).unwrap();
            let at_mean = value_function_zero(
                &env(), &PriceModel::ornstein_uhlenbeck(0.5, a, 3009.0).unwrap(), &st, hz(), 32,
            ).unwrap();
            prop_assert!(v.u_mm >= at_mean.u_mm * (1.0 - 1e-14));
            prop_assert!(v.u_mm >= 0.0);
        }
    }
}
