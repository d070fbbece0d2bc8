//! Multi-asset quoting and inventory risk.
//!
//! The unitary penalty becomes the matrix `pi = eta Omega + nu Lambda (T - t)`.
//! Spreads stay per-asset (`2/k_i + 2 alpha_i + 2 eps pi_ii`), while the quote
//! centres couple assets through `pi q` and through the row sums of `pi`
//! weighting each asset's sinh bias.

use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::env::{ControlSet, Horizon};
use crate::error::{check_time, domain, Result};
use crate::price::PriceModel;
use crate::quote::{assemble, BiasKernel, Mode, Policy};
use crate::quadrature::Quadrature;

#[derive(Debug, Clone)]
pub struct MultiEnv {
    arrival_rate: Vec<f64>,
    decay: Vec<f64>,
    half_spread: Vec<f64>,
    cost: Vec<f64>,
    covariance: DMatrix<f64>,
    terminal: DMatrix<f64>,
    pub inventory_risk: f64,
    pub terminal_penalty: f64,
    pub running_penalty: f64,
    chol: DMatrix<f64>,
}

/// Per-asset vectors of a [`MultiEnv`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssetParams {
    pub arrival_rate: Vec<f64>,
    pub decay: Vec<f64>,
    pub half_spread: Vec<f64>,
    pub cost: Vec<f64>,
}

fn symmetric_pd(name: &str, m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > 1e-12 * (a.abs() + b.abs()).max(1.0) {
                return domain(format!("{name} is not symmetric at ({i}, {j})"));
            }
        }
    }
    Cholesky::new(m.clone()).ok_or_else(|| crate::Error::Domain(format!("{name} is not positive-definite")))
}

impl MultiEnv {
    pub fn new(
        assets: AssetParams,
        covariance: DMatrix<f64>,
        terminal: DMatrix<f64>,
        inventory_risk: f64,
        terminal_penalty: f64,
        running_penalty: f64,
    ) -> Result<Self> {
        let m = assets.arrival_rate.len();
        if m == 0 {
            return domain("at least one asset is required");
        }
        for (name, len) in [("k", assets.decay.len()), ("z", assets.half_spread.len()), ("alpha", assets.cost.len())] {
            if len != m {
                return domain(format!("{name} has {len} entries, expected {m}"));
            }
        }
        for (name, mat) in [("Lambda", &covariance), ("Omega", &terminal)] {
            if mat.nrows() != m || mat.ncols() != m {
                return domain(format!("{name} is {}x{}, expected {m}x{m}", mat.nrows(), mat.ncols()));
            }
        }
        if assets.decay.iter().any(|&k| !(k > 0.0)) {
            return domain("every k must be > 0");
        }
        if assets.arrival_rate.iter().any(|&a| !(a >= 0.0)) {
            return domain("every A must be >= 0");
        }
        if assets.half_spread.iter().any(|&z| !(z >= 0.0)) {
            return domain("every z must be >= 0");
        }
        if !(inventory_risk >= 0.0 && terminal_penalty >= 0.0 && running_penalty >= 0.0) {
            return domain("epsilon, eta and nu must be >= 0");
        }
        let chol = symmetric_pd("Lambda", &covariance)?.l();
        symmetric_pd("Omega", &terminal)?;
        Ok(Self {
            arrival_rate: assets.arrival_rate,
            decay: assets.decay,
            half_spread: assets.half_spread,
            cost: assets.cost,
            covariance,
            terminal,
            inventory_risk,
            terminal_penalty,
            running_penalty,
            chol,
        })
    }

    pub fn assets(&self) -> usize {
        self.decay.len()
    }

    pub fn arrival_rate(&self) -> &[f64] {
        &self.arrival_rate
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    pub fn half_spread(&self) -> &[f64] {
        &self.half_spread
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        &self.terminal
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Fill intensity of asset `i` at half spread `delta`.
    pub fn intensity(&self, i: usize, delta: f64) -> f64 {
        self.arrival_rate[i] * (-self.decay[i] * (self.half_spread[i] + delta)).exp()
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.assets() {
            return domain(format!("{what} has {len} entries, expected {}", self.assets()));
        }
        Ok(())
    }

    fn penalty_entry(&self, i: usize, j: usize, remaining: f64) -> f64 {
        self.terminal_penalty * self.terminal[(i, j)] + self.running_penalty * self.covariance[(i, j)] * remaining
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix(pub DMatrix<f64>);

pub fn penalty_matrix(menv: &MultiEnv, t: f64, horizon: Horizon) -> Result<PenaltyMatrix> {
    check_time(t, horizon.end())?;
    let m = menv.assets();
    let remaining = horizon.end() - t;
    Ok(PenaltyMatrix(DMatrix::from_fn(m, m, |i, j| menv.penalty_entry(i, j, remaining))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorControls {
    pub delta_plus: Vec<f64>,
    pub delta_minus: Vec<f64>,
    pub psi: Vec<f64>,
    pub centre: Vec<f64>,
}

impl VectorControls {
    fn from_sets(sets: &[ControlSet]) -> Self {
        Self {
            delta_plus: sets.iter().map(|c| c.delta_plus).collect(),
            delta_minus: sets.iter().map(|c| c.delta_minus).collect(),
            psi: sets.iter().map(|c| c.psi).collect(),
            centre: sets.iter().map(|c| c.centre).collect(),
        }
    }

    pub fn get(&self, i: usize) -> ControlSet {
        ControlSet { delta_plus: self.delta_plus[i], delta_minus: self.delta_minus[i], psi: self.psi[i], centre: self.centre[i] }
    }
}

/// Optimal quotes for every asset, transaction costs included.
#[allow(clippy::too_many_arguments)]
pub fn vector_quotes(
    menv: &MultiEnv,
    models: &[PriceModel],
    t: f64,
    mids: &[f64],
    inventory: &[i64],
    horizon: Horizon,
    mode: Mode,
) -> Result<VectorControls> {
    check_time(t, horizon.end())?;
    menv.check_len("models", models.len())?;
    menv.check_len("mid-prices", mids.len())?;
    menv.check_len("inventory", inventory.len())?;
    let policy = match mode {
        Mode::Full => Policy::WithCosts,
        // Simplified quotes with costs: reuse the rule with the simplified penalty.
        Mode::Simplified => Policy::FirstOrderSimplified,
    };
    let rule = MultiQuoteRule::build(menv, models, t, horizon.end(), policy, true, Quadrature::standard());
    let mut sets = Vec::with_capacity(menv.assets());
    rule.quote_into(mids, inventory, &mut sets);
    Ok(VectorControls::from_sets(&sets))
}

/// Time-only part of the multi-asset quotes at one `t`.
#[derive(Debug, Clone)]
pub(crate) struct MultiQuoteRule {
    models: Vec<PriceModel>,
    t: f64,
    horizon: f64,
    eps: f64,
    inv_decay: Vec<f64>,
    cost: Vec<f64>,
    pi: DMatrix<f64>,
    bias: Vec<BiasKernel>,
}

impl MultiQuoteRule {
    pub(crate) fn new(
        menv: &MultiEnv,
        models: &[PriceModel],
        t: f64,
        horizon: f64,
        policy: Policy,
        quad: &Quadrature,
    ) -> Self {
        Self::build(menv, models, t, horizon, policy, policy.charges_costs(), quad)
    }

    fn build(
        menv: &MultiEnv,
        models: &[PriceModel],
        t: f64,
        horizon: f64,
        policy: Policy,
        costs: bool,
        quad: &Quadrature,
    ) -> Self {
        let m = menv.assets();
        let cost: Vec<f64> = if costs { menv.cost.clone() } else { vec![0.0; m] };
        let inv_decay = menv.decay.iter().map(|k| 1.0 / k).collect();
        let (eps, pi, bias) = match policy {
            Policy::ZeroOrder => (0.0, DMatrix::zeros(m, m), vec![BiasKernel::zero(); m]),
            Policy::FirstOrderSimplified => (
                menv.inventory_risk,
                DMatrix::from_fn(m, m, |i, j| menv.terminal_penalty * menv.terminal[(i, j)]),
                vec![BiasKernel::zero(); m],
            ),
            Policy::FirstOrderFull | Policy::WithCosts => {
                let pi = DMatrix::from_fn(m, m, |i, j| menv.penalty_entry(i, j, horizon - t));
                let bias = (0..m)
                    .map(|i| {
                        BiasKernel::new(
                            menv.arrival_rate[i],
                            menv.decay[i],
                            menv.half_spread[i] + cost[i],
                            &models[i],
                            t,
                            horizon,
                            quad,
                            |xi| (0..m).map(|j| menv.penalty_entry(i, j, horizon - xi)).sum(),
                        )
                    })
                    .collect();
                (menv.inventory_risk, pi, bias)
            }
        };
        Self { models: models.to_vec(), t, horizon, eps, inv_decay, cost, pi, bias }
    }

    pub(crate) fn quote_into(&self, mids: &[f64], inventory: &[i64], out: &mut Vec<ControlSet>) {
        out.clear();
        for (i, &mid) in mids.iter().enumerate() {
            let bet = self.models[i].bet_unchecked(self.t, mid, self.horizon);
            let bias = if self.eps == 0.0 { 0.0 } else { self.bias[i].eval(mid) };
            let pi_inventory: f64 = inventory.iter().enumerate().map(|(j, &q)| self.pi[(i, j)] * q as f64).sum();
            out.push(assemble(
                self.inv_decay[i],
                self.cost[i],
                bet,
                self.eps,
                bias,
                self.pi[(i, i)],
                pi_inventory,
                mid,
            ));
        }
    }
}

/// `eps q' (eta Omega + nu (T - t) Lambda) q`, inventory frozen over `[t, T]`.
pub fn iso_risk(menv: &MultiEnv, inventory: &[i64], t: f64, horizon: Horizon) -> Result<f64> {
    menv.check_len("inventory", inventory.len())?;
    let pi = penalty_matrix(menv, t, horizon)?;
    let q = DMatrix::from_iterator(inventory.len(), 1, inventory.iter().map(|&x| x as f64));
    Ok(menv.inventory_risk * (q.transpose() * &pi.0 * &q)[(0, 0)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedConfig {
    pub inventory: Vec<i64>,
    pub risk: f64,
}

/// Configurations sorted by ascending risk; ties go to the lexicographically smaller vector.
pub fn rank_inventory_configs(
    menv: &MultiEnv,
    configs: &[Vec<i64>],
    t: f64,
    horizon: Horizon,
) -> Result<Vec<RankedConfig>> {
    if configs.is_empty() {
        return domain("no inventory configurations to rank");
    }
    let mut ranked = configs
        .iter()
        .map(|q| Ok(RankedConfig { inventory: q.clone(), risk: iso_risk(menv, q, t, horizon)? }))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        a.risk.partial_cmp(&b.risk).unwrap_or(Ordering::Equal).then_with(|| a.inventory.cmp(&b.inventory))
    });
    Ok(ranked)
}

/// One Euler step of all mid-prices with increments correlated through `Lambda`.
pub fn correlated_step(
    menv: &MultiEnv,
    models: &[PriceModel],
    mids: &[f64],
    dt: f64,
    draws: &[f64],
) -> Result<Vec<f64>> {
    menv.check_len("models", models.len())?;
    menv.check_len("mid-prices", mids.len())?;
    menv.check_len("draws", draws.len())?;
    let mut out = mids.to_vec();
    step_in_place(menv, models, &mut out, dt, draws);
    Ok(out)
}

pub(crate) fn step_in_place(menv: &MultiEnv, models: &[PriceModel], mids: &mut [f64], dt: f64, draws: &[f64]) {
    let sqrt_dt = dt.sqrt();
    let l = &menv.chol;
    for i in 0..mids.len() {
        let diffusion: f64 = (0..=i).map(|j| l[(i, j)] * (sqrt_dt * draws[j])).sum();
        mids[i] = models[i].drifted(mids[i], dt) + diffusion;
    }
}
