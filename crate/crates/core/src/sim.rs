//! Monte Carlo simulation of a quoting day.
//!
//! Time is a uniform grid of `n_steps` steps. In each step both sides of the
//! book fill at most once, with probability `1 - exp(-lambda(delta) dt)`, using
//! the quotes computed from the state at the start of the step; the mid-price
//! then moves by one Euler step. Every step consumes exactly three draws
//! (sell uniform, buy uniform, price normal) per asset, so runs that share a
//! seed share their randomness whatever the policy.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::env::{validate_env, MarketEnv};
use crate::error::{domain, Result};
use crate::multi::{self, MultiEnv, MultiQuoteRule};
use crate::price::PriceModel;
use crate::quadrature::{Quadrature, DEFAULT_QUAD_NODES};
use crate::quote::{intensity, Policy, QuoteRule};
use crate::ControlSet;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_steps: usize,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub policy: Policy,
    /// Keep the per-step state of every path.
    pub record_paths: bool,
    /// Starting mid-price of single-asset runs.
    pub initial_mid: f64,
    pub quad_nodes: usize,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_steps: 1000,
            horizon: 1.0,
            n_paths: 10_000,
            seed: 0,
            policy: Policy::FirstOrderFull,
            record_paths: false,
            initial_mid: 3000.0,
            quad_nodes: DEFAULT_QUAD_NODES,
            workers: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return domain("n_steps must be >= 1");
        }
        if self.n_paths == 0 {
            return domain("n_paths must be >= 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return domain("horizon must be positive and finite");
        }
        if !self.initial_mid.is_finite() {
            return domain("initial mid-price must be finite");
        }
        if self.quad_nodes < 2 {
            return domain("quad_nodes must be >= 2");
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt()
    }
}

/// Per-asset fill bookkeeping of one path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LegTally {
    pub q_min: i64,
    pub q_max: i64,
    pub n_buy_fills: u64,
    pub n_sell_fills: u64,
    pub final_inventory: i64,
}

impl LegTally {
    fn record(&mut self, q: i64) {
        self.q_min = self.q_min.min(q);
        self.q_max = self.q_max.max(q);
    }
}

/// State at the start of a step together with the quotes in force during it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub s: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub q: i64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub terminal_pnl: f64,
    pub legs: Vec<LegTally>,
    pub timeseries: Option<Vec<StepRecord>>,
}

impl PathResult {
    /// Aggregate tally; for a single asset this is the only leg.
    pub fn tally(&self) -> LegTally {
        if let [leg] = self.legs[..] {
            return leg;
        }
        self.legs.iter().fold(LegTally::default(), |acc, l| LegTally {
            q_min: acc.q_min + l.q_min,
            q_max: acc.q_max + l.q_max,
            n_buy_fills: acc.n_buy_fills + l.n_buy_fills,
            n_sell_fills: acc.n_sell_fills + l.n_sell_fills,
            final_inventory: acc.final_inventory + l.final_inventory,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnlSample {
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub paths: Vec<PathResult>,
}

impl PnlSample {
    pub fn terminal_pnls(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.terminal_pnl).collect()
    }

    /// Mean over paths of `q_max - q_min`, summed over assets.
    pub fn mean_inventory_range(&self) -> f64 {
        let total: i64 = self.paths.iter().flat_map(|p| &p.legs).map(|l| l.q_max - l.q_min).sum();
        total as f64 / self.paths.len() as f64
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of path `index` under `master`.
pub fn path_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Draws {
    sell: f64,
    buy: f64,
    gaussian: f64,
}

fn draw(rng: &mut ChaCha8Rng) -> Draws {
    Draws { sell: rng.random::<f64>(), buy: rng.random::<f64>(), gaussian: rng.sample(StandardNormal) }
}

fn fill_probability(rate: f64, dt: f64) -> f64 {
    -(-rate * dt).exp_m1()
}

fn check_env(env: &MarketEnv) -> Result<()> {
    let mut report = validate_env(env);
    // No order flow is a legitimate simulation input.
    if env.arrival_rate == 0.0 {
        report.violations.retain(|v| !v.starts_with("A "));
    }
    if !report.is_ok() {
        return domain(report.to_string());
    }
    Ok(())
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::Error::Domain(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

fn quote_rules(env: &MarketEnv, model: &PriceModel, config: &SimConfig) -> Result<Vec<QuoteRule>> {
    let quad = Quadrature::new(config.quad_nodes)?;
    Ok((0..config.n_steps)
        .map(|step| QuoteRule::new(env, model, config.time(step), config.horizon, config.policy, &quad))
        .collect())
}

fn simulate_single(
    env: &MarketEnv,
    model: &PriceModel,
    config: &SimConfig,
    rules: &[QuoteRule],
    seed: u64,
    stream: u64,
) -> PathResult {
    let mut rng = path_rng(seed, stream);
    let dt = config.dt();
    let cost = if config.policy.charges_costs() { env.cost } else { 0.0 };
    let mut s = config.initial_mid;
    let mut q = 0i64;
    let mut x = 0.0;
    let mut leg = LegTally::default();
    let mut series = config.record_paths.then(|| Vec::with_capacity(config.n_steps));
    for (step, rule) in rules.iter().enumerate() {
        let c = rule.quote(s, q);
        let d = draw(&mut rng);
        if let Some(series) = series.as_mut() {
            series.push(StepRecord { t: config.time(step), s, delta_plus: c.delta_plus, delta_minus: c.delta_minus, q, x });
        }
        if d.sell < fill_probability(intensity(env, c.delta_plus), dt) {
            q -= 1;
            x += s + c.delta_plus - cost;
            leg.n_sell_fills += 1;
        }
        if d.buy < fill_probability(intensity(env, c.delta_minus), dt) {
            q += 1;
            x -= s - c.delta_minus + cost;
            leg.n_buy_fills += 1;
        }
        leg.record(q);
        s = model.step(s, dt, d.gaussian);
    }
    leg.final_inventory = q;
    PathResult { terminal_pnl: x + q as f64 * s, legs: vec![leg], timeseries: series }
}

/// One single-asset path driven by random stream 0 of `path_seed`.
pub fn run_path(env: &MarketEnv, model: &PriceModel, config: &SimConfig, path_seed: u64) -> Result<PathResult> {
    run_path_on_stream(env, model, config, path_seed, 0)
}

/// As [`run_path`], drawing from another stream of the same seed.
///
/// Asset `i` of a multi-asset run uses stream `i`, so a single-asset run on
/// stream `i` replays that asset's randomness.
pub fn run_path_on_stream(
    env: &MarketEnv,
    model: &PriceModel,
    config: &SimConfig,
    path_seed: u64,
    stream: u64,
) -> Result<PathResult> {
    check_env(env)?;
    config.validate()?;
    let rules = quote_rules(env, model, config)?;
    Ok(simulate_single(env, model, config, &rules, path_seed, stream))
}

pub fn run_batch(env: &MarketEnv, model: &PriceModel, config: &SimConfig) -> Result<PnlSample> {
    check_env(env)?;
    config.validate()?;
    let rules = quote_rules(env, model, config)?;
    let seeds: Vec<u64> = (0..config.n_paths as u64).map(|i| path_seed(config.seed, i)).collect();
    let paths = with_pool(config.workers, || {
        seeds.par_iter().map(|&seed| simulate_single(env, model, config, &rules, seed, 0)).collect()
    })?;
    Ok(PnlSample { config: config.clone(), seeds, paths })
}

fn simulate_multi(
    menv: &MultiEnv,
    models: &[PriceModel],
    initial_mids: &[f64],
    config: &SimConfig,
    rules: &[MultiQuoteRule],
    seed: u64,
) -> PathResult {
    let m = menv.assets();
    let mut rngs: Vec<ChaCha8Rng> = (0..m as u64).map(|i| path_rng(seed, i)).collect();
    let dt = config.dt();
    let costs: Vec<f64> =
        if config.policy.charges_costs() { menv.cost().to_vec() } else { vec![0.0; m] };
    let mut s = initial_mids.to_vec();
    let mut q = vec![0i64; m];
    let mut x = 0.0;
    let mut legs = vec![LegTally::default(); m];
    let mut quotes: Vec<ControlSet> = Vec::with_capacity(m);
    let mut gaussians = vec![0.0; m];
    for rule in rules {
        rule.quote_into(&s, &q, &mut quotes);
        for i in 0..m {
            let d = draw(&mut rngs[i]);
            let c = &quotes[i];
            if d.sell < fill_probability(menv.intensity(i, c.delta_plus), dt) {
                q[i] -= 1;
                x += s[i] + c.delta_plus - costs[i];
                legs[i].n_sell_fills += 1;
            }
            if d.buy < fill_probability(menv.intensity(i, c.delta_minus), dt) {
                q[i] += 1;
                x -= s[i] - c.delta_minus + costs[i];
                legs[i].n_buy_fills += 1;
            }
            legs[i].record(q[i]);
            gaussians[i] = d.gaussian;
        }
        multi::step_in_place(menv, models, &mut s, dt, &gaussians);
    }
    let mut pnl = x;
    for i in 0..m {
        legs[i].final_inventory = q[i];
        pnl += q[i] as f64 * s[i];
    }
    PathResult { terminal_pnl: pnl, legs, timeseries: None }
}

/// Correlated multi-asset batch; `config.initial_mid` is ignored in favour of `initial_mids`.
pub fn run_batch_multi(
    menv: &MultiEnv,
    models: &[PriceModel],
    initial_mids: &[f64],
    config: &SimConfig,
) -> Result<PnlSample> {
    config.validate()?;
    let m = menv.assets();
    if models.len() != m || initial_mids.len() != m {
        return domain(format!(
            "{} models and {} mid-prices given for {m} assets",
            models.len(),
            initial_mids.len()
        ));
    }
    if let Some((i, model)) = models.iter().enumerate().find(|(i, p)| {
        (p.sigma() * p.sigma() - menv.covariance()[(*i, *i)]).abs() > 1e-12 * menv.covariance()[(*i, *i)]
    }) {
        return domain(format!("asset {i}: model volatility {} disagrees with the covariance diagonal", model.sigma()));
    }
    let quad = Quadrature::new(config.quad_nodes)?;
    let rules: Vec<MultiQuoteRule> = (0..config.n_steps)
        .map(|step| MultiQuoteRule::new(menv, models, config.time(step), config.horizon, config.policy, &quad))
        .collect();
    let seeds: Vec<u64> = (0..config.n_paths as u64).map(|i| path_seed(config.seed, i)).collect();
    let paths = with_pool(config.workers, || {
        seeds.par_iter().map(|&seed| simulate_multi(menv, models, initial_mids, config, &rules, seed)).collect()
    })?;
    Ok(PnlSample { config: config.clone(), seeds, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi::AssetParams;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn env() -> MarketEnv {
        MarketEnv::default()
    }

    fn bm() -> PriceModel {
        PriceModel::martingale(0.5).unwrap()
    }

    fn ou() -> PriceModel {
        PriceModel::ornstein_uhlenbeck(0.5, 0.1, 3009.0).unwrap()
    }

    fn config(n_paths: usize, policy: Policy) -> SimConfig {
        SimConfig { n_paths, policy, seed: 11, ..SimConfig::default() }
    }

    fn single_as_multi(env: &MarketEnv) -> MultiEnv {
        MultiEnv::new(
            AssetParams {
                arrival_rate: vec![env.arrival_rate],
                decay: vec![env.decay],
                half_spread: vec![env.half_spread],
                cost: vec![env.cost],
            },
            DMatrix::from_element(1, 1, env.sigma * env.sigma),
            DMatrix::from_element(1, 1, env.half_spread),
            env.inventory_risk,
            env.terminal_penalty,
            env.running_penalty,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig { n_steps: 0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { n_paths: 0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { horizon: 0.0, ..SimConfig::default() }.validate().is_err());
        let bad_env = MarketEnv { decay: -1.0, ..env() };
        assert!(run_path(&bad_env, &bm(), &config(1, Policy::ZeroOrder), 1).is_err());
    }

    #[test]
    fn no_order_flow_means_no_fills() {
        let env = MarketEnv { arrival_rate: 0.0, ..env() };
        let path = run_path(&env, &ou(), &config(1, Policy::WithCosts), 5).unwrap();
        assert_eq!(path.terminal_pnl, 0.0);
        assert_eq!(path.tally(), LegTally::default());
    }

    #[test]
    fn paths_are_reproducible() {
        let cfg = SimConfig { record_paths: true, ..config(1, Policy::FirstOrderFull) };
        let a = run_path(&env(), &ou(), &cfg, 99).unwrap();
        let b = run_path(&env(), &ou(), &cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = run_path(&env(), &ou(), &cfg, 100).unwrap();
        assert_ne!(a.terminal_pnl, c.terminal_pnl);
    }

    #[test]
    fn batch_is_independent_of_worker_count() {
        let one = run_batch(&env(), &ou(), &SimConfig { workers: 1, ..config(64, Policy::WithCosts) }).unwrap();
        let four = run_batch(&env(), &ou(), &SimConfig { workers: 4, ..config(64, Policy::WithCosts) }).unwrap();
        assert_eq!(one.paths, four.paths);
        assert_eq!(one.seeds, four.seeds);
        let again = run_batch(&env(), &ou(), &SimConfig { workers: 1, ..config(64, Policy::WithCosts) }).unwrap();
        assert_eq!(one, again);
    }

    #[test]
    fn singleton_batch_wraps_run_path() {
        let cfg = config(1, Policy::FirstOrderSimplified);
        let batch = run_batch(&env(), &bm(), &cfg).unwrap();
        assert_eq!(batch.paths.len(), 1);
        assert_eq!(batch.paths[0], run_path(&env(), &bm(), &cfg, batch.seeds[0]).unwrap());
    }

    #[test]
    fn path_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| path_seed(7, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(path_seed(7, 0), path_seed(8, 0));
    }

    #[test]
    fn zero_order_martingale_quotes_are_constant() {
        let cfg = SimConfig { record_paths: true, ..config(1, Policy::ZeroOrder) };
        let path = run_path(&env(), &bm(), &cfg, 3).unwrap();
        let series = path.timeseries.unwrap();
        assert_eq!(series.len(), 1000);
        assert!(series.iter().all(|r| r.delta_plus == 1.0 && r.delta_minus == 1.0));
    }

    #[test]
    fn cash_matches_the_fill_ledger() {
        for policy in Policy::ALL {
            let cfg = SimConfig { record_paths: true, ..config(1, policy) };
            let path = run_path(&env(), &ou(), &cfg, 17).unwrap();
            let series = path.timeseries.as_ref().unwrap();
            let alpha = if policy == Policy::WithCosts { env().cost } else { 0.0 };
            let leg = path.legs[0];
            let mut ledger = 0.0;
            for (i, r) in series.iter().enumerate() {
                let (q_next, x_next) = series.get(i + 1).map_or((leg.final_inventory, None), |n| (n.q, Some(n.x)));
                let sell = r.s + r.delta_plus - alpha;
                let buy = -(r.s - r.delta_minus) - alpha;
                let flow = match q_next - r.q {
                    -1 => sell,
                    1 => buy,
                    // Either no fill or one on each side.
                    _ => match x_next {
                        Some(x) if (x - r.x).abs() > 1e-9 => sell + buy,
                        _ => 0.0,
                    },
                };
                ledger += flow;
                if let Some(x) = x_next {
                    assert!((ledger - x).abs() < 1e-8, "{policy:?} step {i}: {ledger} vs {x}");
                }
            }
            assert_eq!(leg.n_buy_fills as i64 - leg.n_sell_fills as i64, leg.final_inventory);
            assert!(leg.q_min <= 0 && leg.q_max >= 0);
        }
    }

    #[test]
    fn round_trip_earns_spread_net_of_costs() {
        // A round trip at a frozen mid with symmetric quotes: sell at s + d, buy at s - d.
        let (s, delta, alpha) = (3000.0, 1.0005, 0.05);
        let c = ControlSet::from_half_spreads(delta + alpha, delta + alpha, s);
        let mut x = 0.0;
        x += s + c.delta_plus - alpha;
        x -= s - c.delta_minus + alpha;
        assert!((x - (c.psi - 2.0 * alpha)).abs() < 1e-12);
        assert!((x - 2.0 * delta).abs() < 1e-12);
    }

    #[test]
    fn round_trip_in_the_engine() {
        // Frozen price, huge arrival rate so both sides fill every step.
        let env = MarketEnv { arrival_rate: 1e12, sigma: 0.5, cost: 0.05, ..env() };
        let model = PriceModel::martingale(1e-300).unwrap();
        let cfg = SimConfig { n_steps: 3, record_paths: true, ..config(1, Policy::WithCosts) };
        let path = run_path(&env, &model, &cfg, 1).unwrap();
        let tally = path.legs[0];
        assert_eq!((tally.n_buy_fills, tally.n_sell_fills, tally.final_inventory), (3, 3, 0));
        let series = path.timeseries.unwrap();
        let psi: f64 = series.iter().map(|r| r.delta_plus + r.delta_minus).sum();
        assert!((path.terminal_pnl - (psi - 2.0 * 3.0 * env.cost)).abs() < 1e-9);
    }

    #[test]
    fn fill_frequency_matches_bernoulli_rate() {
        // ZeroOrder on a martingale quotes delta = 1/k on both sides at every step.
        let cfg = SimConfig { n_steps: 1000, ..config(1000, Policy::ZeroOrder) };
        let batch = run_batch(&env(), &bm(), &cfg).unwrap();
        let steps = (cfg.n_steps * cfg.n_paths) as f64;
        let p = fill_probability(intensity(&env(), 1.0), cfg.dt());
        let se = (p * (1.0 - p) / steps).sqrt();
        let sells: u64 = batch.paths.iter().map(|r| r.legs[0].n_sell_fills).sum();
        let buys: u64 = batch.paths.iter().map(|r| r.legs[0].n_buy_fills).sum();
        for count in [sells, buys] {
            let rate = count as f64 / steps;
            assert!((rate - p).abs() < 3.0 * se, "rate {rate} vs {p} (se {se})");
        }
    }

    #[test]
    fn martingale_inventory_stays_bounded() {
        let batch = run_batch(&env(), &bm(), &config(400, Policy::FirstOrderFull)).unwrap();
        let inside = batch.paths.iter().filter(|r| r.legs[0].q_min >= -100 && r.legs[0].q_max <= 100).count();
        assert!(inside as f64 >= 0.95 * 400.0, "{inside} of 400");
    }

    #[test]
    fn one_asset_multi_run_reproduces_single_asset_run() {
        for (model, policy) in [(ou(), Policy::WithCosts), (bm(), Policy::FirstOrderFull), (ou(), Policy::FirstOrderSimplified), (ou(), Policy::ZeroOrder)] {
            let cfg = config(8, policy);
            let single = run_batch(&env(), &model, &cfg).unwrap();
            let multi = run_batch_multi(&single_as_multi(&env()), &[model], &[cfg.initial_mid], &cfg).unwrap();
            assert_eq!(single.paths, multi.paths, "{policy:?}");
        }
    }

    #[test]
    fn independent_assets_replay_single_asset_streams() {
        let first = env();
        let second = MarketEnv { arrival_rate: 600.0, decay: 1.5, half_spread: 0.3, sigma: 0.3, cost: 0.02, ..env() };
        let models = [ou(), PriceModel::martingale(0.3).unwrap()];
        let menv = MultiEnv::new(
            AssetParams {
                arrival_rate: vec![first.arrival_rate, second.arrival_rate],
                decay: vec![first.decay, second.decay],
                half_spread: vec![first.half_spread, second.half_spread],
                cost: vec![first.cost, second.cost],
            },
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![first.sigma * first.sigma, second.sigma * second.sigma])),
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![first.half_spread, second.half_spread])),
            first.inventory_risk,
            first.terminal_penalty,
            first.running_penalty,
        )
        .unwrap();
        let cfg = config(6, Policy::WithCosts);
        let batch = run_batch_multi(&menv, &models, &[3000.0, 50.0], &cfg).unwrap();
        for (path, &seed) in batch.paths.iter().zip(&batch.seeds) {
            let a = run_path_on_stream(&first, &models[0], &cfg, seed, 0).unwrap();
            let b = run_path_on_stream(&second, &models[1], &SimConfig { initial_mid: 50.0, ..cfg.clone() }, seed, 1).unwrap();
            assert_eq!(path.legs, vec![a.legs[0], b.legs[0]]);
        }
    }

    #[test]
    fn multi_without_order_flow_earns_nothing() {
        let menv = MultiEnv::new(
            AssetParams { arrival_rate: vec![0.0, 0.0], decay: vec![1.0, 1.0], half_spread: vec![0.5, 0.5], cost: vec![0.0, 0.0] },
            DMatrix::from_row_slice(2, 2, &[0.25, 0.1, 0.1, 0.25]),
            DMatrix::identity(2, 2),
            0.001,
            1.0,
            1.0,
        )
        .unwrap();
        let batch = run_batch_multi(&menv, &[bm(), bm()], &[100.0, 100.0], &config(4, Policy::WithCosts)).unwrap();
        assert!(batch.paths.iter().all(|p| p.terminal_pnl == 0.0));
        assert!(run_batch_multi(&menv, &[bm()], &[100.0, 100.0], &config(4, Policy::WithCosts)).is_err());
        assert!(run_batch_multi(&menv, &[bm(), ou()], &[100.0], &config(4, Policy::WithCosts)).is_err());
        assert!(run_batch_multi(&menv, &[bm(), PriceModel::martingale(0.3).unwrap()], &[1.0, 1.0], &config(4, Policy::WithCosts)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn tallies_are_consistent(seed in any::<u64>(), ou_prices in any::<bool>(), policy in 0usize..4) {
            let model = if ou_prices { ou() } else { bm() };
            let cfg = SimConfig { n_steps: 200, ..config(1, Policy::ALL[policy]) };
            let path = run_path(&env(), &model, &cfg, seed).unwrap();
            let leg = path.legs[0];
            prop_assert!(leg.q_min <= 0 && 0 <= leg.q_max);
            prop_assert!(leg.q_min <= leg.final_inventory && leg.final_inventory <= leg.q_max);
            prop_assert_eq!(leg.n_buy_fills as i64 - leg.n_sell_fills as i64, leg.final_inventory);
            prop_assert!(path.terminal_pnl.is_finite());
        }
    }
}
