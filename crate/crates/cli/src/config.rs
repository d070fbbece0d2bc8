//! JSON experiment configuration.

use std::fs;
use std::path::Path;

use mmquote::multi::{AssetParams, MultiEnv};
use mmquote::nalgebra::DMatrix;
use mmquote::sim::SimConfig;
use mmquote::{validate_env, Horizon, MarketEnv, Policy, PriceModel};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "A")]
    pub arrival_rate: f64,
    pub k: f64,
    pub z: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub nu: f64,
    pub a: f64,
    pub mu: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub record_paths: bool,
    pub quad_nodes: usize,
    pub workers: usize,
    pub label: Option<String>,
    pub model: Option<String>,
    pub policy: Option<String>,
    pub multi: Option<MultiSection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let env = MarketEnv::default();
        let sim = SimConfig::default();
        Self {
            arrival_rate: env.arrival_rate,
            k: env.decay,
            z: env.half_spread,
            sigma: env.sigma,
            alpha: env.cost,
            epsilon: env.inventory_risk,
            eta: env.terminal_penalty,
            nu: env.running_penalty,
            a: 0.1,
            mu: 3009.0,
            s0: sim.initial_mid,
            horizon: sim.horizon,
            n_steps: sim.n_steps,
            n_paths: sim.n_paths,
            seed: 1,
            record_paths: false,
            quad_nodes: sim.quad_nodes,
            workers: 0,
            label: None,
            model: None,
            policy: None,
            multi: None,
        }
    }
}

/// Portfolio block; penalty weights come from the top level.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiSection {
    #[serde(rename = "A")]
    pub arrival_rate: Vec<f64>,
    pub k: Vec<f64>,
    pub z: Vec<f64>,
    pub alpha: Vec<f64>,
    #[serde(rename = "Lambda")]
    pub covariance: Vec<Vec<f64>>,
    #[serde(rename = "Omega")]
    pub terminal: Vec<Vec<f64>>,
    #[serde(rename = "S0")]
    pub s0: Vec<f64>,
    pub model: Vec<String>,
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub inventories: Vec<Vec<i64>>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn build_model(name: &str, sigma: f64, a: Option<f64>, mu: Option<f64>) -> Result<PriceModel, CliError> {
    let model = match name {
        "martingale" => PriceModel::martingale(sigma),
        "ou" => {
            let (Some(a), Some(mu)) = (a, mu) else {
                return Err(config_error("an \"ou\" model needs \"a\" and \"mu\""));
            };
            PriceModel::ornstein_uhlenbeck(sigma, a, mu)
        }
        other => return Err(config_error(format!("unknown model \"{other}\" (expected martingale or ou)"))),
    };
    model.map_err(|e| config_error(e.to_string()))
}

pub fn parse_policy(name: &str) -> Result<Policy, CliError> {
    Policy::parse(name).ok_or_else(|| {
        let known: Vec<_> = Policy::ALL.iter().map(|p| p.name()).collect();
        config_error(format!("unknown policy \"{name}\" (expected one of {})", known.join(", ")))
    })
}

fn matrix(name: &str, rows: &[Vec<f64>], m: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(config_error(format!("\"{name}\" must be a {m}x{m} array of rows")));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let config: Self =
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        for (key, value) in [("model", &config.model), ("policy", &config.policy)] {
            if value.is_none() {
                return Err(config_error(format!("{}: missing required key \"{key}\"", path.display())));
            }
        }
        let report = validate_env(&config.env());
        if !report.is_ok() {
            return Err(config_error(format!("{}: {report}", path.display())));
        }
        config.model()?;
        config.policy()?;
        config.horizon()?;
        Ok(config)
    }

    pub fn env(&self) -> MarketEnv {
        MarketEnv {
            arrival_rate: self.arrival_rate,
            decay: self.k,
            half_spread: self.z,
            sigma: self.sigma,
            cost: self.alpha,
            inventory_risk: self.epsilon,
            terminal_penalty: self.eta,
            running_penalty: self.nu,
        }
    }

    pub fn horizon(&self) -> Result<Horizon, CliError> {
        Horizon::new(self.horizon).map_err(|e| config_error(e.to_string()))
    }

    pub fn model_named(&self, name: &str) -> Result<PriceModel, CliError> {
        build_model(name, self.sigma, Some(self.a), Some(self.mu))
    }

    pub fn model(&self) -> Result<PriceModel, CliError> {
        self.model_named(self.model.as_deref().unwrap_or_default())
    }

    pub fn policy(&self) -> Result<Policy, CliError> {
        parse_policy(self.policy.as_deref().unwrap_or_default())
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let cfg = SimConfig {
            n_steps: self.n_steps,
            horizon: self.horizon,
            n_paths: self.n_paths,
            seed: self.seed,
            policy: self.policy()?,
            record_paths: self.record_paths,
            initial_mid: self.s0,
            quad_nodes: self.quad_nodes,
            workers: self.workers,
        };
        cfg.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(cfg)
    }

    pub fn multi(&self) -> Result<(MultiEnv, Vec<PriceModel>, &MultiSection), CliError> {
        let section = self.multi.as_ref().ok_or_else(|| config_error("this command needs a \"multi\" block"))?;
        let m = section.k.len();
        for (name, len) in [("A", section.arrival_rate.len()), ("alpha", section.alpha.len()), ("z", section.z.len()), ("S0", section.s0.len()), ("model", section.model.len())] {
            if len != m {
                return Err(config_error(format!("multi.{name} has {len} entries, expected {m}")));
            }
        }
        let covariance = matrix("Lambda", &section.covariance, m)?;
        let terminal = matrix("Omega", &section.terminal, m)?;
        let menv = MultiEnv::new(
            AssetParams {
                arrival_rate: section.arrival_rate.clone(),
                decay: section.k.clone(),
                half_spread: section.z.clone(),
                cost: section.alpha.clone(),
            },
            covariance,
            terminal,
            self.epsilon,
            self.eta,
            self.nu,
        )
        .map_err(|e| config_error(e.to_string()))?;
        let models = section
            .model
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let sigma = menv.covariance()[(i, i)].sqrt();
                build_model(name, sigma, section.a.get(i).copied(), section.mu.get(i).copied())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((menv, models, section))
    }
}
