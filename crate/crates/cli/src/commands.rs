use std::fs;
use std::path::PathBuf;

use mmquote::multi::rank_inventory_configs;
use mmquote::output::{write_csv, CsvRecord, IsoRiskRow, LegRow, PathRow, SummaryRow, TimeseriesRow};
use mmquote::sim::{run_batch, run_batch_multi, run_path, PnlSample, SimConfig};
use mmquote::stats::summarize;
use mmquote::verify::{run_verification, VerificationConfig};
use mmquote::{MarketEnv, PriceModel};

use crate::config::{parse_policy, ExperimentConfig};
use crate::{CliError, Common, SweepParam};

struct Context {
    config: ExperimentConfig,
    out: PathBuf,
}

impl Context {
    fn new(common: &Common) -> Result<Self, CliError> {
        let mut config = ExperimentConfig::load(&common.config)?;
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        if let Some(paths) = common.paths {
            config.n_paths = paths;
        }
        if let Some(workers) = common.workers {
            config.workers = workers;
        }
        Ok(Self { config, out: common.out.clone() })
    }

    fn write<R: CsvRecord>(&self, name: &str, rows: &[R]) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        write_csv(&path, rows)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn summary_row(label: String, sample: &PnlSample) -> Result<Option<SummaryRow>, CliError> {
    if sample.paths.len() < 2 {
        eprintln!("note: {label}: a summary needs at least two paths");
        return Ok(None);
    }
    Ok(Some(SummaryRow { label, stats: summarize(&sample.terminal_pnls())? }))
}

fn print_summaries(rows: &[SummaryRow]) {
    println!("{:<28} {:>12} {:>10} {:>10} {:>10}", "label", "mean", "sd", "q01", "sharpe");
    for row in rows {
        let s = &row.stats;
        let sharpe = s.sharpe.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        println!("{:<28} {:>12.3} {:>10.3} {:>10.3} {:>10}", row.label, s.mean, s.sd, s.quantiles[0], sharpe);
    }
}

pub fn simulate(common: &Common, multi: bool) -> Result<(), CliError> {
    let ctx = Context::new(common)?;
    let cfg = ctx.config.sim_config()?;
    let label = ctx.config.label.clone().unwrap_or_else(|| cfg.policy.name().to_string());
    // The batch keeps no time series; the first path is replayed with recording on.
    let batch_cfg = SimConfig { record_paths: false, ..cfg.clone() };
    let sample = if multi {
        let (menv, models, section) = ctx.config.multi()?;
        let sample = run_batch_multi(&menv, &models, &section.s0, &batch_cfg)?;
        ctx.write("legs.csv", &LegRow::from_sample(&sample))?;
        if cfg.record_paths {
            eprintln!("note: time series are not recorded for portfolio runs");
        }
        sample
    } else {
        let env = ctx.config.env();
        let model = ctx.config.model()?;
        let sample = run_batch(&env, &model, &batch_cfg)?;
        if cfg.record_paths {
            let first = run_path(&env, &model, &cfg, sample.seeds[0])?;
            let replay = PnlSample { config: cfg.clone(), seeds: vec![sample.seeds[0]], paths: vec![first] };
            ctx.write("timeseries.csv", &TimeseriesRow::from_sample(&replay, 0))?;
        }
        sample
    };
    ctx.write("paths.csv", &PathRow::from_sample(&sample))?;
    let rows: Vec<SummaryRow> = summary_row(label, &sample)?.into_iter().collect();
    ctx.write("summary.csv", &rows)?;
    print_summaries(&rows);
    Ok(())
}

fn run_arm(env: &MarketEnv, model: &PriceModel, cfg: &SimConfig, label: String) -> Result<SummaryRow, CliError> {
    let sample = run_batch(env, model, cfg)?;
    summary_row(label.clone(), &sample)?
        .ok_or_else(|| CliError::Config(format!("{label}: comparisons need at least two paths")))
}

pub fn compare(common: &Common, arms: &[String]) -> Result<(), CliError> {
    if arms.len() < 2 {
        return Err(CliError::Config(format!("compare needs at least two arms, got {}", arms.len())));
    }
    let ctx = Context::new(common)?;
    let base = ctx.config.sim_config()?;
    let env = ctx.config.env();
    let rows = arms
        .iter()
        .map(|arm| {
            let (model_name, policy) = match arm.split_once(':') {
                Some((m, p)) => (m, parse_policy(p)?),
                None => (arm.as_str(), base.policy),
            };
            let model = ctx.config.model_named(model_name)?;
            let cfg = SimConfig { policy, ..base.clone() };
            run_arm(&env, &model, &cfg, format!("{model_name}:{}", policy.name()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ctx.write("compare.csv", &rows)?;
    print_summaries(&rows);
    Ok(())
}

pub fn sweep(common: &Common, param: SweepParam, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let ctx = Context::new(common)?;
    let cfg = ctx.config.sim_config()?;
    let model = ctx.config.model()?;
    if matches!(param, SweepParam::Alpha) && !cfg.policy.charges_costs() {
        eprintln!("note: policy {} ignores alpha; use with-costs to see its effect", cfg.policy.name());
    }
    let rows = values
        .iter()
        .map(|&value| {
            let (env, label) = match param {
                SweepParam::Epsilon => (MarketEnv { inventory_risk: value, ..ctx.config.env() }, format!("epsilon={value}")),
                SweepParam::Alpha => (MarketEnv { cost: value, ..ctx.config.env() }, format!("alpha={value}")),
            };
            let report = mmquote::validate_env(&env);
            if !report.is_ok() {
                return Err(CliError::Config(format!("{label}: {report}")));
            }
            run_arm(&env, &model, &cfg, label)
        })
        .collect::<Result<Vec<_>, _>>()?;
    ctx.write("sweep.csv", &rows)?;
    print_summaries(&rows);
    Ok(())
}

pub fn isorisk(common: &Common, inventories: Vec<Vec<i64>>) -> Result<(), CliError> {
    let ctx = Context::new(common)?;
    let (menv, _, section) = ctx.config.multi()?;
    let configs = if inventories.is_empty() { section.inventories.clone() } else { inventories };
    if configs.is_empty() {
        return Err(CliError::Config("no inventories given (use --inventory or multi.inventories)".into()));
    }
    let ranked = rank_inventory_configs(&menv, &configs, 0.0, ctx.config.horizon()?)?;
    let rows: Vec<IsoRiskRow> = ranked
        .into_iter()
        .enumerate()
        .map(|(i, r)| IsoRiskRow { rank: i + 1, inventory: r.inventory, risk: r.risk })
        .collect();
    for row in &rows {
        println!("{:>3}  {:<16} {:.6}", row.rank, format!("{:?}", row.inventory), row.risk);
    }
    ctx.write("isorisk.csv", &rows)
}

pub fn verify(common: &Common, tolerance_scale: f64) -> Result<(), CliError> {
    if !tolerance_scale.is_finite() || tolerance_scale <= 0.0 {
        return Err(CliError::Config("tolerance scale must be positive".into()));
    }
    let ctx = Context::new(common)?;
    let ou = ctx.config.model_named("ou")?;
    let defaults = VerificationConfig::default();
    let cfg = VerificationConfig {
        n_mc: common.paths.unwrap_or(defaults.n_mc),
        seed: ctx.config.seed,
        tolerance_scale,
        ..defaults
    };
    let checks = run_verification(&ctx.config.env(), &ou, ctx.config.s0, &cfg)?;
    for c in &checks {
        println!(
            "{} {:<40} computed {:.10e} reference {:.10e} tolerance {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.computed,
            c.reference,
            c.tolerance
        );
    }
    ctx.write("verification.csv", &checks)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join("; ")))
    }
}

