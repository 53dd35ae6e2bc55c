//! Runs arms, sweeps and writes results.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cobets::campaign::{self, ArmSpec, EpisodeOutcome, ResultSummary, SelectorKind};
use cobets::domains::lightdark::LightDark;
use cobets::domains::minichain::{minichain_options, MiniChain};
use cobets::domains::{make_lightdark_options, Catalog};
use cobets::options::primitive_options;
use cobets::{Cpomdp, ExecutionConfig, OptionSet};
use toml::Value;

use crate::config::{ArmConfig, DomainKind, ExperimentConfig};
use crate::output;

#[derive(Clone, Debug)]
pub struct ArmResult {
    pub outcomes: Vec<EpisodeOutcome>,
    pub summary: ResultSummary,
}

impl ArmResult {
    pub fn channels(&self) -> usize {
        self.summary.mean_cost.len()
    }
}

fn lightdark_catalog(model: &LightDark, name: &str) -> Result<OptionSet<LightDark>> {
    let catalog: Catalog = name.parse()?;
    Ok(make_lightdark_options(model, &catalog)?)
}

fn minichain_catalog(model: &MiniChain, name: &str) -> Result<OptionSet<MiniChain>> {
    match name {
        "primitive" => Ok(primitive_options(model)),
        "gated" => Ok(minichain_options(model)),
        other => bail!("unknown mini-chain catalog {other:?} (expected primitive or gated)"),
    }
}

fn selector<M: Cpomdp>(
    cfg: &ExperimentConfig,
    arm: &ArmConfig,
    options: &OptionSet<M>,
) -> Result<SelectorKind> {
    if arm.selector == "planner" {
        return Ok(SelectorKind::Planner(cfg.arm_planner(arm)?));
    }
    match arm.selector.strip_prefix("scripted:") {
        Some(label) => {
            options
                .index_of(label)
                .with_context(|| format!("arm {:?}: no option labelled {label:?}", arm.name))?;
            Ok(SelectorKind::Scripted(label.to_string()))
        }
        None => bail!(
            "arm {:?}: selector {:?} is neither planner nor scripted:<label>",
            arm.name,
            arm.selector
        ),
    }
}

fn run_with<M: Cpomdp>(
    cfg: &ExperimentConfig,
    arm: &ArmConfig,
    episodes: usize,
    model: &M,
    catalog: impl Fn(&str) -> Result<OptionSet<M>>,
) -> Result<ArmResult> {
    let options = catalog(&arm.catalog).with_context(|| format!("arm {:?}", arm.name))?;
    let rollout_options = arm.rollout.as_deref().map(&catalog).transpose()?;
    let e = &cfg.experiment;
    let spec = ArmSpec {
        name: arm.name.clone(),
        selector: selector(cfg, arm, &options)?,
        rollout_options,
        particles: e.particles,
        execution: ExecutionConfig {
            max_steps: e.max_steps,
        },
        record_timing: e.record_timing,
        keep_log: e.keep_logs,
    };
    let outcomes = campaign::run_arm(model, &options, &spec, episodes, e.seed, e.workers)?;
    let summary = campaign::summarize(&arm.name, &outcomes);
    Ok(ArmResult { outcomes, summary })
}

/// Run `episodes` episodes of one arm in the configured domain.
pub fn run_arm(cfg: &ExperimentConfig, arm: &ArmConfig, episodes: usize) -> Result<ArmResult> {
    match cfg.experiment.domain {
        DomainKind::Lightdark => {
            let model = LightDark::new(cfg.lightdark.clone())?;
            run_with(cfg, arm, episodes, &model, |n| lightdark_catalog(&model, n))
        }
        DomainKind::Minichain => {
            let model = MiniChain::new(cfg.minichain.clone())?;
            run_with(cfg, arm, episodes, &model, |n| minichain_catalog(&model, n))
        }
    }
}

fn prepare(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

/// `run`: every arm in `[[arms]]`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ArmResult>> {
    if cfg.arms.is_empty() {
        bail!("no [[arms]] configured");
    }
    prepare(cfg, out)?;
    let mut results = Vec::new();
    for arm in &cfg.arms {
        let r = run_arm(cfg, arm, cfg.experiment.episodes)?;
        let stem = output::file_stem(&arm.name);
        output::write_episodes(
            &out.join(format!("episodes_{stem}.csv")),
            r.channels(),
            &r.outcomes,
        )?;
        if cfg.experiment.keep_logs {
            output::write_logs(
                &out.join(format!("log_{stem}.jsonl")),
                &arm.name,
                &r.outcomes,
            )?;
        }
        results.push(r);
    }
    let domain = cfg.experiment.domain.name().to_string();
    let rows: Vec<_> = results
        .iter()
        .map(|r| (vec![domain.clone()], &r.summary))
        .collect();
    output::write_table(
        &out.join("summary.csv"),
        &["domain"],
        results[0].channels(),
        &rows,
    )?;
    Ok(results)
}

/// One point of a sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub key: Vec<String>,
    pub result: ArmResult,
}

fn with_queries(arm: &ArmConfig, queries: usize) -> ArmConfig {
    let mut arm = arm.clone();
    arm.planner
        .insert("queries".into(), Value::Integer(queries as i64));
    arm
}

/// `anytime`: each anytime arm at each query budget.
pub fn run_anytime(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepPoint>> {
    let a = &cfg.anytime;
    if a.queries.is_empty() || a.arms.is_empty() {
        bail!("anytime sweep needs at least one query budget and one arm");
    }
    prepare(cfg, out)?;
    let episodes = a.episodes.unwrap_or(cfg.experiment.episodes);
    let mut points = Vec::new();
    for &q in &a.queries {
        for arm in &a.arms {
            let result = run_arm(cfg, &with_queries(arm, q), episodes)?;
            points.push(SweepPoint {
                key: vec![q.to_string()],
                result,
            });
        }
    }
    write_sweep(&out.join("anytime.csv"), &["queries"], &points)?;
    Ok(points)
}

/// `branching`: the generated catalogs at each size.
pub fn run_branching(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepPoint>> {
    let b = &cfg.branching;
    if b.sizes.is_empty() {
        bail!("branching sweep needs at least one size");
    }
    if cfg.experiment.domain != DomainKind::Lightdark {
        bail!("branching sweeps are defined for lightdark only");
    }
    prepare(cfg, out)?;
    let episodes = b.episodes.unwrap_or(cfg.experiment.episodes);
    let mut points = Vec::new();
    for &size in &b.sizes {
        let catalog = format!("{}:{size}", b.strategy);
        let arm = ArmConfig::planner(&catalog, &catalog, b.rollout.as_deref());
        let result = run_arm(cfg, &arm, episodes)?;
        points.push(SweepPoint {
            key: vec![b.strategy.clone(), size.to_string()],
            result,
        });
    }
    write_sweep(&out.join("branching.csv"), &["strategy", "size"], &points)?;
    Ok(points)
}

fn write_sweep(path: &Path, keys: &[&str], points: &[SweepPoint]) -> Result<()> {
    let rows: Vec<_> = points
        .iter()
        .map(|p| (p.key.clone(), &p.result.summary))
        .collect();
    output::write_table(path, keys, points[0].result.channels(), &rows)
}
