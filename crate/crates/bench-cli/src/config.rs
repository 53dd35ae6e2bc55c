//! Experiment configuration: one TOML file plus `section.key=value`
//! overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cobets::domains::lightdark::LightDarkSpec;
use cobets::domains::minichain::MiniChainSpec;
use cobets::planner::PlannerConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Lightdark,
    Minichain,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Lightdark => "lightdark",
            DomainKind::Minichain => "minichain",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub domain: DomainKind,
    pub episodes: usize,
    pub seed: u64,
    pub workers: usize,
    /// Output directory; the CLI flag and environment take precedence.
    pub out: Option<PathBuf>,
    /// Particles in the executor's belief.
    pub particles: usize,
    pub max_steps: usize,
    pub record_timing: bool,
    /// Write a JSON-lines log per arm.
    pub keep_logs: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            domain: DomainKind::Lightdark,
            episodes: 100,
            seed: 1,
            workers: 1,
            out: None,
            particles: 100,
            max_steps: 100,
            record_timing: false,
            keep_logs: false,
        }
    }
}

/// One compared configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub name: String,
    /// Option catalog. LightDark: `base4`, `feasible3`, `primitive`,
    /// `uncertainty:N`, `random-macro:N`. Mini-chain: `primitive`, `gated`.
    pub catalog: String,
    /// `planner`, or `scripted:<option label>`.
    #[serde(default = "default_selector")]
    pub selector: String,
    /// Catalog for the planner's leaf rollouts; the arm's own catalog when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rollout: Option<String>,
    /// Overrides on top of `[planner]`.
    #[serde(default, skip_serializing_if = "Table::is_empty")]
    pub planner: Table,
}

fn default_selector() -> String {
    "planner".into()
}

impl ArmConfig {
    pub fn planner(name: &str, catalog: &str, rollout: Option<&str>) -> Self {
        Self {
            name: name.into(),
            catalog: catalog.into(),
            selector: default_selector(),
            rollout: rollout.map(str::to_string),
            planner: Table::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnytimeSection {
    pub queries: Vec<usize>,
    /// Falls back to `experiment.episodes`.
    pub episodes: Option<usize>,
    pub arms: Vec<ArmConfig>,
}

impl Default for AnytimeSection {
    fn default() -> Self {
        Self {
            queries: vec![10, 100, 1000],
            episodes: Some(50),
            arms: vec![
                ArmConfig::planner("cobets-feasible3", "feasible3", Some("base4")),
                ArmConfig::planner("one-step", "primitive", Some("base4")),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchingSection {
    pub sizes: Vec<usize>,
    /// `uncertainty` or `random-macro`.
    pub strategy: String,
    pub rollout: Option<String>,
    pub episodes: Option<usize>,
}

impl Default for BranchingSection {
    fn default() -> Self {
        Self {
            sizes: vec![4, 8, 16, 32],
            strategy: "uncertainty".into(),
            rollout: Some("base4".into()),
            episodes: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub planner: PlannerConfig,
    pub lightdark: LightDarkSpec,
    pub minichain: MiniChainSpec,
    pub arms: Vec<ArmConfig>,
    pub anytime: AnytimeSection,
    pub branching: BranchingSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentSection::default(),
            planner: PlannerConfig::default(),
            lightdark: LightDarkSpec::default(),
            minichain: MiniChainSpec::default(),
            arms: vec![
                ArmConfig::planner("cobets", "base4", Some("base4")),
                ArmConfig::planner("one-step", "primitive", Some("base4")),
            ],
            anytime: AnytimeSection::default(),
            branching: BranchingSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let file: Table = toml::from_str(text).context("parsing config")?;
        let mut doc = Value::try_from(Self::default())?;
        merge(&mut doc, &Value::Table(file));
        let Value::Table(mut doc) = doc else {
            unreachable!("config serializes to a table")
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Self = Value::Table(doc).try_into().context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => {
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
            }
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing config")
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.workers == 0 {
            bail!("experiment.workers must be at least 1");
        }
        if self.experiment.particles == 0 {
            bail!("experiment.particles must be at least 1");
        }
        let mut names: Vec<&str> = self.arms.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            bail!("duplicate arm name {:?}", w[0]);
        }
        for arm in self.arms.iter().chain(&self.anytime.arms) {
            self.arm_planner(arm)?;
        }
        self.planner.validate()?;
        Ok(())
    }

    /// `[planner]` with the arm's overrides applied.
    pub fn arm_planner(&self, arm: &ArmConfig) -> Result<PlannerConfig> {
        let mut base = Value::try_from(&self.planner)?;
        merge(&mut base, &Value::Table(arm.planner.clone()));
        let cfg: PlannerConfig = base
            .try_into()
            .with_context(|| format!("planner overrides of arm {:?}", arm.name))?;
        cfg.validate()
            .with_context(|| format!("planner of arm {:?}", arm.name))?;
        Ok(cfg)
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Table(b), Value::Table(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

/// Parse the right-hand side as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    toml::from_str::<Table>(&wrapped)
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Apply `a.b.c=value`. Numeric segments index into arrays.
pub fn apply_override(doc: &mut Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .with_context(|| format!("override {spec:?} is not of the form section.key=value"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override {spec:?} has an empty key");
    }
    let value = parse_value(raw.trim());
    if keys.len() == 1 {
        doc.insert(keys[0].to_string(), value);
        return Ok(());
    }
    let mut node = doc
        .entry(keys[0].to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    for (depth, key) in keys[1..].iter().enumerate() {
        let last = depth + 2 == keys.len();
        node = match node {
            Value::Table(t) => {
                if last {
                    t.insert(key.to_string(), value);
                    return Ok(());
                }
                t.entry(key.to_string())
                    .or_insert_with(|| Value::Table(Table::new()))
            }
            Value::Array(items) => {
                let i: usize = key
                    .parse()
                    .with_context(|| format!("override {spec:?}: {key:?} is not an array index"))?;
                let len = items.len();
                let item = items.get_mut(i).with_context(|| {
                    format!("override {spec:?}: index {i} out of range ({len})")
                })?;
                if last {
                    *item = value;
                    return Ok(());
                }
                item
            }
            _ => bail!("override {spec:?}: {key:?} is not inside a table"),
        };
    }
    unreachable!("loop returns on the last key")
}
