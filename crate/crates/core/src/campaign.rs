//! Seeded multi-episode evaluation.
//!
//! Every episode derives its own seed from the campaign seed and its index,
//! so results do not depend on how episodes are spread over workers. With
//! the `parallel` feature episodes run on a rayon pool; without it, or with
//! a single worker, they run in order on the calling thread.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::belief::ParticleBelief;
use crate::error::{CampaignError, ExecError};
use crate::execution::{
    execute_episode, EpisodeLog, ExecutionConfig, OptionSelector, ScriptedSelector,
};
use crate::model::{CostVector, Cpomdp};
use crate::options::OptionSet;
use crate::planner::{Planner, PlannerConfig, PolicyRollout};

/// Seed of episode `index` in a campaign seeded with `base`.
pub fn episode_seed(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

/// Environment RNG for an episode.
pub fn environment_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Planner RNG for an episode: same seed, separate stream.
pub fn planner_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".to_string())
}

fn run_one<T, F>(f: &F, index: usize, base_seed: u64) -> Result<T, CampaignError>
where
    F: Fn(usize, u64) -> Result<T, String>,
{
    let seed = episode_seed(base_seed, index);
    match panic::catch_unwind(AssertUnwindSafe(|| f(index, seed))) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(message)) => Err(CampaignError::Episode {
            episode: index,
            seed,
            message,
        }),
        Err(payload) => Err(CampaignError::Panic {
            episode: index,
            seed,
            message: panic_message(payload),
        }),
    }
}

/// Run `count` episodes in index order on the calling thread.
pub fn run_sequential<T, F>(count: usize, base_seed: u64, f: F) -> Result<Vec<T>, CampaignError>
where
    F: Fn(usize, u64) -> Result<T, String>,
{
    (0..count).map(|i| run_one(&f, i, base_seed)).collect()
}

/// Run `count` episodes on `workers` threads. Output is in index order and
/// identical to [`run_sequential`].
#[cfg(feature = "parallel")]
pub fn run_parallel<T, F>(
    count: usize,
    base_seed: u64,
    workers: usize,
    f: F,
) -> Result<Vec<T>, CampaignError>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T, String> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CampaignError::Setup(e.to_string()))?;
    pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| run_one(&f, i, base_seed))
            .collect()
    })
}

/// Dispatch on worker count and the `parallel` feature.
pub fn run_episodes<T, F>(
    count: usize,
    base_seed: u64,
    workers: usize,
    f: F,
) -> Result<Vec<T>, CampaignError>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T, String> + Sync,
{
    if workers == 0 {
        return Err(CampaignError::Setup("workers must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    if workers > 1 {
        return run_parallel(count, base_seed, workers, f);
    }
    run_sequential(count, base_seed, f)
}

/// How an arm picks options.
#[derive(Clone, Debug)]
pub enum SelectorKind {
    Planner(PlannerConfig),
    /// Always the option with this label.
    Scripted(String),
}

#[derive(Clone, Debug)]
pub struct ArmSpec<M: Cpomdp> {
    pub name: String,
    pub selector: SelectorKind,
    /// Options for the planner's leaf rollouts; the planning set when absent.
    pub rollout_options: Option<OptionSet<M>>,
    /// Particles in the executor's belief.
    pub particles: usize,
    pub execution: ExecutionConfig,
    /// Measure wall time; off by default so outputs are reproducible.
    pub record_timing: bool,
    /// Keep the JSON-lines episode log.
    pub keep_log: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeOutcome {
    pub episode: usize,
    pub seed: u64,
    pub value_reward: f64,
    pub value_cost: CostVector,
    pub steps: usize,
    pub epochs: usize,
    /// Cost channels whose realized discounted cost exceeds the budget.
    pub violations: usize,
    pub wall_ms: f64,
    /// Planner decisions made during the episode.
    pub decisions: usize,
    /// Tree queries summed over those decisions.
    pub queries: usize,
    pub truncated: bool,
    #[serde(skip)]
    pub log: Option<String>,
}

fn run_log<M, S>(
    model: &M,
    options: &OptionSet<M>,
    selector: &mut S,
    arm: &ArmSpec<M>,
    env_rng: &mut ChaCha8Rng,
) -> Result<EpisodeLog<M::Action, M::Obs>, ExecError>
where
    M: Cpomdp,
    S: OptionSelector<M>,
{
    let state = model.sample_initial(env_rng);
    let belief = ParticleBelief::sample_initial(model, arm.particles, env_rng)?;
    execute_episode(
        model,
        options,
        selector,
        state,
        belief,
        model.budget(),
        env_rng,
        arm.execution,
    )
}

/// One episode of `arm` with the given seed.
pub fn run_arm_episode<M: Cpomdp>(
    model: &M,
    options: &OptionSet<M>,
    arm: &ArmSpec<M>,
    episode: usize,
    seed: u64,
) -> Result<EpisodeOutcome, CampaignError> {
    let started = Instant::now();
    let mut env_rng = environment_rng(seed);
    let fail = |e: &dyn std::fmt::Display| CampaignError::Episode {
        episode,
        seed,
        message: e.to_string(),
    };
    let log = match &arm.selector {
        SelectorKind::Planner(config) => {
            let mut planner = Planner::with_rng(model, config.clone(), planner_rng(seed))
                .map_err(|e| fail(&e))?;
            if let Some(rollout) = &arm.rollout_options {
                planner = planner.with_estimator(PolicyRollout {
                    options: rollout.clone(),
                });
            }
            run_log(model, options, &mut planner, arm, &mut env_rng)
        }
        SelectorKind::Scripted(label) => {
            let mut scripted = ScriptedSelector::new(label.clone());
            run_log(model, options, &mut scripted, arm, &mut env_rng)
        }
    }
    .map_err(|e| fail(&e))?;
    let violations = log
        .value_cost
        .iter()
        .zip(model.budget().as_slice())
        .filter(|(c, b)| *c > *b)
        .count();
    let text = if arm.keep_log {
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).map_err(|e| fail(&e))?;
        Some(String::from_utf8(buf).map_err(|e| fail(&e))?)
    } else {
        None
    };
    Ok(EpisodeOutcome {
        episode,
        seed,
        value_reward: log.value_reward,
        value_cost: log.value_cost,
        steps: log.steps.len(),
        epochs: log.epochs.len(),
        violations,
        wall_ms: if arm.record_timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
        decisions: log.decisions.len(),
        queries: log.decisions.iter().map(|d| d.diagnostics.queries).sum(),
        truncated: log.truncated,
        log: text,
    })
}

/// Run `episodes` episodes of `arm`.
pub fn run_arm<M: Cpomdp>(
    model: &M,
    options: &OptionSet<M>,
    arm: &ArmSpec<M>,
    episodes: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<EpisodeOutcome>, CampaignError> {
    run_episodes(episodes, base_seed, workers, |i, seed| {
        run_arm_episode(model, options, arm, i, seed).map_err(|e| e.to_string())
    })
}

/// Mean and standard error of the mean (`sd / √n`, zero for one sample).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultSummary {
    pub arm: String,
    pub episodes: usize,
    pub mean_reward: f64,
    pub se_reward: f64,
    pub mean_cost: Vec<f64>,
    pub se_cost: Vec<f64>,
    /// Fraction of episodes with at least one violated channel.
    pub violation_rate: f64,
    pub mean_steps: f64,
    pub mean_epochs: f64,
    /// Wall time per planner decision; zero when timing is off.
    pub mean_decision_ms: f64,
    pub mean_queries_per_decision: f64,
}

pub fn summarize(arm: &str, outcomes: &[EpisodeOutcome]) -> ResultSummary {
    let n = outcomes.len();
    let (mean_reward, se_reward) =
        mean_se(&outcomes.iter().map(|o| o.value_reward).collect::<Vec<_>>());
    let dim = outcomes.first().map_or(0, |o| o.value_cost.dim());
    let (mean_cost, se_cost) = (0..dim)
        .map(|k| mean_se(&outcomes.iter().map(|o| o.value_cost[k]).collect::<Vec<_>>()))
        .unzip();
    let decisions: usize = outcomes.iter().map(|o| o.decisions).sum();
    let per_decision = |total: f64| {
        if decisions == 0 {
            0.0
        } else {
            total / decisions as f64
        }
    };
    let avg = |f: &dyn Fn(&EpisodeOutcome) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            outcomes.iter().map(f).sum::<f64>() / n as f64
        }
    };
    ResultSummary {
        arm: arm.to_string(),
        episodes: n,
        mean_reward,
        se_reward,
        mean_cost,
        se_cost,
        violation_rate: avg(&|o| (o.violations > 0) as u8 as f64),
        mean_steps: avg(&|o| o.steps as f64),
        mean_epochs: avg(&|o| o.epochs as f64),
        mean_decision_ms: per_decision(outcomes.iter().map(|o| o.wall_ms).sum()),
        mean_queries_per_decision: per_decision(outcomes.iter().map(|o| o.queries as f64).sum()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_examples() {
        assert_eq!(mean_se(&[3.0]), (3.0, 0.0));
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (1.6666666666666667f64 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn seeds_are_index_derived() {
        let a = run_sequential(5, 7, |i, s| Ok::<_, String>((i, s))).unwrap();
        assert_eq!(a, (0..5).map(|i| (i, 7 ^ i as u64)).collect::<Vec<_>>());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let f = |i: usize, s: u64| Ok::<_, String>(s.wrapping_mul(31) ^ i as u64);
        let one = run_episodes(40, 99, 1, f).unwrap();
        let four = run_episodes(40, 99, 4, f).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn errors_and_panics_are_reported() {
        let err = run_sequential(3, 0, |i, _| {
            if i == 1 {
                Err("boom".to_string())
            } else {
                Ok(i)
            }
        });
        assert!(matches!(
            err,
            Err(CampaignError::Episode { episode: 1, .. })
        ));
        let panicked = run_sequential(3, 0, |i, _| {
            if i == 2 {
                panic!("kaput");
            }
            Ok::<_, String>(i)
        });
        match panicked {
            Err(CampaignError::Panic {
                episode, message, ..
            }) => {
                assert_eq!(episode, 2);
                assert_eq!(message, "kaput");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(run_episodes(1, 0, 0, |_, _| Ok::<_, String>(())).is_err());
    }
}
