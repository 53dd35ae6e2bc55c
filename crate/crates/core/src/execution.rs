//! Hierarchical episode execution.
//!
//! Runs an option-level policy against the true environment: a new option
//! is selected whenever none is active or the active one terminates, its
//! low-level action is applied, the remaining budget is shifted by the
//! expected instantaneous cost under the current belief, and the belief is
//! updated with the real observation.

use std::io::{self, Write};

use rand::Rng;
use serde::Serialize;

use crate::belief::{belief_stats, update_belief, ParticleBelief};
use crate::error::{ExecError, OptionError, PlanError};
use crate::model::{discounted_return, propagate_budget, Budget, BudgetRule, CostVector, Cpomdp};
use crate::options::{option_terminates, OptionContext, OptionSet};
use crate::planner::DecisionDiagnostics;

pub const DEFAULT_MAX_STEPS: usize = 100;

/// Outcome of one high-level decision.
#[derive(Clone, Debug)]
pub struct Selection {
    pub option: usize,
    pub diagnostics: Option<DecisionDiagnostics>,
}

/// High-level option-selection policy.
pub trait OptionSelector<M: Cpomdp> {
    fn select(
        &mut self,
        options: &OptionSet<M>,
        belief: &ParticleBelief<M::State>,
        budget: &Budget,
    ) -> Result<Selection, PlanError>;
}

/// Always picks the option with a given label.
pub struct ScriptedSelector {
    label: String,
}

impl ScriptedSelector {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
        }
    }
}

impl<M: Cpomdp> OptionSelector<M> for ScriptedSelector {
    fn select(
        &mut self,
        options: &OptionSet<M>,
        _belief: &ParticleBelief<M::State>,
        _budget: &Budget,
    ) -> Result<Selection, PlanError> {
        Ok(Selection {
            option: options.index_of(&self.label)?,
            diagnostics: None,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExecutionConfig {
    pub max_steps: usize,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord<A, O> {
    pub t: usize,
    pub epoch: usize,
    pub belief_mean: Vec<f64>,
    pub belief_spread: Vec<f64>,
    pub option: String,
    pub action: A,
    pub observation: O,
    pub reward: f64,
    pub cost: CostVector,
    /// Expected instantaneous cost `C(b, a)` charged against the budget.
    pub expected_cost: CostVector,
    /// Remaining budget after this step's update.
    pub budget: Budget,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub start: usize,
    pub duration: usize,
    pub option: String,
    /// Budget handed to the selector at the start of the epoch.
    pub budget: Budget,
    /// No option was available; the executor's fallback chose this one.
    pub fallback: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecisionRecord {
    pub epoch: usize,
    pub t: usize,
    #[serde(flatten)]
    pub diagnostics: DecisionDiagnostics,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpisodeLog<A, O> {
    pub steps: Vec<StepRecord<A, O>>,
    pub epochs: Vec<EpochRecord>,
    pub decisions: Vec<DecisionRecord>,
    /// Realized discounted reward `V̂_R`.
    pub value_reward: f64,
    /// Realized discounted cost `V̂_C`.
    pub value_cost: CostVector,
    /// Step cap reached before a terminal state.
    pub truncated: bool,
    pub degenerate_updates: usize,
    pub fallback_selections: usize,
}

impl<A: Serialize, O: Serialize> EpisodeLog<A, O> {
    /// Line-delimited JSON: one record per step, then epochs, decisions and a
    /// closing summary record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        #[derive(Serialize)]
        #[serde(tag = "kind", rename_all = "snake_case")]
        enum Line<'a, A, O> {
            Step(&'a StepRecord<A, O>),
            Epoch(&'a EpochRecord),
            Decision(&'a DecisionRecord),
            Summary {
                value_reward: f64,
                value_cost: &'a CostVector,
                steps: usize,
                epochs: usize,
                truncated: bool,
                degenerate_updates: usize,
                fallback_selections: usize,
            },
        }
        let mut emit = |line: Line<'_, A, O>| -> io::Result<()> {
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")
        };
        for s in &self.steps {
            emit(Line::Step(s))?;
        }
        for e in &self.epochs {
            emit(Line::Epoch(e))?;
        }
        for d in &self.decisions {
            emit(Line::Decision(d))?;
        }
        emit(Line::Summary {
            value_reward: self.value_reward,
            value_cost: &self.value_cost,
            steps: self.steps.len(),
            epochs: self.epochs.len(),
            truncated: self.truncated,
            degenerate_updates: self.degenerate_updates,
            fallback_selections: self.fallback_selections,
        })
    }
}

/// Fallback when no option is available: the option with the largest soft
/// availability slack, else the first primitive option, else the first one.
fn fallback_option<M: Cpomdp>(options: &OptionSet<M>, belief: &ParticleBelief<M::State>) -> usize {
    let by_slack = options
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.availability_slack(belief).map(|s| (i, s)))
        .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((i, s)),
        });
    if let Some((i, _)) = by_slack {
        return i;
    }
    options.iter().position(|o| o.is_primitive()).unwrap_or(0)
}

/// Run one episode from a known true state and initial belief.
#[allow(clippy::too_many_arguments)]
pub fn execute_episode<M, S, R>(
    model: &M,
    options: &OptionSet<M>,
    selector: &mut S,
    initial_state: M::State,
    initial_belief: ParticleBelief<M::State>,
    budget: &Budget,
    rng: &mut R,
    config: ExecutionConfig,
) -> Result<EpisodeLog<M::Action, M::Obs>, ExecError>
where
    M: Cpomdp,
    S: OptionSelector<M> + ?Sized,
    R: Rng + ?Sized,
{
    let discount = model.discount();
    let mut state = initial_state;
    let mut belief = initial_belief;
    let mut remaining = budget.clone();

    let mut steps: Vec<StepRecord<M::Action, M::Obs>> = Vec::new();
    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut decisions = Vec::new();
    let mut active: Option<usize> = None;
    let mut elapsed = 0u32;
    let mut degenerate_updates = 0;
    let mut fallback_selections = 0;

    let mut t = 0;
    while !model.is_terminal(&state) && t < config.max_steps {
        let reselect = match active {
            None => true,
            Some(i) => option_terminates(
                options.get(i).as_ref(),
                OptionContext::new(&belief, elapsed),
                rng,
            ),
        };
        if reselect {
            let (index, fallback) = match options.available(&belief) {
                Ok(_) => {
                    let sel = selector.select(options, &belief, &remaining)?;
                    if let Some(diagnostics) = sel.diagnostics {
                        decisions.push(DecisionRecord {
                            epoch: epochs.len(),
                            t,
                            diagnostics,
                        });
                    }
                    (sel.option, false)
                }
                Err(OptionError::NoneAvailable) => {
                    fallback_selections += 1;
                    (fallback_option(options, &belief), true)
                }
                Err(e) => return Err(ExecError::Selector(e.into())),
            };
            if let Some(last) = epochs.last_mut() {
                last.duration = t - last.start;
            }
            epochs.push(EpochRecord {
                epoch: epochs.len(),
                start: t,
                duration: 0,
                option: options.get(index).label().to_string(),
                budget: remaining.clone(),
                fallback,
            });
            active = Some(index);
            elapsed = 0;
        }
        let option = options.get(active.expect("option selected above"));
        let action = option.action(OptionContext::new(&belief, elapsed));
        let env = model.step(&state, &action, rng);
        let update = update_belief(model, &belief, &action, &env.observation, rng)?;
        if update.degenerate {
            degenerate_updates += 1;
        }
        remaining = propagate_budget(
            &remaining,
            &update.expected_cost,
            discount,
            1,
            BudgetRule::Executor,
        )?;
        let stats = belief_stats(&belief);
        steps.push(StepRecord {
            t,
            epoch: epochs.len() - 1,
            belief_mean: stats.mean,
            belief_spread: stats.spread,
            option: option.label().to_string(),
            action,
            observation: env.observation,
            reward: env.reward,
            cost: env.cost,
            expected_cost: update.expected_cost,
            budget: remaining.clone(),
        });
        state = env.next_state;
        belief = update.belief;
        elapsed += 1;
        t += 1;
    }
    if let Some(last) = epochs.last_mut() {
        last.duration = t - last.start;
    }
    let (value_reward, value_cost) = discounted_return(
        steps.iter().map(|s| (s.reward, &s.cost)),
        model.cost_dim(),
        discount,
    );
    Ok(EpisodeLog {
        truncated: !model.is_terminal(&state),
        steps,
        epochs,
        decisions,
        value_reward,
        value_cost,
        degenerate_updates,
        fallback_selections,
    })
}
