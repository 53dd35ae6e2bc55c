//! Option rollouts, leaf value estimation and option sampling.

use rand::Rng;

use crate::belief::{pf_generative_step, ParticleBelief};
use crate::error::BeliefError;
use crate::model::{Budget, CostVector, Cpomdp};
use crate::options::{option_terminates, OptionContext, OptionSet};

use super::{PlannerConfig, SearchRng};

/// Per-step `(r̃, c̃)` of a belief trajectory, recorded when tracing.
pub type RawStep = (f64, CostVector);

/// Immutable inputs shared by every part of one search.
pub struct SearchContext<'a, M: Cpomdp> {
    pub model: &'a M,
    pub options: &'a OptionSet<M>,
    pub config: &'a PlannerConfig,
}

impl<M: Cpomdp> Clone for SearchContext<'_, M> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<M: Cpomdp> Copy for SearchContext<'_, M> {}

/// Option-induced belief jump `(b′, r̃, c̃, τ)`.
#[derive(Clone, Debug)]
pub struct SemiMarkovTransition<S> {
    pub belief: ParticleBelief<S>,
    /// Reward accumulated over the option, discounted to its start.
    pub reward: f64,
    /// Cost accumulated over the option, discounted to its start.
    pub cost: CostVector,
    /// Underlying steps executed, at least one.
    pub steps: u32,
}

/// Execute `option` from `belief` through the generative particle filter
/// until it terminates, the belief becomes terminal, or `depth` underlying
/// steps are used up.
pub fn option_rollout<M: Cpomdp>(
    ctx: SearchContext<'_, M>,
    belief: &ParticleBelief<M::State>,
    option: usize,
    depth: u32,
    rng: &mut SearchRng,
    mut raw: Option<&mut Vec<RawStep>>,
) -> Result<SemiMarkovTransition<M::State>, BeliefError> {
    debug_assert!(depth >= 1);
    let model = ctx.model;
    let gamma = model.discount();
    let policy = ctx.options.get(option).as_ref();

    let action = policy.action(OptionContext::new(belief, 0));
    let first = pf_generative_step(model, belief, &action, rng)?;
    if let Some(raw) = raw.as_deref_mut() {
        raw.push((first.reward, first.cost.clone()));
    }
    let mut reward = first.reward;
    let mut cost = first.cost;
    let mut current = first.belief;
    let mut steps = 1u32;

    while !current.is_terminal(model)
        && !option_terminates(policy, OptionContext::new(&current, steps), rng)
        && depth > steps
    {
        let action = policy.action(OptionContext::new(&current, steps));
        let next = pf_generative_step(model, &current, &action, rng)?;
        let weight = gamma.pow(steps);
        reward += weight * next.reward;
        cost.add_scaled(&next.cost, weight);
        if let Some(raw) = raw.as_deref_mut() {
            raw.push((next.reward, next.cost));
        }
        current = next.belief;
        steps += 1;
    }
    Ok(SemiMarkovTransition {
        belief: current,
        reward,
        cost,
        steps,
    })
}

/// Leaf value estimate `(V′, C′)` for a newly created belief node.
pub trait ValueEstimator<M: Cpomdp>: Send + Sync {
    fn estimate(
        &self,
        ctx: SearchContext<'_, M>,
        belief: &ParticleBelief<M::State>,
        budget: &Budget,
        depth: u32,
        rng: &mut SearchRng,
        raw: Option<&mut Vec<RawStep>>,
    ) -> Result<(f64, CostVector), BeliefError>;
}

/// Default estimator: chain uniformly random available options until the
/// depth (capped by the configured rollout depth) runs out.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomOptionRollout;

impl<M: Cpomdp> ValueEstimator<M> for RandomOptionRollout {
    fn estimate(
        &self,
        ctx: SearchContext<'_, M>,
        belief: &ParticleBelief<M::State>,
        _budget: &Budget,
        depth: u32,
        rng: &mut SearchRng,
        raw: Option<&mut Vec<RawStep>>,
    ) -> Result<(f64, CostVector), BeliefError> {
        let depth = ctx.config.rollout_depth.map_or(depth, |cap| depth.min(cap));
        estimate_value(ctx, belief, depth, rng, raw)
    }
}

/// Random rollouts over a fixed option set that may differ from the one
/// being planned over, e.g. macro controllers guiding a primitive-action
/// search.
pub struct PolicyRollout<M: Cpomdp> {
    pub options: OptionSet<M>,
}

impl<M: Cpomdp> ValueEstimator<M> for PolicyRollout<M> {
    fn estimate(
        &self,
        ctx: SearchContext<'_, M>,
        belief: &ParticleBelief<M::State>,
        _budget: &Budget,
        depth: u32,
        rng: &mut SearchRng,
        raw: Option<&mut Vec<RawStep>>,
    ) -> Result<(f64, CostVector), BeliefError> {
        let depth = ctx.config.rollout_depth.map_or(depth, |cap| depth.min(cap));
        let ctx = SearchContext {
            options: &self.options,
            ..ctx
        };
        estimate_value(ctx, belief, depth, rng, raw)
    }
}

/// Zero leaf value; turns the search into pure tree expansion.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroEstimator;

impl<M: Cpomdp> ValueEstimator<M> for ZeroEstimator {
    fn estimate(
        &self,
        ctx: SearchContext<'_, M>,
        _belief: &ParticleBelief<M::State>,
        _budget: &Budget,
        _depth: u32,
        _rng: &mut SearchRng,
        _raw: Option<&mut Vec<RawStep>>,
    ) -> Result<(f64, CostVector), BeliefError> {
        Ok((0.0, CostVector::zeros(ctx.model.cost_dim())))
    }
}

/// Random-option rollout value of `belief` over `depth` underlying steps.
pub fn estimate_value<M: Cpomdp>(
    ctx: SearchContext<'_, M>,
    belief: &ParticleBelief<M::State>,
    depth: u32,
    rng: &mut SearchRng,
    mut raw: Option<&mut Vec<RawStep>>,
) -> Result<(f64, CostVector), BeliefError> {
    let model = ctx.model;
    let gamma = model.discount();
    let mut value = 0.0;
    let mut cost = CostVector::zeros(model.cost_dim());
    let mut weight = 1.0;
    let mut remaining = depth;
    let mut owned: Option<ParticleBelief<M::State>> = None;
    while remaining > 0 {
        let current = owned.as_ref().unwrap_or(belief);
        if current.is_terminal(model) {
            break;
        }
        let Ok(available) = ctx.options.available(current) else {
            break;
        };
        let option = available[rng.random_range(0..available.len())];
        let tr = option_rollout(ctx, current, option, remaining, rng, raw.as_deref_mut())?;
        value += weight * tr.reward;
        cost.add_scaled(&tr.cost, weight);
        weight *= gamma.pow(tr.steps);
        remaining -= tr.steps;
        owned = Some(tr.belief);
    }
    Ok((value, cost))
}

/// Proposal distribution for option progressive widening.
pub trait OptionSampler<M: Cpomdp>: Send + Sync {
    /// Propose an option index given the clamped budget and the options
    /// already expanded at this node. `None` when nothing is available.
    fn sample(
        &self,
        ctx: SearchContext<'_, M>,
        belief: &ParticleBelief<M::State>,
        budget: &Budget,
        existing: &[usize],
        rng: &mut SearchRng,
    ) -> Option<usize>;
}

/// Uniform over available options not yet expanded; once exhausted, uniform
/// over all available options (which returns an existing child).
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformOptionSampler;

impl<M: Cpomdp> OptionSampler<M> for UniformOptionSampler {
    fn sample(
        &self,
        ctx: SearchContext<'_, M>,
        belief: &ParticleBelief<M::State>,
        _budget: &Budget,
        existing: &[usize],
        rng: &mut SearchRng,
    ) -> Option<usize> {
        sample_next_option(ctx.options, belief, existing, rng)
    }
}

pub fn sample_next_option<M: Cpomdp, R: Rng + ?Sized>(
    options: &OptionSet<M>,
    belief: &ParticleBelief<M::State>,
    existing: &[usize],
    rng: &mut R,
) -> Option<usize> {
    let available = options.available(belief).ok()?;
    let fresh: Vec<usize> = available
        .iter()
        .copied()
        .filter(|i| !existing.contains(i))
        .collect();
    if fresh.is_empty() {
        Some(available[rng.random_range(0..available.len())])
    } else {
        Some(fresh[rng.random_range(0..fresh.len())])
    }
}
