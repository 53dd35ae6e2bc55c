//! Mini-chain: a six-state corridor small enough to solve exactly.
//!
//! The agent starts near the left end and must reach the absorbing goal at
//! the right end. `Safe` advances one cell, `Risky` advances two but costs 1
//! when taken from a hazard cell. A noisy binary sensor reports whether the
//! current cell is a hazard.

use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::ParticleBelief;
use crate::error::ModelError;
use crate::model::{Budget, CostVector, Cpomdp, Discount, NumericState, StateStep};
use crate::options::{primitive_options, ClosureOption, OptionSet, OptionSpec};

pub const STATES: usize = 6;
pub const OBSERVATIONS: usize = 2;
pub const GOAL: usize = STATES - 1;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MiniChainAction {
    Safe,
    Risky,
}

impl MiniChainAction {
    pub const ALL: [MiniChainAction; 2] = [MiniChainAction::Safe, MiniChainAction::Risky];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Debug for MiniChainAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MiniChainAction::Safe => "Safe",
            MiniChainAction::Risky => "Risky",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MiniChainState(pub usize);

impl NumericState for MiniChainState {
    fn dim(&self) -> usize {
        1
    }

    fn component(&self, _index: usize) -> f64 {
        self.0 as f64
    }
}

/// Probability tables. `transition[a][s][s′]`, `cost[a][s]`,
/// `observation[s′][o]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiniChainSpec {
    pub discount: f64,
    pub horizon: u32,
    pub budget: f64,
    pub goal_reward: f64,
    pub initial: [f64; STATES],
    pub transition: [[[f64; STATES]; STATES]; 2],
    pub cost: [[f64; STATES]; 2],
    pub observation: [[f64; OBSERVATIONS]; STATES],
}

const HAZARD: [bool; STATES] = [false, true, false, false, false, false];

impl Default for MiniChainSpec {
    fn default() -> Self {
        let advance = |stride: usize, p: f64| {
            let mut t = [[0.0; STATES]; STATES];
            for (s, row) in t.iter_mut().enumerate() {
                if s == GOAL {
                    row[GOAL] = 1.0;
                } else {
                    row[(s + stride).min(GOAL)] += p;
                    row[s] += 1.0 - p;
                }
            }
            t
        };
        let mut risky_cost = [0.0; STATES];
        for (c, &h) in risky_cost.iter_mut().zip(&HAZARD) {
            *c = if h { 1.0 } else { 0.0 };
        }
        let mut observation = [[0.0; OBSERVATIONS]; STATES];
        for (row, &h) in observation.iter_mut().zip(&HAZARD) {
            *row = if h { [0.15, 0.85] } else { [0.85, 0.15] };
        }
        Self {
            discount: 0.95,
            horizon: 6,
            budget: 0.1,
            goal_reward: 1.0,
            initial: [0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
            transition: [advance(1, 0.9), advance(2, 0.9)],
            cost: [[0.0; STATES], risky_cost],
            observation,
        }
    }
}

fn check_distribution(name: &str, row: &[f64]) -> Result<(), ModelError> {
    let total: f64 = row.iter().sum();
    if row.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(ModelError::InvalidParameter(format!(
            "{name} is not a probability distribution"
        )));
    }
    Ok(())
}

impl MiniChainSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        Discount::new(self.discount)?;
        check_distribution("initial", &self.initial)?;
        for (a, table) in self.transition.iter().enumerate() {
            for (s, row) in table.iter().enumerate() {
                check_distribution(&format!("transition[{a}][{s}]"), row)?;
            }
        }
        for (s, row) in self.observation.iter().enumerate() {
            check_distribution(&format!("observation[{s}]"), row)?;
        }
        if self.cost.iter().flatten().any(|c| !(*c >= 0.0)) {
            return Err(ModelError::InvalidParameter(
                "costs must be nonnegative".into(),
            ));
        }
        if !(self.budget >= 0.0) {
            return Err(ModelError::InvalidParameter(
                "budget must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// `R(s, a, s′)`: the goal reward on arrival.
    pub fn reward(&self, s: usize, next: usize) -> f64 {
        if s != GOAL && next == GOAL {
            self.goal_reward
        } else {
            0.0
        }
    }

    pub fn is_hazard(&self, s: usize) -> bool {
        HAZARD[s]
    }
}

#[derive(Clone, Debug)]
pub struct MiniChain {
    spec: MiniChainSpec,
    discount: Discount,
    budget: Budget,
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|p| *p > 0.0)
        .unwrap_or(probs.len() - 1)
}

impl MiniChain {
    pub fn new(spec: MiniChainSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        Ok(Self {
            discount: Discount::new(spec.discount)?,
            budget: Budget::new(&[spec.budget]),
            spec,
        })
    }

    pub fn spec(&self) -> &MiniChainSpec {
        &self.spec
    }
}

impl Cpomdp for MiniChain {
    type State = MiniChainState;
    type Action = MiniChainAction;
    type Obs = u8;

    fn actions(&self) -> &[MiniChainAction] {
        &MiniChainAction::ALL
    }

    fn discount(&self) -> Discount {
        self.discount
    }

    fn budget(&self) -> &Budget {
        &self.budget
    }

    fn is_terminal(&self, state: &MiniChainState) -> bool {
        state.0 == GOAL
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> MiniChainState {
        MiniChainState(sample_categorical(&self.spec.initial, rng))
    }

    fn transition<R: Rng + ?Sized>(
        &self,
        state: &MiniChainState,
        action: &MiniChainAction,
        rng: &mut R,
    ) -> StateStep<MiniChainState> {
        let a = action.index();
        let next = sample_categorical(&self.spec.transition[a][state.0], rng);
        StateStep {
            next_state: MiniChainState(next),
            reward: self.spec.reward(state.0, next),
            cost: CostVector::scalar(self.spec.cost[a][state.0]),
        }
    }

    fn observe<R: Rng + ?Sized>(
        &self,
        _action: &MiniChainAction,
        next_state: &MiniChainState,
        rng: &mut R,
    ) -> u8 {
        sample_categorical(&self.spec.observation[next_state.0], rng) as u8
    }

    fn obs_density(&self, _action: &MiniChainAction, next_state: &MiniChainState, obs: &u8) -> f64 {
        self.spec.observation[next_state.0]
            .get(*obs as usize)
            .copied()
            .unwrap_or(0.0)
    }
}

/// Primitive options plus two belief-gated ones: `RiskyWhenClear` is only
/// available when the hazard probability is below one half, and
/// `SafeToHazardExit` repeats `Safe` until the belief leaves the hazard cells.
pub fn minichain_options(model: &MiniChain) -> OptionSet<MiniChain> {
    let hazard_mass = |b: &ParticleBelief<MiniChainState>| -> f64 {
        b.iter().filter(|(s, _)| HAZARD[s.0]).map(|(_, w)| w).sum()
    };
    let mut options: Vec<OptionSpec<MiniChain>> =
        primitive_options(model).iter().cloned().collect();
    options.push(Arc::new(
        ClosureOption::new("RiskyWhenClear", |_| MiniChainAction::Risky, |_| 1.0)
            .with_availability(move |b| hazard_mass(b) < 0.5),
    ));
    options.push(Arc::new(ClosureOption::new(
        "SafeToHazardExit",
        |_| MiniChainAction::Safe,
        move |ctx| {
            if hazard_mass(ctx.belief) < 0.5 {
                1.0
            } else {
                0.0
            }
        },
    )));
    OptionSet::new(options).expect("distinct labels")
}

/// Value, cost and subplans accumulated over the observations seen so far.
type Partial = (f64, f64, [Option<Rc<PolicyTree>>; OBSERVATIONS]);

/// Exact belief over the enumerated states.
pub type ExactBelief = [f64; STATES];

/// Deterministic conditional plan: an action, then one subplan per
/// observation with positive probability.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTree {
    pub action: MiniChainAction,
    pub children: [Option<Rc<PolicyTree>>; OBSERVATIONS],
}

#[derive(Clone, Debug)]
struct FrontierPoint {
    value: f64,
    cost: f64,
    policy: Option<Rc<PolicyTree>>,
}

/// Outcome of [`minichain_exact_solve`].
#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub value: f64,
    pub cost: f64,
    pub root_action: MiniChainAction,
    pub policy: Rc<PolicyTree>,
    /// Best feasible value per root action, `None` when no plan starting
    /// with that action is feasible.
    pub root_values: [Option<f64>; 2],
}

/// One exact filter step: `(P(o), b′_o)` for each observation.
pub fn exact_successors(
    spec: &MiniChainSpec,
    belief: &ExactBelief,
    action: MiniChainAction,
) -> [(f64, ExactBelief); OBSERVATIONS] {
    let a = action.index();
    let mut predicted = [0.0; STATES];
    for (s, &p) in belief.iter().enumerate() {
        for (next, &t) in spec.transition[a][s].iter().enumerate() {
            predicted[next] += p * t;
        }
    }
    std::array::from_fn(|o| {
        let mut post = [0.0; STATES];
        for next in 0..STATES {
            post[next] = predicted[next] * spec.observation[next][o];
        }
        let total: f64 = post.iter().sum();
        if total > 0.0 {
            post.iter_mut().for_each(|p| *p /= total);
        }
        (total, post)
    })
}

/// Expected immediate `(reward, cost)` of `action` under `belief`.
pub fn exact_expectation(
    spec: &MiniChainSpec,
    belief: &ExactBelief,
    action: MiniChainAction,
) -> (f64, f64) {
    let a = action.index();
    let mut reward = 0.0;
    let mut cost = 0.0;
    for (s, &p) in belief.iter().enumerate() {
        cost += p * spec.cost[a][s];
        for (next, &t) in spec.transition[a][s].iter().enumerate() {
            reward += p * t * spec.reward(s, next);
        }
    }
    (reward, cost)
}

fn is_finished(belief: &ExactBelief) -> bool {
    belief[GOAL] >= 1.0 - 1e-12
}

/// Keep points not dominated in (higher value, lower cost).
fn prune(mut points: Vec<FrontierPoint>) -> Vec<FrontierPoint> {
    points.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(b.value.total_cmp(&a.value)));
    let mut kept: Vec<FrontierPoint> = Vec::new();
    for p in points {
        if kept.last().is_none_or(|last| p.value > last.value + 1e-12) {
            kept.push(p);
        }
    }
    kept
}

/// Largest discounted cost any plan can incur over `horizon` steps.
fn max_cost(spec: &MiniChainSpec, horizon: u32) -> f64 {
    let c = spec.cost.iter().flatten().fold(0.0f64, |m, c| m.max(*c));
    (0..horizon).map(|t| spec.discount.powi(t as i32) * c).sum()
}

/// Pareto frontier of plans from `belief` with cost at most `ceiling`.
/// Without a ceiling only the best-value plan is kept.
fn frontier(
    spec: &MiniChainSpec,
    belief: &ExactBelief,
    horizon: u32,
    ceiling: Option<f64>,
) -> Vec<FrontierPoint> {
    if horizon == 0 || is_finished(belief) {
        return vec![FrontierPoint {
            value: 0.0,
            cost: 0.0,
            policy: None,
        }];
    }
    let gamma = spec.discount;
    let limit = ceiling.unwrap_or(f64::INFINITY);
    let mut all = Vec::new();
    for action in MiniChainAction::ALL {
        let (reward, cost) = exact_expectation(spec, belief, action);
        if cost > limit + 1e-12 {
            continue;
        }
        let inner = (limit - cost) / gamma;
        // partial sums over observations, each carrying its subplans
        let mut partial: Vec<Partial> = vec![(0.0, 0.0, [None, None])];
        for (o, (p, next)) in exact_successors(spec, belief, action)
            .into_iter()
            .enumerate()
        {
            if p <= 0.0 {
                continue;
            }
            let sub = frontier(spec, &next, horizon - 1, ceiling.map(|_| inner / p));
            let mut combined = Vec::with_capacity(partial.len() * sub.len());
            for (v, c, children) in &partial {
                for q in &sub {
                    let total = c + p * q.cost;
                    if total > inner + 1e-12 {
                        continue;
                    }
                    let mut children = children.clone();
                    children[o] = q.policy.clone();
                    combined.push(FrontierPoint {
                        value: v + p * q.value,
                        cost: total,
                        policy: Some(Rc::new(PolicyTree { action, children })),
                    });
                }
            }
            partial = prune(combined)
                .into_iter()
                .map(|pt| {
                    let children = pt.policy.expect("set above").children.clone();
                    (pt.value, pt.cost, children)
                })
                .collect();
        }
        all.extend(partial.into_iter().map(|(v, c, children)| FrontierPoint {
            value: reward + gamma * v,
            cost: cost + gamma * c,
            policy: Some(Rc::new(PolicyTree { action, children })),
        }));
    }
    let mut kept = prune(all);
    if ceiling.is_none() {
        kept.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.cost.total_cmp(&b.cost)));
        kept.truncate(1);
    }
    kept
}

/// The initial distribution as an exact belief.
pub fn exact_initial(spec: &MiniChainSpec) -> ExactBelief {
    spec.initial
}

/// Constrained-optimal deterministic plan over the configured horizon: maximum
/// expected discounted reward subject to expected discounted cost `≤ budget`.
/// Returns `None` when no plan is feasible.
pub fn minichain_exact_solve(spec: &MiniChainSpec, budget: f64) -> Option<ExactSolution> {
    minichain_exact_solve_from(spec, &exact_initial(spec), spec.horizon, budget)
}

pub fn minichain_exact_solve_from(
    spec: &MiniChainSpec,
    belief: &ExactBelief,
    horizon: u32,
    budget: f64,
) -> Option<ExactSolution> {
    let ceiling = (budget < max_cost(spec, horizon)).then_some(budget);
    let points = frontier(spec, belief, horizon, ceiling);
    let feasible = |p: &&FrontierPoint| p.cost <= budget + 1e-12;
    let best = points
        .iter()
        .filter(feasible)
        .max_by(|a, b| a.value.total_cmp(&b.value))?;
    let policy = best.policy.clone()?;
    let mut root_values = [None, None];
    for p in points.iter().filter(feasible) {
        let a = p.policy.as_ref().expect("nonterminal root").action.index();
        if root_values[a].is_none_or(|v| p.value > v) {
            root_values[a] = Some(p.value);
        }
    }
    Some(ExactSolution {
        value: best.value,
        cost: best.cost,
        root_action: policy.action,
        policy,
        root_values,
    })
}

/// Exact `(V_R, V_C)` of a conditional plan.
pub fn evaluate_plan(
    spec: &MiniChainSpec,
    belief: &ExactBelief,
    plan: Option<&PolicyTree>,
    horizon: u32,
) -> (f64, f64) {
    let Some(plan) = plan else {
        return (0.0, 0.0);
    };
    if horizon == 0 || is_finished(belief) {
        return (0.0, 0.0);
    }
    let (mut value, mut cost) = exact_expectation(spec, belief, plan.action);
    for (o, (p, next)) in exact_successors(spec, belief, plan.action)
        .into_iter()
        .enumerate()
    {
        if p > 0.0 {
            let (v, c) = evaluate_plan(spec, &next, plan.children[o].as_deref(), horizon - 1);
            value += spec.discount * p * v;
            cost += spec.discount * p * c;
        }
    }
    (value, cost)
}
