//! Constrained options belief tree search.
//!
//! [`Planner::select_option`] grows a belief/option tree with `n` calls to
//! `Simulate`, interleaved with projected dual ascent on the Lagrange
//! multipliers, and returns the best root option whose estimated cost value
//! fits the budget. Children are chosen with a Lagrangian UCB score
//! `Q − λᵀQ_C + κ√(log N(b) / N(bâ))`; both the option set and the stochastic
//! semi-Markov belief transitions are progressively widened.

mod analysis;
mod dual;
mod rollout;
mod tree;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::ParticleBelief;
use crate::error::PlanError;
use crate::execution::{OptionSelector, Selection};
use crate::model::{Budget, CostVector, Cpomdp};
use crate::options::OptionSet;

pub use analysis::tree_size_ratio;
pub use dual::{dual_step_size, dual_update, DualState};
pub use rollout::{
    estimate_value, option_rollout, sample_next_option, OptionSampler, PolicyRollout,
    RandomOptionRollout, RawStep, SearchContext, SemiMarkovTransition, UniformOptionSampler,
    ValueEstimator, ZeroEstimator,
};
pub use tree::{BeliefNode, OptionNode, SearchTree, SimulateRecord, TraceEvent, TransitionEdge};

use tree::Search;

/// RNG driving the search.
pub type SearchRng = ChaCha8Rng;

/// Progressive widening shape: at most about `k · N^α` children.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Widening {
    pub k: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    /// Reset to `λ₀` at the start of every decision.
    Reset,
    /// Carry the final `λ` of one decision into the next.
    WarmStart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    RandomRollout,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Tree queries per decision, `n`.
    pub queries: usize,
    /// Search depth in underlying steps, `d_max`.
    pub max_depth: u32,
    /// UCB exploration constant `κ`.
    pub exploration: f64,
    pub option_widening: Widening,
    pub transition_widening: Widening,
    /// Particles per tree belief, `m`.
    pub particles: usize,
    /// `λ₀`.
    pub initial_lambda: Vec<f64>,
    /// Base dual step `α₀`; iteration `i` uses `α₀ / √i`.
    pub dual_step: f64,
    pub lambda_mode: LambdaMode,
    pub estimator: EstimatorKind,
    /// Cap on leaf rollout length, in underlying steps.
    pub rollout_depth: Option<u32>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            queries: 1000,
            max_depth: 30,
            exploration: 1.0,
            option_widening: Widening { k: 4.0, alpha: 0.5 },
            transition_widening: Widening { k: 2.0, alpha: 0.3 },
            particles: 100,
            initial_lambda: vec![0.0],
            dual_step: 1.0,
            lambda_mode: LambdaMode::WarmStart,
            estimator: EstimatorKind::RandomRollout,
            rollout_depth: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |msg: &str| Err(PlanError::InvalidConfig(msg.to_string()));
        for (name, w) in [
            ("option_widening", self.option_widening),
            ("transition_widening", self.transition_widening),
        ] {
            if !(w.k > 0.0) {
                return bad(&format!("{name}.k must be positive"));
            }
            if !(w.alpha > 0.0 && w.alpha < 1.0) {
                return bad(&format!("{name}.alpha must lie in (0, 1)"));
            }
        }
        if !(self.exploration >= 0.0) {
            return bad("exploration must be nonnegative");
        }
        if self.queries == 0 {
            return bad("queries must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.particles == 0 {
            return bad("particles must be at least 1");
        }
        if self.initial_lambda.iter().any(|l| !(*l >= 0.0)) {
            return bad("initial_lambda must be elementwise nonnegative");
        }
        if !(self.dual_step > 0.0) {
            return bad("dual_step must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootChildStats {
    pub label: String,
    pub visits: u64,
    pub q: f64,
    pub q_cost: CostVector,
    pub feasible: bool,
}

/// Per-decision search summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionDiagnostics {
    pub chosen: String,
    pub lambda: Vec<f64>,
    pub queries: usize,
    pub root: Vec<RootChildStats>,
    /// No root child met the budget; the least-violating one was returned.
    pub infeasible_fallback: bool,
}

#[derive(Clone, Debug)]
pub struct Decision {
    pub option: usize,
    pub diagnostics: DecisionDiagnostics,
}

type QueryObserver<'a, S> = Box<dyn FnMut(&SearchTree<S>, &DualState) + 'a>;

/// Option selector backed by the constrained search. Holds its own RNG and
/// the warm-started multipliers, so one planner serves one episode.
pub struct Planner<'a, M: Cpomdp> {
    model: &'a M,
    config: PlannerConfig,
    rng: SearchRng,
    lambda: Vec<f64>,
    estimator: Box<dyn ValueEstimator<M> + 'a>,
    sampler: Box<dyn OptionSampler<M> + 'a>,
    trace: Option<Vec<TraceEvent>>,
    observer: Option<QueryObserver<'a, M::State>>,
    last_tree: Option<SearchTree<M::State>>,
}

impl<'a, M: Cpomdp> Planner<'a, M> {
    pub fn new(model: &'a M, config: PlannerConfig, seed: u64) -> Result<Self, PlanError> {
        Self::with_rng(model, config, SearchRng::seed_from_u64(seed))
    }

    pub fn with_rng(
        model: &'a M,
        config: PlannerConfig,
        rng: SearchRng,
    ) -> Result<Self, PlanError> {
        config.validate()?;
        if config.initial_lambda.len() != model.cost_dim() {
            return Err(PlanError::InvalidConfig(format!(
                "initial_lambda has {} entries but the model has {} cost channels",
                config.initial_lambda.len(),
                model.cost_dim()
            )));
        }
        let estimator: Box<dyn ValueEstimator<M>> = match config.estimator {
            EstimatorKind::RandomRollout => Box::new(RandomOptionRollout),
            EstimatorKind::Zero => Box::new(ZeroEstimator),
        };
        Ok(Self {
            model,
            lambda: config.initial_lambda.clone(),
            config,
            rng,
            estimator,
            sampler: Box::new(UniformOptionSampler),
            trace: None,
            observer: None,
            last_tree: None,
        })
    }

    pub fn with_estimator(mut self, estimator: impl ValueEstimator<M> + 'a) -> Self {
        self.estimator = Box::new(estimator);
        self
    }

    pub fn with_sampler(mut self, sampler: impl OptionSampler<M> + 'a) -> Self {
        self.sampler = Box::new(sampler);
        self
    }

    /// Called after every query with the tree and the updated multipliers.
    pub fn with_query_observer(
        mut self,
        observer: impl FnMut(&SearchTree<M::State>, &DualState) + 'a,
    ) -> Self {
        self.observer = Some(Box::new(observer));
        self
    }

    /// Record a [`TraceEvent`] stream (and per-step trajectories on stored
    /// transitions) for subsequent searches.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn last_tree(&self) -> Option<&SearchTree<M::State>> {
        self.last_tree.as_ref()
    }

    /// Run `n` queries from `belief` and pick a root option.
    pub fn select_option(
        &mut self,
        options: &OptionSet<M>,
        belief: &ParticleBelief<M::State>,
        budget: &Budget,
    ) -> Result<Decision, PlanError> {
        options.available(belief)?;
        let root = if belief.len() == self.config.particles {
            belief.clone()
        } else {
            belief.resample(self.config.particles, &mut self.rng)
        };
        let mut tree = SearchTree::new(root);
        let mut dual = DualState::new(match self.config.lambda_mode {
            LambdaMode::Reset => self.config.initial_lambda.clone(),
            LambdaMode::WarmStart => self.lambda.clone(),
        });
        let ctx = SearchContext {
            model: self.model,
            options,
            config: &self.config,
        };

        for query in 0..self.config.queries {
            if let Some(trace) = self.trace.as_mut() {
                trace.push(TraceEvent::Query(query));
            }
            Search {
                ctx,
                tree: &mut tree,
                dual: &dual,
                rng: &mut self.rng,
                estimator: self.estimator.as_ref(),
                sampler: self.sampler.as_ref(),
                trace: self.trace.as_mut(),
            }
            .simulate(SearchTree::<M::State>::ROOT, budget, self.config.max_depth)?;

            let greedy = tree
                .root_children()
                .fold(None, |best: Option<&OptionNode>, c| {
                    let score = c.q - dual.penalty(&c.q_cost);
                    match best {
                        Some(b) if b.q - dual.penalty(&b.q_cost) >= score => Some(b),
                        _ => Some(c),
                    }
                });
            if let Some(greedy) = greedy {
                let step = dual_step_size(self.config.dual_step, dual.iteration + 1);
                dual = dual_update(&dual, &greedy.q_cost, budget, step);
                if let Some(trace) = self.trace.as_mut() {
                    trace.push(TraceEvent::Dual(dual.lambda.clone()));
                }
            }
            if let Some(observer) = self.observer.as_mut() {
                observer(&tree, &dual);
            }
        }

        let decision = choose_root(&tree, options, budget, &dual, self.config.queries)?;
        self.lambda = dual.lambda;
        self.last_tree = Some(tree);
        Ok(decision)
    }
}

/// Highest-`Q` visited root child with `Q_C ≤ ĉ`; if none qualifies, the one
/// with the smallest worst-channel violation.
fn choose_root<M: Cpomdp>(
    tree: &SearchTree<M::State>,
    options: &OptionSet<M>,
    budget: &Budget,
    dual: &DualState,
    queries: usize,
) -> Result<Decision, PlanError> {
    let visited: Vec<&OptionNode> = tree.root_children().filter(|c| c.visits > 0).collect();
    let best_feasible = visited.iter().filter(|c| c.q_cost.within(budget)).fold(
        None,
        |best: Option<&&OptionNode>, c| match best {
            Some(b) if b.q >= c.q => Some(b),
            _ => Some(c),
        },
    );
    let (chosen, infeasible_fallback) = match best_feasible {
        Some(c) => (*c, false),
        None => {
            let least_bad = visited
                .iter()
                .fold(None, |best: Option<&&OptionNode>, c| match best {
                    Some(b)
                        if b.q_cost.worst_violation(budget) <= c.q_cost.worst_violation(budget) =>
                    {
                        Some(b)
                    }
                    _ => Some(c),
                })
                .ok_or(crate::error::OptionError::NoneAvailable)?;
            (*least_bad, true)
        }
    };
    let root = tree
        .root_children()
        .map(|c| RootChildStats {
            label: options.get(c.option).label().to_string(),
            visits: c.visits,
            q: c.q,
            q_cost: c.q_cost.clone(),
            feasible: c.q_cost.within(budget),
        })
        .collect();
    Ok(Decision {
        option: chosen.option,
        diagnostics: DecisionDiagnostics {
            chosen: options.get(chosen.option).label().to_string(),
            lambda: dual.lambda.clone(),
            queries,
            root,
            infeasible_fallback,
        },
    })
}

impl<M: Cpomdp> OptionSelector<M> for Planner<'_, M> {
    fn select(
        &mut self,
        options: &OptionSet<M>,
        belief: &ParticleBelief<M::State>,
        budget: &Budget,
    ) -> Result<Selection, PlanError> {
        let decision = self.select_option(options, belief, budget)?;
        Ok(Selection {
            option: decision.option,
            diagnostics: Some(decision.diagnostics),
        })
    }
}
