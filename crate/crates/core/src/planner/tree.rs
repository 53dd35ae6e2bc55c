//! Search tree storage and the recursive semi-Markov `Simulate`.

use rand::Rng;
use serde::Serialize;

use crate::belief::ParticleBelief;
use crate::error::PlanError;
use crate::model::{propagate_budget, Budget, BudgetRule, CostVector, Cpomdp};

use super::dual::DualState;
use super::rollout::{option_rollout, OptionSampler, RawStep, SearchContext, ValueEstimator};
use super::{PlannerConfig, SearchRng, Widening};

#[derive(Clone, Debug)]
pub struct BeliefNode<S> {
    pub belief: ParticleBelief<S>,
    /// `N(b)`.
    pub visits: u64,
    /// `C(b)`: indices into [`SearchTree::option_nodes`].
    pub children: Vec<usize>,
}

/// Stored semi-Markov transition out of an option node.
#[derive(Clone, Debug)]
pub struct TransitionEdge {
    pub child: usize,
    pub reward: f64,
    pub cost: CostVector,
    pub steps: u32,
    /// Per-step trajectory, kept only when tracing.
    pub raw: Vec<RawStep>,
}

#[derive(Clone, Debug)]
pub struct OptionNode {
    /// Index into the option set.
    pub option: usize,
    /// `N(bâ)`.
    pub visits: u64,
    /// `Q(bâ)`.
    pub q: f64,
    /// `Q_C(bâ)`.
    pub q_cost: CostVector,
    /// `C(bâ)`.
    pub transitions: Vec<TransitionEdge>,
}

/// Arena-backed belief/option tree. Node 0 is the root belief.
#[derive(Clone, Debug)]
pub struct SearchTree<S> {
    beliefs: Vec<BeliefNode<S>>,
    options: Vec<OptionNode>,
}

impl<S: Clone> SearchTree<S> {
    pub fn new(root: ParticleBelief<S>) -> Self {
        Self {
            beliefs: vec![BeliefNode {
                belief: root,
                visits: 0,
                children: Vec::new(),
            }],
            options: Vec::new(),
        }
    }

    pub const ROOT: usize = 0;

    pub fn belief_nodes(&self) -> &[BeliefNode<S>] {
        &self.beliefs
    }

    pub fn option_nodes(&self) -> &[OptionNode] {
        &self.options
    }

    pub fn root(&self) -> &BeliefNode<S> {
        &self.beliefs[Self::ROOT]
    }

    pub fn root_children(&self) -> impl Iterator<Item = &OptionNode> {
        self.beliefs[Self::ROOT]
            .children
            .iter()
            .map(|&c| &self.options[c])
    }

    /// Visit-count consistency and progressive-widening bounds on every node.
    pub fn check_invariants(&self, config: &PlannerConfig) -> Result<(), String> {
        for (i, b) in self.beliefs.iter().enumerate() {
            let child_visits: u64 = b.children.iter().map(|&c| self.options[c].visits).sum();
            if child_visits != b.visits {
                return Err(format!(
                    "belief node {i}: N(b) = {} but children sum to {child_visits}",
                    b.visits
                ));
            }
            let bound = config.option_widening.limit(b.visits) + 1.0;
            if b.children.len() as f64 > bound {
                return Err(format!(
                    "belief node {i}: {} children exceeds widening bound {bound}",
                    b.children.len()
                ));
            }
        }
        for (i, o) in self.options.iter().enumerate() {
            let bound = config.transition_widening.limit(o.visits) + 1.0;
            if o.transitions.len() as f64 > bound {
                return Err(format!(
                    "option node {i}: {} transitions exceeds widening bound {bound}",
                    o.transitions.len()
                ));
            }
        }
        Ok(())
    }
}

/// One `Simulate` level, recorded post-order (deepest level first).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateRecord {
    pub depth: u32,
    pub option: usize,
    pub option_added: bool,
    pub transition_added: bool,
    /// Which stored transition was followed.
    pub transition: usize,
    pub reward: f64,
    pub cost: CostVector,
    pub steps: u32,
    /// Raw steps of the followed transition.
    pub raw: Vec<RawStep>,
    /// Raw steps of the leaf rollout (new transitions only).
    pub leaf_raw: Vec<RawStep>,
    pub value: f64,
    pub value_cost: CostVector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TraceEvent {
    Query(usize),
    Simulate(SimulateRecord),
    Dual(Vec<f64>),
}

/// Mutable state of one `SelectOption` call.
pub(crate) struct Search<'a, 't, M: Cpomdp> {
    pub ctx: SearchContext<'a, M>,
    pub tree: &'t mut SearchTree<M::State>,
    pub dual: &'t DualState,
    pub rng: &'t mut SearchRng,
    pub estimator: &'t dyn ValueEstimator<M>,
    pub sampler: &'t dyn OptionSampler<M>,
    pub trace: Option<&'t mut Vec<TraceEvent>>,
}

impl<M: Cpomdp> Search<'_, '_, M> {
    fn config(&self) -> &PlannerConfig {
        self.ctx.config
    }

    /// `Q_λ(bâ) + κ √(log N(b) / N(bâ))`; unvisited children score `+∞`.
    fn ucb_score(&self, parent_visits: u64, node: &OptionNode) -> f64 {
        if node.visits == 0 {
            return f64::INFINITY;
        }
        let q_lambda = node.q - self.dual.penalty(&node.q_cost);
        let bonus = ((parent_visits as f64).ln() / node.visits as f64)
            .max(0.0)
            .sqrt();
        q_lambda + self.config().exploration * bonus
    }

    /// Option progressive widening followed by λ-UCB selection. Returns the
    /// chosen option node and whether it was just added.
    pub fn option_prog_widen(&mut self, node: usize, budget: &Budget) -> Option<(usize, bool)> {
        let mut added = false;
        let (visits, width) = {
            let b = &self.tree.beliefs[node];
            (b.visits, b.children.len())
        };
        if width as f64 <= self.config().option_widening.limit(visits) {
            let existing: Vec<usize> = self.tree.beliefs[node]
                .children
                .iter()
                .map(|&c| self.tree.options[c].option)
                .collect();
            let proposal = self.sampler.sample(
                self.ctx,
                &self.tree.beliefs[node].belief,
                &budget.clamp_positive(),
                &existing,
                self.rng,
            );
            if let Some(option) = proposal.filter(|o| !existing.contains(o)) {
                let id = self.tree.options.len();
                self.tree.options.push(OptionNode {
                    option,
                    visits: 0,
                    q: 0.0,
                    q_cost: CostVector::zeros(self.ctx.model.cost_dim()),
                    transitions: Vec::new(),
                });
                self.tree.beliefs[node].children.push(id);
                added = true;
            }
        }
        let b = &self.tree.beliefs[node];
        let mut best: Option<(usize, f64)> = None;
        for &c in &b.children {
            let score = self.ucb_score(b.visits, &self.tree.options[c]);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((c, score));
            }
        }
        best.map(|(c, _)| (c, added))
    }

    pub fn simulate(
        &mut self,
        node: usize,
        budget: &Budget,
        depth: u32,
    ) -> Result<(f64, CostVector), PlanError> {
        let model = self.ctx.model;
        let dim = model.cost_dim();
        if depth == 0 || self.tree.beliefs[node].belief.is_terminal(model) {
            return Ok((0.0, CostVector::zeros(dim)));
        }
        let Some((child, option_added)) = self.option_prog_widen(node, budget) else {
            return Ok((0.0, CostVector::zeros(dim)));
        };
        let gamma = model.discount();
        let tracing = self.trace.is_some();
        let (option, n_transitions, child_visits) = {
            let o = &self.tree.options[child];
            (o.option, o.transitions.len(), o.visits)
        };

        let widen = n_transitions as f64 <= self.config().transition_widening.limit(child_visits);
        let (edge, transition_added, leaf_raw, next_value, next_cost) = if widen {
            let mut raw = tracing.then(Vec::new);
            let tr = option_rollout(
                self.ctx,
                &self.tree.beliefs[node].belief,
                option,
                depth,
                self.rng,
                raw.as_mut(),
            )?;
            let child_budget =
                propagate_budget(budget, &tr.cost, gamma, tr.steps, BudgetRule::Tree)?;
            let mut leaf_raw = tracing.then(Vec::new);
            let (v, c) = self.estimator.estimate(
                self.ctx,
                &tr.belief,
                &child_budget,
                depth - tr.steps,
                self.rng,
                leaf_raw.as_mut(),
            )?;
            let belief_id = self.tree.beliefs.len();
            self.tree.beliefs.push(BeliefNode {
                belief: tr.belief,
                visits: 0,
                children: Vec::new(),
            });
            let transitions = &mut self.tree.options[child].transitions;
            transitions.push(TransitionEdge {
                child: belief_id,
                reward: tr.reward,
                cost: tr.cost,
                steps: tr.steps,
                raw: raw.unwrap_or_default(),
            });
            (
                transitions.len() - 1,
                true,
                leaf_raw.unwrap_or_default(),
                v,
                c,
            )
        } else {
            let index = self.rng.random_range(0..n_transitions);
            let e = &self.tree.options[child].transitions[index];
            let (next_node, cost, steps) = (e.child, e.cost.clone(), e.steps);
            let child_budget = propagate_budget(budget, &cost, gamma, steps, BudgetRule::Tree)?;
            let (v, c) = self.simulate(next_node, &child_budget, depth - steps)?;
            (index, false, Vec::new(), v, c)
        };

        let e = &self.tree.options[child].transitions[edge];
        let scale = gamma.pow(e.steps);
        let value = e.reward + scale * next_value;
        let mut value_cost = e.cost.clone();
        value_cost.add_scaled(&next_cost, scale);

        self.tree.beliefs[node].visits += 1;
        let o = &mut self.tree.options[child];
        o.visits += 1;
        let n = o.visits as f64;
        o.q += (value - o.q) / n;
        o.q_cost.mean_update(&value_cost, n);

        if let Some(trace) = self.trace.as_deref_mut() {
            let e = &self.tree.options[child].transitions[edge];
            trace.push(TraceEvent::Simulate(SimulateRecord {
                depth,
                option,
                option_added,
                transition_added,
                transition: edge,
                reward: e.reward,
                cost: e.cost.clone(),
                steps: e.steps,
                raw: e.raw.clone(),
                leaf_raw,
                value,
                value_cost: value_cost.clone(),
            }));
        }
        Ok((value, value_cost))
    }
}

impl Widening {
    /// `k · N^α`.
    pub fn limit(&self, visits: u64) -> f64 {
        self.k * (visits as f64).powf(self.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::minichain::{MiniChain, MiniChainSpec, MiniChainState};
    use crate::options::primitive_options;
    use crate::planner::{RandomOptionRollout, UniformOptionSampler};
    use rand::SeedableRng;

    #[test]
    fn zero_depth_returns_zero_without_touching_the_tree() {
        let model = MiniChain::new(MiniChainSpec::default()).unwrap();
        let options = primitive_options(&model);
        let config = PlannerConfig::default();
        let mut rng = SearchRng::seed_from_u64(0);
        let root = ParticleBelief::sample_initial(&model, 10, &mut rng).unwrap();
        let mut tree = SearchTree::new(root);
        let dual = DualState::new(vec![0.0]);
        let mut search = Search {
            ctx: SearchContext {
                model: &model,
                options: &options,
                config: &config,
            },
            tree: &mut tree,
            dual: &dual,
            rng: &mut rng,
            estimator: &RandomOptionRollout,
            sampler: &UniformOptionSampler,
            trace: None,
        };
        let (v, c) = search
            .simulate(SearchTree::<MiniChainState>::ROOT, &Budget::new(&[0.1]), 0)
            .unwrap();
        assert_eq!((v, c[0]), (0.0, 0.0));
        assert_eq!(tree.root().visits, 0);
        assert!(tree.option_nodes().is_empty());
    }
}
