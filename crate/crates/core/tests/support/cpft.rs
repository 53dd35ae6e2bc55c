//! Flat CPFT-DPW over primitive actions: double progressive widening on a
//! particle-filter belief tree with Lagrangian UCB and dual ascent. Written
//! against the model and particle filter only, without the option machinery.

use cobets::belief::{pf_generative_step, ParticleBelief};
use cobets::model::{Budget, CostVector, Cpomdp};
use cobets::planner::{PlannerConfig, SearchRng, SimulateRecord, TraceEvent};
use rand::Rng;

struct ActionNode {
    action: usize,
    visits: u64,
    q: f64,
    qc: Vec<f64>,
    // (child belief node, reward, cost)
    children: Vec<(usize, f64, Vec<f64>)>,
}

struct BeliefNode<S> {
    belief: ParticleBelief<S>,
    visits: u64,
    actions: Vec<ActionNode>,
}

pub struct CpftDpw<'a, M: Cpomdp> {
    model: &'a M,
    cfg: &'a PlannerConfig,
    nodes: Vec<BeliefNode<M::State>>,
    lambda: Vec<f64>,
    iteration: u64,
    pub trace: Vec<TraceEvent>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'a, M: Cpomdp> CpftDpw<'a, M> {
    pub fn new(model: &'a M, cfg: &'a PlannerConfig, root: ParticleBelief<M::State>) -> Self {
        Self {
            model,
            cfg,
            nodes: vec![BeliefNode {
                belief: root,
                visits: 0,
                actions: Vec::new(),
            }],
            lambda: cfg.initial_lambda.clone(),
            iteration: 0,
            trace: Vec::new(),
        }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `(action, visits, q, qc)` for each root child.
    pub fn root_stats(&self) -> Vec<(usize, u64, f64, Vec<f64>)> {
        self.nodes[0]
            .actions
            .iter()
            .map(|a| (a.action, a.visits, a.q, a.qc.clone()))
            .collect()
    }

    pub fn search(&mut self, budget: &[f64], rng: &mut SearchRng) {
        for query in 0..self.cfg.queries {
            self.trace.push(TraceEvent::Query(query));
            self.simulate(0, budget.to_vec(), self.cfg.max_depth, rng);
            let mut greedy: Option<(f64, usize)> = None;
            for (i, a) in self.nodes[0].actions.iter().enumerate() {
                let score = a.q - dot(&a.qc, &self.lambda);
                if greedy.is_none_or(|(s, _)| score > s) {
                    greedy = Some((score, i));
                }
            }
            if let Some((_, i)) = greedy {
                self.iteration += 1;
                let step = self.cfg.dual_step / (self.iteration as f64).sqrt();
                let qc = &self.nodes[0].actions[i].qc;
                self.lambda = self
                    .lambda
                    .iter()
                    .zip(qc.iter().zip(budget))
                    .map(|(l, (q, b))| (l + step * (q - b)).max(0.0))
                    .collect();
                self.trace.push(TraceEvent::Dual(self.lambda.clone()));
            }
        }
    }

    fn rollout(
        &self,
        belief: &ParticleBelief<M::State>,
        depth: u32,
        rng: &mut SearchRng,
        raw: &mut Vec<(f64, CostVector)>,
    ) -> (f64, Vec<f64>) {
        let gamma = self.model.discount().value();
        let depth = self.cfg.rollout_depth.map_or(depth, |c| depth.min(c));
        let mut value = 0.0;
        let mut cost = vec![0.0; self.model.cost_dim()];
        let mut weight = 1.0;
        let mut b = belief.clone();
        let n_actions = self.model.actions().len();
        for _ in 0..depth {
            if b.is_terminal(self.model) {
                break;
            }
            let a = rng.random_range(0..n_actions);
            let step = pf_generative_step(self.model, &b, &self.model.actions()[a], rng).unwrap();
            value += weight * step.reward;
            for (c, s) in cost.iter_mut().zip(step.cost.iter()) {
                *c += weight * s;
            }
            raw.push((step.reward, step.cost.clone()));
            weight *= gamma;
            b = step.belief;
        }
        (value, cost)
    }

    fn simulate(
        &mut self,
        node: usize,
        budget: Vec<f64>,
        depth: u32,
        rng: &mut SearchRng,
    ) -> (f64, Vec<f64>) {
        let k = self.model.cost_dim();
        if depth == 0 || self.nodes[node].belief.is_terminal(self.model) {
            return (0.0, vec![0.0; k]);
        }
        let gamma = self.model.discount().value();
        let n_actions = self.model.actions().len();

        // action widening
        let visits = self.nodes[node].visits;
        let mut added = false;
        let wa = self.cfg.option_widening;
        if self.nodes[node].actions.len() as f64 <= wa.k * (visits as f64).powf(wa.alpha) {
            let existing: Vec<usize> = self.nodes[node].actions.iter().map(|a| a.action).collect();
            let fresh: Vec<usize> = (0..n_actions).filter(|a| !existing.contains(a)).collect();
            if fresh.is_empty() {
                let _ = rng.random_range(0..n_actions);
            } else {
                let a = fresh[rng.random_range(0..fresh.len())];
                self.nodes[node].actions.push(ActionNode {
                    action: a,
                    visits: 0,
                    q: 0.0,
                    qc: vec![0.0; k],
                    children: Vec::new(),
                });
                added = true;
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, a) in self.nodes[node].actions.iter().enumerate() {
            let score = if a.visits == 0 {
                f64::INFINITY
            } else {
                let bonus = ((visits as f64).ln() / a.visits as f64).max(0.0).sqrt();
                a.q - dot(&a.qc, &self.lambda) + self.cfg.exploration * bonus
            };
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, i));
            }
        }
        let slot = best.unwrap().1;
        let action = self.nodes[node].actions[slot].action;

        // observation widening
        let wo = self.cfg.transition_widening;
        let (n_children, a_visits) = {
            let a = &self.nodes[node].actions[slot];
            (a.children.len(), a.visits)
        };
        let (child_idx, reward, cost, next_v, next_c, widened, leaf_raw) =
            if n_children as f64 <= wo.k * (a_visits as f64).powf(wo.alpha) {
                let step = pf_generative_step(
                    self.model,
                    &self.nodes[node].belief,
                    &self.model.actions()[action],
                    rng,
                )
                .unwrap();
                let cost: Vec<f64> = step.cost.iter().copied().collect();
                let mut leaf_raw = Vec::new();
                let (v, c) = self.rollout(&step.belief, depth - 1, rng, &mut leaf_raw);
                let id = self.nodes.len();
                self.nodes.push(BeliefNode {
                    belief: step.belief,
                    visits: 0,
                    actions: Vec::new(),
                });
                let children = &mut self.nodes[node].actions[slot].children;
                children.push((id, step.reward, cost.clone()));
                (children.len() - 1, step.reward, cost, v, c, true, leaf_raw)
            } else {
                let i = rng.random_range(0..n_children);
                let (child, reward, cost) = self.nodes[node].actions[slot].children[i].clone();
                let child_budget: Vec<f64> = budget
                    .iter()
                    .zip(&cost)
                    .map(|(b, c)| (b - c) / gamma)
                    .collect();
                let (v, c) = self.simulate(child, child_budget, depth - 1, rng);
                (i, reward, cost, v, c, false, Vec::new())
            };

        let value = reward + gamma * next_v;
        let value_cost: Vec<f64> = cost
            .iter()
            .zip(&next_c)
            .map(|(c, n)| c + gamma * n)
            .collect();
        self.nodes[node].visits += 1;
        let a = &mut self.nodes[node].actions[slot];
        a.visits += 1;
        let n = a.visits as f64;
        a.q += (value - a.q) / n;
        for (q, s) in a.qc.iter_mut().zip(&value_cost) {
            *q += (s - *q) / n;
        }
        self.trace.push(TraceEvent::Simulate(SimulateRecord {
            depth,
            option: action,
            option_added: added,
            transition_added: widened,
            transition: child_idx,
            reward,
            cost: CostVector::from_slice(&cost),
            steps: 1,
            raw: vec![(reward, CostVector::from_slice(&cost))],
            leaf_raw,
            value,
            value_cost: CostVector::from_slice(&value_cost),
        }));
        (value, value_cost)
    }
}

/// Budget helper for the reference: plain values.
pub fn budget_values(b: &Budget) -> Vec<f64> {
    b.as_slice().to_vec()
}
