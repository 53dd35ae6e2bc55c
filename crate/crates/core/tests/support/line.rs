//! Deterministic, fully observed corridor for hand-checkable traces.

use cobets::model::{Budget, CostVector, Cpomdp, Discount, NumericState, StateStep};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pos(pub i64);

impl NumericState for Pos {
    fn dim(&self) -> usize {
        1
    }

    fn component(&self, _: usize) -> f64 {
        self.0 as f64
    }
}

/// Actions `-1` and `+1`; per-action reward and cost; terminal at `goal`.
#[derive(Clone, Debug)]
pub struct Line {
    pub discount: Discount,
    pub rewards: [f64; 2],
    pub costs: [f64; 2],
    pub goal: i64,
    pub start: i64,
    pub budget: Budget,
}

impl Line {
    pub fn new(gamma: f64, rewards: [f64; 2], costs: [f64; 2], goal: i64) -> Self {
        Self {
            discount: Discount::new(gamma).unwrap(),
            rewards,
            costs,
            goal,
            start: 0,
            budget: Budget::new(&[0.1]),
        }
    }
}

const ACTIONS: [i64; 2] = [-1, 1];

impl Cpomdp for Line {
    type State = Pos;
    type Action = i64;
    type Obs = i64;

    fn actions(&self) -> &[i64] {
        &ACTIONS
    }

    fn discount(&self) -> Discount {
        self.discount
    }

    fn budget(&self) -> &Budget {
        &self.budget
    }

    fn is_terminal(&self, s: &Pos) -> bool {
        s.0 >= self.goal
    }

    fn sample_initial<R: Rng + ?Sized>(&self, _rng: &mut R) -> Pos {
        Pos(self.start)
    }

    fn transition<R: Rng + ?Sized>(&self, s: &Pos, a: &i64, _rng: &mut R) -> StateStep<Pos> {
        let i = if *a < 0 { 0 } else { 1 };
        StateStep {
            next_state: Pos(s.0 + a),
            reward: self.rewards[i],
            cost: CostVector::scalar(self.costs[i]),
        }
    }

    fn observe<R: Rng + ?Sized>(&self, _a: &i64, next: &Pos, _rng: &mut R) -> i64 {
        next.0
    }

    fn obs_density(&self, _a: &i64, next: &Pos, obs: &i64) -> f64 {
        if next.0 == *obs {
            1.0
        } else {
            0.0
        }
    }
}
