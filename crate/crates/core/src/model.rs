//! Constrained POMDP abstraction shared by every other module.
//!
//! A problem is described by a sampling-only generative model ([`Cpomdp`]):
//! no transition or observation tables are required, only the ability to
//! draw successors and observations and to evaluate an observation density
//! for particle weighting. Costs are vectors of a fixed dimension `k` and
//! budgets are vectors of the same dimension.

use std::fmt::{self, Debug};
use std::ops::Index;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::ModelError;

type Values = SmallVec<[f64; 2]>;

/// A k-dimensional cost quantity: instantaneous costs, or accumulated
/// discounted costs and cost values.
#[derive(Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostVector(Values);

impl CostVector {
    pub fn zeros(dim: usize) -> Self {
        Self(SmallVec::from_elem(0.0, dim))
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self(SmallVec::from_slice(values))
    }

    /// Single-channel cost.
    pub fn scalar(value: f64) -> Self {
        Self(SmallVec::from_slice(&[value]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&c| c >= 0.0)
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &CostVector, scale: f64) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += scale * b;
        }
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self(self.0.iter().map(|c| c * scale).collect())
    }

    /// Incremental mean update `self += (sample - self) / count`.
    pub fn mean_update(&mut self, sample: &CostVector, count: f64) {
        for (a, b) in self.0.iter_mut().zip(sample.0.iter()) {
            *a += (b - *a) / count;
        }
    }

    /// `λᵀ self`.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.0.iter().zip(weights).map(|(c, w)| c * w).sum()
    }

    /// Elementwise `self <= budget`.
    pub fn within(&self, budget: &Budget) -> bool {
        self.0.iter().zip(budget.as_slice()).all(|(c, b)| c <= b)
    }

    /// Largest per-channel excess over `budget` (negative when strictly inside).
    pub fn worst_violation(&self, budget: &Budget) -> f64 {
        self.0
            .iter()
            .zip(budget.as_slice())
            .map(|(c, b)| c - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<usize> for CostVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl Debug for CostVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Remaining discounted cost budget `ĉ`.
///
/// Inside the search tree budgets are propagated without clamping, so a
/// negative entry means the path is already over budget.
#[derive(Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Budget(Values);

impl Budget {
    pub fn new(values: &[f64]) -> Self {
        Self(SmallVec::from_slice(values))
    }

    pub fn unlimited(dim: usize) -> Self {
        Self(SmallVec::from_elem(f64::INFINITY, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&b| b >= 0.0)
    }

    /// Positive part, elementwise `max(b, 0)`.
    pub fn clamp_positive(&self) -> Budget {
        Budget(self.0.iter().map(|b| b.max(0.0)).collect())
    }
}

impl Index<usize> for Budget {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl Debug for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Free-function form of [`Budget::clamp_positive`].
pub fn clamp_positive(budget: &Budget) -> Budget {
    budget.clamp_positive()
}

/// Which budget recursion to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetRule {
    /// Execution-time recursion: positive part of `(ĉ − c) / γ^τ`.
    Executor,
    /// In-tree recursion: `(ĉ − c̃) / γ^τ`, sign preserved.
    Tree,
}

/// Shift a remaining budget forward by `steps` underlying steps after
/// spending `cost` (discounted to the start of those steps).
pub fn propagate_budget(
    budget: &Budget,
    cost: &CostVector,
    discount: Discount,
    steps: u32,
    rule: BudgetRule,
) -> Result<Budget, ModelError> {
    if steps == 0 {
        return Err(ModelError::ZeroDuration);
    }
    if budget.dim() != cost.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: budget.dim(),
            found: cost.dim(),
        });
    }
    let scale = discount.pow(steps);
    let shifted = Budget(
        budget
            .0
            .iter()
            .zip(cost.iter())
            .map(|(b, c)| (b - c) / scale)
            .collect(),
    );
    Ok(match rule {
        BudgetRule::Executor => shifted.clamp_positive(),
        BudgetRule::Tree => shifted,
    })
}

/// Discount factor `γ`, strictly inside `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Discount(f64);

impl Discount {
    pub fn new(gamma: f64) -> Result<Self, ModelError> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(Self(gamma))
        } else {
            Err(ModelError::InvalidDiscount(gamma))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn pow(self, steps: u32) -> f64 {
        self.0.powi(steps as i32)
    }
}

impl TryFrom<f64> for Discount {
    type Error = ModelError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Discount::new(value)
    }
}

impl From<Discount> for f64 {
    fn from(d: Discount) -> f64 {
        d.0
    }
}

/// Discounted reward and cost sums `(Σ γ^t r_t, Σ γ^t c_t)` of a finite
/// trajectory. An empty trajectory yields `(0, 0⃗)`.
pub fn discounted_return<'a, I>(
    trajectory: I,
    cost_dim: usize,
    discount: Discount,
) -> (f64, CostVector)
where
    I: IntoIterator<Item = (f64, &'a CostVector)>,
{
    let mut value = 0.0;
    let mut cost = CostVector::zeros(cost_dim);
    let mut weight = 1.0;
    for (r, c) in trajectory {
        value += weight * r;
        cost.add_scaled(c, weight);
        weight *= discount.value();
    }
    (value, cost)
}

/// Hidden-state transition drawn from the generative model.
#[derive(Clone, Debug)]
pub struct StateStep<S> {
    pub next_state: S,
    pub reward: f64,
    pub cost: CostVector,
}

/// One full generative-model sample: successor, observation, reward, cost.
#[derive(Clone, Debug)]
pub struct GenerativeStep<S, O> {
    pub next_state: S,
    pub observation: O,
    pub reward: f64,
    pub cost: CostVector,
}

/// Numeric view of a state, used for belief summaries (mean and spread).
pub trait NumericState {
    fn dim(&self) -> usize;
    fn component(&self, index: usize) -> f64;
}

/// A constrained POMDP given as a generative model.
///
/// Terminal states must be absorbing with zero reward and zero cost. Every
/// sampling call takes an explicit RNG so runs are reproducible.
pub trait Cpomdp: Sync {
    type State: Clone + Debug + Send + Sync + NumericState;
    type Action: Clone + PartialEq + Debug + Send + Sync + Serialize;
    type Obs: Clone + Debug + Send + Sync + Serialize;

    /// Finite action set.
    fn actions(&self) -> &[Self::Action];
    fn discount(&self) -> Discount;
    /// Problem cost budget `ĉ`.
    fn budget(&self) -> &Budget;
    fn cost_dim(&self) -> usize {
        self.budget().dim()
    }
    fn is_terminal(&self, state: &Self::State) -> bool;
    /// Draw a state from the initial belief `b₀`.
    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    fn transition<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: &Self::Action,
        rng: &mut R,
    ) -> StateStep<Self::State>;
    fn observe<R: Rng + ?Sized>(
        &self,
        action: &Self::Action,
        next_state: &Self::State,
        rng: &mut R,
    ) -> Self::Obs;
    /// Density (or mass) of `obs` given the transition into `next_state`.
    fn obs_density(&self, action: &Self::Action, next_state: &Self::State, obs: &Self::Obs) -> f64;
    /// Perturbation applied to particles when the filter has to be rescued
    /// from depletion. Identity by default.
    fn jitter<R: Rng + ?Sized>(&self, state: &Self::State, _rng: &mut R) -> Self::State {
        state.clone()
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: &Self::Action,
        rng: &mut R,
    ) -> GenerativeStep<Self::State, Self::Obs> {
        let StateStep {
            next_state,
            reward,
            cost,
        } = self.transition(state, action, rng);
        let observation = self.observe(action, &next_state, rng);
        GenerativeStep {
            next_state,
            observation,
            reward,
            cost,
        }
    }
}
