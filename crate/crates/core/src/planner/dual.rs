use serde::Serialize;

use crate::model::{Budget, CostVector};

/// Lagrange multipliers `λ` and the dual-ascent iteration counter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub iteration: u64,
}

impl DualState {
    pub fn new(lambda: Vec<f64>) -> Self {
        Self {
            lambda,
            iteration: 0,
        }
    }

    /// `λᵀ Q_C`.
    pub fn penalty(&self, cost: &CostVector) -> f64 {
        cost.dot(&self.lambda)
    }
}

/// Projected dual ascent: `λ ← [λ + α (Q_C − ĉ)]⁺`.
pub fn dual_update(
    state: &DualState,
    q_cost: &CostVector,
    budget: &Budget,
    step: f64,
) -> DualState {
    debug_assert!(step > 0.0);
    let lambda = state
        .lambda
        .iter()
        .zip(q_cost.iter().zip(budget.as_slice()))
        .map(|(l, (q, b))| (l + step * (q - b)).max(0.0))
        .collect();
    DualState {
        lambda,
        iteration: state.iteration + 1,
    }
}

/// Diminishing step `α_i = α₀ / √i` for the 1-based iteration `i`.
pub fn dual_step_size(base: f64, iteration: u64) -> f64 {
    base / (iteration.max(1) as f64).sqrt()
}
