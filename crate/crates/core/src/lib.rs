//! Constrained options belief tree search.
//!
//! Online planning for constrained POMDPs over temporally extended options:
//! a particle-belief search tree with option and transition progressive
//! widening, Lagrangian UCB selection and dual ascent on the cost
//! multipliers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod campaign;
pub mod domains;
pub mod error;
pub mod execution;
pub mod model;
pub mod options;
pub mod planner;

pub use belief::{belief_stats, pf_generative_step, update_belief, ParticleBelief};
pub use error::{BeliefError, CampaignError, ExecError, ModelError, OptionError, PlanError};
pub use execution::{
    execute_episode, EpisodeLog, ExecutionConfig, OptionSelector, ScriptedSelector,
};
pub use model::{propagate_budget, Budget, BudgetRule, CostVector, Cpomdp, Discount};
pub use options::{OptionContext, OptionPolicy, OptionSet, OptionSpec};
pub use planner::{Planner, PlannerConfig};
