//! Partially observable options `{I, π^L, β}`.
//!
//! An option is a belief-feedback controller: it may start wherever its
//! availability predicate holds, emits underlying actions from the current
//! belief, and stops with probability `β` after each step. Controllers also
//! see how many steps have elapsed since they were activated, which is what
//! fixed-length macro options need.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::belief::ParticleBelief;
use crate::error::OptionError;
use crate::model::Cpomdp;

/// What an option controller sees when it is queried.
#[derive(Clone, Copy)]
pub struct OptionContext<'a, S> {
    pub belief: &'a ParticleBelief<S>,
    /// Underlying steps executed since the option was activated.
    pub elapsed: u32,
}

impl<'a, S> OptionContext<'a, S> {
    pub fn new(belief: &'a ParticleBelief<S>, elapsed: u32) -> Self {
        Self { belief, elapsed }
    }
}

pub trait OptionPolicy<M: Cpomdp>: Send + Sync {
    fn label(&self) -> &str;

    /// Initiation predicate `I`.
    fn is_available(&self, _belief: &ParticleBelief<M::State>) -> bool {
        true
    }

    /// Graded availability for soft predicates; larger is more available.
    fn availability_slack(&self, _belief: &ParticleBelief<M::State>) -> Option<f64> {
        None
    }

    /// Low-level policy `π^L`.
    fn action(&self, ctx: OptionContext<'_, M::State>) -> M::Action;

    /// Termination probability `β`, in `[0, 1]`.
    fn termination_probability(&self, ctx: OptionContext<'_, M::State>) -> f64;

    /// One-step option wrapping a primitive action.
    fn is_primitive(&self) -> bool {
        false
    }
}

pub type OptionSpec<M> = Arc<dyn OptionPolicy<M>>;

/// Ordered, non-empty collection of options with unique labels.
pub struct OptionSet<M: Cpomdp> {
    options: Vec<OptionSpec<M>>,
}

impl<M: Cpomdp> Clone for OptionSet<M> {
    fn clone(&self) -> Self {
        Self {
            options: self.options.clone(),
        }
    }
}

impl<M: Cpomdp> fmt::Debug for OptionSet<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.labels()).finish()
    }
}

impl<M: Cpomdp> OptionSet<M> {
    pub fn new(options: Vec<OptionSpec<M>>) -> Result<Self, OptionError> {
        if options.is_empty() {
            return Err(OptionError::EmptySet);
        }
        let mut seen = HashSet::new();
        for o in &options {
            if !seen.insert(o.label().to_string()) {
                return Err(OptionError::DuplicateLabel(o.label().to_string()));
            }
        }
        Ok(Self { options })
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn get(&self, index: usize) -> &OptionSpec<M> {
        &self.options[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &OptionSpec<M>> {
        self.options.iter()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.options.iter().map(|o| o.label())
    }

    pub fn index_of(&self, label: &str) -> Result<usize, OptionError> {
        self.options
            .iter()
            .position(|o| o.label() == label)
            .ok_or_else(|| OptionError::Unknown(label.to_string()))
    }

    /// Indices of options whose initiation predicate holds, in set order.
    pub fn available(&self, belief: &ParticleBelief<M::State>) -> Result<Vec<usize>, OptionError> {
        let out: Vec<usize> = self
            .options
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_available(belief))
            .map(|(i, _)| i)
            .collect();
        if out.is_empty() {
            Err(OptionError::NoneAvailable)
        } else {
            Ok(out)
        }
    }

    /// Sub-collection of available options.
    pub fn available_options(
        &self,
        belief: &ParticleBelief<M::State>,
    ) -> Result<OptionSet<M>, OptionError> {
        let idx = self.available(belief)?;
        Ok(OptionSet {
            options: idx.into_iter().map(|i| self.options[i].clone()).collect(),
        })
    }
}

/// Bernoulli draw with probability `β(b)`. Degenerate probabilities (`β ≥ 1`
/// or `β ≤ 0`) are decided without touching the RNG.
pub fn option_terminates<M, R>(
    option: &dyn OptionPolicy<M>,
    ctx: OptionContext<'_, M::State>,
    rng: &mut R,
) -> bool
where
    M: Cpomdp,
    R: Rng + ?Sized,
{
    let beta = option.termination_probability(ctx);
    debug_assert!(
        (0.0..=1.0).contains(&beta),
        "termination probability {beta}"
    );
    if beta >= 1.0 {
        true
    } else if beta <= 0.0 {
        false
    } else {
        rng.random::<f64>() < beta
    }
}

/// One-step option executing a fixed primitive action (`β ≡ 1`).
pub struct PrimitiveOption<M: Cpomdp> {
    label: String,
    action: M::Action,
}

impl<M: Cpomdp> PrimitiveOption<M> {
    pub fn new(action: M::Action) -> Self {
        Self {
            label: format!("{action:?}"),
            action,
        }
    }
}

impl<M: Cpomdp> OptionPolicy<M> for PrimitiveOption<M> {
    fn label(&self) -> &str {
        &self.label
    }

    fn action(&self, _ctx: OptionContext<'_, M::State>) -> M::Action {
        self.action.clone()
    }

    fn termination_probability(&self, _ctx: OptionContext<'_, M::State>) -> f64 {
        1.0
    }

    fn is_primitive(&self) -> bool {
        true
    }
}

/// One primitive option per model action, in action order.
pub fn primitive_options<M: Cpomdp + 'static>(model: &M) -> OptionSet<M> {
    OptionSet::new(
        model
            .actions()
            .iter()
            .map(|a| Arc::new(PrimitiveOption::<M>::new(a.clone())) as OptionSpec<M>)
            .collect(),
    )
    .expect("model action set must be non-empty with distinct debug names")
}

type ActionFn<M> =
    Box<dyn Fn(OptionContext<'_, <M as Cpomdp>::State>) -> <M as Cpomdp>::Action + Send + Sync>;
type BetaFn<M> = Box<dyn Fn(OptionContext<'_, <M as Cpomdp>::State>) -> f64 + Send + Sync>;
type AvailFn<M> = Box<dyn Fn(&ParticleBelief<<M as Cpomdp>::State>) -> bool + Send + Sync>;

/// Option assembled from closures; handy for scripted controllers and tests.
pub struct ClosureOption<M: Cpomdp> {
    label: String,
    action: ActionFn<M>,
    beta: BetaFn<M>,
    available: Option<AvailFn<M>>,
}

impl<M: Cpomdp> ClosureOption<M> {
    pub fn new(
        label: impl Into<String>,
        action: impl Fn(OptionContext<'_, M::State>) -> M::Action + Send + Sync + 'static,
        beta: impl Fn(OptionContext<'_, M::State>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            action: Box::new(action),
            beta: Box::new(beta),
            available: None,
        }
    }

    pub fn with_availability(
        mut self,
        predicate: impl Fn(&ParticleBelief<M::State>) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.available = Some(Box::new(predicate));
        self
    }
}

impl<M: Cpomdp> OptionPolicy<M> for ClosureOption<M> {
    fn label(&self) -> &str {
        &self.label
    }

    fn is_available(&self, belief: &ParticleBelief<M::State>) -> bool {
        self.available.as_ref().is_none_or(|p| p(belief))
    }

    fn action(&self, ctx: OptionContext<'_, M::State>) -> M::Action {
        (self.action)(ctx)
    }

    fn termination_probability(&self, ctx: OptionContext<'_, M::State>) -> f64 {
        (self.beta)(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::minichain::{MiniChain, MiniChainAction, MiniChainSpec, MiniChainState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> MiniChain {
        MiniChain::new(MiniChainSpec::default()).unwrap()
    }

    fn fixed(label: &str, beta: f64) -> OptionSpec<MiniChain> {
        Arc::new(ClosureOption::new(
            label,
            |_| MiniChainAction::Safe,
            move |_| beta,
        ))
    }

    #[test]
    fn set_rejects_empty_and_duplicates() {
        assert_eq!(
            OptionSet::<MiniChain>::new(vec![]).unwrap_err(),
            OptionError::EmptySet
        );
        let err = OptionSet::new(vec![fixed("a", 1.0), fixed("a", 0.0)]).unwrap_err();
        assert_eq!(err, OptionError::DuplicateLabel("a".into()));
    }

    #[test]
    fn primitives_follow_action_order() {
        let set = primitive_options(&model());
        assert_eq!(set.labels().collect::<Vec<_>>(), vec!["Safe", "Risky"]);
        assert!(set.iter().all(|o| o.is_primitive()));
        assert_eq!(set.index_of("Risky").unwrap(), 1);
        assert!(set.index_of("Jump").is_err());
    }

    #[test]
    fn degenerate_termination_leaves_rng_untouched() {
        let b = ParticleBelief::from_particles(vec![MiniChainState(0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let before = rng.clone();
        assert!(option_terminates(
            fixed("one", 1.0).as_ref(),
            OptionContext::new(&b, 0),
            &mut rng
        ));
        assert!(!option_terminates(
            fixed("zero", 0.0).as_ref(),
            OptionContext::new(&b, 0),
            &mut rng
        ));
        assert_eq!(rng, before);
    }
}
