//! Particle-filter beliefs.
//!
//! [`pf_generative_step`] is the stochastic belief transition used inside the
//! search tree: every particle is pushed through the generative model, one
//! reference observation is drawn from a weight-proportional particle, and
//! the cloud is reweighted against it and resampled. [`update_belief`] is the
//! same bootstrap update conditioned on an observation from the real
//! environment. Both resample systematically back to the original particle
//! count, so returned beliefs always carry uniform weights.

use rand::Rng;

use crate::error::BeliefError;
use crate::model::{CostVector, Cpomdp, NumericState, StateStep};

/// Total likelihood below which the filter is considered depleted.
pub const DEPLETION_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ParticleBelief<S> {
    particles: Vec<S>,
    weights: Vec<f64>,
}

impl<S: Clone> ParticleBelief<S> {
    /// Equally weighted particles.
    pub fn from_particles(particles: Vec<S>) -> Result<Self, BeliefError> {
        if particles.is_empty() {
            return Err(BeliefError::Empty);
        }
        let w = 1.0 / particles.len() as f64;
        let weights = vec![w; particles.len()];
        Ok(Self { particles, weights })
    }

    /// Weighted particles; weights are normalized.
    pub fn from_weighted(particles: Vec<S>, weights: Vec<f64>) -> Result<Self, BeliefError> {
        if particles.is_empty() {
            return Err(BeliefError::Empty);
        }
        if particles.len() != weights.len() {
            return Err(BeliefError::LengthMismatch {
                particles: particles.len(),
                weights: weights.len(),
            });
        }
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || total <= 0.0 || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(BeliefError::InvalidWeights);
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { particles, weights })
    }

    /// `count` independent draws from the model's initial distribution.
    pub fn sample_initial<M, R>(model: &M, count: usize, rng: &mut R) -> Result<Self, BeliefError>
    where
        M: Cpomdp<State = S>,
        R: Rng + ?Sized,
    {
        Self::from_particles((0..count).map(|_| model.sample_initial(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, f64)> {
        self.particles.iter().zip(self.weights.iter().copied())
    }

    /// True when every particle is terminal.
    pub fn is_terminal<M: Cpomdp<State = S>>(&self, model: &M) -> bool {
        self.particles.iter().all(|s| model.is_terminal(s))
    }

    /// Index drawn proportionally to weight.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }

    /// Weighted mean and standard deviation of a scalar feature.
    pub fn mean_std<F: Fn(&S) -> f64>(&self, feature: F) -> (f64, f64) {
        let mean: f64 = self.iter().map(|(s, w)| w * feature(s)).sum();
        let var: f64 = self
            .iter()
            .map(|(s, w)| {
                let d = feature(s) - mean;
                w * d * d
            })
            .sum();
        (mean, var.max(0.0).sqrt())
    }

    /// Systematic resample to `count` equally weighted particles.
    pub fn resample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Self {
        let particles = systematic_resample(&self.particles, &self.weights, count, rng);
        Self::from_particles(particles).expect("resampling to zero particles")
    }
}

/// Per-component weighted mean and standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefStats {
    pub mean: Vec<f64>,
    pub spread: Vec<f64>,
}

pub fn belief_stats<S: NumericState + Clone>(belief: &ParticleBelief<S>) -> BeliefStats {
    let dim = belief.particles.first().map_or(0, |s| s.dim());
    let mut mean = vec![0.0; dim];
    for (s, w) in belief.iter() {
        for (i, m) in mean.iter_mut().enumerate() {
            *m += w * s.component(i);
        }
    }
    let mut var = vec![0.0; dim];
    for (s, w) in belief.iter() {
        for (i, v) in var.iter_mut().enumerate() {
            let d = s.component(i) - mean[i];
            *v += w * d * d;
        }
    }
    BeliefStats {
        mean,
        spread: var.into_iter().map(|v: f64| v.max(0.0).sqrt()).collect(),
    }
}

/// Systematic resampling: one uniform offset, `count` evenly spaced pointers.
pub fn systematic_resample<S: Clone, R: Rng + ?Sized>(
    particles: &[S],
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<S> {
    let total: f64 = weights.iter().sum();
    let step = total / count as f64;
    let mut pointer = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(count);
    let mut cumulative = weights[0];
    let mut i = 0;
    for _ in 0..count {
        while pointer > cumulative && i + 1 < particles.len() {
            i += 1;
            cumulative += weights[i];
        }
        // rounding can walk the pointer onto a trailing zero-weight particle
        let mut pick = i;
        while weights[pick] <= 0.0 && pick > 0 {
            pick -= 1;
        }
        out.push(particles[pick].clone());
        pointer += step;
    }
    out
}

/// Result of one generative belief step `G_PF(m)`.
#[derive(Clone, Debug)]
pub struct PfStep<S> {
    pub belief: ParticleBelief<S>,
    /// `R̃(b, a)` estimate: weighted mean of particle rewards.
    pub reward: f64,
    /// `C̃(b, a)` estimate: weighted mean of particle costs.
    pub cost: CostVector,
    /// The depletion rescue was engaged.
    pub degenerate: bool,
}

/// Result of an observation-conditioned belief update.
#[derive(Clone, Debug)]
pub struct BeliefUpdate<S> {
    pub belief: ParticleBelief<S>,
    /// Expected immediate reward under the prior belief.
    pub expected_reward: f64,
    /// Expected immediate cost `C(b, a)` under the prior belief.
    pub expected_cost: CostVector,
    pub degenerate: bool,
}

struct Propagated<S> {
    next: Vec<S>,
    reward: f64,
    cost: CostVector,
}

fn propagate<M, R>(
    model: &M,
    belief: &ParticleBelief<M::State>,
    action: &M::Action,
    rng: &mut R,
) -> Propagated<M::State>
where
    M: Cpomdp,
    R: Rng + ?Sized,
{
    let mut next = Vec::with_capacity(belief.len());
    let mut reward = 0.0;
    let mut cost = CostVector::zeros(model.cost_dim());
    for (s, w) in belief.iter() {
        let StateStep {
            next_state,
            reward: r,
            cost: c,
        } = model.transition(s, action, rng);
        reward += w * r;
        cost.add_scaled(&c, w);
        next.push(next_state);
    }
    Propagated { next, reward, cost }
}

/// Reweight propagated particles against `obs` and resample. Returns the new
/// belief and whether the depletion rescue was needed.
fn reweight_and_resample<M, R>(
    model: &M,
    prior_weights: &[f64],
    next: Vec<M::State>,
    action: &M::Action,
    obs: &M::Obs,
    rng: &mut R,
) -> (ParticleBelief<M::State>, bool)
where
    M: Cpomdp,
    R: Rng + ?Sized,
{
    let count = next.len();
    let mut weights: Vec<f64> = next
        .iter()
        .zip(prior_weights)
        .map(|(s, w)| w * model.obs_density(action, s, obs))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut particles = next;
    let degenerate = !(total >= DEPLETION_THRESHOLD) || !total.is_finite();
    if degenerate {
        weights.iter_mut().for_each(|w| *w = 1.0);
        particles = particles.iter().map(|s| model.jitter(s, rng)).collect();
    }
    let resampled = systematic_resample(&particles, &weights, count, rng);
    (
        ParticleBelief::from_particles(resampled).expect("nonempty"),
        degenerate,
    )
}

/// Generative belief transition used inside the tree.
pub fn pf_generative_step<M, R>(
    model: &M,
    belief: &ParticleBelief<M::State>,
    action: &M::Action,
    rng: &mut R,
) -> Result<PfStep<M::State>, BeliefError>
where
    M: Cpomdp,
    R: Rng + ?Sized,
{
    if belief.is_empty() {
        return Err(BeliefError::Empty);
    }
    if belief.is_terminal(model) {
        return Err(BeliefError::Exhausted);
    }
    let Propagated { next, reward, cost } = propagate(model, belief, action, rng);
    let reference = belief.sample_index(rng);
    let obs = model.observe(action, &next[reference], rng);
    let (belief, degenerate) =
        reweight_and_resample(model, belief.weights(), next, action, &obs, rng);
    Ok(PfStep {
        belief,
        reward,
        cost,
        degenerate,
    })
}

/// Bootstrap filter update with an observation from the environment.
pub fn update_belief<M, R>(
    model: &M,
    belief: &ParticleBelief<M::State>,
    action: &M::Action,
    obs: &M::Obs,
    rng: &mut R,
) -> Result<BeliefUpdate<M::State>, BeliefError>
where
    M: Cpomdp,
    R: Rng + ?Sized,
{
    if belief.is_empty() {
        return Err(BeliefError::Empty);
    }
    let Propagated { next, reward, cost } = propagate(model, belief, action, rng);
    let (belief, degenerate) =
        reweight_and_resample(model, belief.weights(), next, action, obs, rng);
    Ok(BeliefUpdate {
        belief,
        expected_reward: reward,
        expected_cost: cost,
        degenerate,
    })
}
