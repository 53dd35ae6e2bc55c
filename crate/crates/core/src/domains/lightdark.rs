//! Constrained LightDark: 1-D localization with a light source at `s = 10`,
//! a goal region `[−1, 1]`, and a cost region above `s = 12`.
//!
//! Motion is deterministic (`s′ = s + a`); uncertainty comes only from the
//! initial belief and position-dependent observation noise
//! `σ(s) = |s − light| + σ_min`.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{Budget, CostVector, Cpomdp, Discount, NumericState, StateStep};

/// Movement command, one of `{0, ±1, ±5, ±10}`; `0` ends the episode.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct LightDarkAction(i32);

impl LightDarkAction {
    pub const ALL: [LightDarkAction; 7] = [
        LightDarkAction(-10),
        LightDarkAction(-5),
        LightDarkAction(-1),
        LightDarkAction(0),
        LightDarkAction(1),
        LightDarkAction(5),
        LightDarkAction(10),
    ];
    pub const STOP: LightDarkAction = LightDarkAction(0);
    /// Non-terminal moves.
    pub const MOVES: [LightDarkAction; 6] = [
        LightDarkAction(-10),
        LightDarkAction(-5),
        LightDarkAction(-1),
        LightDarkAction(1),
        LightDarkAction(5),
        LightDarkAction(10),
    ];

    pub fn new(step: i32) -> Result<Self, ModelError> {
        match step {
            0 | 1 | -1 | 5 | -5 | 10 | -10 => Ok(Self(step)),
            _ => Err(ModelError::InvalidAction(step.to_string())),
        }
    }

    pub fn step(self) -> i32 {
        self.0
    }

    pub fn displacement(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<i32> for LightDarkAction {
    type Error = ModelError;

    fn try_from(v: i32) -> Result<Self, ModelError> {
        Self::new(v)
    }
}

impl From<LightDarkAction> for i32 {
    fn from(a: LightDarkAction) -> i32 {
        a.0
    }
}

impl fmt::Debug for LightDarkAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LightDarkState {
    pub position: f64,
    pub terminal: bool,
}

impl LightDarkState {
    pub fn at(position: f64) -> Self {
        Self {
            position,
            terminal: false,
        }
    }
}

impl NumericState for LightDarkState {
    fn dim(&self) -> usize {
        1
    }

    fn component(&self, _index: usize) -> f64 {
        self.position
    }
}

/// Domain constants. Every field can be overridden from the experiment
/// config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightDarkSpec {
    pub discount: f64,
    pub goal_radius: f64,
    pub goal_reward: f64,
    pub miss_penalty: f64,
    pub step_reward: f64,
    pub light: f64,
    /// Minimum observation noise, attained at the light.
    pub min_noise: f64,
    pub cost_threshold: f64,
    pub step_cost: f64,
    pub budget: f64,
    pub initial_mean: f64,
    pub initial_std: f64,
    /// Standard deviation of the depletion-rescue jitter.
    pub jitter: f64,
}

impl Default for LightDarkSpec {
    fn default() -> Self {
        Self {
            discount: 0.95,
            goal_radius: 1.0,
            goal_reward: 100.0,
            miss_penalty: -100.0,
            step_reward: -1.0,
            light: 10.0,
            min_noise: 0.1,
            cost_threshold: 12.0,
            step_cost: 1.0,
            budget: 0.1,
            initial_mean: 2.0,
            initial_std: 2.0,
            jitter: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LightDark {
    spec: LightDarkSpec,
    discount: Discount,
    budget: Budget,
    initial: Normal<f64>,
}

impl LightDark {
    pub fn new(spec: LightDarkSpec) -> Result<Self, ModelError> {
        let discount = Discount::new(spec.discount)?;
        let initial = Normal::new(spec.initial_mean, spec.initial_std)
            .map_err(|e| ModelError::InvalidParameter(format!("initial belief: {e}")))?;
        if !(spec.min_noise > 0.0) {
            return Err(ModelError::InvalidParameter(
                "min_noise must be positive".into(),
            ));
        }
        if !(spec.budget >= 0.0) {
            return Err(ModelError::InvalidParameter(
                "budget must be nonnegative".into(),
            ));
        }
        Ok(Self {
            budget: Budget::new(&[spec.budget]),
            discount,
            initial,
            spec,
        })
    }

    pub fn spec(&self) -> &LightDarkSpec {
        &self.spec
    }

    /// Observation noise standard deviation `σ(s)`.
    pub fn noise(&self, position: f64) -> f64 {
        (position - self.spec.light).abs() + self.spec.min_noise
    }

    pub fn in_goal(&self, position: f64) -> bool {
        position.abs() <= self.spec.goal_radius
    }

    pub fn in_cost_region(&self, position: f64) -> bool {
        position > self.spec.cost_threshold
    }

    pub fn lightdark_obs_density(&self, position: f64, obs: f64) -> f64 {
        let sigma = self.noise(position);
        let z = (obs - position) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
    }

    /// Full generative step on plain positions.
    pub fn lightdark_step<R: Rng + ?Sized>(
        &self,
        state: &LightDarkState,
        action: LightDarkAction,
        rng: &mut R,
    ) -> crate::model::GenerativeStep<LightDarkState, f64> {
        self.step(state, &action, rng)
    }
}

impl Cpomdp for LightDark {
    type State = LightDarkState;
    type Action = LightDarkAction;
    type Obs = f64;

    fn actions(&self) -> &[LightDarkAction] {
        &LightDarkAction::ALL
    }

    fn discount(&self) -> Discount {
        self.discount
    }

    fn budget(&self) -> &Budget {
        &self.budget
    }

    fn is_terminal(&self, state: &LightDarkState) -> bool {
        state.terminal
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> LightDarkState {
        LightDarkState::at(self.initial.sample(rng))
    }

    fn transition<R: Rng + ?Sized>(
        &self,
        state: &LightDarkState,
        action: &LightDarkAction,
        _rng: &mut R,
    ) -> StateStep<LightDarkState> {
        if state.terminal {
            return StateStep {
                next_state: *state,
                reward: 0.0,
                cost: CostVector::scalar(0.0),
            };
        }
        let s = state.position;
        let next = LightDarkState {
            position: s + action.displacement(),
            terminal: *action == LightDarkAction::STOP,
        };
        let reward = if *action == LightDarkAction::STOP {
            if self.in_goal(s) {
                self.spec.goal_reward
            } else {
                self.spec.miss_penalty
            }
        } else {
            self.spec.step_reward
        };
        let cost = if self.in_cost_region(next.position) {
            self.spec.step_cost
        } else {
            0.0
        };
        StateStep {
            next_state: next,
            reward,
            cost: CostVector::scalar(cost),
        }
    }

    fn observe<R: Rng + ?Sized>(
        &self,
        _action: &LightDarkAction,
        next_state: &LightDarkState,
        rng: &mut R,
    ) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        next_state.position + self.noise(next_state.position) * z
    }

    fn obs_density(
        &self,
        _action: &LightDarkAction,
        next_state: &LightDarkState,
        obs: &f64,
    ) -> f64 {
        self.lightdark_obs_density(next_state.position, *obs)
    }

    fn jitter<R: Rng + ?Sized>(&self, state: &LightDarkState, rng: &mut R) -> LightDarkState {
        let z: f64 = StandardNormal.sample(rng);
        LightDarkState {
            position: state.position + self.spec.jitter * z,
            terminal: state.terminal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> LightDark {
        LightDark::new(LightDarkSpec::default()).unwrap()
    }

    fn act(a: i32) -> LightDarkAction {
        LightDarkAction::new(a).unwrap()
    }

    #[test]
    fn stop_in_goal_pays_out() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = m.lightdark_step(&LightDarkState::at(0.5), act(0), &mut rng);
        assert_eq!(out.reward, 100.0);
        assert!(out.next_state.terminal);
    }

    #[test]
    fn entering_cost_region() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = m.lightdark_step(&LightDarkState::at(3.0), act(10), &mut rng);
        assert_eq!(out.next_state.position, 13.0);
        assert_eq!(out.cost[0], 1.0);
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn stop_outside_goal_is_penalized() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = m.lightdark_step(&LightDarkState::at(10.0), act(0), &mut rng);
        assert_eq!(out.reward, -100.0);
    }

    #[test]
    fn rejects_invalid_actions() {
        assert!(LightDarkAction::new(2).is_err());
        assert!(LightDarkAction::new(-7).is_err());
        assert!(serde_json::from_str::<LightDarkAction>("3").is_err());
        assert_eq!(
            serde_json::from_str::<LightDarkAction>("-5").unwrap(),
            act(-5)
        );
    }

    #[test]
    fn density_profile() {
        let m = model();
        let peak = m.lightdark_obs_density(4.0, 4.0);
        assert!((peak - 1.0 / (6.1 * (2.0 * PI).sqrt())).abs() < 1e-15);
        assert_eq!(m.noise(10.0), 0.1);
        let ratio = m.lightdark_obs_density(10.0, 10.0) / m.lightdark_obs_density(0.0, 0.0);
        assert!((ratio - 10.1 / 0.1).abs() < 1e-9);
    }

    #[test]
    fn terminal_states_absorb() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = LightDarkState {
            position: 20.0,
            terminal: true,
        };
        let out = m.transition(&s, &act(5), &mut rng);
        assert_eq!(out.next_state, s);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.cost[0], 0.0);
    }
}
