//! Option catalogs for Constrained LightDark.
//!
//! All controllers act on the belief mean `μ` and spread `σ` of the robot
//! position and are available everywhere:
//!
//! * `GoToGoal` moves `μ` greedily toward 0 and stops (action 0) once no move
//!   brings it closer.
//! * `LocalizeFast` moves `μ` greedily toward the light.
//! * `LocalizeFromBelow` approaches the light without letting `μ` pass it.
//! * `LocalizeSafe` approaches the light while keeping `μ + margin·σ` at or
//!   below the cost threshold.
//!
//! The localize options terminate once `σ` drops below their threshold.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::ParticleBelief;
use crate::error::OptionError;
use crate::options::{primitive_options, OptionContext, OptionPolicy, OptionSet, OptionSpec};

use super::lightdark::{LightDark, LightDarkAction, LightDarkState};

pub const DEFAULT_LOCALIZE_THRESHOLD: f64 = 0.3;
pub const DEFAULT_SAFETY_MARGIN: f64 = 2.0;
/// Seed for the randomly generated members of the sweep catalogs.
pub const CATALOG_SEED: u64 = 0x00C0_BE75;

/// Moves in the order used to break distance ties: smaller steps first,
/// backwards before forwards.
const MOVES_BY_SIZE: [i32; 6] = [-1, 1, -5, 5, -10, 10];

#[derive(Clone, Debug, PartialEq)]
pub enum Controller {
    GoToGoal,
    LocalizeFast {
        threshold: f64,
    },
    LocalizeFromBelow {
        threshold: f64,
    },
    LocalizeSafe {
        margin: f64,
        threshold: f64,
    },
    /// Fixed three-step move sequence.
    Macro {
        moves: [LightDarkAction; 3],
    },
}

pub struct LightDarkOption {
    label: String,
    controller: Controller,
    light: f64,
    cost_threshold: f64,
}

fn position_stats(belief: &ParticleBelief<LightDarkState>) -> (f64, f64) {
    belief.mean_std(|s| s.position)
}

fn mv(step: i32) -> LightDarkAction {
    LightDarkAction::new(step).expect("valid move")
}

/// Move among `allowed` minimizing `|μ + a − target|`.
fn closest_move(mean: f64, target: f64, allowed: impl Fn(f64) -> bool) -> Option<LightDarkAction> {
    let mut best: Option<(i32, f64)> = None;
    for &a in &MOVES_BY_SIZE {
        let next = mean + a as f64;
        if !allowed(next) {
            continue;
        }
        let d = (next - target).abs();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((a, d));
        }
    }
    best.map(|(a, _)| mv(a))
}

impl LightDarkOption {
    pub fn new(model: &LightDark, label: impl Into<String>, controller: Controller) -> Self {
        Self {
            label: label.into(),
            controller,
            light: model.spec().light,
            cost_threshold: model.spec().cost_threshold,
        }
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    /// Action for a belief with position mean `mean` and spread `spread`.
    pub fn action_for(&self, mean: f64, spread: f64, elapsed: u32) -> LightDarkAction {
        match &self.controller {
            Controller::GoToGoal => match closest_move(mean, 0.0, |_| true) {
                Some(a) if (mean + a.displacement()).abs() < mean.abs() => a,
                _ => LightDarkAction::STOP,
            },
            Controller::LocalizeFast { .. } => {
                closest_move(mean, self.light, |_| true).expect("unconstrained move")
            }
            Controller::LocalizeFromBelow { .. } => {
                closest_move(mean, self.light, |next| next <= self.light).unwrap_or(mv(-10))
            }
            Controller::LocalizeSafe { margin, .. } => {
                let limit = self.cost_threshold - margin * spread;
                closest_move(mean, self.light, |next| next <= limit).unwrap_or(mv(-10))
            }
            Controller::Macro { moves } => moves[(elapsed as usize).min(2)],
        }
    }

    fn beta(&self, spread: f64, elapsed: u32, terminal: bool) -> f64 {
        if terminal {
            return 1.0;
        }
        let done = match &self.controller {
            Controller::GoToGoal => false,
            Controller::LocalizeFast { threshold }
            | Controller::LocalizeFromBelow { threshold }
            | Controller::LocalizeSafe { threshold, .. } => spread < *threshold,
            Controller::Macro { .. } => elapsed >= 3,
        };
        if done {
            1.0
        } else {
            0.0
        }
    }
}

impl OptionPolicy<LightDark> for LightDarkOption {
    fn label(&self) -> &str {
        &self.label
    }

    fn action(&self, ctx: OptionContext<'_, LightDarkState>) -> LightDarkAction {
        let (mean, spread) = position_stats(ctx.belief);
        self.action_for(mean, spread, ctx.elapsed)
    }

    fn termination_probability(&self, ctx: OptionContext<'_, LightDarkState>) -> f64 {
        let terminal = ctx.belief.particles().iter().all(|s| s.terminal);
        let (_, spread) = position_stats(ctx.belief);
        self.beta(spread, ctx.elapsed, terminal)
    }
}

/// Which LightDark option catalog to build.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Catalog {
    /// GoToGoal, LocalizeFast, LocalizeFromBelow, LocalizeSafe.
    Base4,
    /// GoToGoal and two LocalizeSafe variants, all locally feasible from b₀.
    Feasible3,
    /// Base-4 plus LocalizeSafe variants with sampled termination spreads,
    /// `size` options in total.
    Uncertainty(usize),
    /// Base-4 plus random three-move macro options, `size` options in total.
    RandomMacro(usize),
    /// One one-step option per primitive action.
    Primitive,
}

impl FromStr for Catalog {
    type Err = OptionError;

    fn from_str(s: &str) -> Result<Self, OptionError> {
        let unknown = || OptionError::Unknown(format!("catalog {s}"));
        let sized = |rest: &str| -> Result<usize, OptionError> {
            let n: usize = rest.parse().map_err(|_| unknown())?;
            if n < 4 {
                return Err(unknown());
            }
            Ok(n)
        };
        match s {
            "base4" => Ok(Catalog::Base4),
            "feasible3" => Ok(Catalog::Feasible3),
            "primitive" => Ok(Catalog::Primitive),
            _ => {
                if let Some(rest) = s.strip_prefix("uncertainty:") {
                    Ok(Catalog::Uncertainty(sized(rest)?))
                } else if let Some(rest) = s.strip_prefix("random-macro:") {
                    Ok(Catalog::RandomMacro(sized(rest)?))
                } else {
                    Err(unknown())
                }
            }
        }
    }
}

impl std::fmt::Display for Catalog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Catalog::Base4 => write!(f, "base4"),
            Catalog::Feasible3 => write!(f, "feasible3"),
            Catalog::Primitive => write!(f, "primitive"),
            Catalog::Uncertainty(n) => write!(f, "uncertainty:{n}"),
            Catalog::RandomMacro(n) => write!(f, "random-macro:{n}"),
        }
    }
}

fn option(
    model: &LightDark,
    label: impl Into<String>,
    controller: Controller,
) -> OptionSpec<LightDark> {
    Arc::new(LightDarkOption::new(model, label, controller))
}

fn base4(model: &LightDark) -> Vec<OptionSpec<LightDark>> {
    let t = DEFAULT_LOCALIZE_THRESHOLD;
    vec![
        option(model, "GoToGoal", Controller::GoToGoal),
        option(
            model,
            "LocalizeFast",
            Controller::LocalizeFast { threshold: t },
        ),
        option(
            model,
            "LocalizeFromBelow",
            Controller::LocalizeFromBelow { threshold: t },
        ),
        option(
            model,
            "LocalizeSafe",
            Controller::LocalizeSafe {
                margin: DEFAULT_SAFETY_MARGIN,
                threshold: t,
            },
        ),
    ]
}

pub fn make_lightdark_options(
    model: &LightDark,
    catalog: &Catalog,
) -> Result<OptionSet<LightDark>, OptionError> {
    let options = match *catalog {
        Catalog::Base4 => base4(model),
        Catalog::Feasible3 => vec![
            option(model, "GoToGoal", Controller::GoToGoal),
            option(
                model,
                "LocalizeSafe(2.0,0.3)",
                Controller::LocalizeSafe {
                    margin: 2.0,
                    threshold: 0.3,
                },
            ),
            option(
                model,
                "LocalizeSafe(3.0,0.5)",
                Controller::LocalizeSafe {
                    margin: 3.0,
                    threshold: 0.5,
                },
            ),
        ],
        Catalog::Uncertainty(size) => {
            let mut rng = ChaCha8Rng::seed_from_u64(CATALOG_SEED);
            let mut out = base4(model);
            for i in out.len()..size {
                let threshold: f64 = rng.random_range(0.1..1.0);
                out.push(option(
                    model,
                    format!("LocalizeSafe#{i}(σ<{threshold:.3})"),
                    Controller::LocalizeSafe {
                        margin: DEFAULT_SAFETY_MARGIN,
                        threshold,
                    },
                ));
            }
            out
        }
        Catalog::RandomMacro(size) => {
            let mut rng = ChaCha8Rng::seed_from_u64(CATALOG_SEED);
            let mut out = base4(model);
            for i in out.len()..size {
                let mut pick =
                    || LightDarkAction::MOVES[rng.random_range(0..LightDarkAction::MOVES.len())];
                let moves = [pick(), pick(), pick()];
                out.push(option(
                    model,
                    format!("Macro#{i}{moves:?}"),
                    Controller::Macro { moves },
                ));
            }
            out
        }
        Catalog::Primitive => return Ok(primitive_options(model)),
    };
    OptionSet::new(options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::lightdark::LightDarkSpec;
    use crate::model::Cpomdp;
    use rand::SeedableRng;

    fn model() -> LightDark {
        LightDark::new(LightDarkSpec::default()).unwrap()
    }

    fn point(position: f64) -> ParticleBelief<LightDarkState> {
        ParticleBelief::from_particles(vec![LightDarkState::at(position); 4]).unwrap()
    }

    /// Run a controller on a point-mass belief under deterministic motion.
    fn script(opt: &LightDarkOption, start: f64, max: usize) -> Vec<i32> {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = point(start);
        let mut out = Vec::new();
        for elapsed in 0..max {
            let a = opt.action(OptionContext::new(&b, elapsed as u32));
            out.push(a.step());
            let next: Vec<_> = b
                .particles()
                .iter()
                .map(|s| m.transition(s, &a, &mut rng).next_state)
                .collect();
            b = ParticleBelief::from_particles(next).unwrap();
            if opt.termination_probability(OptionContext::new(&b, elapsed as u32 + 1)) >= 1.0 {
                break;
            }
        }
        out
    }

    #[test]
    fn go_to_goal_from_six() {
        let m = model();
        let opt = LightDarkOption::new(&m, "g", Controller::GoToGoal);
        assert_eq!(script(&opt, 6.0, 10), vec![-5, -1, 0]);
    }

    #[test]
    fn localize_fast_heads_for_the_light() {
        let m = model();
        let opt = LightDarkOption::new(&m, "f", Controller::LocalizeFast { threshold: 0.3 });
        // a point mass already has zero spread, so it stops after one move
        assert_eq!(script(&opt, 2.0, 10), vec![10]);
        assert_eq!(opt.action_for(2.0, 2.0, 0).step(), 10);
        assert_eq!(opt.action_for(7.0, 1.0, 0).step(), 1);
        assert_eq!(opt.action_for(12.0, 1.0, 0).step(), -1);
    }

    #[test]
    fn localize_from_below_never_passes_the_light() {
        let m = model();
        let opt = LightDarkOption::new(&m, "b", Controller::LocalizeFromBelow { threshold: 0.3 });
        let mut mean = 2.0;
        let mut seq = Vec::new();
        for _ in 0..4 {
            let a = opt.action_for(mean, 1.0, 0);
            seq.push(a.step());
            mean += a.displacement();
            assert!(mean <= 10.0);
        }
        assert_eq!(seq, vec![5, 1, 1, 1]);
    }

    #[test]
    fn localize_safe_respects_margin() {
        let m = model();
        let opt = LightDarkOption::new(
            &m,
            "s",
            Controller::LocalizeSafe {
                margin: 2.0,
                threshold: 0.3,
            },
        );
        assert_eq!(opt.action_for(2.0, 2.0, 0).step(), 5);
        assert_eq!(opt.action_for(7.0, 1.8, 0).step(), 1);
        assert_eq!(opt.action_for(10.0, 0.5, 0).step(), -1);
    }

    #[test]
    fn macro_runs_three_steps() {
        let m = model();
        let moves = [mv(1), mv(-5), mv(10)];
        let opt = LightDarkOption::new(&m, "m", Controller::Macro { moves });
        let b =
            ParticleBelief::from_particles(vec![LightDarkState::at(0.0), LightDarkState::at(3.0)])
                .unwrap();
        let steps: Vec<i32> = (0..3)
            .map(|e| opt.action(OptionContext::new(&b, e)).step())
            .collect();
        assert_eq!(steps, vec![1, -5, 10]);
        assert_eq!(opt.termination_probability(OptionContext::new(&b, 2)), 0.0);
        assert_eq!(opt.termination_probability(OptionContext::new(&b, 3)), 1.0);
    }

    #[test]
    fn catalogs() {
        let m = model();
        let labels = |c: Catalog| -> Vec<String> {
            make_lightdark_options(&m, &c)
                .unwrap()
                .labels()
                .map(String::from)
                .collect()
        };
        assert_eq!(
            labels(Catalog::Base4),
            vec![
                "GoToGoal",
                "LocalizeFast",
                "LocalizeFromBelow",
                "LocalizeSafe"
            ]
        );
        assert_eq!(labels(Catalog::Feasible3).len(), 3);
        assert_eq!(labels(Catalog::Primitive).len(), 7);
        for n in [4, 8, 16, 32] {
            assert_eq!(labels(Catalog::Uncertainty(n)).len(), n);
            assert_eq!(labels(Catalog::RandomMacro(n)).len(), n);
        }
        assert_eq!(
            labels(Catalog::Uncertainty(16)),
            labels(Catalog::Uncertainty(16))
        );
    }

    #[test]
    fn catalog_names_parse() {
        for c in [
            Catalog::Base4,
            Catalog::Feasible3,
            Catalog::Primitive,
            Catalog::Uncertainty(8),
            Catalog::RandomMacro(32),
        ] {
            assert_eq!(c.to_string().parse::<Catalog>().unwrap(), c);
        }
        assert!("nope".parse::<Catalog>().is_err());
        assert!("uncertainty:2".parse::<Catalog>().is_err());
        assert!("random-macro:x".parse::<Catalog>().is_err());
    }
}
