//! Exact enumeration on the mini-chain, written directly against the
//! probability tables.

use cobets::domains::minichain::{MiniChainSpec, GOAL, STATES};

pub type Dist = [f64; STATES];

/// `(P(o | b, a), b′)` for observation `o`.
pub fn bayes(spec: &MiniChainSpec, b: &Dist, a: usize, o: usize) -> (f64, Dist) {
    let mut post = [0.0; STATES];
    for s in 0..STATES {
        for s2 in 0..STATES {
            post[s2] += b[s] * spec.transition[a][s][s2] * spec.observation[s2][o];
        }
    }
    let z: f64 = post.iter().sum();
    if z > 0.0 {
        for p in post.iter_mut() {
            *p /= z;
        }
    }
    (z, post)
}

/// `Σ_s b(s) R(s, a)` and `Σ_s b(s) C(s, a)`.
pub fn expected_step(spec: &MiniChainSpec, b: &Dist, a: usize) -> (f64, f64) {
    let mut r = 0.0;
    let mut c = 0.0;
    for s in 0..STATES {
        c += b[s] * spec.cost[a][s];
        if s != GOAL {
            r += b[s] * spec.transition[a][s][GOAL] * spec.goal_reward;
        }
    }
    (r, c)
}

fn done(b: &Dist) -> bool {
    b[GOAL] > 1.0 - 1e-12
}

/// `(V, C, root action)` of every deterministic conditional plan of the
/// given horizon, without any pruning.
pub fn all_plans(spec: &MiniChainSpec, b: &Dist, horizon: u32) -> Vec<(f64, f64, Option<usize>)> {
    if horizon == 0 || done(b) {
        return vec![(0.0, 0.0, None)];
    }
    let g = spec.discount;
    let mut out = Vec::new();
    for a in 0..2 {
        let (r, c) = expected_step(spec, b, a);
        let mut acc = vec![(0.0, 0.0)];
        for o in 0..2 {
            let (p, next) = bayes(spec, b, a, o);
            if p <= 0.0 {
                continue;
            }
            let sub = all_plans(spec, &next, horizon - 1);
            let mut grown = Vec::with_capacity(acc.len() * sub.len());
            for (v, k) in &acc {
                for (sv, sk, _) in &sub {
                    grown.push((v + p * sv, k + p * sk));
                }
            }
            acc = grown;
        }
        out.extend(
            acc.into_iter()
                .map(|(v, k)| (r + g * v, c + g * k, Some(a))),
        );
    }
    out
}

/// Best value among plans with cost within `budget`, and its root action.
pub fn brute_force_optimum(
    spec: &MiniChainSpec,
    b: &Dist,
    horizon: u32,
    budget: f64,
) -> Option<(f64, usize)> {
    all_plans(spec, b, horizon)
        .into_iter()
        .filter(|(_, c, _)| *c <= budget + 1e-12)
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(v, _, a)| (v, a.unwrap()))
}

/// Unconstrained optimal value by expectimax.
pub fn expectimax(spec: &MiniChainSpec, b: &Dist, horizon: u32) -> f64 {
    if horizon == 0 || done(b) {
        return 0.0;
    }
    (0..2)
        .map(|a| q_value(spec, b, a, horizon))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Unconstrained optimal value of taking `a` first.
pub fn q_value(spec: &MiniChainSpec, b: &Dist, a: usize, horizon: u32) -> f64 {
    let (r, _) = expected_step(spec, b, a);
    let mut v = r;
    for o in 0..2 {
        let (p, next) = bayes(spec, b, a, o);
        if p > 0.0 {
            v += spec.discount * p * expectimax(spec, &next, horizon - 1);
        }
    }
    v
}

/// `(V, C)` of picking each of the two actions uniformly at random for
/// `horizon` steps.
pub fn uniform_random_policy(spec: &MiniChainSpec, b: &Dist, horizon: u32) -> (f64, f64) {
    if horizon == 0 || done(b) {
        return (0.0, 0.0);
    }
    let mut v = 0.0;
    let mut c = 0.0;
    for a in 0..2 {
        let (r, k) = expected_step(spec, b, a);
        let mut fv = 0.0;
        let mut fc = 0.0;
        for o in 0..2 {
            let (p, next) = bayes(spec, b, a, o);
            if p > 0.0 {
                let (sv, sc) = uniform_random_policy(spec, &next, horizon - 1);
                fv += p * sv;
                fc += p * sc;
            }
        }
        v += 0.5 * (r + spec.discount * fv);
        c += 0.5 * (k + spec.discount * fc);
    }
    (v, c)
}
