//! Flat per-step returns reconstructed from a planner trace.

use cobets::model::CostVector;
use cobets::planner::{SimulateRecord, TraceEvent};

/// One query's records, root level first.
pub fn paths(trace: &[TraceEvent]) -> Vec<Vec<SimulateRecord>> {
    let mut out = Vec::new();
    let mut current: Vec<SimulateRecord> = Vec::new();
    for e in trace {
        match e {
            TraceEvent::Query(_) => {
                if !current.is_empty() {
                    current.reverse();
                    out.push(std::mem::take(&mut current));
                }
            }
            TraceEvent::Simulate(r) => current.push(r.clone()),
            TraceEvent::Dual(_) => {}
        }
    }
    if !current.is_empty() {
        current.reverse();
        out.push(current);
    }
    out
}

/// `(Σ γ^t r_t, Σ γ^t c_t)` over the underlying steps of a root-first path,
/// including the leaf rollout of its deepest level.
pub fn flat_return(path: &[SimulateRecord], gamma: f64, dim: usize) -> (f64, Vec<f64>) {
    let mut steps: Vec<&(f64, CostVector)> = path.iter().flat_map(|r| r.raw.iter()).collect();
    if let Some(last) = path.last() {
        steps.extend(last.leaf_raw.iter());
    }
    let mut v = 0.0;
    let mut c = vec![0.0; dim];
    for (t, (r, k)) in steps.into_iter().enumerate() {
        let w = gamma.powi(t as i32);
        v += w * r;
        for (acc, x) in c.iter_mut().zip(k.iter()) {
            *acc += w * x;
        }
    }
    (v, c)
}
