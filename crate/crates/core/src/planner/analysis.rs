/// Ratio of option-level (semi-Markov) to step-level search tree sizes over
/// a horizon of `horizon` steps: `(c1·c2·A·O)^{T/τ} / (A·O)^T`.
///
/// `actions`/`observations` are the step-level branching factors, `c1`/`c2`
/// scale them for the option-level tree and `tau` is the mean option length.
pub fn tree_size_ratio(
    actions: f64,
    observations: f64,
    c1: f64,
    c2: f64,
    horizon: f64,
    tau: f64,
) -> f64 {
    debug_assert!(actions > 0.0 && observations > 0.0 && c1 > 0.0 && c2 > 0.0);
    debug_assert!(horizon > 0.0 && tau >= 1.0);
    // evaluated in log space; the raw powers overflow for realistic horizons
    let ao = (actions * observations).ln();
    let option_level = (horizon / tau) * ((c1 * c2).ln() + ao);
    let step_level = horizon * ao;
    (option_level - step_level).exp()
}
