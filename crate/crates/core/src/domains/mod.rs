//! Benchmark and oracle domains.

pub mod lightdark;
pub mod lightdark_options;
pub mod minichain;

pub use lightdark::{LightDark, LightDarkAction, LightDarkSpec, LightDarkState};
pub use lightdark_options::{make_lightdark_options, Catalog, Controller, LightDarkOption};
pub use minichain::{
    minichain_exact_solve, minichain_options, ExactSolution, MiniChain, MiniChainAction,
    MiniChainSpec, MiniChainState,
};
