//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod cpft;
pub mod exact;
pub mod flat;
pub mod line;
