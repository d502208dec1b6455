//! Test oracles shared by the workspace's test suites: a grammar-driven
//! program generator and an independent reference interpreter.

pub mod gen;
pub mod graphs;
pub mod nested;
pub mod reference;

pub use gen::{generate, split_suite, GenConfig, Generated};
