//! Test generation engines for MiniLang projects.

pub mod cfg;
pub mod coverage;
pub mod llm;
pub mod pool;
pub mod sbst;
pub mod unit;
