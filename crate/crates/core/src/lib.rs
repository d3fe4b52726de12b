pub mod classifier;
pub mod cli;
pub mod data;
pub mod format;
pub mod geometry;
pub mod hierarchy;
pub mod metrics;
pub mod prototypes;
pub mod rng;
