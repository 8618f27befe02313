//! Pipeline commands for seasonal monsoon rainfall forecasting.

pub mod baselines;
pub mod cli;
pub mod commands;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod settings;
pub mod store;

pub use cli::run;
