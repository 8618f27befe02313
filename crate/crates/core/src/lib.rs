//! Seasonal monsoon rainfall forecasting.

pub mod autodiff;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod models;
pub mod scalar;
pub mod synthetic;
pub mod training;

pub use scalar::Scalar;

/// Double-precision aliases used by the command-line tools.
pub type Tensor = autodiff::Tensor<f64>;
pub type ParamSet = autodiff::ParamSet<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type PatchTst = models::PatchTst<f64>;
pub type LstmBaseline = models::LstmBaseline<f64>;
pub type CnnBaseline = models::CnnBaseline<f64>;
pub type Samples = models::Samples<f64>;
