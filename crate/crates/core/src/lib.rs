pub mod cam;
pub mod config;
pub mod cost;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod hv;
pub mod learner;
pub mod lta;
pub mod rng;

pub use error::{Error, Result};
pub use hv::{dot_bipolar, AccumulatorHV, BipolarHV, HvRef};
pub use rng::Rng;
