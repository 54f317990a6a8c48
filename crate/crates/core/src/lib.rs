pub mod aggregation;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod heavy_tail;
pub mod limit_fields;
pub mod numeric;
pub mod pulses;
pub mod regenerative;
pub mod regime;
pub mod rng;
pub mod shot_noise;

pub use error::{Error, Result};
