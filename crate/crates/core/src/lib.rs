pub mod analysis;
pub mod controllers;
pub mod error;
pub mod modes;
pub mod nav;
pub mod plant;
pub mod springs;
pub mod svg;
pub mod timeseries;

pub use error::{Error, Result};
pub use timeseries::TimeSeries;
