pub mod error;
pub mod estimate;
pub mod exact;
pub mod experiment;
pub mod families;
pub mod harnack;
pub mod kernel;
pub mod simulate;

pub use error::{Error, Result};
pub use kernel::{build_kernel, MarkovKernel, MetricProfile, PeriodicityInfo};
