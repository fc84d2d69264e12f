//! Workload generation, measurement, and the benchmark driver.

pub mod metrics;
pub mod runner;
pub mod workload;

pub use metrics::MetricsRecord;
pub use runner::{measure_fpr, run, RunConfig};
pub use workload::{gen_keys, Dist, WorkloadSpec};
