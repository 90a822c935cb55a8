//! Normalization, sensitivity analysis and forecasting of CPU benchmark scores across
//! benchmark-suite generations.

pub mod analysis;
pub mod error;
pub mod gp;
pub mod hwforecast;
pub mod ingest;
pub mod month;
pub mod normalize;
pub mod optim;
pub mod scenario;
pub mod stats;
pub mod trend;
pub mod suite;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{BenchmarkRecord, HardwareConfig, HwField, ScoreKind};
pub use month::MonthIndex;
pub use normalize::{ConversionChain, Method, NormalizedRecord};
pub use suite::{Suite, SuiteDefinition};

/// Seed used for fold assignment when none is given.
pub const DEFAULT_SEED: u64 = 20170801;
