//! Numerics laboratory for channel-ensemble separation experiments:
//! dense complex linear algebra, Haar-measure Monte Carlo, Weingarten
//! moments, channel representations, ensemble constructions, and the
//! query-count bound calculators, all seeded and reproducible.

pub mod bounds;
pub mod channels;
pub mod decomp;
pub mod ensembles;
pub mod error;
pub mod haar;
pub mod matrix;
pub mod moments;
pub mod report;
pub mod stats;
pub mod weingarten;

pub use error::{Error, Result};
pub use matrix::Operator;
