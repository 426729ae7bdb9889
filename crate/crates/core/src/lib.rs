//! Return-map partitions and hyperbolicity certificates for the linked twist map
//! `H = G∘F` on the torus with `2 < alpha < 3`.

pub mod certifier;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod partition;
pub mod torus;

pub use certifier::report::{SuiteReport, VerifyReport};
pub use certifier::thresholds::{ThresholdId, ThresholdSolution};
pub use certifier::trace::{Outcome, TraceResult, Tracer};
pub use error::{LtmError, Result};
pub use geometry::{ConeId, Polygon, Segment, Vec2};
pub use partition::{build_partition, CellLabel, Partition, Side};
pub use torus::{MapId, Params, TorusPoint};
