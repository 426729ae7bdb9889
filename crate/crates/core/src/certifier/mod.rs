//! Thresholds, the period-4 point, segment tracing and lemma verifiers.

pub mod expansion;
pub mod lemmas;
pub mod periodic;
pub mod report;
pub mod segment_map;
pub mod thresholds;
pub mod trace;
