//! JSON verification reports shared by the library and the command line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Segment;

use super::thresholds::ThresholdSolution;

/// Failure records kept in full; the count is always exact.
pub const MAX_FAILURE_RECORDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub index: u64,
    pub description: String,
    pub segment: Option<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub id: String,
    pub alpha: f64,
    pub seed: u64,
    pub samples: u64,
    pub passes: u64,
    pub failure_count: u64,
    pub failures: Vec<FailureRecord>,
    pub thresholds: BTreeMap<String, ThresholdEntry>,
    /// Named numbers specific to the verifier.
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn new(id: &str, alpha: f64, seed: u64) -> Self {
        Self {
            id: id.to_string(),
            alpha,
            seed,
            samples: 0,
            passes: 0,
            failure_count: 0,
            failures: Vec::new(),
            thresholds: BTreeMap::new(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn pass(&mut self) {
        self.samples += 1;
        self.passes += 1;
    }

    pub fn fail(&mut self, index: u64, description: impl Into<String>, segment: Option<Segment>) {
        self.samples += 1;
        self.failure_count += 1;
        if self.failures.len() < MAX_FAILURE_RECORDS {
            self.failures.push(FailureRecord {
                index,
                description: description.into(),
                segment,
            });
        }
    }

    /// Records a check without a sample index.
    pub fn check(&mut self, ok: bool, description: impl Into<String>) {
        if ok {
            self.pass();
        } else {
            let i = self.samples;
            self.fail(i, description, None);
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failure_count == 0 && self.samples > 0
    }

    pub fn add_metric(&mut self, name: &str, value: f64) {
        *self.metrics.entry(name.to_string()).or_insert(0.0) += value;
    }

    pub fn add_threshold(&mut self, s: &ThresholdSolution) {
        self.thresholds.insert(
            s.id.name().to_string(),
            ThresholdEntry {
                value: s.value,
                residual: s.residual,
            },
        );
    }

    /// Appends the counts and records of `other`; metrics are summed.
    pub fn merge(mut self, other: VerifyReport) -> VerifyReport {
        self.samples += other.samples;
        self.passes += other.passes;
        self.failure_count += other.failure_count;
        for f in other.failures {
            if self.failures.len() < MAX_FAILURE_RECORDS {
                self.failures.push(f);
            }
        }
        for (k, v) in other.metrics {
            *self.metrics.entry(k).or_insert(0.0) += v;
        }
        self.thresholds.extend(other.thresholds);
        self.notes.extend(other.notes);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Several reports for one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub alpha: f64,
    pub seed: u64,
    pub passed: bool,
    pub reports: Vec<VerifyReport>,
}

impl SuiteReport {
    pub fn new(alpha: f64, seed: u64, reports: Vec<VerifyReport>) -> Self {
        let passed = reports.iter().all(VerifyReport::all_passed);
        Self {
            alpha,
            seed,
            passed,
            reports,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_is_associative_on_counts() {
        let mut a = VerifyReport::new("x", 2.5, 1);
        a.pass();
        a.add_metric("m", 1.0);
        let mut b = VerifyReport::new("x", 2.5, 1);
        b.fail(3, "bad", None);
        let mut c = VerifyReport::new("x", 2.5, 1);
        c.pass();
        c.add_metric("m", 2.0);
        let left = a.clone().merge(b.clone()).merge(c.clone());
        let right = a.merge(b.merge(c));
        assert_eq!(left, right);
        assert_eq!(left.samples, 3);
        assert!(!left.all_passed());
        let json = left.to_json().unwrap();
        let back: VerifyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, left);
    }
}
