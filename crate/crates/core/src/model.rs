//! The trained model: per-worker competences, calibration lines, and the
//! optional per-type, IRT and multi-decision-point blocks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::AggregationMode;
use crate::error::{Error, Result};
use crate::irt::IrtParams;
use crate::multipoint::Shift;
use crate::partition::Partitioner;
use crate::similarity::SimilarityFn;

pub const MODEL_VERSION: u32 = 1;

pub const DEFAULT_GAMMA: f64 = 10.0;
pub const DEFAULT_ALPHA_SEMI: f64 = 1.0;
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Oak,
    Poak,
    Poaki,
    PoakIrt,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Oak,
        EstimatorKind::Poak,
        EstimatorKind::Poaki,
        EstimatorKind::PoakIrt,
    ];

    pub fn key(self) -> &'static str {
        match self {
            EstimatorKind::Oak => "oak",
            EstimatorKind::Poak => "poak",
            EstimatorKind::Poaki => "poaki",
            EstimatorKind::PoakIrt => "poak-irt",
        }
    }

    pub fn needs_types(self) -> bool {
        self != EstimatorKind::Oak
    }

    pub fn needs_irt(self) -> bool {
        matches!(self, EstimatorKind::Poaki | EstimatorKind::PoakIrt)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|e| e.key() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator `{s}` (expected oak, poak, poaki or poak-irt)")))
    }
}

/// `y = slope * x + intercept`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub const IDENTITY: Line = Line {
        slope: 1.0,
        intercept: 0.0,
    };

    pub fn apply(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Statistics of one worker, either overall or restricted to one label type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    /// Estimated competence, in `[0, 1]`.
    pub c: f64,
    /// Number of (own label, co-label) comparisons.
    pub m_bar: u64,
    /// Labels reported.
    pub m: u64,
    /// Labels reported on audited items.
    pub m_star: u64,
    /// Average similarity to co-labels; absent when `m_bar == 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<f64>,
    /// Average similarity to auditor labels; absent when `m_star == 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerModel {
    pub c: f64,
    pub m_bar: u64,
    pub m: u64,
    pub m_star: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_type: BTreeMap<usize, CellStats>,
}

impl WorkerModel {
    pub fn from_stats(s: CellStats) -> Self {
        WorkerModel {
            c: s.c,
            m_bar: s.m_bar,
            m: s.m,
            m_star: s.m_star,
            pi: s.pi,
            c0: s.c0,
            per_type: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub slope: f64,
    pub intercept: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_type: BTreeMap<usize, Line>,
}

impl Calibration {
    pub fn line(&self) -> Line {
        Line {
            slope: self.slope,
            intercept: self.intercept,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub estimator: EstimatorKind,
    pub gamma: f64,
    pub alpha_semi: f64,
    pub lambda: f64,
    /// Aggregation used when the multi-decision-point block was learned, and
    /// the default at estimation time.
    pub aggregation: AggregationMode,
    /// Present iff the model carries the per-type block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partitioner: Option<Partitioner>,
    pub similarity: SimilarityFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub version: u32,
    pub meta: ModelMeta,
    pub workers: BTreeMap<String, WorkerModel>,
    pub calibration: Calibration,
    pub global_mean: f64,
    /// Label-weighted mean competence per type.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub type_means: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irt: Option<IrtParams>,
    /// Adjustment per decision point (number of labels collected, ≥ 2).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub multipoint: BTreeMap<usize, Shift>,
}

impl Model {
    pub fn partitioner(&self) -> Result<&Partitioner> {
        self.meta.partitioner.as_ref().ok_or(Error::MissingBlock("per-type"))
    }

    pub fn irt(&self) -> Result<&IrtParams> {
        self.irt.as_ref().ok_or(Error::MissingBlock("irt"))
    }

    /// Checks that the blocks `estimator` relies on are present.
    pub fn supports(&self, estimator: EstimatorKind) -> Result<()> {
        if estimator.needs_types() {
            self.partitioner()?;
        }
        if estimator.needs_irt() {
            self.irt()?;
        }
        Ok(())
    }

    /// Pretty JSON, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("models always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Model> {
        let model: Model = serde_json::from_str(s)?;
        if model.version != MODEL_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }
}
