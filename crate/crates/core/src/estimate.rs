//! Aggregating an item's labels and attaching an accuracy estimate.

use serde::{Deserialize, Serialize};

use crate::aggregate::{argmax_first, AggregationMode, Aggregator};
use crate::error::{Error, Result};
use crate::irt::{poak_irt_confidence, poaki_confidence, IrtParams};
use crate::label::Label;
use crate::model::{EstimatorKind, Model};
use crate::oak::oak_confidence;
use crate::partition::Partitioner;
use crate::poak::poak_confidence;

/// Final answer for an item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedItem {
    #[serde(rename = "item")]
    pub item_id: String,
    #[serde(rename = "z")]
    pub label: Label,
    pub confidence: f64,
    pub labels_used: usize,
}

/// Aggregate of a label list with its estimated accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub label: Label,
    /// Estimated accuracy of `label`, before any decision-point adjustment.
    pub confidence: f64,
    /// Position of the label most similar to the aggregate (earliest on ties).
    pub closest: usize,
    /// Mean similarity of the aggregate to the input labels.
    pub agreement: f64,
}

/// A trained model bound to an estimator variant and an aggregation rule.
#[derive(Debug, Clone)]
pub struct Estimator<'m> {
    model: &'m Model,
    kind: EstimatorKind,
    agg: Aggregator,
    partitioner: Option<&'m Partitioner>,
    irt: Option<&'m IrtParams>,
}

impl<'m> Estimator<'m> {
    pub fn new(model: &'m Model, kind: EstimatorKind, mode: AggregationMode) -> Result<Self> {
        model.supports(kind)?;
        Ok(Estimator {
            model,
            kind,
            agg: Aggregator::new(mode, model.meta.similarity.clone()),
            partitioner: model.meta.partitioner.as_ref().filter(|_| kind.needs_types()),
            irt: model.irt.as_ref().filter(|_| kind.needs_irt()),
        })
    }

    /// Uses the estimator and aggregation recorded in the model.
    pub fn from_model(model: &'m Model) -> Result<Self> {
        Self::new(model, model.meta.estimator, model.meta.aggregation)
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn aggregator(&self) -> &Aggregator {
        &self.agg
    }

    pub fn type_of(&self, label: &Label) -> Option<usize> {
        self.partitioner.and_then(|p| p.type_of(label))
    }

    /// Smoothed accuracy of `worker` reporting a label of type `ty`.
    pub fn confidence(&self, worker: &str, ty: Option<usize>) -> f64 {
        let m = self.model;
        match (self.kind, self.irt) {
            (EstimatorKind::Oak, _) => oak_confidence(m, worker),
            (EstimatorKind::Poak, _) => poak_confidence(m, worker, ty),
            (EstimatorKind::Poaki, Some(irt)) => poaki_confidence(m, irt, worker, ty),
            (EstimatorKind::PoakIrt, Some(irt)) => poak_irt_confidence(m, irt, worker, ty),
            (_, None) => unreachable!("checked in Estimator::new"),
        }
        .clamp(0.0, 1.0)
    }

    /// Accuracy of one label taken on its own; used as its voting weight.
    pub fn label_confidence(&self, worker: &str, label: &Label) -> f64 {
        self.confidence(worker, self.type_of(label))
    }

    /// Aggregates `(worker id, label)` pairs given in arrival order.
    pub fn estimate(&self, labels: &[(&str, &Label)]) -> Result<Estimate> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("cannot estimate an item without labels".into()));
        }
        let refs: Vec<&Label> = labels.iter().map(|(_, l)| *l).collect();
        let weights: Vec<f64> = labels.iter().map(|(w, l)| self.label_confidence(w, l)).collect();
        let label = self.agg.aggregate(&refs, &weights)?;
        let sims = refs
            .iter()
            .map(|x| self.agg.sim.sim(x, &label))
            .collect::<Result<Vec<f64>>>()?;
        let closest = argmax_first(sims.iter().copied());
        let agreement = sims.iter().sum::<f64>() / sims.len() as f64;
        let confidence = self.confidence(labels[closest].0, self.type_of(&label));
        Ok(Estimate {
            label,
            confidence,
            closest,
            agreement,
        })
    }
}
