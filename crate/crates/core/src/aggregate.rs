//! Label aggregation: weighted or uniform voting per label kind, and the two
//! selection rules (smallest average distance, best available worker).
//!
//! Ties are always broken towards the label that arrived first.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{BoxSet, Label};
use crate::similarity::SimilarityFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Weighted mean / vote, weights from estimated label confidence.
    Weight,
    /// Unweighted mean / vote.
    Uniform,
    /// Pick the label with the highest mean similarity to the others.
    Sad,
    /// Pick the label with the highest confidence.
    Bau,
}

impl AggregationMode {
    pub fn uses_weights(self) -> bool {
        matches!(self, AggregationMode::Weight | AggregationMode::Bau)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregator {
    pub mode: AggregationMode,
    pub sim: SimilarityFn,
}

impl Aggregator {
    pub fn new(mode: AggregationMode, sim: SimilarityFn) -> Self {
        Aggregator { mode, sim }
    }

    /// Aggregates `labels` (in arrival order). `weights` are the per-label
    /// confidences; [`AggregationMode::Uniform`] and [`AggregationMode::Sad`]
    /// ignore them.
    pub fn aggregate(&self, labels: &[&Label], weights: &[f64]) -> Result<Label> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("cannot aggregate an empty label list".into()));
        }
        if self.mode.uses_weights() {
            check_weights(labels.len(), weights)?;
        }
        if labels.iter().all(|l| *l == labels[0]) {
            return Ok(labels[0].clone());
        }
        match self.mode {
            AggregationMode::Weight => vote(labels, weights),
            AggregationMode::Uniform => vote(labels, &vec![1.0; labels.len()]),
            AggregationMode::Sad => Ok(labels[select_sad(labels, &self.sim)?].clone()),
            AggregationMode::Bau => Ok(labels[select_bau(weights)?].clone()),
        }
    }
}

fn check_weights(n: usize, weights: &[f64]) -> Result<()> {
    if weights.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} labels but {} weights",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "weights must be finite and non-negative, got {w}"
        )));
    }
    Ok(())
}

/// Index of the label with the highest mean similarity to the other labels.
pub fn select_sad(labels: &[&Label], sim: &SimilarityFn) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("cannot select from an empty label list".into()));
    }
    let n = labels.len();
    if n == 1 {
        return Ok(0);
    }
    let m = sim.matrix(labels)?;
    let mean = |a: usize| (0..n).filter(|&b| b != a).map(|b| m[a * n + b]).sum::<f64>();
    Ok(argmax_first((0..n).map(mean)))
}

/// Index of the most confident label.
pub fn select_bau(confidences: &[f64]) -> Result<usize> {
    if confidences.is_empty() {
        return Err(Error::InvalidArgument("cannot select from an empty label list".into()));
    }
    Ok(argmax_first(confidences.iter().copied()))
}

pub(crate) fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Weighted plurality over keys, ties to the earliest first occurrence.
fn plurality<'a, K: PartialEq + ?Sized>(keys: &[&'a K], weights: &[f64]) -> &'a K {
    let mut tally: Vec<(&K, f64)> = Vec::new();
    for (k, w) in keys.iter().zip(weights) {
        match tally.iter_mut().find(|(t, _)| t == k) {
            Some(entry) => entry.1 += w,
            None => tally.push((k, *w)),
        }
    }
    tally[argmax_first(tally.iter().map(|t| t.1))].0
}

fn vote(labels: &[&Label], weights: &[f64]) -> Result<Label> {
    let total: f64 = weights.iter().sum();
    let uniform;
    let weights = if total > 0.0 {
        weights
    } else {
        uniform = vec![1.0; labels.len()];
        &uniform[..]
    };
    let total: f64 = weights.iter().sum();
    let kind = labels[0].kind();
    if let Some(other) = labels.iter().find(|l| l.kind() != kind) {
        return Err(Error::KindMismatch {
            expected: kind,
            found: other.kind(),
        });
    }

    Ok(match labels[0] {
        Label::Categorical(_) => {
            let keys: Vec<&String> = labels
                .iter()
                .map(|l| match l {
                    Label::Categorical(c) => c,
                    _ => unreachable!(),
                })
                .collect();
            Label::Categorical(plurality(&keys, weights).clone())
        }
        Label::LabelSet(_) => {
            let sets: Vec<&BTreeSet<String>> = labels
                .iter()
                .map(|l| match l {
                    Label::LabelSet(s) => s,
                    _ => unreachable!(),
                })
                .collect();
            let topics: BTreeSet<&String> = sets.iter().flat_map(|s| s.iter()).collect();
            let chosen = topics
                .into_iter()
                .filter(|t| {
                    let support: f64 = sets
                        .iter()
                        .zip(weights)
                        .filter(|(s, _)| s.contains(*t))
                        .map(|(_, w)| w)
                        .sum();
                    support > 0.5 * total
                })
                .cloned()
                .collect();
            Label::LabelSet(chosen)
        }
        Label::Point2D { .. } => {
            let (mut sx, mut sy) = (0.0, 0.0);
            for (l, w) in labels.iter().zip(weights) {
                if let Label::Point2D { x, y } = l {
                    sx += w * x;
                    sy += w * y;
                }
            }
            Label::Point2D {
                x: sx / total,
                y: sy / total,
            }
        }
        Label::TreePath(_) => {
            let paths: Vec<&[String; 3]> = labels
                .iter()
                .map(|l| match l {
                    Label::TreePath(p) => p,
                    _ => unreachable!(),
                })
                .collect();
            let mut chosen: Vec<String> = Vec::with_capacity(3);
            for level in 0..3 {
                let (keys, ws): (Vec<&String>, Vec<f64>) = paths
                    .iter()
                    .zip(weights)
                    .filter(|(p, _)| p[..level] == chosen[..])
                    .map(|(p, w)| (&p[level], *w))
                    .unzip();
                chosen.push(plurality(&keys, &ws).clone());
            }
            let [a, b, c]: [String; 3] = chosen.try_into().expect("three levels");
            Label::TreePath([a, b, c])
        }
        Label::BoxSet(first) => {
            let (w, h) = first.grid();
            let mut maps = Vec::with_capacity(labels.len());
            for l in labels {
                let Label::BoxSet(b) = l else { unreachable!() };
                if b.grid() != (w, h) {
                    return Err(Error::InvalidArgument("box sets on different grids".into()));
                }
                maps.push(b.rasterize());
            }
            let mut majority = crate::bitmap::Bitmap::new(w, h);
            for y in 0..h {
                for x in 0..w {
                    let support: f64 = maps
                        .iter()
                        .zip(weights)
                        .filter(|(m, _)| m.get(x, y))
                        .map(|(_, wt)| wt)
                        .sum();
                    if support > 0.5 * total {
                        majority.set(x, y);
                    }
                }
            }
            // Prefer an input annotation with exactly the voted coverage so its
            // box structure survives.
            if let Some(pos) = maps.iter().position(|m| *m == majority) {
                return Ok(labels[pos].clone());
            }
            Label::BoxSet(
                BoxSet::new(majority.to_rects(), w, h).expect("decomposed boxes lie in the grid"),
            )
        }
    })
}
