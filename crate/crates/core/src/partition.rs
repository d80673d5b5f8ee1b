//! Label-type partitioners: rules assigning each label one of `k` types.

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetMeta;
use crate::error::{Error, Result};
use crate::label::{Label, LabelKind};

/// Box counts at or above this value share the last type.
pub const MAX_BOX_COUNT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Partitioner {
    /// One cell holding every label.
    Single,
    /// One type per category.
    Category { categories: Vec<String> },
    /// One type per singleton topic set, plus a shared type for every other
    /// set (empty or with two or more topics).
    Topics { topics: Vec<String> },
    /// One type per first-level tree node.
    TreeRoot { roots: Vec<String> },
    /// Type = number of distinct boxes, capped at `max`.
    BoxCount { max: usize },
    /// Regular `nx × ny` grid over `[x0, x1) × [y0, y1)`; points outside are
    /// assigned to the nearest edge cell.
    Grid {
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
}

impl Partitioner {
    /// The built-in rule for a label kind, with vocabularies taken from `meta`.
    pub fn default_for(kind: LabelKind, meta: &DatasetMeta) -> Self {
        match kind {
            LabelKind::Categorical => Partitioner::Category {
                categories: meta.categories.clone(),
            },
            LabelKind::LabelSet => Partitioner::Topics {
                topics: meta.topics.clone(),
            },
            LabelKind::TreePath => Partitioner::TreeRoot {
                roots: meta.roots.clone(),
            },
            LabelKind::BoxSet => Partitioner::BoxCount { max: MAX_BOX_COUNT },
            LabelKind::Point2D => Partitioner::Single,
        }
    }

    /// Parses a partitioner key: `default`, `single`, or
    /// `grid:NX,NY,X0,Y0,X1,Y1` (points only).
    pub fn from_key(key: &str, kind: LabelKind, meta: &DatasetMeta) -> Result<Self> {
        match key {
            "default" => Ok(Self::default_for(kind, meta)),
            "single" => Ok(Partitioner::Single),
            _ => {
                let Some(spec) = key.strip_prefix("grid:") else {
                    return Err(Error::InvalidArgument(format!(
                        "unknown partitioner `{key}` (expected default, single or grid:NX,NY,X0,Y0,X1,Y1)"
                    )));
                };
                if kind != LabelKind::Point2D {
                    return Err(Error::InvalidArgument(
                        "grid partitioner applies to point labels only".into(),
                    ));
                }
                let parts: Vec<&str> = spec.split(',').collect();
                let bad = || Error::InvalidArgument(format!("malformed grid partitioner `{key}`"));
                if parts.len() != 6 {
                    return Err(bad());
                }
                let nx: usize = parts[0].trim().parse().map_err(|_| bad())?;
                let ny: usize = parts[1].trim().parse().map_err(|_| bad())?;
                let mut f = [0.0; 4];
                for (slot, p) in f.iter_mut().zip(&parts[2..]) {
                    *slot = p.trim().parse().map_err(|_| bad())?;
                }
                let p = Partitioner::Grid {
                    nx,
                    ny,
                    x0: f[0],
                    y0: f[1],
                    x1: f[2],
                    y1: f[3],
                };
                p.validate()?;
                Ok(p)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Partitioner::Grid { nx, ny, x0, y0, x1, y1 } = *self {
            if nx == 0 || ny == 0 || !(x1 > x0) || !(y1 > y0) {
                return Err(Error::InvalidArgument(
                    "grid partitioner needs positive cell counts and a non-empty extent".into(),
                ));
            }
        }
        Ok(())
    }

    /// Number of types.
    pub fn k(&self) -> usize {
        match self {
            Partitioner::Single => 1,
            Partitioner::Category { categories } => categories.len(),
            Partitioner::Topics { topics } => topics.len() + 1,
            Partitioner::TreeRoot { roots } => roots.len(),
            Partitioner::BoxCount { max } => max + 1,
            Partitioner::Grid { nx, ny, .. } => nx * ny,
        }
    }

    /// Type index of `label`, or `None` when the label falls outside the
    /// vocabulary the partitioner was built from (or has another kind).
    pub fn type_of(&self, label: &Label) -> Option<usize> {
        match (self, label) {
            (Partitioner::Single, _) => Some(0),
            (Partitioner::Category { categories }, Label::Categorical(c)) => {
                categories.binary_search(c).ok()
            }
            (Partitioner::Topics { topics }, Label::LabelSet(set)) => {
                if set.len() == 1 {
                    let t = set.iter().next().expect("one element");
                    topics.binary_search(t).ok()
                } else {
                    Some(topics.len())
                }
            }
            (Partitioner::TreeRoot { roots }, Label::TreePath(p)) => roots.binary_search(&p[0]).ok(),
            (Partitioner::BoxCount { max }, Label::BoxSet(b)) => Some(b.distinct_count().min(*max)),
            (Partitioner::Grid { nx, ny, x0, y0, x1, y1 }, Label::Point2D { x, y }) => {
                let cell = |v: f64, lo: f64, hi: f64, n: usize| {
                    let f = ((v - lo) / (hi - lo) * n as f64).floor();
                    if f.is_nan() || f < 0.0 {
                        0
                    } else {
                        (f as usize).min(n - 1)
                    }
                };
                Some(cell(*y, *y0, *y1, *ny) * nx + cell(*x, *x0, *x1, *nx))
            }
            _ => None,
        }
    }
}
