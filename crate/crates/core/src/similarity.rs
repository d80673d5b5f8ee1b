//! Similarity functions `s: X × X → [0, 1]`, one per label kind.

use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::label::{Label, LabelKind};

pub const DEFAULT_SIGMA: f64 = 1.0;
pub const DEFAULT_LEVEL_SCORES: [f64; 4] = [1.0, 0.75, 0.5, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum SimilarityFn {
    /// 1 iff the categories are equal.
    Hamming,
    /// Set Jaccard; two empty sets are identical.
    Jaccard,
    /// `exp(-d² / 2σ²)`.
    Gaussian { sigma: f64 },
    /// Scores for: identical path, same first two levels, same first level,
    /// different first level.
    Hierarchical { scores: [f64; 4] },
    /// Jaccard of the rasterized bitmaps.
    BoxJaccard,
}

impl SimilarityFn {
    pub fn for_kind(kind: LabelKind) -> Self {
        match kind {
            LabelKind::Categorical => SimilarityFn::Hamming,
            LabelKind::LabelSet => SimilarityFn::Jaccard,
            LabelKind::Point2D => SimilarityFn::Gaussian {
                sigma: DEFAULT_SIGMA,
            },
            LabelKind::TreePath => SimilarityFn::Hierarchical {
                scores: DEFAULT_LEVEL_SCORES,
            },
            LabelKind::BoxSet => SimilarityFn::BoxJaccard,
        }
    }

    pub fn kind(&self) -> LabelKind {
        match self {
            SimilarityFn::Hamming => LabelKind::Categorical,
            SimilarityFn::Jaccard => LabelKind::LabelSet,
            SimilarityFn::Gaussian { .. } => LabelKind::Point2D,
            SimilarityFn::Hierarchical { .. } => LabelKind::TreePath,
            SimilarityFn::BoxJaccard => LabelKind::BoxSet,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SimilarityFn::Gaussian { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => Err(
                Error::InvalidArgument(format!("gaussian sigma must be positive, got {sigma}")),
            ),
            SimilarityFn::Hierarchical { scores } => {
                let ok = scores.iter().all(|s| (0.0..=1.0).contains(s))
                    && scores[0] == 1.0
                    && scores.windows(2).all(|w| w[0] >= w[1]);
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "hierarchical scores must start at 1 and decrease within [0, 1], got {scores:?}"
                    )))
                }
            }
            _ => Ok(()),
        }
    }

    fn check(&self, label: &Label) -> Result<()> {
        if label.kind() != self.kind() {
            return Err(Error::KindMismatch {
                expected: self.kind(),
                found: label.kind(),
            });
        }
        Ok(())
    }

    pub fn sim(&self, x: &Label, y: &Label) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(match (self, x, y) {
            (SimilarityFn::Hamming, Label::Categorical(a), Label::Categorical(b)) => {
                if a == b {
                    1.0
                } else {
                    0.0
                }
            }
            (SimilarityFn::Jaccard, Label::LabelSet(a), Label::LabelSet(b)) => {
                let union = a.union(b).count();
                if union == 0 {
                    1.0
                } else {
                    a.intersection(b).count() as f64 / union as f64
                }
            }
            (SimilarityFn::Gaussian { sigma }, Label::Point2D { x: x1, y: y1 }, Label::Point2D { x: x2, y: y2 }) => {
                gaussian(*sigma, (x1 - x2).powi(2) + (y1 - y2).powi(2))
            }
            (SimilarityFn::Hierarchical { scores }, Label::TreePath(a), Label::TreePath(b)) => {
                if a == b {
                    scores[0]
                } else if a[0] == b[0] && a[1] == b[1] {
                    scores[1]
                } else if a[0] == b[0] {
                    scores[2]
                } else {
                    scores[3]
                }
            }
            (SimilarityFn::BoxJaccard, Label::BoxSet(a), Label::BoxSet(b)) => {
                if a.grid() != b.grid() {
                    return Err(Error::InvalidArgument(format!(
                        "box sets on different grids {:?} and {:?}",
                        a.grid(),
                        b.grid()
                    )));
                }
                bitmap_jaccard(&a.rasterize(), &b.rasterize())
            }
            _ => unreachable!("kinds checked above"),
        })
    }

    /// Row-major `n × n` similarity matrix. Box sets are rasterized once each.
    pub fn matrix(&self, labels: &[&Label]) -> Result<Vec<f64>> {
        let n = labels.len();
        let mut out = vec![1.0; n * n];
        if let SimilarityFn::BoxJaccard = self {
            let mut maps = Vec::with_capacity(n);
            for l in labels {
                self.check(l)?;
                let Label::BoxSet(b) = l else { unreachable!() };
                maps.push(b.rasterize());
            }
            for a in 0..n {
                for b in a + 1..n {
                    if (maps[a].width(), maps[a].height()) != (maps[b].width(), maps[b].height()) {
                        return Err(Error::InvalidArgument("box sets on different grids".into()));
                    }
                    let s = bitmap_jaccard(&maps[a], &maps[b]);
                    out[a * n + b] = s;
                    out[b * n + a] = s;
                }
            }
            return Ok(out);
        }
        for a in 0..n {
            self.check(labels[a])?;
            for b in a + 1..n {
                let s = self.sim(labels[a], labels[b])?;
                out[a * n + b] = s;
                out[b * n + a] = s;
            }
        }
        Ok(out)
    }
}

fn gaussian(sigma: f64, dist2: f64) -> f64 {
    (-dist2 / (2.0 * sigma * sigma)).exp()
}

pub(crate) fn bitmap_jaccard(a: &Bitmap, b: &Bitmap) -> f64 {
    let (inter, union) = a.overlap(b);
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
