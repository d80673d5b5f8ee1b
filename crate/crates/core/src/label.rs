//! Annotation values and their kind-tagged JSON representation.
//!
//! Every label serializes as `{"kind": <tag>, "v": <value>}`; box sets also
//! carry their `"grid": [W, H]`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    #[serde(rename = "cat")]
    Categorical,
    #[serde(rename = "set")]
    LabelSet,
    #[serde(rename = "pt")]
    Point2D,
    #[serde(rename = "path")]
    TreePath,
    #[serde(rename = "boxes")]
    BoxSet,
}

impl LabelKind {
    pub fn tag(self) -> &'static str {
        match self {
            LabelKind::Categorical => "cat",
            LabelKind::LabelSet => "set",
            LabelKind::Point2D => "pt",
            LabelKind::TreePath => "path",
            LabelKind::BoxSet => "boxes",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "cat" => LabelKind::Categorical,
            "set" => LabelKind::LabelSet,
            "pt" => LabelKind::Point2D,
            "path" => LabelKind::TreePath,
            "boxes" => LabelKind::BoxSet,
            _ => return None,
        })
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Axis-aligned rectangle covering cells `x0..x1` × `y0..y1` (half-open).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.x1 - self.x0) * u64::from(self.y1 - self.y0)
    }
}

/// A set of rectangles on a fixed `width × height` grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoxSet {
    boxes: Vec<Rect>,
    width: u32,
    height: u32,
}

impl BoxSet {
    pub fn new(boxes: Vec<Rect>, width: u32, height: u32) -> Result<Self, String> {
        if width == 0 || height == 0 {
            return Err(format!("grid must be non-empty, got {width}x{height}"));
        }
        for b in &boxes {
            if b.x0 > b.x1 || b.y0 > b.y1 || b.x1 > width || b.y1 > height {
                return Err(format!(
                    "box [{}, {}, {}, {}] does not lie within the {width}x{height} grid",
                    b.x0, b.y0, b.x1, b.y1
                ));
            }
        }
        Ok(BoxSet {
            boxes,
            width,
            height,
        })
    }

    pub fn boxes(&self) -> &[Rect] {
        &self.boxes
    }

    pub fn grid(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Number of distinct rectangles.
    pub fn distinct_count(&self) -> usize {
        self.boxes.iter().collect::<BTreeSet<_>>().len()
    }

    pub fn rasterize(&self) -> Bitmap {
        let mut bitmap = Bitmap::new(self.width, self.height);
        for b in &self.boxes {
            bitmap.fill_rect(b);
        }
        bitmap
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Label {
    Categorical(String),
    LabelSet(BTreeSet<String>),
    Point2D { x: f64, y: f64 },
    /// Root-to-leaf path through a three-level tree.
    TreePath([String; 3]),
    BoxSet(BoxSet),
}

impl Label {
    pub fn kind(&self) -> LabelKind {
        match self {
            Label::Categorical(_) => LabelKind::Categorical,
            Label::LabelSet(_) => LabelKind::LabelSet,
            Label::Point2D { .. } => LabelKind::Point2D,
            Label::TreePath(_) => LabelKind::TreePath,
            Label::BoxSet(_) => LabelKind::BoxSet,
        }
    }

    pub fn cat(v: impl Into<String>) -> Self {
        Label::Categorical(v.into())
    }

    pub fn set<I, S>(topics: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Label::LabelSet(topics.into_iter().map(Into::into).collect())
    }

    pub fn point(x: f64, y: f64) -> Self {
        Label::Point2D { x, y }
    }

    pub fn path(l1: impl Into<String>, l2: impl Into<String>, leaf: impl Into<String>) -> Self {
        Label::TreePath([l1.into(), l2.into(), leaf.into()])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("labels always serialize")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum LabelWire {
    #[serde(rename = "cat")]
    Cat { v: String },
    #[serde(rename = "set")]
    Set { v: Vec<String> },
    #[serde(rename = "pt")]
    Pt { v: [f64; 2] },
    #[serde(rename = "path")]
    Path { v: [String; 3] },
    #[serde(rename = "boxes")]
    Boxes { v: Vec<[i64; 4]>, grid: [u32; 2] },
}

impl TryFrom<LabelWire> for Label {
    type Error = String;

    fn try_from(wire: LabelWire) -> Result<Self, String> {
        Ok(match wire {
            LabelWire::Cat { v } => Label::Categorical(v),
            LabelWire::Set { v } => Label::LabelSet(v.into_iter().collect()),
            LabelWire::Pt { v: [x, y] } => {
                if !x.is_finite() || !y.is_finite() {
                    return Err("point coordinates must be finite".into());
                }
                Label::Point2D { x, y }
            }
            LabelWire::Path { v } => Label::TreePath(v),
            LabelWire::Boxes { v, grid: [w, h] } => {
                let mut boxes = Vec::with_capacity(v.len());
                for [x0, y0, x1, y1] in v {
                    let coord = |c: i64| {
                        u32::try_from(c).map_err(|_| format!("box coordinate {c} is out of range"))
                    };
                    boxes.push(Rect::new(coord(x0)?, coord(y0)?, coord(x1)?, coord(y1)?));
                }
                Label::BoxSet(BoxSet::new(boxes, w, h)?)
            }
        })
    }
}

impl From<Label> for LabelWire {
    fn from(label: Label) -> Self {
        match label {
            Label::Categorical(v) => LabelWire::Cat { v },
            Label::LabelSet(v) => LabelWire::Set {
                v: v.into_iter().collect(),
            },
            Label::Point2D { x, y } => LabelWire::Pt { v: [x, y] },
            Label::TreePath(v) => LabelWire::Path { v },
            Label::BoxSet(b) => LabelWire::Boxes {
                v: b
                    .boxes
                    .iter()
                    .map(|r| [r.x0.into(), r.y0.into(), r.x1.into(), r.y1.into()])
                    .collect(),
                grid: [b.width, b.height],
            },
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        LabelWire::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = LabelWire::deserialize(deserializer)?;
        Label::try_from(wire).map_err(serde::de::Error::custom)
    }
}
