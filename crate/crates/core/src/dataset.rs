//! The partial worker × item annotation matrix, its JSONL ingestion, and the
//! per-item train/test split.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, LabelKind};

/// One line of `dataset.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub item: String,
    pub worker: String,
    pub arrival: u32,
    pub label: Label,
}

/// One line of `truth.jsonl`: an auditor (ground-truth) label for an item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditorRecord {
    pub item: String,
    pub z: Label,
}

/// Either kind of input line. Lines carrying a `"z"` key are auditor records.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Annotation(Annotation),
    Auditor(AuditorRecord),
}

impl Record {
    pub fn parse(line: &str) -> serde_json::Result<Record> {
        let value: serde_json::Value = serde_json::from_str(line)?;
        if value.get("z").is_some() {
            serde_json::from_value(value).map(Record::Auditor)
        } else {
            serde_json::from_value(value).map(Record::Annotation)
        }
    }
}

/// A worker's reported label on an item. Its arrival index is its position
/// in [`Item::responses`].
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub worker: usize,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub responses: Vec<Response>,
    pub auditor: Option<Label>,
}

/// Vocabularies observed in the data; partitioners are built from these.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetMeta {
    pub categories: Vec<String>,
    pub topics: Vec<String>,
    pub roots: Vec<String>,
    pub grid: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    kind: Option<LabelKind>,
    workers: Vec<String>,
    worker_index: HashMap<String, usize>,
    items: Vec<Item>,
    worker_items: Vec<Vec<usize>>,
    meta: DatasetMeta,
}

impl Dataset {
    pub fn label_kind(&self) -> Option<LabelKind> {
        self.kind
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn n_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_annotations(&self) -> usize {
        self.items.iter().map(|it| it.responses.len()).sum()
    }

    pub fn worker_id(&self, worker: usize) -> &str {
        &self.workers[worker]
    }

    pub fn worker_ids(&self) -> &[String] {
        &self.workers
    }

    pub fn worker_index(&self, id: &str) -> Option<usize> {
        self.worker_index.get(id).copied()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, index: usize) -> &Item {
        &self.items[index]
    }

    /// Item indices labelled by `worker` (the set M_i), ascending.
    pub fn worker_items(&self, worker: usize) -> &[usize] {
        &self.worker_items[worker]
    }

    /// m_i
    pub fn m(&self, worker: usize) -> usize {
        self.worker_items[worker].len()
    }

    /// m*_i: items labelled by `worker` that carry an auditor label.
    pub fn m_star(&self, worker: usize) -> usize {
        self.worker_items[worker]
            .iter()
            .filter(|&&j| self.items[j].auditor.is_some())
            .count()
    }

    /// m_{ii'}: items labelled by both workers.
    pub fn m_pair(&self, a: usize, b: usize) -> usize {
        let (xs, ys) = (&self.worker_items[a], &self.worker_items[b]);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn n_audited(&self) -> usize {
        self.items.iter().filter(|it| it.auditor.is_some()).count()
    }

    /// Dataset restricted to the given item indices. The worker table is kept
    /// as is so worker indices stay comparable across subsets.
    pub fn subset(&self, item_indices: &[usize]) -> Dataset {
        let items: Vec<Item> = item_indices.iter().map(|&j| self.items[j].clone()).collect();
        Dataset {
            kind: self.kind,
            workers: self.workers.clone(),
            worker_index: self.worker_index.clone(),
            worker_items: index_worker_items(self.workers.len(), &items),
            items,
            meta: self.meta.clone(),
        }
    }

    /// Copy of the dataset with every auditor label removed except those in
    /// `keep` (keyed by item id).
    pub fn with_auditor_labels(&self, keep: &HashMap<String, Label>) -> Dataset {
        let mut out = self.clone();
        for item in &mut out.items {
            item.auditor = keep.get(&item.id).cloned();
        }
        out
    }

    /// Annotation records in item order, then arrival order.
    pub fn annotations(&self) -> impl Iterator<Item = Annotation> + '_ {
        self.items.iter().flat_map(move |item| {
            item.responses
                .iter()
                .enumerate()
                .map(move |(arrival, r)| Annotation {
                    item: item.id.clone(),
                    worker: self.workers[r.worker].clone(),
                    arrival: arrival as u32,
                    label: r.label.clone(),
                })
        })
    }

    pub fn auditor_records(&self) -> impl Iterator<Item = AuditorRecord> + '_ {
        self.items.iter().filter_map(|item| {
            item.auditor.as_ref().map(|z| AuditorRecord {
                item: item.id.clone(),
                z: z.clone(),
            })
        })
    }
}

fn index_worker_items(n_workers: usize, items: &[Item]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_workers];
    for (j, item) in items.iter().enumerate() {
        for r in &item.responses {
            out[r.worker].push(j);
        }
    }
    out
}

#[derive(Debug, Default)]
struct PendingItem {
    id: String,
    responses: Vec<(u32, usize, Label)>,
    auditor: Option<Label>,
}

/// Accumulates records and validates them into a [`Dataset`].
#[derive(Debug, Default)]
pub struct DatasetBuilder {
    kind: Option<LabelKind>,
    grid: Option<(u32, u32)>,
    workers: Vec<String>,
    worker_index: HashMap<String, usize>,
    items: Vec<PendingItem>,
    item_index: HashMap<String, usize>,
    line: usize,
}

impl DatasetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_label(&mut self, label: &Label) -> Result<()> {
        let kind = label.kind();
        match self.kind {
            None => self.kind = Some(kind),
            Some(expected) if expected != kind => {
                return Err(Error::format(
                    self.line,
                    format!("mixed label kinds: dataset is {expected}, record is {kind}"),
                ))
            }
            _ => {}
        }
        if let Label::BoxSet(b) = label {
            match self.grid {
                None => self.grid = Some(b.grid()),
                Some(g) if g != b.grid() => {
                    return Err(Error::format(
                        self.line,
                        format!("grid {:?} differs from dataset grid {:?}", b.grid(), g),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn item_slot(&mut self, id: &str) -> usize {
        if let Some(&j) = self.item_index.get(id) {
            return j;
        }
        let j = self.items.len();
        self.items.push(PendingItem {
            id: id.to_owned(),
            ..Default::default()
        });
        self.item_index.insert(id.to_owned(), j);
        j
    }

    pub fn push_annotation(&mut self, a: Annotation) -> Result<()> {
        self.line += 1;
        self.check_label(&a.label)?;
        let worker = match self.worker_index.get(&a.worker) {
            Some(&w) => w,
            None => {
                let w = self.workers.len();
                self.workers.push(a.worker.clone());
                self.worker_index.insert(a.worker.clone(), w);
                w
            }
        };
        let j = self.item_slot(&a.item);
        self.items[j].responses.push((a.arrival, worker, a.label));
        Ok(())
    }

    pub fn push_auditor(&mut self, r: AuditorRecord) -> Result<()> {
        self.line += 1;
        self.check_label(&r.z)?;
        let j = self.item_slot(&r.item);
        match &self.items[j].auditor {
            Some(existing) if *existing != r.z => {
                return Err(Error::Validation(format!(
                    "conflicting auditor labels for item {}",
                    r.item
                )))
            }
            _ => self.items[j].auditor = Some(r.z),
        }
        Ok(())
    }

    pub fn push(&mut self, record: Record) -> Result<()> {
        match record {
            Record::Annotation(a) => self.push_annotation(a),
            Record::Auditor(r) => self.push_auditor(r),
        }
    }

    pub fn build(self) -> Result<Dataset> {
        let mut items = Vec::with_capacity(self.items.len());
        for mut pending in self.items {
            pending.responses.sort_by_key(|r| r.0);
            let mut seen = BTreeSet::new();
            for (pos, (arrival, worker, _)) in pending.responses.iter().enumerate() {
                if !seen.insert(*worker) {
                    return Err(Error::Validation(format!(
                        "worker {} labelled item {} more than once",
                        self.workers[*worker], pending.id
                    )));
                }
                if *arrival as usize != pos {
                    return Err(Error::Validation(format!(
                        "item {} has arrival indices that are not 0..{} without gaps",
                        pending.id,
                        pending.responses.len()
                    )));
                }
            }
            items.push(Item {
                id: pending.id,
                responses: pending
                    .responses
                    .into_iter()
                    .map(|(_, worker, label)| Response { worker, label })
                    .collect(),
                auditor: pending.auditor,
            });
        }
        let meta = collect_meta(&items, self.grid);
        Ok(Dataset {
            kind: self.kind,
            worker_items: index_worker_items(self.workers.len(), &items),
            workers: self.workers,
            worker_index: self.worker_index,
            items,
            meta,
        })
    }
}

fn collect_meta(items: &[Item], grid: Option<(u32, u32)>) -> DatasetMeta {
    let mut categories = BTreeSet::new();
    let mut topics = BTreeSet::new();
    let mut roots = BTreeSet::new();
    let labels = items
        .iter()
        .flat_map(|it| it.responses.iter().map(|r| &r.label).chain(it.auditor.iter()));
    for label in labels {
        match label {
            Label::Categorical(c) => {
                categories.insert(c.clone());
            }
            Label::LabelSet(s) => topics.extend(s.iter().cloned()),
            Label::TreePath(p) => {
                roots.insert(p[0].clone());
            }
            _ => {}
        }
    }
    DatasetMeta {
        categories: categories.into_iter().collect(),
        topics: topics.into_iter().collect(),
        roots: roots.into_iter().collect(),
        grid,
    }
}

/// Reads annotation and auditor records, one JSON object per line. Blank
/// lines are skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = Record::parse(&line).map_err(|e| Error::format(n + 1, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

/// Builds a dataset from annotation records plus separate auditor records.
pub fn ingest<A, Z>(records: A, auditor: Z) -> Result<Dataset>
where
    A: IntoIterator<Item = Record>,
    Z: IntoIterator<Item = AuditorRecord>,
{
    let mut builder = DatasetBuilder::new();
    for record in records {
        builder.push(record)?;
    }
    for record in auditor {
        builder.push_auditor(record)?;
    }
    builder.build()
}

/// Parses auditor / truth records only.
pub fn read_truth<R: BufRead>(reader: R) -> Result<HashMap<String, Label>> {
    let mut out = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: AuditorRecord =
            serde_json::from_str(&line).map_err(|e| Error::format(n + 1, e.to_string()))?;
        out.insert(r.item, r.z);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write, T: Serialize>(
    mut writer: W,
    records: impl IntoIterator<Item = T>,
) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, &r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Splits by item into `(train, test)`. The test side receives
/// `round(test_fraction · n)` items, clamped so both sides are non-empty.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.n_items();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} item(s) into two non-empty sides"
        )));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
