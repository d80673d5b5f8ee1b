//! Builders shared by unit tests.

use std::collections::BTreeMap;

use crate::dataset::{Annotation, AuditorRecord, Dataset, DatasetBuilder};
use crate::label::Label;

/// Categorical dataset from `(item, worker, label)` rows in arrival order,
/// plus `(item, auditor label)` pairs.
pub fn cat_dataset(rows: &[(&str, &str, &str)], truth: &[(&str, &str)]) -> Dataset {
    labelled_dataset(
        &rows.iter().map(|(i, w, l)| (*i, *w, Label::cat(*l))).collect::<Vec<_>>(),
        &truth.iter().map(|(i, z)| (*i, Label::cat(*z))).collect::<Vec<_>>(),
    )
}

pub fn labelled_dataset(rows: &[(&str, &str, Label)], truth: &[(&str, Label)]) -> Dataset {
    let mut b = DatasetBuilder::new();
    let mut arrivals: BTreeMap<String, u32> = BTreeMap::new();
    for (item, worker, label) in rows {
        let a = arrivals.entry(item.to_string()).or_default();
        b.push_annotation(Annotation {
            item: item.to_string(),
            worker: worker.to_string(),
            arrival: *a,
            label: label.clone(),
        })
        .unwrap();
        *a += 1;
    }
    for (item, z) in truth {
        b.push_auditor(AuditorRecord {
            item: item.to_string(),
            z: z.clone(),
        })
        .unwrap();
    }
    b.build().unwrap()
}
