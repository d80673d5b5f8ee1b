//! Agreement-based competence learning: average similarity to co-labels,
//! supervised accuracy on audited items, the calibration line between the
//! two, and the smoothed single-label accuracy estimate.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::aggregate::AggregationMode;
use crate::dataset::{Dataset, Item};
use crate::error::{Error, Result};
use crate::model::{
    Calibration, CellStats, EstimatorKind, Line, Model, ModelMeta, WorkerModel, MODEL_VERSION,
};
use crate::partition::Partitioner;
use crate::similarity::SimilarityFn;

/// Items per parallel work unit. Fixed so float sums do not depend on the
/// thread count.
const CHUNK: usize = 4096;

/// Raw per-worker (or per worker-and-type) sums collected in one data pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub sim_sum: f64,
    pub pairs: u64,
    pub sup_sum: f64,
    pub audited: u64,
    pub m: u64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.sim_sum += o.sim_sum;
        self.pairs += o.pairs;
        self.sup_sum += o.sup_sum;
        self.audited += o.audited;
        self.m += o.m;
    }

    pub fn pi(&self) -> Option<f64> {
        (self.pairs > 0).then(|| self.sim_sum / self.pairs as f64)
    }

    pub fn c0(&self) -> Option<f64> {
        (self.audited > 0).then(|| self.sup_sum / self.audited as f64)
    }
}

/// Per-worker tallies, and per (worker, type) tallies when a partitioner is
/// given (row-major, `k` columns).
#[derive(Debug, Clone)]
pub struct Tallies {
    pub overall: Vec<Tally>,
    pub per_type: Vec<Tally>,
    pub k: usize,
}

impl Tallies {
    pub fn cell(&self, worker: usize, ty: usize) -> &Tally {
        &self.per_type[worker * self.k + ty]
    }
}

fn tally_item(
    item: &Item,
    sim: &SimilarityFn,
    partitioner: Option<&Partitioner>,
    k: usize,
    overall: &mut [Tally],
    per_type: &mut [Tally],
) -> Result<()> {
    let labels: Vec<_> = item.responses.iter().map(|r| &r.label).collect();
    let n = labels.len();
    let matrix = sim.matrix(&labels)?;
    for (a, r) in item.responses.iter().enumerate() {
        let mut t = Tally {
            m: 1,
            pairs: (n - 1) as u64,
            ..Tally::default()
        };
        for b in (0..n).filter(|&b| b != a) {
            t.sim_sum += matrix[a * n + b];
        }
        if let Some(z) = &item.auditor {
            t.sup_sum = sim.sim(&r.label, z)?;
            t.audited = 1;
        }
        overall[r.worker].add(&t);
        if let Some(ty) = partitioner.and_then(|p| p.type_of(&r.label)) {
            per_type[r.worker * k + ty].add(&t);
        }
    }
    Ok(())
}

/// One pass over the data collecting co-label and auditor sums.
pub fn tally(ds: &Dataset, sim: &SimilarityFn, partitioner: Option<&Partitioner>) -> Result<Tallies> {
    let n_workers = ds.n_workers();
    let k = partitioner.map_or(0, Partitioner::k);
    let partials: Vec<Result<(Vec<Tally>, Vec<Tally>)>> = ds
        .items()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut overall = vec![Tally::default(); n_workers];
            let mut per_type = vec![Tally::default(); n_workers * k];
            for item in chunk {
                tally_item(item, sim, partitioner, k, &mut overall, &mut per_type)?;
            }
            Ok((overall, per_type))
        })
        .collect();
    let mut out = Tallies {
        overall: vec![Tally::default(); n_workers],
        per_type: vec![Tally::default(); n_workers * k],
        k,
    };
    for part in partials {
        let (overall, per_type) = part?;
        for (acc, t) in out.overall.iter_mut().zip(&overall) {
            acc.add(t);
        }
        for (acc, t) in out.per_type.iter_mut().zip(&per_type) {
            acc.add(t);
        }
    }
    Ok(out)
}

/// Average similarity to co-labels and the number of comparisons behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementStats {
    pub pi: Option<f64>,
    pub m_bar: u64,
}

/// `(π_i, m̄_i)` per worker index.
pub fn compute_avg_similarity(ds: &Dataset, sim: &SimilarityFn) -> Result<Vec<AgreementStats>> {
    Ok(tally(ds, sim, None)?
        .overall
        .iter()
        .map(|t| AgreementStats {
            pi: t.pi(),
            m_bar: t.pairs,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupervisedStats {
    pub c0: Option<f64>,
    pub m_star: u64,
}

/// `(ĉ⁰_i, m*_i)` per worker index.
pub fn compute_supervised_accuracy(ds: &Dataset, sim: &SimilarityFn) -> Result<Vec<SupervisedStats>> {
    Ok(tally(ds, sim, None)?
        .overall
        .iter()
        .map(|t| SupervisedStats {
            c0: t.c0(),
            m_star: t.audited,
        })
        .collect())
}

/// Weighted least-squares line through `(x, y, weight)` points.
///
/// Returns `None` when fewer than two points carry positive weight, when the
/// `x` values do not vary, or when the fitted slope is negative.
pub fn calibrate(points: &[(f64, f64, f64)]) -> Option<Line> {
    let used: Vec<_> = points.iter().filter(|p| p.2 > 0.0).collect();
    if used.len() < 2 {
        return None;
    }
    let w: f64 = used.iter().map(|p| p.2).sum();
    let mx = used.iter().map(|p| p.2 * p.0).sum::<f64>() / w;
    let my = used.iter().map(|p| p.2 * p.1).sum::<f64>() / w;
    let sxx: f64 = used.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let spread = used.iter().map(|p| (p.0 - mx).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 || sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if slope < 0.0 {
        return None;
    }
    Some(Line {
        slope,
        intercept: my - slope * mx,
    })
}

/// Blends the supervised estimate with the calibrated agreement estimate;
/// each auditor comparison counts `alpha` times. Clamped to `[0, 1]`.
pub fn combine_semi_supervised(
    calibrated: Option<f64>,
    c0: Option<f64>,
    m: u64,
    m_star: u64,
    alpha: f64,
) -> Option<f64> {
    let c = match (calibrated, c0) {
        (None, None) => return None,
        (Some(l), None) => l,
        (None, Some(c0)) => c0,
        (Some(l), Some(c0)) => {
            let ws = alpha * m_star as f64;
            let wl = m as f64;
            if ws + wl > 0.0 {
                (ws * c0 + wl * l) / (ws + wl)
            } else {
                c0
            }
        }
    };
    Some(c.clamp(0.0, 1.0))
}

/// Pulls `estimate`, backed by `n` samples, towards `prior` with strength
/// `gamma`.
pub fn shrink(estimate: f64, n: f64, prior: f64, gamma: f64) -> f64 {
    if n <= 0.0 || n + gamma <= 0.0 {
        return prior;
    }
    (n * estimate + gamma * prior) / (n + gamma)
}

/// Competence for every worker cell given its tally and calibration line.
pub(crate) fn cell_stats(t: &Tally, line: Line, alpha: f64) -> Option<CellStats> {
    let pi = t.pi();
    let c0 = t.c0();
    let c = combine_semi_supervised(pi.map(|p| line.apply(p)), c0, t.m, t.audited, alpha)?;
    Some(CellStats {
        c,
        m_bar: t.pairs,
        m: t.m,
        m_star: t.audited,
        pi,
        c0,
    })
}

pub(crate) fn calibration_points<'a>(tallies: impl Iterator<Item = &'a Tally>) -> Vec<(f64, f64, f64)> {
    tallies
        .filter_map(|t| Some((t.pi()?, t.c0()?, t.audited as f64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub sim: SimilarityFn,
    pub gamma: f64,
    pub alpha_semi: f64,
}

impl LearnConfig {
    pub fn new(sim: SimilarityFn) -> Self {
        LearnConfig {
            sim,
            gamma: crate::model::DEFAULT_GAMMA,
            alpha_semi: crate::model::DEFAULT_ALPHA_SEMI,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.alpha_semi >= 1.0 && self.alpha_semi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha_semi must be at least 1, got {}",
                self.alpha_semi
            )));
        }
        Ok(())
    }
}

/// Unconditional block built from tallies: worker entries, calibration line
/// and the global mean.
pub(crate) fn overall_block(
    ds: &Dataset,
    tallies: &Tallies,
    alpha: f64,
) -> Result<(BTreeMap<String, WorkerModel>, Line, f64)> {
    let line = calibrate(&calibration_points(tallies.overall.iter())).unwrap_or(Line::IDENTITY);
    let cells: Vec<Option<CellStats>> = tallies.overall.iter().map(|t| cell_stats(t, line, alpha)).collect();
    let (num, den) = cells
        .iter()
        .flatten()
        .fold((0.0, 0.0), |(n, d), s| (n + s.m as f64 * s.c, d + s.m as f64));
    if den <= 0.0 {
        return Err(Error::Degenerate(
            "no worker shares an item with another worker or has audited items".into(),
        ));
    }
    let global_mean = num / den;
    let mut workers = BTreeMap::new();
    for (i, (t, cell)) in tallies.overall.iter().zip(cells).enumerate() {
        if t.m == 0 {
            continue;
        }
        let stats = cell.unwrap_or(CellStats {
            c: global_mean,
            m_bar: 0,
            m: t.m,
            m_star: t.audited,
            pi: None,
            c0: None,
        });
        workers.insert(ds.worker_id(i).to_string(), WorkerModel::from_stats(stats));
    }
    Ok((workers, line, global_mean))
}

/// Learns the unconditional model.
pub fn oak_learn(ds: &Dataset, cfg: &LearnConfig) -> Result<Model> {
    cfg.validate()?;
    check_kind(ds, &cfg.sim)?;
    let tallies = tally(ds, &cfg.sim, None)?;
    let (workers, line, global_mean) = overall_block(ds, &tallies, cfg.alpha_semi)?;
    Ok(oak_learn_shell(cfg, workers, line, global_mean))
}

/// Model holding only the unconditional block.
pub(crate) fn oak_learn_shell(
    cfg: &LearnConfig,
    workers: BTreeMap<String, WorkerModel>,
    line: Line,
    global_mean: f64,
) -> Model {
    Model {
        version: MODEL_VERSION,
        meta: ModelMeta {
            estimator: EstimatorKind::Oak,
            gamma: cfg.gamma,
            alpha_semi: cfg.alpha_semi,
            lambda: crate::model::DEFAULT_LAMBDA,
            aggregation: AggregationMode::Weight,
            partitioner: None,
            similarity: cfg.sim.clone(),
        },
        workers,
        calibration: Calibration {
            slope: line.slope,
            intercept: line.intercept,
            per_type: BTreeMap::new(),
        },
        global_mean,
        type_means: BTreeMap::new(),
        irt: None,
        multipoint: BTreeMap::new(),
    }
}

pub(crate) fn check_kind(ds: &Dataset, sim: &SimilarityFn) -> Result<()> {
    match ds.label_kind() {
        None => Err(Error::Degenerate("training data is empty".into())),
        Some(kind) if kind != sim.kind() => Err(Error::KindMismatch {
            expected: sim.kind(),
            found: kind,
        }),
        Some(_) => Ok(()),
    }
}

/// Smoothed single-label accuracy of `worker` under the unconditional model.
/// Unknown workers get the global mean.
pub fn oak_confidence(model: &Model, worker: &str) -> f64 {
    match model.workers.get(worker) {
        Some(w) => shrink(w.c, w.m_bar as f64, model.global_mean, model.meta.gamma),
        None => model.global_mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::cat_dataset as build;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn avg_similarity_two_workers() {
        let ds = build(&[("1", "w1", "A"), ("1", "w2", "A"), ("2", "w1", "B"), ("2", "w2", "A")], &[]);
        let s = compute_avg_similarity(&ds, &SimilarityFn::Hamming).unwrap();
        for w in &s {
            assert_eq!(w.m_bar, 2);
            assert_abs_diff_eq!(w.pi.unwrap(), 0.5);
        }
    }

    #[test]
    fn identical_labels_give_full_agreement() {
        let rows: Vec<_> = ["1", "2"]
            .iter()
            .flat_map(|j| ["a", "b", "c"].map(|w| (*j, w, "A")))
            .collect();
        let ds = build(&rows, &[]);
        let s = compute_avg_similarity(&ds, &SimilarityFn::Hamming).unwrap();
        assert!(s.iter().all(|w| w.pi == Some(1.0) && w.m_bar == 4));
        let m = oak_learn(&ds, &LearnConfig::new(SimilarityFn::Hamming)).unwrap();
        assert!(m.workers.values().all(|w| w.c == 1.0));
        assert_eq!(m.global_mean, 1.0);
    }

    #[test]
    fn isolated_worker_has_no_agreement() {
        let ds = build(&[("1", "w1", "A"), ("1", "w2", "A"), ("2", "w3", "B")], &[]);
        let s = compute_avg_similarity(&ds, &SimilarityFn::Hamming).unwrap();
        let w3 = ds.worker_index("w3").unwrap();
        assert_eq!(s[w3], AgreementStats { pi: None, m_bar: 0 });
        let m = oak_learn(&ds, &LearnConfig::new(SimilarityFn::Hamming)).unwrap();
        assert_eq!(m.workers["w3"].c, m.global_mean);
        assert_eq!(m.workers["w3"].m_bar, 0);
    }

    #[test]
    fn supervised_accuracy() {
        let rows = [("1", "w", "A"), ("2", "w", "A"), ("3", "w", "B"), ("4", "w", "B"), ("5", "w", "B")];
        let ds = build(&rows, &[("1", "A"), ("2", "A"), ("3", "B"), ("4", "A")]);
        let s = compute_supervised_accuracy(&ds, &SimilarityFn::Hamming).unwrap();
        assert_eq!(s[0].m_star, 4);
        assert_abs_diff_eq!(s[0].c0.unwrap(), 0.75);
        let ds = build(&rows, &[]);
        assert_eq!(compute_supervised_accuracy(&ds, &SimilarityFn::Hamming).unwrap()[0].c0, None);
    }

    #[test]
    fn calibration_examples() {
        let l = calibrate(&[(0.5, 0.5, 1.0), (0.9, 0.9, 1.0)]).unwrap();
        assert_abs_diff_eq!(l.slope, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.intercept, 0.0, epsilon = 1e-12);
        assert_eq!(calibrate(&[(0.5, 0.6, 1.0), (0.5, 0.8, 1.0)]), None);
        let l = calibrate(&[(0.6, 0.55, 1.0), (0.8, 0.75, 1.0), (1.0, 0.95, 1.0)]).unwrap();
        assert_abs_diff_eq!(l.slope, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.intercept, -0.05, epsilon = 1e-12);
        assert_eq!(calibrate(&[(0.5, 0.9, 1.0), (0.9, 0.5, 1.0)]), None);
        assert_eq!(calibrate(&[(0.5, 0.9, 1.0), (0.9, 0.5, 0.0)]), None);
    }

    #[test]
    fn semi_supervised_combination() {
        assert_abs_diff_eq!(combine_semi_supervised(Some(0.7), Some(0.9), 10, 5, 2.0).unwrap(), 0.8, epsilon = 1e-12);
        assert_eq!(combine_semi_supervised(Some(0.7), None, 10, 0, 2.0), Some(0.7));
        assert_eq!(combine_semi_supervised(None, Some(0.9), 0, 5, 2.0), Some(0.9));
        assert_eq!(combine_semi_supervised(None, None, 3, 0, 2.0), None);
        assert_eq!(combine_semi_supervised(Some(1.3), None, 3, 0, 2.0), Some(1.0));
    }

    #[test]
    fn no_auditor_labels_means_identity_calibration() {
        let ds = build(
            &[("1", "a", "A"), ("1", "b", "A"), ("1", "c", "B"), ("2", "a", "B"), ("2", "b", "B"), ("2", "c", "B")],
            &[],
        );
        let m = oak_learn(&ds, &LearnConfig::new(SimilarityFn::Hamming)).unwrap();
        assert_eq!(m.calibration.line(), Line::IDENTITY);
        for w in m.workers.values() {
            assert_eq!(Some(w.c), w.pi);
        }
        // c̄ = Σ m c / Σ m with m = 2 each.
        assert_abs_diff_eq!(m.global_mean, (0.75 + 0.75 + 0.5) / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn smoothing_example() {
        assert_abs_diff_eq!(shrink(0.9, 40.0, 0.7, 10.0), 0.86, epsilon = 1e-12);
        assert_eq!(shrink(0.9, 0.0, 0.7, 10.0), 0.7);
    }

    fn weighted_objective(points: &[(f64, f64, f64)], slope: f64, intercept: f64) -> f64 {
        points.iter().map(|(x, y, w)| w * (slope * x + intercept - y).powi(2)).sum()
    }

    proptest! {
        #[test]
        fn calibration_is_a_local_minimum(
            points in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.1..20.0f64), 2..12)
        ) {
            if let Some(l) = calibrate(&points) {
                let best = weighted_objective(&points, l.slope, l.intercept);
                for (ds, di) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3), (1e-3, 1e-3), (-1e-3, 1e-3)] {
                    prop_assert!(weighted_objective(&points, l.slope + ds, l.intercept + di) >= best - 1e-12);
                }
            }
        }

        #[test]
        fn smoothing_is_convex(c in 0.0..1.0f64, prior in 0.0..1.0f64, n in 0u64..10_000, gamma in 0.0..50.0f64) {
            let v = shrink(c, n as f64, prior, gamma);
            prop_assert!(v >= c.min(prior) - 1e-12 && v <= c.max(prior) + 1e-12);
            let more = shrink(c, (n + 1) as f64, prior, gamma);
            prop_assert!((more - c).abs() <= (v - c).abs() + 1e-12);
        }
    }
}
