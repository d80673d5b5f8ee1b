//! Type-conditional competence: the agreement estimator applied separately to
//! each label type, and the closed-form slope/intercept linking expected
//! conditional agreement to conditional accuracy.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{EstimatorKind, Line, Model};
use crate::oak::{self, calibrate, calibration_points, cell_stats, shrink, LearnConfig};
use crate::partition::Partitioner;

/// Learns the unconditional block plus one block per label type.
pub fn poak_learn(ds: &crate::dataset::Dataset, cfg: &LearnConfig, partitioner: Partitioner) -> Result<Model> {
    cfg.validate()?;
    partitioner.validate()?;
    oak::check_kind(ds, &cfg.sim)?;
    let tallies = oak::tally(ds, &cfg.sim, Some(&partitioner))?;
    let (mut workers, line, global_mean) = oak::overall_block(ds, &tallies, cfg.alpha_semi)?;

    let k = partitioner.k();
    let mut per_type_lines = BTreeMap::new();
    let mut type_means = BTreeMap::new();
    for ty in 0..k {
        let cells = (0..ds.n_workers()).map(|i| tallies.cell(i, ty));
        if cells.clone().all(|t| t.m == 0) {
            continue;
        }
        let type_line = calibrate(&calibration_points(cells.clone())).unwrap_or(line);
        per_type_lines.insert(ty, type_line);
        let (mut num, mut den) = (0.0, 0.0);
        for (i, t) in cells.enumerate() {
            if t.m == 0 {
                continue;
            }
            let Some(stats) = cell_stats(t, type_line, cfg.alpha_semi) else {
                continue;
            };
            num += stats.m as f64 * stats.c;
            den += stats.m as f64;
            workers
                .get_mut(ds.worker_id(i))
                .expect("workers with typed labels have an overall entry")
                .per_type
                .insert(ty, stats);
        }
        if den > 0.0 {
            type_means.insert(ty, num / den);
        }
    }

    let mut model = oak::oak_learn_shell(cfg, workers, line, global_mean);
    model.meta.estimator = EstimatorKind::Poak;
    model.meta.partitioner = Some(partitioner);
    model.calibration.per_type = per_type_lines;
    model.type_means = type_means;
    Ok(model)
}

/// Smoothed accuracy of a type-`ty` label from `worker`.
///
/// The per-type estimate is shrunk towards the worker's overall estimate,
/// which is itself shrunk towards the global mean using only the comparisons
/// outside this type. With a single type this is exactly the unconditional
/// estimate. A missing cell falls back to that overall prior; an unknown
/// worker gets the type mean, else the global mean.
pub fn poak_confidence(model: &Model, worker: &str, ty: Option<usize>) -> f64 {
    let Some(ty) = ty else {
        return oak::oak_confidence(model, worker);
    };
    let gamma = model.meta.gamma;
    match model.workers.get(worker) {
        None => model.type_means.get(&ty).copied().unwrap_or(model.global_mean),
        Some(w) => {
            let cell = w.per_type.get(&ty);
            let in_type = cell.map_or(0, |c| c.m_bar);
            let prior = shrink(
                w.c,
                w.m_bar.saturating_sub(in_type) as f64,
                model.global_mean,
                gamma,
            );
            match cell {
                Some(c) => shrink(c.c, c.m_bar as f64, prior, gamma),
                None => prior,
            }
        }
    }
}

/// Slope and intercept of expected type-`ell` agreement as a function of a
/// worker's type-`ell` accuracy.
///
/// `errors_into` holds the worker's probabilities of reporting `ell` for each
/// true label (the `ell` entry is ignored). `population` lists co-worker
/// confusion matrices (rows: true label, columns: reported label) with their
/// weights; coefficients are averaged over it.
pub fn conditional_ak_oracle(
    priors: &[f64],
    errors_into: &[f64],
    population: &[(f64, Vec<Vec<f64>>)],
    ell: usize,
) -> Result<(f64, f64)> {
    let k = priors.len();
    if ell >= k || errors_into.len() != k {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    check_distribution(priors, "priors")?;
    if population.is_empty() {
        return Err(Error::InvalidArgument("empty population".into()));
    }
    for (_, m) in population {
        if m.len() != k {
            return Err(Error::InvalidArgument("confusion matrix dimension mismatch".into()));
        }
        for row in m {
            check_distribution(row, "confusion row")?;
        }
    }
    let y: f64 = (0..k).filter(|&t| t != ell).map(|t| priors[t] * errors_into[t]).sum();
    if y <= 0.0 {
        return Err(Error::Degenerate(format!(
            "worker never reports type {ell} in error; the linear relation is undefined"
        )));
    }
    let total: f64 = population.iter().map(|p| p.0).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("population weights must sum to a positive value".into()));
    }
    let (mut alpha, mut beta) = (0.0, 0.0);
    for (w, m) in population {
        let cross: f64 = (0..k)
            .filter(|&t| t != ell)
            .map(|t| priors[t] * errors_into[t] * m[t][ell])
            .sum();
        let b = cross / y;
        alpha += w * (m[ell][ell] - b);
        beta += w * b;
    }
    Ok((alpha / total, beta / total))
}

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{what} must be a probability vector")));
    }
    Ok(())
}

/// The per-type line actually used for `ty` (unconditional when absent).
pub fn type_line(model: &Model, ty: usize) -> Line {
    model
        .calibration
        .per_type
        .get(&ty)
        .copied()
        .unwrap_or_else(|| model.calibration.line())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::cat_dataset;
    use crate::model::{CellStats, WorkerModel};
    use crate::oak::{oak_confidence, oak_learn};
    use crate::similarity::SimilarityFn;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fixture() -> crate::dataset::Dataset {
        cat_dataset(
            &[
                ("1", "a", "A"), ("1", "b", "A"), ("1", "c", "B"),
                ("2", "a", "B"), ("2", "b", "B"),
                ("3", "a", "A"), ("3", "c", "A"),
                ("4", "b", "B"), ("4", "c", "A"), ("4", "a", "B"),
            ],
            &[("1", "A"), ("4", "B")],
        )
    }

    #[test]
    fn single_cell_matches_unconditional() {
        let ds = fixture();
        let cfg = LearnConfig::new(SimilarityFn::Hamming);
        let oak = oak_learn(&ds, &cfg).unwrap();
        let poak = poak_learn(&ds, &cfg, Partitioner::Single).unwrap();
        for (id, w) in &oak.workers {
            let cell = &poak.workers[id].per_type[&0];
            assert_eq!(cell.c, w.c);
            assert_eq!(cell.m_bar, w.m_bar);
            assert_eq!(poak_confidence(&poak, id, Some(0)), oak_confidence(&oak, id));
        }
        assert_eq!(poak_confidence(&poak, "nobody", Some(0)), oak_confidence(&oak, "nobody"));
    }

    #[test]
    fn per_type_counts_sum_to_overall() {
        let ds = fixture();
        let p = Partitioner::default_for(ds.label_kind().unwrap(), ds.meta());
        let m = poak_learn(&ds, &LearnConfig::new(SimilarityFn::Hamming), p).unwrap();
        for w in m.workers.values() {
            assert_eq!(w.per_type.values().map(|c| c.m_bar).sum::<u64>(), w.m_bar);
            assert_eq!(w.per_type.values().map(|c| c.m).sum::<u64>(), w.m);
            for c in w.per_type.values() {
                let pi = c.pi.unwrap();
                assert!((0.0..=1.0).contains(&pi));
            }
        }
    }

    fn hand_model(c: f64, m_bar: u64, cell: Option<(f64, u64)>, global_mean: f64) -> Model {
        let mut m = oak_learn(&fixture(), &LearnConfig::new(SimilarityFn::Hamming)).unwrap();
        let mut w = WorkerModel::from_stats(CellStats { c, m_bar, m: m_bar, m_star: 0, pi: Some(c), c0: None });
        if let Some((cc, n)) = cell {
            w.per_type.insert(1, CellStats { c: cc, m_bar: n, m: n, m_star: 0, pi: Some(cc), c0: None });
        }
        m.workers.insert("w".into(), w);
        m.global_mean = global_mean;
        m.type_means.insert(1, 0.3);
        m.meta.gamma = 10.0;
        m
    }

    #[test]
    fn smoothing_towards_worker_estimate() {
        let m = hand_model(0.6, 50, Some((0.9, 30)), 0.6);
        assert_abs_diff_eq!(poak_confidence(&m, "w", Some(1)), 0.825, epsilon = 1e-12);
        // Unseen cell: the worker's own overall estimate.
        assert_abs_diff_eq!(poak_confidence(&m, "w", Some(0)), 0.6, epsilon = 1e-12);
        // Unknown worker: type mean, else global mean.
        assert_eq!(poak_confidence(&m, "x", Some(1)), 0.3);
        assert_eq!(poak_confidence(&m, "x", Some(0)), 0.6);
    }

    #[test]
    fn oracle_examples() {
        let pop = vec![(1.0, vec![vec![0.8, 0.2], vec![0.3, 0.7]])];
        let (a, b) = conditional_ak_oracle(&[0.5, 0.5], &[0.0, 0.2], &pop, 0).unwrap();
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.3, epsilon = 1e-12);

        let perfect = vec![(1.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]])];
        let (a, b) = conditional_ak_oracle(&[0.5, 0.5], &[0.0, 0.4], &perfect, 0).unwrap();
        assert_eq!((a, b), (1.0, 0.0));

        assert!(matches!(
            conditional_ak_oracle(&[0.5, 0.5], &[0.7, 0.0], &pop, 0),
            Err(Error::Degenerate(_))
        ));
    }

    fn stochastic(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01..1.0f64, k).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    fn matrix(k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(stochastic(k), k)
    }

    proptest! {
        #[test]
        fn reciprocal_split_identity(z in 1e-6..1e6f64, y in 1e-6..1e6f64) {
            let lhs = 1.0 / (z + y);
            let rhs = (-1.0 / y) * z / (z + y) + 1.0 / y;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 / y).max(lhs));
        }

        /// Exact expected agreement, enumerated over the true label, equals
        /// the oracle's line evaluated at the exact conditional accuracy.
        #[test]
        fn oracle_line_matches_enumeration(
            (k, q, worker, pop, weights, ell) in (2..5usize).prop_flat_map(|k| (
                Just(k), stochastic(k), matrix(k),
                prop::collection::vec(matrix(k), 1..4),
                prop::collection::vec(0.1..1.0f64, 3),
                0..k,
            ))
        ) {
            let _ = k;
            let population: Vec<(f64, Vec<Vec<f64>>)> =
                pop.into_iter().zip(weights).map(|(m, w)| (w, m)).collect();
            let errors: Vec<f64> = worker.iter().map(|row| row[ell]).collect();
            let (alpha, beta) = conditional_ak_oracle(&q, &errors, &population, ell).unwrap();

            let report: f64 = (0..q.len()).map(|t| q[t] * worker[t][ell]).sum();
            let c = q[ell] * worker[ell][ell] / report;
            let wsum: f64 = population.iter().map(|p| p.0).sum();
            let expected: f64 = (0..q.len())
                .map(|t| {
                    let post = q[t] * worker[t][ell] / report;
                    let agree: f64 = population.iter().map(|(w, m)| w * m[t][ell]).sum::<f64>() / wsum;
                    post * agree
                })
                .sum();
            prop_assert!((alpha * c + beta - expected).abs() < 1e-12);
        }
    }
}
