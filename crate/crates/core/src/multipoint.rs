//! Sequential label collection: the stop rule over per-step thresholds and
//! the logit-space correction applied once two or more labels are in.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Item};
use crate::error::{Error, Result};
use crate::estimate::{Estimator, PredictedItem};
use crate::irt::{g, g_inv};
use crate::label::Label;

/// Accuracies are kept this far from 0 and 1 before taking logits.
pub const CLAMP: f64 = 1e-6;

/// Logit-space correction `δ + s̄·ε` for one decision point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub delta: f64,
    pub epsilon: f64,
}

fn clamp_acc(x: f64) -> f64 {
    x.clamp(CLAMP, 1.0 - CLAMP)
}

/// Applies a learned shift to an accuracy estimate given the mean agreement
/// `agreement` between the aggregate and the collected labels.
pub fn adjust(confidence: f64, agreement: f64, shift: Option<&Shift>) -> f64 {
    match shift {
        None => confidence,
        Some(s) => g(g_inv(clamp_acc(confidence)) + s.delta + agreement * s.epsilon),
    }
}

/// Aggregate and confidence after the first `t` labels of an item.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub label: Label,
    /// Estimate before adjustment.
    pub raw: f64,
    /// Estimate after the decision-point adjustment (equal to `raw` at t = 1).
    pub confidence: f64,
    pub agreement: f64,
}

/// Stage after the first `t` (≥ 1) labels.
pub fn stage(est: &Estimator<'_>, labels: &[(&str, &Label)], t: usize) -> Result<Stage> {
    let e = est.estimate(&labels[..t])?;
    let confidence = if t >= 2 {
        adjust(e.confidence, e.agreement, est.model().multipoint.get(&t))
    } else {
        e.confidence
    };
    Ok(Stage {
        label: e.label,
        raw: e.confidence,
        confidence,
        agreement: e.agreement,
    })
}

/// Every stage `t = 1..=n` of an item.
pub fn trace(est: &Estimator<'_>, labels: &[(&str, &Label)]) -> Result<Vec<Stage>> {
    (1..=labels.len()).map(|t| stage(est, labels, t)).collect()
}

/// Whether collection stops after `t` labels given that stage's confidence.
/// A threshold of 1 or more never stops early.
fn stops(confidence: f64, tau: f64) -> bool {
    tau < 1.0 && confidence >= tau
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("at least one threshold is required".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("threshold {t} is outside [0, 1]")));
    }
    Ok(())
}

/// Number of labels consumed, given per-stage confidences. Decision point `t`
/// compares stage `t` against `thresholds[t - 1]`; if no decision point stops
/// collection, every label is used.
pub fn labels_used(confidences: impl IntoIterator<Item = f64>, n: usize, thresholds: &[f64]) -> usize {
    for (t, (c, tau)) in confidences.into_iter().zip(thresholds).enumerate().take(n) {
        if stops(c, *tau) {
            return t + 1;
        }
    }
    n
}

/// Collects labels one at a time until a decision point is confident enough.
pub fn run_pipeline(
    item_id: &str,
    labels: &[(&str, &Label)],
    est: &Estimator<'_>,
    thresholds: &[f64],
) -> Result<PredictedItem> {
    check_thresholds(thresholds)?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument(format!("item {item_id} has no labels")));
    }
    let n = labels.len();
    for (t, tau) in (1..=n).zip(thresholds) {
        let s = stage(est, labels, t)?;
        if stops(s.confidence, *tau) || t == n {
            return Ok(PredictedItem {
                item_id: item_id.to_string(),
                label: s.label,
                confidence: s.confidence,
                labels_used: t,
            });
        }
    }
    let s = stage(est, labels, n)?;
    Ok(PredictedItem {
        item_id: item_id.to_string(),
        label: s.label,
        confidence: s.confidence,
        labels_used: n,
    })
}

/// Ordinary least squares `y = a + b x`; intercept-only when `x` is constant.
fn ols(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-12 * n {
        return (my, 0.0);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// How decision-point shifts are fitted to audited items.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftFit {
    /// Maximum likelihood of the observed accuracies under
    /// `g(g⁻¹(Ĉ) + δ + s̄·ε)`.
    #[default]
    Likelihood,
    /// Least squares of `g⁻¹(Ĉ) − g⁻¹(c*)` on `s̄`, with `c*` clamped.
    LogitOls,
}

/// One audited item at a decision point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftPoint {
    pub confidence: f64,
    pub agreement: f64,
    /// Similarity of the aggregate to the auditor label.
    pub actual: f64,
}

impl ShiftFit {
    /// Identity when fewer than two points are given.
    pub fn fit(self, points: &[ShiftPoint]) -> Shift {
        if points.len() < 2 {
            return Shift { delta: 0.0, epsilon: 0.0 };
        }
        match self {
            ShiftFit::LogitOls => {
                let xy: Vec<(f64, f64)> = points
                    .iter()
                    .map(|p| (p.agreement, g_inv(clamp_acc(p.confidence)) - g_inv(clamp_acc(p.actual))))
                    .collect();
                let (a, b) = ols(&xy);
                Shift { delta: -a, epsilon: -b }
            }
            ShiftFit::Likelihood => likelihood_fit(points),
        }
    }
}

/// Tiny ridge keeping the Newton steps finite when outcomes separate.
const RIDGE: f64 = 1e-6;
const NEWTON_ROUNDS: usize = 100;

fn neg_log_lik(points: &[ShiftPoint], d: f64, e: f64) -> f64 {
    let nll: f64 = points
        .iter()
        .map(|p| {
            // ln g(x) = −ln(1 + eˣ), ln(1 − g(x)) = x − ln(1 + eˣ)
            let x = g_inv(clamp_acc(p.confidence)) + d + e * p.agreement;
            let softplus = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
            softplus - (1.0 - p.actual) * x
        })
        .sum();
    nll + 0.5 * RIDGE * (d * d + e * e)
}

/// Newton's method with step halving on the penalized Bernoulli likelihood.
/// Agreement that never varies gives an intercept-only fit.
fn likelihood_fit(points: &[ShiftPoint]) -> Shift {
    let n = points.len() as f64;
    let ms = points.iter().map(|p| p.agreement).sum::<f64>() / n;
    let vary = points.iter().map(|p| (p.agreement - ms).powi(2)).sum::<f64>() > 1e-12 * n;
    let (mut d, mut e) = (0.0, 0.0);
    let mut f = neg_log_lik(points, d, e);
    for _ in 0..NEWTON_ROUNDS {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (RIDGE * d, RIDGE * e, RIDGE, 0.0, RIDGE);
        for p in points {
            let x = g_inv(clamp_acc(p.confidence)) + d + e * p.agreement;
            let q = g(x);
            let r = p.actual - q;
            let w = q * (1.0 - q);
            g0 += r;
            g1 += r * p.agreement;
            h00 += w;
            h01 += w * p.agreement;
            h11 += w * p.agreement * p.agreement;
        }
        let (sd, se) = if vary {
            let det = h00 * h11 - h01 * h01;
            ((h11 * g0 - h01 * g1) / det, (h00 * g1 - h01 * g0) / det)
        } else {
            (g0 / h00, 0.0)
        };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-8 {
            let (nd, ne) = (d - t * sd, e - t * se);
            let nf = neg_log_lik(points, nd, ne);
            if nf <= f {
                (d, e, f, improved) = (nd, ne, nf, true);
                break;
            }
            t *= 0.5;
        }
        if !improved || (t * sd).abs().max((t * se).abs()) < 1e-10 {
            break;
        }
    }
    Shift { delta: d, epsilon: e }
}

/// Audited items with at least `t` labels, scored after their first `t`.
pub fn shift_points(train: &Dataset, est: &Estimator<'_>, t: usize) -> Result<Vec<ShiftPoint>> {
    let sim = &est.aggregator().sim;
    train
        .items()
        .par_iter()
        .filter(|it| it.auditor.is_some() && it.responses.len() >= t)
        .map(|it| {
            let labels = item_labels(train, it);
            let e = est.estimate(&labels[..t])?;
            Ok(ShiftPoint {
                confidence: e.confidence,
                agreement: e.agreement,
                actual: sim.sim(&e.label, it.auditor.as_ref().expect("filtered"))?,
            })
        })
        .collect()
}

/// Learns the shift for each decision point `t = 2..=max_t` from audited
/// training items. Decision points with fewer than two usable items are left
/// unadjusted.
pub fn learn_multipoint(
    train: &Dataset,
    est: &Estimator<'_>,
    max_t: usize,
    fit: ShiftFit,
) -> Result<BTreeMap<usize, Shift>> {
    (2..=max_t)
        .map(|t| Ok((t, fit.fit(&shift_points(train, est, t)?))))
        .collect()
}

/// `(worker id, label)` pairs of an item in arrival order.
pub fn item_labels<'a>(ds: &'a Dataset, item: &'a Item) -> Vec<(&'a str, &'a Label)> {
    let ids = ds.worker_ids();
    item.responses
        .iter()
        .map(|r| (ids[r.worker].as_str(), &r.label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::AggregationMode;
    use crate::fixtures::cat_dataset;
    use crate::model::EstimatorKind;
    use crate::oak::{oak_learn, LearnConfig};
    use crate::similarity::SimilarityFn;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn adjust_examples() {
        let zero = Shift { delta: 0.0, epsilon: 0.0 };
        assert_abs_diff_eq!(adjust(0.5, 0.7, Some(&zero)), 0.5, epsilon = 1e-15);
        let s = Shift { delta: 0.0, epsilon: -(3f64.ln()) };
        assert_abs_diff_eq!(adjust(0.5, 1.0, Some(&s)), 0.75, epsilon = 1e-12);
        let hi = adjust(1.0, 1.0, Some(&zero));
        assert!(hi.is_finite() && (hi - (1.0 - CLAMP)).abs() < 1e-12);
        assert_eq!(adjust(0.3, 0.2, None), 0.3);
    }

    #[test]
    fn ols_fits() {
        let (a, b) = ols(&[(0.5, 1.0), (1.0, 1.0), (0.7, 1.0)]);
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-12);
        let (a, b) = ols(&[(1.0, 2.0), (1.0, 4.0)]);
        assert_eq!((a, b), (3.0, 0.0));
    }

    fn fixture() -> (Dataset, crate::model::Model) {
        let ds = cat_dataset(
            &[
                ("1", "a", "A"), ("1", "b", "A"), ("1", "c", "B"),
                ("2", "a", "B"), ("2", "b", "B"), ("2", "c", "B"),
                ("3", "c", "A"), ("3", "a", "A"), ("3", "b", "A"),
            ],
            &[("1", "A"), ("2", "B"), ("3", "A")],
        );
        let m = oak_learn(&ds, &LearnConfig::new(SimilarityFn::Hamming)).unwrap();
        (ds, m)
    }

    #[test]
    fn threshold_boundaries() {
        let (ds, m) = fixture();
        let est = Estimator::new(&m, EstimatorKind::Oak, AggregationMode::Weight).unwrap();
        let labels = item_labels(&ds, &ds.items()[0]);
        assert_eq!(run_pipeline("1", &labels, &est, &[0.0]).unwrap().labels_used, 1);
        assert_eq!(run_pipeline("1", &labels, &est, &[1.0, 1.0]).unwrap().labels_used, 3);
        assert_eq!(run_pipeline("1", &labels, &est, &[1.0]).unwrap().labels_used, 3);
        let first = stage(&est, &labels, 1).unwrap().confidence;
        let p = run_pipeline("1", &labels, &est, &[first]).unwrap();
        assert_eq!(p.labels_used, 1);
        assert!(run_pipeline("1", &labels, &est, &[1.5]).is_err());
        assert!(run_pipeline("1", &labels, &est, &[]).is_err());
    }

    #[test]
    fn pipeline_agrees_with_trace() {
        let (ds, m) = fixture();
        let est = Estimator::new(&m, EstimatorKind::Oak, AggregationMode::Weight).unwrap();
        for item in ds.items() {
            let labels = item_labels(&ds, item);
            let tr = trace(&est, &labels).unwrap();
            for tau in [0.0, 0.3, 0.6, 0.9, 1.0] {
                let thresholds = [tau, tau, tau];
                let used = labels_used(tr.iter().map(|s| s.confidence), labels.len(), &thresholds);
                let p = run_pipeline(&item.id, &labels, &est, &thresholds).unwrap();
                assert_eq!(p.labels_used, used);
                assert_eq!(p.label, tr[used - 1].label);
            }
        }
    }

    fn shifted(points: &[(f64, f64)], r: f64) -> Vec<ShiftPoint> {
        points
            .iter()
            .map(|&(confidence, agreement)| ShiftPoint {
                confidence,
                agreement,
                actual: g(g_inv(confidence) - r),
            })
            .collect()
    }

    #[test]
    fn constant_residual_is_cancelled_by_the_intercept() {
        let pts = shifted(&[(0.6, 0.5), (0.7, 0.8), (0.9, 1.0), (0.5, 0.5)], 0.4);
        for fit in [ShiftFit::LogitOls, ShiftFit::Likelihood] {
            let s = fit.fit(&pts);
            assert_abs_diff_eq!(s.delta, -0.4, epsilon = 1e-4);
            assert_abs_diff_eq!(s.epsilon, 0.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn calibrated_estimates_need_no_shift() {
        let pts = shifted(&[(0.6, 0.5), (0.7, 0.8), (0.9, 1.0), (0.3, 0.2)], 0.0);
        for fit in [ShiftFit::LogitOls, ShiftFit::Likelihood] {
            let s = fit.fit(&pts);
            assert!(s.delta.abs() < 1e-4 && s.epsilon.abs() < 1e-4, "{fit:?}: {s:?}");
        }
    }

    #[test]
    fn likelihood_fit_recovers_a_linear_shift() {
        // Fractional outcomes equal to the target probabilities.
        let target = Shift { delta: 0.3, epsilon: -1.2 };
        let mut pts = Vec::new();
        for (conf, agree) in [(0.6, 0.5), (0.6, 1.0), (0.8, 0.5), (0.8, 1.0), (0.7, 0.75)] {
            let p = adjust(conf, agree, Some(&target));
            pts.push(ShiftPoint { confidence: conf, agreement: agree, actual: p });
        }
        let s = ShiftFit::Likelihood.fit(&pts);
        assert_abs_diff_eq!(s.delta, target.delta, epsilon = 1e-3);
        assert_abs_diff_eq!(s.epsilon, target.epsilon, epsilon = 1e-3);
    }

    #[test]
    fn separated_outcomes_stay_finite() {
        let pts: Vec<ShiftPoint> = (0..20)
            .map(|i| ShiftPoint {
                confidence: 0.6,
                agreement: if i % 2 == 0 { 1.0 } else { 0.5 },
                actual: 1.0,
            })
            .collect();
        let s = ShiftFit::Likelihood.fit(&pts);
        assert!(s.delta.is_finite() && s.epsilon.is_finite());
        assert!(adjust(0.6, 1.0, Some(&s)) > 0.99);
    }

    #[test]
    fn too_few_items_leave_identity() {
        let (ds, m) = fixture();
        let est = Estimator::new(&m, EstimatorKind::Oak, AggregationMode::Weight).unwrap();
        let shifts = learn_multipoint(&ds.subset(&[0]), &est, 3, ShiftFit::Likelihood).unwrap();
        assert_eq!(shifts[&2], Shift { delta: 0.0, epsilon: 0.0 });
        assert_eq!(shifts.len(), 2);
    }

    proptest! {
        #[test]
        fn adjust_is_monotone(c in 0.0..1.0f64, dc in 0.001..0.5f64, s in 0.0..1.0f64, d in -3.0..3.0f64, e in -3.0..3.0f64) {
            let shift = Shift { delta: d, epsilon: e };
            let hi = (c + dc).min(1.0 - CLAMP);
            prop_assert!(adjust(hi, s, Some(&shift)) >= adjust(c, s, Some(&shift)));
        }

        #[test]
        fn fewer_labels_as_thresholds_drop(
            conf in prop::collection::vec(0.0..1.0f64, 1..5),
            taus in prop::collection::vec(0.0..1.0f64, 1..5),
            which in 0usize..4, drop in 0.0..1.0f64,
        ) {
            let n = conf.len();
            let before = labels_used(conf.iter().copied(), n, &taus);
            let mut lower = taus.clone();
            let i = which % lower.len();
            lower[i] *= drop;
            prop_assert!(labels_used(conf.iter().copied(), n, &lower) <= before);
        }
    }
}
