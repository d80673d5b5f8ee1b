//! Threshold sweeps, cost–quality curves and their area relative to the
//! coin-flip baseline, repeated over seeded train/test re-splits.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{select_sad, AggregationMode, Aggregator};
use crate::dataset::{split, Dataset, Item};
use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::label::Label;
use crate::model::EstimatorKind;
use crate::multipoint::{item_labels, labels_used, trace};
use crate::similarity::SimilarityFn;
use crate::train::{train, TrainConfig};

pub const DEFAULT_GRID_POINTS: usize = 41;
pub const DEFAULT_BOOTSTRAP: usize = 2000;
const MIN_SPAN: f64 = 1e-12;

/// `n` evenly spaced thresholds from 0 to 1 inclusive.
pub fn default_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PoakWeight,
    PoakBau,
    OakWeight,
    OakBau,
    Poaki,
    PoakIrt,
    Sad,
    Uniform,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::PoakWeight,
        Method::PoakBau,
        Method::OakWeight,
        Method::OakBau,
        Method::Poaki,
        Method::PoakIrt,
        Method::Sad,
        Method::Uniform,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Method::PoakWeight => "poak-weight",
            Method::PoakBau => "poak-bau",
            Method::OakWeight => "oak-weight",
            Method::OakBau => "oak-bau",
            Method::Poaki => "poaki",
            Method::PoakIrt => "poak-irt",
            Method::Sad => "sad",
            Method::Uniform => "uniform",
        }
    }

    /// Estimator and aggregation for confidence-based methods; `None` for the
    /// two model-free baselines.
    pub fn estimator(self) -> Option<(EstimatorKind, AggregationMode)> {
        use AggregationMode::{Bau, Weight};
        match self {
            Method::PoakWeight => Some((EstimatorKind::Poak, Weight)),
            Method::PoakBau => Some((EstimatorKind::Poak, Bau)),
            Method::OakWeight => Some((EstimatorKind::Oak, Weight)),
            Method::OakBau => Some((EstimatorKind::Oak, Bau)),
            Method::Poaki => Some((EstimatorKind::Poaki, Weight)),
            Method::PoakIrt => Some((EstimatorKind::PoakIrt, Weight)),
            Method::Sad | Method::Uniform => None,
        }
    }

    /// Parses a comma-separated list.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("no evaluation methods given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.key() == s).ok_or_else(|| {
            let keys: Vec<&str> = Method::ALL.iter().map(|m| m.key()).collect();
            Error::InvalidArgument(format!("unknown method '{s}'; valid methods: {}", keys.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub cost: f64,
    pub quality: f64,
}

/// Endpoints of the coin-flip policy between one label and all labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub first_cost: f64,
    pub first_quality: f64,
    pub all_quality: f64,
}

impl Baseline {
    pub fn span(&self) -> f64 {
        1.0 - self.first_cost
    }

    /// Chord quality at `cost`. Both endpoints are returned exactly.
    pub fn quality_at(&self, cost: f64) -> f64 {
        if cost <= self.first_cost {
            self.first_quality
        } else if cost >= 1.0 {
            self.all_quality
        } else {
            self.first_quality + (cost - self.first_cost) / self.span() * (self.all_quality - self.first_quality)
        }
    }

    /// Expected point of the policy that takes all labels with probability `p`.
    pub fn coin_flip(&self, p: f64) -> (f64, f64) {
        let cost = if p >= 1.0 { 1.0 } else { self.first_cost + p * self.span() };
        (cost, self.quality_at(cost))
    }
}

/// Per-stage confidences and qualities of one test item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemTrace {
    pub confidences: Vec<f64>,
    pub qualities: Vec<f64>,
}

/// A test item with its ground truth.
pub struct TestItem<'a> {
    pub labels: Vec<(&'a str, &'a Label)>,
    pub truth: &'a Label,
}

/// Test items paired with ground truth, plus how many lacked it (or labels).
pub fn test_items<'a>(test: &'a Dataset, truth: &'a HashMap<String, Label>) -> (Vec<TestItem<'a>>, usize) {
    let mut out = Vec::new();
    let mut excluded = 0;
    for item in test.items() {
        match truth_of(item, truth) {
            Some(z) if !item.responses.is_empty() => out.push(TestItem {
                labels: item_labels(test, item),
                truth: z,
            }),
            _ => excluded += 1,
        }
    }
    (out, excluded)
}

fn truth_of<'a>(item: &'a Item, truth: &'a HashMap<String, Label>) -> Option<&'a Label> {
    truth.get(&item.id).or(item.auditor.as_ref())
}

pub fn item_traces(items: &[TestItem<'_>], est: &Estimator<'_>) -> Result<Vec<ItemTrace>> {
    let sim = &est.aggregator().sim;
    items
        .par_iter()
        .map(|it| {
            let stages = trace(est, &it.labels)?;
            Ok(ItemTrace {
                confidences: stages.iter().map(|s| s.confidence).collect(),
                qualities: stages
                    .iter()
                    .map(|s| sim.sim(&s.label, it.truth))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// Mean of `used / available` over items, summed in item order.
fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// One point per threshold, the same threshold applied at every decision
/// point; sorted by cost.
pub fn sweep(traces: &[ItemTrace], thresholds: &[f64]) -> Result<Vec<CurvePoint>> {
    if traces.is_empty() {
        return Err(Error::Degenerate("no test items with ground truth".into()));
    }
    let mut curve: Vec<CurvePoint> = thresholds
        .iter()
        .map(|&tau| {
            let used: Vec<usize> = traces
                .iter()
                .map(|t| {
                    let n = t.confidences.len();
                    labels_used(t.confidences.iter().copied(), n, &vec![tau; n])
                })
                .collect();
            CurvePoint {
                tau,
                cost: mean(
                    traces.iter().zip(&used).map(|(t, &u)| u as f64 / t.confidences.len() as f64),
                    traces.len(),
                ),
                quality: mean(traces.iter().zip(&used).map(|(t, &u)| t.qualities[u - 1]), traces.len()),
            }
        })
        .collect();
    curve.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    Ok(curve)
}

fn first_cost(items: &[TestItem<'_>]) -> f64 {
    mean(items.iter().map(|it| 1.0 / it.labels.len() as f64), items.len())
}

/// First-label and all-labels endpoints under plain majority voting. Never
/// consults a model.
pub fn baseline_uniform(items: &[TestItem<'_>], sim: &SimilarityFn) -> Result<Baseline> {
    let agg = Aggregator::new(AggregationMode::Uniform, sim.clone());
    endpoints(items, sim, |labels| {
        let refs: Vec<&Label> = labels.iter().map(|(_, l)| *l).collect();
        agg.aggregate(&refs, &vec![1.0; refs.len()])
    })
}

/// Same shape as the baseline with the all-labels answer picked by smallest
/// average distance. Never consults a model.
pub fn baseline_sad(items: &[TestItem<'_>], sim: &SimilarityFn) -> Result<Baseline> {
    endpoints(items, sim, |labels| {
        let refs: Vec<&Label> = labels.iter().map(|(_, l)| *l).collect();
        Ok(refs[select_sad(&refs, sim)?].clone())
    })
}

fn endpoints<F>(items: &[TestItem<'_>], sim: &SimilarityFn, all: F) -> Result<Baseline>
where
    F: Fn(&[(&str, &Label)]) -> Result<Label> + Sync,
{
    if items.is_empty() {
        return Err(Error::Degenerate("no test items with ground truth".into()));
    }
    let first: Vec<f64> = items
        .par_iter()
        .map(|it| sim.sim(it.labels[0].1, it.truth))
        .collect::<Result<_>>()?;
    let full: Vec<f64> = items
        .par_iter()
        .map(|it| sim.sim(&all(&it.labels)?, it.truth))
        .collect::<Result<_>>()?;
    Ok(Baseline {
        first_cost: first_cost(items),
        first_quality: mean(first.into_iter(), items.len()),
        all_quality: mean(full.into_iter(), items.len()),
    })
}

/// Coin-flip curve over the grid of all-label probabilities `grid`.
pub fn chord_curve(b: &Baseline, grid: &[f64]) -> Vec<CurvePoint> {
    grid.iter()
        .map(|&p| {
            let (cost, quality) = b.coin_flip(p);
            CurvePoint { tau: p, cost, quality }
        })
        .collect()
}

/// Mean vertical gap between `curve` and the baseline chord over costs
/// `[first_cost, 1]`. The curve is interpolated linearly and held constant
/// outside its observed costs.
pub fn rauc(curve: &[CurvePoint], baseline: &Baseline) -> Result<f64> {
    let span = baseline.span();
    if !(span > MIN_SPAN) {
        return Err(Error::Degenerate(
            "every test item has a single label; the cost range is empty".into(),
        ));
    }
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.cost, p.quality)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) if b.0 - a.0 > MIN_SPAN => (*a, *b),
        _ => return Err(Error::Degenerate("curve needs at least two distinct costs".into())),
    };
    let (start, end) = (baseline.first_cost, 1.0);
    let gap = |(c, q): (f64, f64)| q - baseline.quality_at(c);
    let mut knots = Vec::with_capacity(pts.len() + 2);
    knots.push((start, if lo.0 <= start { interpolate(&pts, start) } else { lo.1 }));
    knots.extend(pts.iter().copied().filter(|p| p.0 > start && p.0 < end));
    knots.push((end, if hi.0 >= end { interpolate(&pts, end) } else { hi.1 }));
    let area: f64 = knots
        .windows(2)
        .map(|w| 0.5 * (gap(w[0]) + gap(w[1])) * (w[1].0 - w[0].0))
        .sum();
    Ok(area / span)
}

/// Piecewise-linear value of sorted `pts` at `x` within their range. At a
/// vertical step the later point wins at its left edge.
fn interpolate(pts: &[(f64, f64)], x: f64) -> f64 {
    let i = pts.partition_point(|p| p.0 < x);
    if i == pts.len() {
        return pts[i - 1].1;
    }
    if pts[i].0 == x || i == 0 {
        return pts[i].1;
    }
    let (a, b) = (pts[i - 1], pts[i]);
    a.1 + (x - a.0) / (b.0 - a.0) * (b.1 - a.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaucResult {
    pub method: Method,
    pub rauc: f64,
    pub curve: Vec<CurvePoint>,
    pub baseline: Baseline,
}

/// Settings shared by every trained method.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub methods: Vec<Method>,
    pub thresholds: Vec<f64>,
    pub test_fraction: f64,
    pub trials: usize,
    pub seed: u64,
    pub bootstrap: usize,
    /// Template for training; estimator and aggregation are set per method.
    pub train: TrainConfig,
}

impl EvalConfig {
    pub fn new(methods: Vec<Method>, sim: SimilarityFn) -> Self {
        EvalConfig {
            methods,
            thresholds: default_grid(DEFAULT_GRID_POINTS),
            test_fraction: 0.3,
            trials: 10,
            seed: 0,
            bootstrap: DEFAULT_BOOTSTRAP,
            train: TrainConfig::new(EstimatorKind::Oak, sim),
        }
    }
}

/// Trains every configured method on `train_ds` and sweeps it on `test`.
/// Ground truth for test items comes from `truth`, falling back to their
/// auditor labels.
pub fn method_matrix_run(
    train_ds: &Dataset,
    test: &Dataset,
    truth: &HashMap<String, Label>,
    cfg: &EvalConfig,
) -> Result<(Vec<RaucResult>, usize)> {
    check_grid(&cfg.thresholds)?;
    let sim = &cfg.train.sim;
    let (items, excluded) = test_items(test, truth);
    let baseline = baseline_uniform(&items, sim)?;
    let results = cfg
        .methods
        .iter()
        .map(|&method| {
            let curve = match (method, method.estimator()) {
                (_, Some((estimator, aggregation))) => {
                    let mut tc = cfg.train.clone();
                    tc.estimator = estimator;
                    tc.aggregation = aggregation;
                    let model = train(train_ds, &tc)?;
                    let est = Estimator::new(&model, estimator, aggregation)?;
                    sweep(&item_traces(&items, &est)?, &cfg.thresholds)?
                }
                (Method::Sad, None) => chord_curve(&baseline_sad(&items, sim)?, &cfg.thresholds),
                (_, None) => chord_curve(&baseline, &cfg.thresholds),
            };
            Ok(RaucResult {
                method,
                rauc: rauc(&curve, &baseline)?,
                curve,
                baseline,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((results, excluded))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidArgument("thresholds must be a non-empty list in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("thresholds must be sorted ascending".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub excluded: usize,
    pub results: Vec<RaucResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub raucs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub summary: Vec<MethodSummary>,
    #[serde(skip)]
    pub trials: Vec<TrialResult>,
}

impl EvalReport {
    pub fn summary_of(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// Per-method curve averaged over trials, threshold by threshold.
    pub fn mean_curves(&self) -> Vec<(Method, Vec<CurvePoint>)> {
        let Some(first) = self.trials.first() else {
            return Vec::new();
        };
        first
            .results
            .iter()
            .enumerate()
            .map(|(r, res)| {
                let n = self.trials.len() as f64;
                let curve = (0..res.curve.len())
                    .map(|p| {
                        let pts = self.trials.iter().map(|t| t.results[r].curve[p]);
                        let (cost, quality) = pts.fold((0.0, 0.0), |acc, c| (acc.0 + c.cost, acc.1 + c.quality));
                        CurvePoint {
                            tau: res.curve[p].tau,
                            cost: cost / n,
                            quality: quality / n,
                        }
                    })
                    .collect();
                (res.method, curve)
            })
            .collect()
    }
}

/// Repeats the method matrix over `cfg.trials` seeded re-splits of `data`.
/// Training sees only the auditor labels already in `data`.
pub fn run_trials(data: &Dataset, truth: &HashMap<String, Label>, cfg: &EvalConfig) -> Result<EvalReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let mut trials: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = cfg.seed.wrapping_add(trial as u64);
            let (train_ds, test) = split(data, cfg.test_fraction, seed)?;
            let (results, excluded) = method_matrix_run(&train_ds, &test, truth, cfg)?;
            Ok(TrialResult {
                trial,
                seed,
                excluded,
                results,
            })
        })
        .collect::<Result<_>>()?;
    trials.sort_by_key(|t| t.trial);
    let summary = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(r, &method)| {
            let raucs: Vec<f64> = trials.iter().map(|t| t.results[r].rauc).collect();
            let (ci_low, ci_high) = bootstrap_ci(&raucs, cfg.bootstrap, 0.95, cfg.seed);
            MethodSummary {
                method,
                mean: raucs.iter().sum::<f64>() / raucs.len() as f64,
                ci_low,
                ci_high,
                raucs,
            }
        })
        .collect();
    Ok(EvalReport { summary, trials })
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    if resamples == 0 || n == 1 {
        let m = values.iter().sum::<f64>() / n as f64;
        return (m, m);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(tail), at(1.0 - tail))
}

/// CSV with columns `method,tau,cost,quality`.
pub fn curves_csv(curves: &[(Method, Vec<CurvePoint>)]) -> String {
    let mut out = String::from("method,tau,cost,quality\n");
    for (m, curve) in curves {
        for p in curve {
            out.push_str(&format!("{m},{},{},{}\n", p.tau, p.cost, p.quality));
        }
    }
    out
}

/// Static line chart of cost against quality, one polyline per method.
pub fn curves_svg(curves: &[(Method, Vec<CurvePoint>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 8] = [
        "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
    ];
    let pts = curves.iter().flat_map(|(_, c)| c.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.cost);
        x1 = x1.max(p.cost);
        y0 = y0.min(p.quality);
        y1 = y1.max(p.quality);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{ly}\" text-anchor=\"middle\">cost (fraction of labels used)</text>\n\
         <text x=\"14\" y=\"{cy}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {cy})\">quality</text>\n\
         <text x=\"{PAD}\" y=\"{tl}\" text-anchor=\"middle\">{x0:.2}</text>\n\
         <text x=\"{r}\" y=\"{tl}\" text-anchor=\"middle\">{x1:.2}</text>\n\
         <text x=\"{tx}\" y=\"{b}\" text-anchor=\"end\">{y0:.3}</text>\n\
         <text x=\"{tx}\" y=\"{t}\" text-anchor=\"end\">{y1:.3}</text>\n",
        b = H - PAD,
        r = W - PAD,
        t = PAD + 4.0,
        cx = W / 2.0,
        cy = H / 2.0,
        ly = H - 12.0,
        tl = H - PAD + 16.0,
        tx = PAD - 4.0,
    );
    for (i, (m, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = curve
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.cost), sy(p.quality)))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{lx}\" y=\"{ly}\" fill=\"{color}\">{m}</text>\n",
            points.join(" "),
            lx = W - PAD + 4.0 - 110.0,
            ly = PAD + 14.0 * (i as f64 + 1.0),
        ));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GeneratorConfig, LabelsPerItem, Population, Sampler};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn base(first_cost: f64, q1: f64, qall: f64) -> Baseline {
        Baseline {
            first_cost,
            first_quality: q1,
            all_quality: qall,
        }
    }

    fn pts(v: &[(f64, f64)]) -> Vec<CurvePoint> {
        v.iter()
            .map(|&(cost, quality)| CurvePoint { tau: 0.0, cost, quality })
            .collect()
    }

    #[test]
    fn rauc_examples() {
        let b = base(0.5, 0.6, 0.8);
        assert_eq!(rauc(&chord_curve(&b, &default_grid(41)), &b).unwrap(), 0.0);
        let gapped = pts(&[(0.5, 0.7), (0.75, 0.8), (1.0, 0.9)]);
        assert_abs_diff_eq!(rauc(&gapped, &b).unwrap(), 0.1, epsilon = 1e-12);
        let two = pts(&[(0.5, 0.6), (0.75, 0.7), (0.75, 0.8), (1.0, 0.9)]);
        assert_abs_diff_eq!(rauc(&two, &b).unwrap(), 0.05, epsilon = 1e-12);
        assert!(rauc(&pts(&[(1.0, 0.5), (1.0, 0.6)]), &base(1.0, 0.5, 0.5)).is_err());
        assert!(rauc(&pts(&[(0.7, 0.5)]), &b).is_err());
    }

    #[test]
    fn curve_is_held_outside_its_range() {
        let b = base(0.0, 0.0, 0.0);
        assert_abs_diff_eq!(rauc(&pts(&[(0.25, 1.0), (0.75, 1.0)]), &b).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn majority_of_three_beats_one_label() {
        // Exact binomial: 0.75³ + 3·0.75²·0.25 = 0.84375.
        let exact = 0.75f64.powi(3) + 3.0 * 0.75f64.powi(2) * 0.25;
        let cfg = GeneratorConfig {
            k: 2,
            priors: None,
            workers: 20,
            items: 40_000,
            labels_per_item: LabelsPerItem::Fixed(3),
            auditor_fraction: 0.0,
            label_kind: crate::label::LabelKind::Categorical,
            population: Population::OneCoin { p: Sampler::Fixed(0.75) },
            seed: 4,
        };
        let s = generate(&cfg).unwrap();
        let truth = s.truth_map();
        let (items, excluded) = test_items(&s.dataset, &truth);
        assert_eq!(excluded, 0);
        let b = baseline_uniform(&items, &SimilarityFn::Hamming).unwrap();
        assert_abs_diff_eq!(b.first_cost, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.first_quality, 0.75, epsilon = 0.01);
        assert_abs_diff_eq!(b.all_quality, exact, epsilon = 0.01);
    }

    #[test]
    fn method_keys() {
        for m in Method::ALL {
            assert_eq!(m.key().parse::<Method>().unwrap(), m);
        }
        let err = "poak-mega".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("poak-weight") && err.contains("uniform"));
        assert_eq!(Method::parse_list("sad, uniform,sad").unwrap(), vec![Method::Sad, Method::Uniform]);
    }

    #[test]
    fn bootstrap_brackets_the_mean() {
        let v = [0.1, 0.2, 0.3, 0.4, 0.5];
        let (lo, hi) = bootstrap_ci(&v, 2000, 0.95, 1);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(lo >= 0.1 && hi <= 0.5);
        assert_eq!(bootstrap_ci(&[0.2], 2000, 0.95, 1), (0.2, 0.2));
    }

    #[test]
    fn sweep_endpoints() {
        let traces = vec![
            ItemTrace {
                confidences: vec![0.9, 0.95],
                qualities: vec![1.0, 1.0],
            },
            ItemTrace {
                confidences: vec![0.4, 0.6, 0.7],
                qualities: vec![0.0, 1.0, 1.0],
            },
        ];
        let c = sweep(&traces, &[0.0, 0.5, 1.0]).unwrap();
        assert_abs_diff_eq!(c[0].cost, (0.5 + 1.0 / 3.0) / 2.0, epsilon = 1e-15);
        assert_eq!(c[0].quality, 0.5);
        assert_abs_diff_eq!(c[1].cost, (0.5 + 2.0 / 3.0) / 2.0, epsilon = 1e-15);
        assert_eq!(c[1].quality, 1.0);
        assert_eq!(c[2].cost, 1.0);
    }

    fn traces() -> impl Strategy<Value = Vec<ItemTrace>> {
        prop::collection::vec(
            (1usize..5).prop_flat_map(|n| {
                (prop::collection::vec(0.0..1.0f64, n), prop::collection::vec(0.0..1.0f64, n))
                    .prop_map(|(confidences, qualities)| ItemTrace { confidences, qualities })
            }),
            1..20,
        )
    }

    proptest! {
        #[test]
        fn cost_is_monotone_in_threshold(t in traces()) {
            let grid = default_grid(21);
            let mut by_tau = sweep(&t, &grid).unwrap();
            by_tau.sort_by(|a, b| a.tau.total_cmp(&b.tau));
            for w in by_tau.windows(2) {
                prop_assert!(w[0].cost <= w[1].cost);
            }
            prop_assert!(by_tau.iter().all(|p| p.cost > 0.0 && p.cost <= 1.0));
        }

        #[test]
        fn duplicating_a_point_keeps_rauc(
            raw in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..10),
            dup in 0usize..10,
            c1 in 0.05..0.9f64,
        ) {
            let curve = pts(&raw);
            let b = base(c1, 0.4, 0.6);
            if let Ok(r) = rauc(&curve, &b) {
                let mut twice = curve.clone();
                twice.insert(dup % curve.len(), curve[dup % curve.len()]);
                prop_assert_eq!(rauc(&twice, &b).unwrap(), r);
            }
        }

        #[test]
        fn constant_gap(g in -0.5..0.5f64, c1 in 0.05..0.9f64) {
            let b = base(c1, 0.3, 0.6);
            let curve = pts(&[(c1, 0.3 + g), (1.0, 0.6 + g)]);
            prop_assert!((rauc(&curve, &b).unwrap() - g).abs() < 1e-12);
        }
    }
}
