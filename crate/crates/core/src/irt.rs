//! Logistic item-response compression of the per-type model: one competence
//! per worker and a (difficulty, separation, base rate) triple per label type.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::model::Model;
use crate::oak::shrink;
use crate::partition::Partitioner;
use crate::poak::poak_confidence;
use crate::similarity::SimilarityFn;

/// Logistic link used throughout: `g(x) = 1 / (1 + e^x)`, decreasing.
pub fn g(x: f64) -> f64 {
    1.0 / (1.0 + x.exp())
}

/// Inverse of [`g`] on `(0, 1)`.
pub fn g_inv(y: f64) -> f64 {
    (1.0 / y - 1.0).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrtType {
    /// Difficulty.
    pub d: f64,
    /// Separation.
    pub b: f64,
    /// Base rate.
    pub p0: f64,
}

/// Probability that a label of this type from a worker with competence `c`
/// is correct.
pub fn irt_predict(t: &IrtType, c: f64) -> f64 {
    t.p0 + (1.0 - t.p0) * g(t.b * (t.d - c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrtParams {
    pub types: BTreeMap<usize, IrtType>,
    pub workers: BTreeMap<String, f64>,
}

impl IrtParams {
    /// Unknown workers sit at the population anchor `c = 0`. `None` when the
    /// type has no parameters.
    pub fn predict(&self, worker: &str, ty: usize) -> Option<f64> {
        let t = self.types.get(&ty)?;
        Some(irt_predict(t, self.workers.get(worker).copied().unwrap_or(0.0)))
    }
}

/// Exact logistic form of an accuracy-only noise model: worker competences
/// and per-type parameters (`b = 1`, `p0 = 0`) such that every prediction is
/// the posterior probability that a reported label is correct.
pub fn accuracy_only_to_irt(accuracies: &[f64], priors: &[f64]) -> Result<(Vec<f64>, Vec<IrtType>)> {
    let k = priors.len();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two categories".into()));
    }
    let open = |x: f64| x > 0.0 && x < 1.0;
    if let Some(p) = accuracies.iter().find(|&&p| !open(p)) {
        return Err(Error::InvalidArgument(format!("accuracy {p} must lie strictly inside (0, 1)")));
    }
    if let Some(q) = priors.iter().find(|&&q| !open(q)) {
        return Err(Error::InvalidArgument(format!("prior {q} must lie strictly inside (0, 1)")));
    }
    let c = accuracies.iter().map(|&p| -(1.0 / p - 1.0).ln()).collect();
    let types = priors
        .iter()
        .map(|&q| IrtType {
            d: ((1.0 / q - 1.0) / (k - 1) as f64).ln(),
            b: 1.0,
            p0: 0.0,
        })
        .collect();
    Ok((c, types))
}

/// One entry of the accuracy matrix being compressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyCell {
    pub worker: usize,
    pub ty: usize,
    pub accuracy: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub rounds: usize,
    pub tol: f64,
    /// Keep `b = 1` for every type.
    pub fix_separation: bool,
    /// Accuracies are clamped into `(p₀ + margin, 1 − margin)` before the
    /// logit.
    pub margin: f64,
    /// Fit the model's smoothed per-type estimates rather than the raw cell
    /// accuracies.
    pub smoothed: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            rounds: 10,
            tol: 1e-6,
            fix_separation: false,
            margin: ACC_MARGIN,
            smoothed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrtFit {
    /// Competence per worker index; workers without cells keep their start
    /// value (shifted by the anchor).
    pub c: Vec<f64>,
    /// Parameters per type index; `None` for types without cells.
    pub types: Vec<Option<IrtType>>,
    /// Objective at the start and after every round.
    pub objective: Vec<f64>,
}

const ACC_MARGIN: f64 = 1e-6;

fn logit_target(accuracy: f64, p0: f64, margin: f64) -> f64 {
    let a = accuracy.clamp(p0 + margin, 1.0 - margin);
    ((1.0 - p0) / (a - p0) - 1.0).ln()
}

fn objective(cells: &[AccuracyCell], y: &[f64], c: &[f64], b: &[f64], d: &[f64]) -> f64 {
    cells
        .iter()
        .zip(y)
        .map(|(cell, y)| cell.weight * (b[cell.ty] * (d[cell.ty] - c[cell.worker]) - y).powi(2))
        .sum()
}

/// Weighted alternating least squares in logit space.
///
/// Minimizes `Σ w (b_ℓ (d_ℓ − c_i) − y_iℓ)²` with `y` the logit of the
/// accuracy above the base rate. Each half-step solves its block exactly, so
/// the objective never increases; the mean competence of fitted workers is
/// anchored at zero.
pub fn fit_irt(
    cells: &[AccuracyCell],
    base_rates: &[f64],
    init_c: &[f64],
    opts: &FitOptions,
) -> Result<IrtFit> {
    let k = base_rates.len();
    let n = init_c.len();
    let cells: Vec<AccuracyCell> = cells.iter().copied().filter(|c| c.weight > 0.0).collect();
    if cells.is_empty() {
        return Err(Error::Degenerate("no per-type accuracies to fit".into()));
    }
    if let Some(c) = cells.iter().find(|c| c.ty >= k || c.worker >= n) {
        return Err(Error::InvalidArgument(format!(
            "cell (worker {}, type {}) is out of range",
            c.worker, c.ty
        )));
    }
    if let Some(p) = base_rates.iter().find(|p| !(0.0..1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("base rate {p} must lie in [0, 1)")));
    }
    let y: Vec<f64> = cells.iter().map(|c| logit_target(c.accuracy, base_rates[c.ty], opts.margin)).collect();

    let mut c = init_c.to_vec();
    let mut b = vec![1.0; k];
    let mut d = vec![0.0; k];
    let mut has_type = vec![false; k];
    let mut has_worker = vec![false; n];
    for cell in &cells {
        has_type[cell.ty] = true;
        has_worker[cell.worker] = true;
    }

    let mut history = vec![objective(&cells, &y, &c, &b, &d)];
    for _ in 0..opts.rounds.max(1) {
        // Types: regress y on c per type.
        let mut sums = vec![[0.0f64; 5]; k]; // w, wc, wy, wcc, wcy
        for (cell, &yv) in cells.iter().zip(&y) {
            let s = &mut sums[cell.ty];
            let cv = c[cell.worker];
            s[0] += cell.weight;
            s[1] += cell.weight * cv;
            s[2] += cell.weight * yv;
            s[3] += cell.weight * cv * cv;
            s[4] += cell.weight * cv * yv;
        }
        for ty in (0..k).filter(|&t| has_type[t]) {
            let [w, wc, wy, wcc, wcy] = sums[ty];
            let (mc, my) = (wc / w, wy / w);
            let scc = wcc - w * mc * mc;
            let scy = wcy - w * mc * my;
            let mut solved = false;
            if !opts.fix_separation && scc > 1e-12 * w {
                let slope = scy / scc;
                if -slope > 1e-6 {
                    b[ty] = -slope;
                    d[ty] = (my - slope * mc) / b[ty];
                    solved = true;
                }
            }
            if !solved {
                d[ty] = (my + b[ty] * mc) / b[ty];
            }
        }
        // Workers: closed form given the type parameters.
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        for (cell, &yv) in cells.iter().zip(&y) {
            let (bt, dt) = (b[cell.ty], d[cell.ty]);
            num[cell.worker] += cell.weight * bt * (bt * dt - yv);
            den[cell.worker] += cell.weight * bt * bt;
        }
        for i in 0..n {
            if den[i] > 0.0 {
                c[i] = num[i] / den[i];
            }
        }
        let fitted = has_worker.iter().filter(|&&h| h).count() as f64;
        let shift = (0..n).filter(|&i| has_worker[i]).map(|i| c[i]).sum::<f64>() / fitted;
        c.iter_mut().for_each(|v| *v -= shift);
        d.iter_mut().for_each(|v| *v -= shift);

        let obj = objective(&cells, &y, &c, &b, &d);
        let prev = *history.last().expect("non-empty");
        history.push(obj);
        if (prev - obj).abs() < opts.tol {
            break;
        }
    }
    Ok(IrtFit {
        c,
        types: (0..k)
            .map(|t| {
                has_type[t].then_some(IrtType {
                    d: d[t],
                    b: b[t],
                    p0: base_rates[t],
                })
            })
            .collect(),
        objective: history,
    })
}

/// Labels sampled for base-rate estimation, per side.
const BASE_RATE_SAMPLE: usize = 128;

fn strided<'a>(labels: &[&'a Label], max: usize) -> Vec<&'a Label> {
    let step = labels.len().div_ceil(max).max(1);
    labels.iter().step_by(step).copied().collect()
}

/// Expected similarity between a label drawn from the training labels and a
/// type-`ℓ` label, per type (strided samples of both sides).
pub fn estimate_base_rates(ds: &Dataset, sim: &SimilarityFn, partitioner: &Partitioner) -> Result<Vec<f64>> {
    let all: Vec<&Label> = ds.items().iter().flat_map(|it| it.responses.iter().map(|r| &r.label)).collect();
    let pool = strided(&all, BASE_RATE_SAMPLE);
    let mut by_type: Vec<Vec<&Label>> = vec![Vec::new(); partitioner.k()];
    for l in &all {
        if let Some(t) = partitioner.type_of(l) {
            by_type[t].push(l);
        }
    }
    by_type
        .iter()
        .map(|labels| {
            let sample = strided(labels, BASE_RATE_SAMPLE);
            if sample.is_empty() {
                return Ok(0.0);
            }
            let mut total = 0.0;
            for a in &sample {
                for b in &pool {
                    total += sim.sim(a, b)?;
                }
            }
            Ok(total / (sample.len() * pool.len()) as f64)
        })
        .collect()
}

/// Fits the logistic block to a model's per-type accuracies.
pub fn fit_from_model(model: &Model, ds: &Dataset, opts: &FitOptions) -> Result<IrtParams> {
    let partitioner = model.partitioner()?;
    let k = partitioner.k();
    let ids: Vec<&String> = model.workers.keys().collect();
    let mut cells = Vec::new();
    let mut max_acc = vec![0.0f64; k];
    for (i, id) in ids.iter().enumerate() {
        for (&ty, cell) in &model.workers[*id].per_type {
            if cell.m_bar == 0 {
                continue;
            }
            let accuracy = if opts.smoothed { poak_confidence(model, id, Some(ty)) } else { cell.c };
            max_acc[ty] = max_acc[ty].max(accuracy);
            cells.push(AccuracyCell {
                worker: i,
                ty,
                accuracy,
                weight: cell.m_bar as f64,
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::MissingBlock("per-type"));
    }
    let base_rates: Vec<f64> = estimate_base_rates(ds, &model.meta.similarity, partitioner)?
        .into_iter()
        .zip(&max_acc)
        .map(|(p, &hi)| p.min(hi - 1e-3).max(0.0))
        .collect();
    let init: Vec<f64> = ids
        .iter()
        .map(|id| {
            let c = model.workers[*id].c.clamp(ACC_MARGIN, 1.0 - ACC_MARGIN);
            -g_inv(c)
        })
        .collect();
    let fit = fit_irt(&cells, &base_rates, &init, opts)?;
    let fitted: std::collections::BTreeSet<usize> = cells.iter().map(|c| c.worker).collect();
    Ok(IrtParams {
        types: fit
            .types
            .iter()
            .enumerate()
            .filter_map(|(t, p)| p.map(|p| (t, p)))
            .collect(),
        workers: fitted.into_iter().map(|i| (ids[i].clone(), fit.c[i])).collect(),
    })
}

/// Logistic-model accuracy of a type-`ty` label from `worker`; types without
/// parameters fall back to the per-type estimate.
pub fn poaki_confidence(model: &Model, irt: &IrtParams, worker: &str, ty: Option<usize>) -> f64 {
    ty.and_then(|t| irt.predict(worker, t))
        .unwrap_or_else(|| poak_confidence(model, worker, ty))
}

/// Per-type estimate smoothed towards the logistic prediction with strength
/// `λγ`.
pub fn poak_irt_confidence(model: &Model, irt: &IrtParams, worker: &str, ty: Option<usize>) -> f64 {
    let base = poaki_confidence(model, irt, worker, ty);
    let cell = ty.and_then(|t| model.workers.get(worker)?.per_type.get(&t));
    match cell {
        Some(cell) => shrink(cell.c, cell.m_bar as f64, base, model.meta.lambda * model.meta.gamma),
        None => base,
    }
}
