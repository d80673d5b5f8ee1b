//! Seeded Dawid–Skene style generator and the closed-form conditional
//! accuracy used to check estimators against it.
//!
//! Every item draws from its own ChaCha stream, so output is reproducible
//! for a given seed regardless of how the work is scheduled.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Annotation, AuditorRecord, Dataset, DatasetBuilder};
use crate::error::{Error, Result};
use crate::label::{BoxSet, Label, LabelKind, Rect};

/// Grid used for box-set labels.
pub const BOX_GRID: u32 = 32;
const BOX_TILE: u32 = 6;
const BOX_STEP: u32 = 8;
const BOX_TILES: usize = 16;
/// Truth points for the jitter mode are uniform on `[0, POINT_RANGE)²`.
pub const POINT_RANGE: f64 = 10.0;

const POPULATION_STREAM: u64 = 0;
const AUDITOR_STREAM: u64 = u64::MAX;

/// A scalar drawn once per worker (or per worker and category).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Fixed(f64),
    Uniform([f64; 2]),
    Choice(Vec<f64>),
    Beta([f64; 2]),
}

impl Sampler {
    fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        let in_range = |x: f64| x >= lo && x <= hi;
        let ok = match self {
            Sampler::Fixed(x) => in_range(*x),
            Sampler::Uniform([a, b]) => in_range(*a) && in_range(*b) && a <= b,
            Sampler::Choice(v) => !v.is_empty() && v.iter().all(|x| in_range(*x)),
            Sampler::Beta([a, b]) => *a > 0.0 && *b > 0.0 && lo <= 0.0 && hi >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("sampler {self:?} must produce values in [{lo}, {hi}]")))
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Fixed(x) => *x,
            Sampler::Uniform([a, b]) => {
                if a == b {
                    *a
                } else {
                    rng.random_range(*a..*b)
                }
            }
            Sampler::Choice(v) => v[rng.random_range(0..v.len())],
            Sampler::Beta([a, b]) => Beta::new(*a, *b).expect("validated").sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub confusion: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    /// Accuracy `p` on the diagonal, errors spread evenly.
    OneCoin { p: Sampler },
    /// Like `one_coin`, but each true category gets its own accuracy.
    PerType { p: Sampler },
    /// Worker counts allocated to fixed confusion matrices by weight.
    Mixture(Vec<MixtureComponent>),
    /// Point labels: truth plus Gaussian noise with a per-worker deviation.
    Jitter { sigma: Sampler },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelsPerItem {
    Fixed(usize),
    Range { min: usize, max: usize },
    /// `weights[i]` is the relative frequency of `i + 1` labels.
    Weights { weights: Vec<f64> },
}

impl LabelsPerItem {
    fn max(&self) -> usize {
        match self {
            LabelsPerItem::Fixed(n) => *n,
            LabelsPerItem::Range { max, .. } => *max,
            LabelsPerItem::Weights { weights } => weights.len(),
        }
    }

    fn min(&self) -> usize {
        match self {
            LabelsPerItem::Fixed(n) => *n,
            LabelsPerItem::Range { min, .. } => *min,
            LabelsPerItem::Weights { weights } => weights.iter().position(|w| *w > 0.0).map_or(0, |i| i + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Number of categories.
    pub k: usize,
    /// Category priors; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
    pub workers: usize,
    pub items: usize,
    pub labels_per_item: LabelsPerItem,
    #[serde(default)]
    pub auditor_fraction: f64,
    #[serde(default = "default_kind")]
    pub label_kind: LabelKind,
    pub population: Population,
    #[serde(default)]
    pub seed: u64,
}

fn default_kind() -> LabelKind {
    LabelKind::Categorical
}

impl GeneratorConfig {
    pub fn priors(&self) -> Vec<f64> {
        self.priors
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.k as f64; self.k])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let jitter = matches!(self.population, Population::Jitter { .. });
        if jitter != (self.label_kind == LabelKind::Point2D) {
            return bad("the jitter population is used exactly for point labels".into());
        }
        if !jitter {
            if self.k < 2 {
                return bad(format!("need at least two categories, got {}", self.k));
            }
            let cap = match self.label_kind {
                LabelKind::BoxSet => BOX_TILES + 1,
                LabelKind::LabelSet => 63,
                _ => usize::MAX,
            };
            if self.k > cap {
                return bad(format!("{} labels support at most {cap} categories", self.label_kind));
            }
            let q = self.priors();
            if q.len() != self.k {
                return bad(format!("{} priors for {} categories", q.len(), self.k));
            }
            check_stochastic(&q, "priors")?;
        }
        if self.workers == 0 {
            return bad("need at least one worker".into());
        }
        match &self.labels_per_item {
            LabelsPerItem::Range { min, max } if min > max => return bad("labels_per_item min exceeds max".into()),
            LabelsPerItem::Weights { weights }
                if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 =>
            {
                return bad("labels_per_item weights must be non-negative with a positive sum".into())
            }
            _ => {}
        }
        if self.labels_per_item.min() == 0 {
            return bad("every item needs at least one label".into());
        }
        if self.labels_per_item.max() > self.workers {
            return bad(format!(
                "up to {} labels per item but only {} workers",
                self.labels_per_item.max(),
                self.workers
            ));
        }
        if !(0.0..=1.0).contains(&self.auditor_fraction) {
            return bad(format!("auditor_fraction {} is outside [0, 1]", self.auditor_fraction));
        }
        match &self.population {
            Population::OneCoin { p } | Population::PerType { p } => p.validate(0.0, 1.0)?,
            Population::Jitter { sigma } => sigma.validate(0.0, f64::INFINITY)?,
            Population::Mixture(components) => {
                if components.is_empty() || components.iter().any(|c| !(c.weight >= 0.0)) {
                    return bad("mixture needs components with non-negative weights".into());
                }
                if components.iter().map(|c| c.weight).sum::<f64>() <= 0.0 {
                    return bad("mixture weights sum to zero".into());
                }
                for c in components {
                    WorkerSpec::new(c.confusion.clone())?;
                    if c.confusion.len() != self.k {
                        return bad("mixture confusion matrix does not match k".into());
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_stochastic(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{what} must be non-negative and sum to 1")));
    }
    Ok(())
}

/// A worker's confusion matrix: `confusion[true][reported]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerSpec {
    pub confusion: Vec<Vec<f64>>,
}

impl WorkerSpec {
    pub fn new(confusion: Vec<Vec<f64>>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument("confusion matrix must be square and non-empty".into()));
        }
        for row in &confusion {
            check_stochastic(row, "confusion rows")?;
        }
        Ok(WorkerSpec { confusion })
    }

    /// Diagonal `p`, off-diagonal `(1 − p) / (k − 1)`.
    pub fn one_coin(p: f64, k: usize) -> Self {
        Self::per_type(&vec![p; k])
    }

    /// Row `τ` has accuracy `p[τ]` and spreads its errors evenly.
    pub fn per_type(p: &[f64]) -> Self {
        let k = p.len();
        let confusion = (0..k)
            .map(|t| {
                (0..k)
                    .map(|l| if l == t { p[t] } else { (1.0 - p[t]) / (k - 1) as f64 })
                    .collect()
            })
            .collect();
        WorkerSpec { confusion }
    }
}

/// `n` one-coin workers with accuracies drawn from `p`.
pub fn onecoin_population(n: usize, p: &Sampler, k: usize, rng: &mut ChaCha8Rng) -> Vec<WorkerSpec> {
    (0..n).map(|_| WorkerSpec::one_coin(p.sample(rng), k)).collect()
}

/// Probability that a worker's report of `ell` is correct.
pub fn posterior_oracle(priors: &[f64], worker: &WorkerSpec, ell: usize) -> Result<f64> {
    let m = &worker.confusion;
    let report: f64 = (0..priors.len()).map(|t| priors[t] * m[t][ell]).sum();
    if report <= 0.0 {
        return Err(Error::Degenerate(format!("category {ell} is never reported")));
    }
    Ok(priors[ell] * m[ell][ell] / report)
}

/// Splits `n` into integer counts proportional to `weights` (largest
/// remainder, ties to the earlier component).
fn allocate(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Per-worker noise channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Confusion(WorkerSpec),
    Jitter(f64),
}

/// Worker channels for a configuration, drawn from the population stream.
pub fn population(cfg: &GeneratorConfig) -> Vec<Channel> {
    let mut rng = stream(cfg.seed, POPULATION_STREAM);
    let n = cfg.workers;
    match &cfg.population {
        Population::OneCoin { p } => onecoin_population(n, p, cfg.k, &mut rng)
            .into_iter()
            .map(Channel::Confusion)
            .collect(),
        Population::PerType { p } => (0..n)
            .map(|_| {
                let ps: Vec<f64> = (0..cfg.k).map(|_| p.sample(&mut rng)).collect();
                Channel::Confusion(WorkerSpec::per_type(&ps))
            })
            .collect(),
        Population::Mixture(components) => {
            let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
            allocate(n, &weights)
                .into_iter()
                .zip(components)
                .flat_map(|(count, c)| {
                    std::iter::repeat_n(Channel::Confusion(WorkerSpec { confusion: c.confusion.clone() }), count)
                })
                .collect()
        }
        Population::Jitter { sigma } => (0..n).map(|_| Channel::Jitter(sigma.sample(&mut rng))).collect(),
    }
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

/// Category name used for categorical labels.
pub fn category_name(c: usize, k: usize) -> String {
    if k <= 26 {
        char::from(b'A' + c as u8).to_string()
    } else {
        format!("c{c}")
    }
}

/// Representative label of category `c` for each label kind.
pub fn wrap_category(c: usize, k: usize, kind: LabelKind) -> Label {
    match kind {
        LabelKind::Categorical => Label::Categorical(category_name(c, k)),
        LabelKind::LabelSet => {
            let bits = c + 1;
            Label::set((0..usize::BITS).filter(|b| bits >> b & 1 == 1).map(|b| format!("t{b}")))
        }
        LabelKind::TreePath => Label::path(format!("r{}", c / 2), format!("s{c}"), format!("t{c}")),
        LabelKind::BoxSet => {
            let boxes = (0..c as u32)
                .map(|t| {
                    let (x, y) = ((t % 4) * BOX_STEP, (t / 4) * BOX_STEP);
                    Rect::new(x, y, x + BOX_TILE, y + BOX_TILE)
                })
                .collect();
            Label::BoxSet(BoxSet::new(boxes, BOX_GRID, BOX_GRID).expect("tiles fit the grid"))
        }
        LabelKind::Point2D => Label::point(c as f64, c as f64),
    }
}

/// Generator output.
#[derive(Debug, Clone)]
pub struct Synthetic {
    /// Annotations plus auditor labels for the audited items.
    pub dataset: Dataset,
    /// Ground truth for every item, in item order.
    pub truth: Vec<AuditorRecord>,
    /// True category per item (`None` for point labels).
    pub categories: Vec<Option<usize>>,
    pub channels: Vec<Channel>,
}

impl Synthetic {
    pub fn truth_map(&self) -> std::collections::HashMap<String, Label> {
        self.truth.iter().map(|r| (r.item.clone(), r.z.clone())).collect()
    }
}

struct GeneratedItem {
    truth: Label,
    category: Option<usize>,
    responses: Vec<(usize, Label)>,
}

fn generate_item(cfg: &GeneratorConfig, j: usize, channels: &[Channel], samplers: &Samplers) -> GeneratedItem {
    let mut rng = stream(cfg.seed, j as u64 + 1);
    let n_labels = match &cfg.labels_per_item {
        LabelsPerItem::Fixed(n) => *n,
        LabelsPerItem::Range { min, max } => rng.random_range(*min..=*max),
        LabelsPerItem::Weights { .. } => samplers.count.as_ref().expect("weights").sample(&mut rng) + 1,
    };
    let workers = index::sample(&mut rng, channels.len(), n_labels);
    if cfg.label_kind == LabelKind::Point2D {
        let (x, y) = (rng.random_range(0.0..POINT_RANGE), rng.random_range(0.0..POINT_RANGE));
        let responses = workers
            .iter()
            .map(|w| {
                let Channel::Jitter(sigma) = channels[w] else { unreachable!("validated") };
                let noise = Normal::new(0.0, sigma).expect("validated");
                (w, Label::point(x + noise.sample(&mut rng), y + noise.sample(&mut rng)))
            })
            .collect();
        return GeneratedItem {
            truth: Label::point(x, y),
            category: None,
            responses,
        };
    }
    let z = samplers.prior.sample(&mut rng);
    let responses = workers
        .iter()
        .map(|w| {
            let reported = samplers.rows[w][z].sample(&mut rng);
            (w, wrap_category(reported, cfg.k, cfg.label_kind))
        })
        .collect();
    GeneratedItem {
        truth: wrap_category(z, cfg.k, cfg.label_kind),
        category: Some(z),
        responses,
    }
}

struct Samplers {
    prior: WeightedIndex<f64>,
    rows: Vec<Vec<WeightedIndex<f64>>>,
    count: Option<WeightedIndex<f64>>,
}

pub fn generate(cfg: &GeneratorConfig) -> Result<Synthetic> {
    cfg.validate()?;
    let channels = population(cfg);
    let weights = |v: &[f64]| WeightedIndex::new(v.iter().copied()).map_err(|e| Error::InvalidArgument(e.to_string()));
    let samplers = Samplers {
        prior: if cfg.label_kind == LabelKind::Point2D {
            weights(&[1.0])?
        } else {
            weights(&cfg.priors())?
        },
        rows: channels
            .iter()
            .map(|c| match c {
                Channel::Confusion(spec) => spec.confusion.iter().map(|row| weights(row)).collect(),
                Channel::Jitter(_) => Ok(Vec::new()),
            })
            .collect::<Result<_>>()?,
        count: match &cfg.labels_per_item {
            LabelsPerItem::Weights { weights: w } => Some(weights(w)?),
            _ => None,
        },
    };

    let items: Vec<GeneratedItem> = {
        use rayon::prelude::*;
        (0..cfg.items)
            .into_par_iter()
            .map(|j| generate_item(cfg, j, &channels, &samplers))
            .collect()
    };

    let n_audit = (cfg.auditor_fraction * cfg.items as f64).round() as usize;
    let mut audited = vec![false; cfg.items];
    for j in index::sample(&mut stream(cfg.seed, AUDITOR_STREAM), cfg.items, n_audit.min(cfg.items)) {
        audited[j] = true;
    }

    let mut b = DatasetBuilder::new();
    let worker_ids: Vec<String> = (0..cfg.workers).map(|i| format!("w{i}")).collect();
    let mut truth = Vec::with_capacity(cfg.items);
    let mut categories = Vec::with_capacity(cfg.items);
    for (j, it) in items.into_iter().enumerate() {
        let id = format!("i{j}");
        for (arrival, (w, label)) in it.responses.into_iter().enumerate() {
            b.push_annotation(Annotation {
                item: id.clone(),
                worker: worker_ids[w].clone(),
                arrival: arrival as u32,
                label,
            })?;
        }
        if audited[j] {
            b.push_auditor(AuditorRecord {
                item: id.clone(),
                z: it.truth.clone(),
            })?;
        }
        truth.push(AuditorRecord { item: id, z: it.truth });
        categories.push(it.category);
    }
    Ok(Synthetic {
        dataset: b.build()?,
        truth,
        categories,
        channels,
    })
}
