//! End-to-end training for every estimator variant.

use crate::aggregate::AggregationMode;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::irt::{fit_from_model, FitOptions};
use crate::model::{EstimatorKind, Model, DEFAULT_ALPHA_SEMI, DEFAULT_GAMMA, DEFAULT_LAMBDA};
use crate::multipoint::{learn_multipoint, ShiftFit};
use crate::oak::{oak_learn, LearnConfig};
use crate::partition::Partitioner;
use crate::poak::poak_learn;
use crate::similarity::SimilarityFn;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub estimator: EstimatorKind,
    pub sim: SimilarityFn,
    /// Defaults to the built-in rule for the label kind.
    pub partitioner: Option<Partitioner>,
    pub gamma: f64,
    pub alpha_semi: f64,
    pub lambda: f64,
    pub irt: FitOptions,
    /// Learn adjustments for decision points `2..=T`.
    pub multipoint: Option<usize>,
    pub shift_fit: ShiftFit,
    pub aggregation: AggregationMode,
}

impl TrainConfig {
    pub fn new(estimator: EstimatorKind, sim: SimilarityFn) -> Self {
        TrainConfig {
            estimator,
            sim,
            partitioner: None,
            gamma: DEFAULT_GAMMA,
            alpha_semi: DEFAULT_ALPHA_SEMI,
            lambda: DEFAULT_LAMBDA,
            irt: FitOptions::default(),
            multipoint: None,
            shift_fit: ShiftFit::default(),
            aggregation: AggregationMode::Weight,
        }
    }
}

pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<Model> {
    if !(0.0..=1.0).contains(&cfg.lambda) {
        return Err(Error::InvalidArgument(format!("lambda must lie in [0, 1], got {}", cfg.lambda)));
    }
    let learn = LearnConfig {
        sim: cfg.sim.clone(),
        gamma: cfg.gamma,
        alpha_semi: cfg.alpha_semi,
    };
    let mut model = if cfg.estimator.needs_types() {
        let kind = ds
            .label_kind()
            .ok_or_else(|| Error::Degenerate("training data is empty".into()))?;
        let p = cfg
            .partitioner
            .clone()
            .unwrap_or_else(|| Partitioner::default_for(kind, ds.meta()));
        poak_learn(ds, &learn, p)?
    } else {
        oak_learn(ds, &learn)?
    };
    model.meta.estimator = cfg.estimator;
    model.meta.lambda = cfg.lambda;
    model.meta.aggregation = cfg.aggregation;
    if cfg.estimator.needs_irt() {
        model.irt = Some(fit_from_model(&model, ds, &cfg.irt)?);
    }
    if let Some(max_t) = cfg.multipoint {
        let shifts = {
            let est = Estimator::new(&model, cfg.estimator, cfg.aggregation)?;
            learn_multipoint(ds, &est, max_t, cfg.shift_fit)?
        };
        model.multipoint = shifts;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::cat_dataset;

    fn ds() -> Dataset {
        cat_dataset(
            &[
                ("1", "a", "A"), ("1", "b", "A"), ("1", "c", "B"),
                ("2", "a", "B"), ("2", "b", "B"), ("2", "c", "B"),
                ("3", "c", "A"), ("3", "a", "A"), ("3", "b", "B"),
                ("4", "a", "B"), ("4", "c", "A"),
            ],
            &[("1", "A"), ("2", "B"), ("3", "A")],
        )
    }

    #[test]
    fn every_estimator_trains_and_round_trips() {
        let data = ds();
        for e in EstimatorKind::ALL {
            let mut cfg = TrainConfig::new(e, SimilarityFn::Hamming);
            cfg.multipoint = Some(3);
            let m = train(&data, &cfg).unwrap();
            assert_eq!(m.meta.estimator, e);
            assert_eq!(m.multipoint.len(), 2);
            let back = Model::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
            assert_eq!(m.to_json(), train(&data, &cfg).unwrap().to_json());
        }
    }

    #[test]
    fn bad_lambda() {
        let mut cfg = TrainConfig::new(EstimatorKind::PoakIrt, SimilarityFn::Hamming);
        cfg.lambda = 2.0;
        assert!(train(&ds(), &cfg).is_err());
    }
}
