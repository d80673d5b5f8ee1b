use oakcrowd::dataset::split;
use oakcrowd::eval::{run_trials, EvalConfig, Method};
use oakcrowd::multipoint::{item_labels, run_pipeline};
use oakcrowd::synth::{generate, GeneratorConfig};
use oakcrowd::*;

fn synthetic(kind: &str) -> oakcrowd::synth::Synthetic {
    let population = if kind == "pt" {
        r#"{"jitter":{"sigma":{"uniform":[0.5,3]}}}"#
    } else {
        r#"{"one_coin":{"p":{"uniform":[0.4,0.95]}}}"#
    };
    let cfg: GeneratorConfig = serde_json::from_str(&format!(
        r#"{{"k":5,"workers":10,"items":300,"labels_per_item":{{"min":2,"max":4}},"auditor_fraction":0.3,
            "label_kind":"{kind}","population":{population},"seed":11}}"#
    ))
    .unwrap();
    generate(&cfg).unwrap()
}

#[test]
fn every_kind_trains_estimates_and_evaluates() {
    for kind in ["cat", "set", "path", "boxes", "pt"] {
        let s = synthetic(kind);
        let sim = SimilarityFn::for_kind(s.dataset.label_kind().unwrap());
        let (train_ds, test) = split(&s.dataset, 0.3, 1).unwrap();
        for e in EstimatorKind::ALL {
            let mut cfg = TrainConfig::new(e, sim.clone());
            cfg.multipoint = Some(3);
            let model = train(&train_ds, &cfg).unwrap();
            let est = Estimator::from_model(&model).unwrap();
            for item in test.items() {
                let p = run_pipeline(&item.id, &item_labels(&test, item), &est, &[0.9, 0.8, 0.7]).unwrap();
                assert!((0.0..=1.0).contains(&p.confidence), "{kind} {e}: {}", p.confidence);
                assert_eq!(p.label.kind(), model.meta.similarity.kind());
            }
        }
        let mut cfg = EvalConfig::new(Method::ALL.to_vec(), sim);
        cfg.trials = 2;
        cfg.bootstrap = 100;
        let report = run_trials(&s.dataset, &s.truth_map(), &cfg).unwrap();
        assert_eq!(report.summary.len(), Method::ALL.len());
        assert_eq!(report.summary_of(Method::Uniform).unwrap().mean, 0.0, "{kind}");
        for m in &report.summary {
            assert!(m.mean.is_finite() && m.ci_low <= m.ci_high, "{kind} {:?}", m.method);
        }
    }
}
