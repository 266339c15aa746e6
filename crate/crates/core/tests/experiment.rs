use std::collections::BTreeMap;

use mcrec_core::carousel::{CarouselRecord, UserContext};
use mcrec_core::evaluation::{
    boxplot_summary, novelty_percentage, run_experiment, write_carousels_jsonl, write_measurements_csv,
};
use mcrec_core::similarity::{avg_set_bis, internal_similarity};
use mcrec_core::synth::{generate, SynthParams};
use mcrec_core::{Dataset, ExperimentConfig, FilledCarousel, Item, PairMode, Strategy};

fn toy() -> Dataset {
    let d = generate(&SynthParams {
        n_users: 60,
        n_items: 600,
        seed: 11,
        ..SynthParams::default()
    })
    .unwrap();
    Dataset::new(d.items, d.transactions).unwrap()
}

fn config() -> ExperimentConfig {
    ExperimentConfig {
        n_test_users: 12,
        k_values: vec![5, 10],
        n_predictions: 30,
        ..ExperimentConfig::default()
    }
}

#[test]
fn single_strategy_report() {
    let ds = toy();
    let c = ExperimentConfig {
        strategies: vec![Strategy::Original],
        ..config()
    };
    let out = run_experiment(&ds, &c).unwrap();
    assert_eq!(out.report.strategies.len(), 1);
    assert!(out.report.strategies.contains_key(&Strategy::Original));
    assert_eq!(out.report.metrics.len(), 2);
    for m in &out.report.metrics {
        for v in [m.precision, m.recall, m.map, m.ndcg, m.abis.unwrap()] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn reports_are_reproducible_and_worker_independent() {
    let ds = toy();
    let one = run_experiment(
        &ds,
        &ExperimentConfig {
            workers: Some(1),
            ..config()
        },
    )
    .unwrap();
    let four = run_experiment(
        &ds,
        &ExperimentConfig {
            workers: Some(4),
            ..config()
        },
    )
    .unwrap();
    assert_eq!(one.report.to_json(), four.report.to_json());
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_measurements_csv(&mut a, &one.measurements).unwrap();
    write_measurements_csv(&mut b, &four.measurements).unwrap();
    assert_eq!(a, b);
}

#[test]
fn aggregates_recompute_from_carousel_file() {
    let ds = toy();
    let c = config();
    let out = run_experiment(&ds, &c).unwrap();
    let mut file = Vec::new();
    write_carousels_jsonl(&mut file, &out.carousels).unwrap();

    let (train, _) = ds.split_train_test(c.n_test_users, c.holdout, c.seed).unwrap();
    let weights = c.bis.weights().unwrap();
    let cutoff = out.report.novelty_cutoff;
    let mut values: BTreeMap<Strategy, [Vec<f64>; 3]> = BTreeMap::new();
    for line in std::str::from_utf8(&file).unwrap().lines() {
        let record: CarouselRecord = serde_json::from_str(line).unwrap();
        if record.items.is_empty() {
            continue;
        }
        let items: Vec<&Item> = record.items.iter().map(|e| &ds.items()[&e.item_id]).collect();
        let ctx = UserContext::new(&train, &record.user_id, c.recency_window);
        let v = values.entry(record.strategy.unwrap()).or_default();
        v[0].push(
            internal_similarity(&items, &weights, PairMode::WithDiagonal)
                .unwrap()
                .value(),
        );
        v[1].push(avg_set_bis(&items, ctx.recent(), &weights).unwrap().value());
        let filled = FilledCarousel {
            spec: mcrec_core::CarouselSpec::new(
                mcrec_core::carousel::Constraint::Genre("any".into()),
                mcrec_core::carousel::Provenance::Global,
            )
            .unwrap(),
            entries: record.items.clone(),
        };
        v[2].push(novelty_percentage(&filled, ds.items(), cutoff).unwrap());
    }
    assert_eq!(values.len(), 5);
    for (strategy, [internal, transactions, novelty]) in values {
        let report = &out.report.strategies[&strategy];
        assert_eq!(report.carousel_count, internal.len());
        assert_eq!(report.internal_similarity.unwrap(), boxplot_summary(&internal).unwrap());
        assert_eq!(
            report.transactions_similarity.unwrap(),
            boxplot_summary(&transactions).unwrap()
        );
        assert_eq!(report.novelty_pct.unwrap(), boxplot_summary(&novelty).unwrap());
    }
}

#[test]
fn too_many_test_users_is_reported() {
    let ds = toy();
    let err = run_experiment(
        &ds,
        &ExperimentConfig {
            n_test_users: 1000,
            ..config()
        },
    )
    .unwrap_err();
    assert!(err.to_string().contains("1000 requested"), "{err}");
}
