//! End-to-end offline experiment: split, predict, select and fill carousels,
//! then measure and summarise.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{average_precision_at_k, ndcg_at_k, precision_at_k, recall_at_k, RelevanceJudgment};
use super::summary::{boxplot_summary, novelty_percentage, BoxplotSummary};
use crate::carousel::select::{select_carousels_cold_start, select_carousels_with_history, SelectionCounts};
use crate::carousel::{
    CarouselFiller, CarouselKind, CarouselRecord, CarouselSpec, FilledCarousel, Strategy, UserContext,
};
use crate::catalog::{Catalog, Dataset, GroundTruth, Item, ItemId, UserId};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::recommender::{
    import_predictions, CooccurrenceModel, ImportedProvider, PredictionList, PredictionProvider, ProviderChoice,
    RandomProvider,
};
use crate::similarity::{abis, avg_set_bis, internal_similarity, BisWeights, PairMode};

/// One row of the per-carousel measurement file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarouselMeasurement {
    pub user_id: UserId,
    pub strategy: Strategy,
    pub kind: CarouselKind,
    pub constraint: String,
    pub internal_similarity: f64,
    pub transactions_similarity: f64,
    pub novelty_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsAtK {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub map: f64,
    pub ndcg: f64,
    /// `None` when no test user has at least K predictions.
    pub abis: Option<f64>,
    pub abis_users: usize,
    /// Users left out of ABIS because they have fewer than K predictions.
    pub abis_skipped_users: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    /// Non-empty carousels measured.
    pub carousel_count: usize,
    pub empty_carousels: usize,
    pub internal_similarity: Option<BoxplotSummary>,
    pub transactions_similarity: Option<BoxplotSummary>,
    pub novelty_pct: Option<BoxplotSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provider: String,
    pub seed: u64,
    pub n_test_users: usize,
    pub holdout: usize,
    pub evaluation_date: NaiveDate,
    pub novelty_cutoff: NaiveDate,
    /// Carousel specs across all test users (each filled once per strategy).
    pub carousel_specs: usize,
    pub cold_start_users: usize,
    pub metrics: Vec<MetricsAtK>,
    pub strategies: BTreeMap<Strategy, StrategyReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub measurements: Vec<CarouselMeasurement>,
    pub carousels: Vec<CarouselRecord>,
}

/// The three per-carousel measurements: internal similarity, similarity to
/// the recent history window, and novelty percentage.
pub fn measure_carousel(
    carousel: &FilledCarousel,
    catalog: &Catalog,
    recent: &[&Item],
    weights: &BisWeights<f64>,
    pairs: PairMode,
    novelty_cutoff: NaiveDate,
) -> Result<(f64, f64, f64)> {
    let items: Vec<&Item> = carousel
        .item_ids()
        .map(|id| catalog.get(id).ok_or_else(|| Error::UnknownItem(id.clone())))
        .collect::<Result<_>>()?;
    let internal = internal_similarity(&items, weights, pairs)?.value();
    let transactions = avg_set_bis(&items, recent, weights)?.value();
    let novelty = novelty_percentage(carousel, catalog, novelty_cutoff)?;
    Ok((internal, transactions, novelty))
}

/// Defaults for dates the config leaves open.
pub fn resolve_dates(ds: &Dataset, config: &ExperimentConfig) -> Result<(NaiveDate, NaiveDate)> {
    let evaluation_date = match config.evaluation_date {
        Some(d) => d,
        None => ds
            .transactions()
            .iter()
            .map(|t| t.timestamp.date())
            .max()
            .ok_or(Error::EmptyInput("transaction log"))?,
    };
    let cutoff = config.novelty_cutoff.unwrap_or(evaluation_date - Duration::days(365));
    Ok((evaluation_date, cutoff))
}

/// Builds the configured prediction provider over `train`.
pub fn build_provider<'a>(
    choice: &ProviderChoice,
    train: &'a Dataset,
    seed: u64,
) -> Result<Box<dyn PredictionProvider + 'a>> {
    Ok(match choice {
        ProviderChoice::Cooccurrence => Box::new(CooccurrenceModel::build(train)),
        ProviderChoice::Random => Box::new(RandomProvider::new(train, seed)),
        ProviderChoice::Import(path) => {
            let (lists, _) = import_predictions(path, train)?;
            Box::new(ImportedProvider::new(lists))
        }
    })
}

/// Runs `f` on a pool with `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn accuracy_metrics(
    catalog: &Catalog,
    preds: &BTreeMap<UserId, PredictionList>,
    truth: &GroundTruth,
    config: &ExperimentConfig,
    weights: &BisWeights<f64>,
) -> Result<Vec<MetricsAtK>> {
    let resolve = |ids: &mut dyn Iterator<Item = &ItemId>| -> Result<Vec<&Item>> {
        ids.map(|id| catalog.get(id).ok_or_else(|| Error::UnknownItem(id.clone())))
            .collect()
    };
    let mut judgments = Vec::new();
    let mut truth_items = BTreeMap::new();
    let mut pred_items = BTreeMap::new();
    for (user, list) in preds {
        let relevant = truth.get(user).cloned().unwrap_or_default();
        truth_items.insert(user.clone(), resolve(&mut relevant.iter())?);
        pred_items.insert(user.clone(), resolve(&mut list.item_ids())?);
        judgments.push(RelevanceJudgment::new(list.item_ids().cloned().collect(), relevant)?);
    }
    let n = judgments.len() as f64;
    let mut rows = Vec::new();
    for &k in &config.k_values {
        let (mut p, mut r, mut ap, mut nd) = (0.0, 0.0, 0.0, 0.0);
        for j in &judgments {
            p += precision_at_k::<f64, _>(j, k)?;
            r += recall_at_k::<f64, _>(j, k)?;
            ap += average_precision_at_k::<f64, _>(j, k)?;
            nd += ndcg_at_k::<f64, _>(j, k)?;
        }
        let eligible: BTreeSet<UserId> = pred_items
            .iter()
            .filter(|(_, items)| items.len() >= k)
            .map(|(u, _)| u.clone())
            .collect();
        let abis_value = if eligible.is_empty() {
            None
        } else {
            Some(abis(&eligible, &truth_items, &pred_items, k, weights)?.value())
        };
        rows.push(MetricsAtK {
            k,
            precision: p / n,
            recall: r / n,
            map: ap / n,
            ndcg: nd / n,
            abis: abis_value,
            abis_users: eligible.len(),
            abis_skipped_users: judgments.len() - eligible.len(),
        });
    }
    Ok(rows)
}

struct UserOutcome {
    specs: usize,
    cold_start: bool,
    records: Vec<CarouselRecord>,
    measurements: Vec<CarouselMeasurement>,
    empty: BTreeMap<Strategy, usize>,
}

pub fn run_experiment(ds: &Dataset, config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    with_workers(config.workers, || run_in_pool(ds, config))?
}

fn run_in_pool(ds: &Dataset, config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let weights = config.bis.weights()?;
    let (evaluation_date, cutoff) = resolve_dates(ds, config)?;
    let (train, truth) = ds.split_train_test(config.n_test_users, config.holdout, config.seed)?;
    let provider = build_provider(&config.provider, &train, config.seed)?;

    let users: Vec<&UserId> = truth.keys().collect();
    let preds: BTreeMap<UserId, PredictionList> = users
        .par_iter()
        .map(|u| {
            provider
                .predict(u, config.n_predictions)
                .map(|p| ((*u).clone(), p))
                .map_err(|e| e.context(format!("predicting for user `{u}`")))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();

    let metrics = accuracy_metrics(ds.items(), &preds, &truth, config, &weights)?;

    let needs_cold_start = preds.values().any(|p| p.is_empty());
    let cold_specs = if needs_cold_start {
        let pooled: BTreeMap<UserId, PredictionList> = preds
            .iter()
            .filter(|(_, p)| !p.is_empty())
            .map(|(u, p)| (u.clone(), p.clone()))
            .collect();
        select_carousels_cold_start(&train, &pooled, SelectionCounts::default())?
    } else {
        Vec::new()
    };
    let event_spec = config.calendar().active_spec(evaluation_date);
    let filler = CarouselFiller::new(&train, weights, config.strategy_params(cutoff))?;

    let outcomes: Vec<UserOutcome> = users
        .par_iter()
        .map(|user| {
            let list = &preds[*user];
            let ctx = UserContext::new(&train, user, config.recency_window);
            let cold_start = list.is_empty() || !ctx.has_history();
            let mut specs: Vec<CarouselSpec> = if cold_start {
                cold_specs.clone()
            } else {
                select_carousels_with_history(user, list, &train, SelectionCounts::default())?
            };
            specs.extend(event_spec.clone());
            let mut outcome = UserOutcome {
                specs: specs.len(),
                cold_start,
                records: Vec::new(),
                measurements: Vec::new(),
                empty: BTreeMap::new(),
            };
            for spec in &specs {
                let prepared = filler.prepare(spec, &ctx, Some(list));
                for &strategy in &config.strategies {
                    let filled = filler.fill_prepared(strategy, &prepared, &ctx);
                    outcome
                        .records
                        .push(CarouselRecord::new((*user).clone(), Some(strategy), &filled));
                    if filled.is_empty() {
                        *outcome.empty.entry(strategy).or_default() += 1;
                        continue;
                    }
                    let (internal, transactions, novelty) = measure_carousel(
                        &filled,
                        train.items(),
                        ctx.recent(),
                        &weights,
                        config.internal_pairs,
                        cutoff,
                    )
                    .map_err(|e| e.context(format!("user `{user}`, {strategy} carousel {}", spec.key())))?;
                    outcome.measurements.push(CarouselMeasurement {
                        user_id: (*user).clone(),
                        strategy,
                        kind: spec.kind(),
                        constraint: spec.constraint().value_string(),
                        internal_similarity: internal,
                        transactions_similarity: transactions,
                        novelty_pct: novelty,
                    });
                }
            }
            Ok(outcome)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut carousels = Vec::new();
    let mut measurements = Vec::new();
    let mut empty: BTreeMap<Strategy, usize> = BTreeMap::new();
    let (mut total_specs, mut cold_start_users) = (0, 0);
    for o in outcomes {
        total_specs += o.specs;
        cold_start_users += usize::from(o.cold_start);
        carousels.extend(o.records);
        measurements.extend(o.measurements);
        for (s, n) in o.empty {
            *empty.entry(s).or_default() += n;
        }
    }

    let strategies = config
        .strategies
        .iter()
        .map(|&s| {
            let rows: Vec<&CarouselMeasurement> = measurements.iter().filter(|m| m.strategy == s).collect();
            let summarise = |f: fn(&CarouselMeasurement) -> f64| -> Result<Option<BoxplotSummary>> {
                if rows.is_empty() {
                    return Ok(None);
                }
                let values: Vec<f64> = rows.iter().map(|m| f(m)).collect();
                boxplot_summary(&values).map(Some)
            };
            Ok((
                s,
                StrategyReport {
                    carousel_count: rows.len(),
                    empty_carousels: empty.get(&s).copied().unwrap_or(0),
                    internal_similarity: summarise(|m| m.internal_similarity)?,
                    transactions_similarity: summarise(|m| m.transactions_similarity)?,
                    novelty_pct: summarise(|m| m.novelty_pct)?,
                },
            ))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;

    Ok(ExperimentOutput {
        report: ExperimentReport {
            provider: String::from(config.provider.clone()),
            seed: config.seed,
            n_test_users: truth.len(),
            holdout: config.holdout,
            evaluation_date,
            novelty_cutoff: cutoff,
            carousel_specs: total_specs,
            cold_start_users,
            metrics,
            strategies,
        },
        measurements,
        carousels,
    })
}

pub fn write_measurements_csv<W: Write>(out: W, rows: &[CarouselMeasurement]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "user_id",
        "strategy",
        "kind",
        "constraint",
        "internal_similarity",
        "transactions_similarity",
        "novelty_pct",
    ])
    .map_err(csv_error)?;
    for m in rows {
        w.write_record([
            m.user_id.as_str(),
            m.strategy.as_str(),
            m.kind.as_str(),
            &m.constraint,
            &m.internal_similarity.to_string(),
            &m.transactions_similarity.to_string(),
            &m.novelty_pct.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<measurements>", e))
}

pub fn write_carousels_jsonl<W: Write>(mut out: W, records: &[CarouselRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(out, "{line}").map_err(|e| Error::io("<carousels>", e))?;
    }
    out.flush().map_err(|e| Error::io("<carousels>", e))
}

fn csv_error(e: csv::Error) -> Error {
    Error::parse("<measurements>", e.to_string())
}
