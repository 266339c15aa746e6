use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use mcrec_core::carousel::{
    select_carousels_cold_start, select_carousels_with_history, CarouselFiller, CarouselRecord, SelectionCounts,
    UserContext,
};
use mcrec_core::catalog::{
    load_items, load_transactions, write_items_csv, write_transactions_csv, ItemFormat, LoadReport,
};
use mcrec_core::evaluation::experiment::{build_provider, resolve_dates, with_workers};
use mcrec_core::evaluation::{run_experiment, write_carousels_jsonl, write_measurements_csv};
use mcrec_core::recommender::{import_predictions, write_predictions_csv, PredictionList};
use mcrec_core::synth::{generate, SynthParams};
use mcrec_core::{Dataset, ExperimentConfig, UserId};
use rayon::prelude::*;
use serde_json::json;

use crate::archive::{
    load_archive, write_file, RunManifest, ITEMS_FILE, LOAD_REPORT_FILE, MANIFEST_FILE, TRANSACTIONS_FILE,
};
use crate::args::{CarouselArgs, EvaluateArgs, GlobalArgs, IngestArgs, ScoreArgs, SynthArgs};
use crate::CliError;

/// Config file (if any) with the global flag overrides applied.
pub fn resolve_config(global: &GlobalArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(workers) = global.workers {
        config.workers = Some(workers);
    }
    Ok(config)
}

fn config_value(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(config).expect("config serializes")
}

fn sidecar_manifest(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn load_summary(report: &LoadReport) -> serde_json::Value {
    json!({
        "rows_read": report.rows_read,
        "rows_loaded": report.rows_loaded,
        "dropped_unknown_items": report.dropped_unknown_items,
        "issues": report.issues.len(),
    })
}

/// One `{file, row, reason}` line per rejected row.
fn write_load_report(out: &mut impl Write, path: &Path, name: &str, report: &LoadReport) -> Result<(), CliError> {
    for issue in &report.issues {
        let line = json!({"file": name, "row": issue.row, "reason": issue.reason});
        writeln!(out, "{line}").map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

pub fn ingest(global: &GlobalArgs, args: &IngestArgs) -> Result<(), CliError> {
    let config = resolve_config(global)?;
    let mut manifest = RunManifest::start("ingest", None, config_value(&config));
    manifest.note(
        "filters",
        json!({"min_annual_loans": args.min_annual_loans, "max_annual_loans": args.max_annual_loans}),
    );

    // everything is read and validated before anything is written
    let format = args.item_format.unwrap_or_else(|| ItemFormat::from_path(&args.items));
    let (items, item_report) = load_items(&args.items, format)?;
    let (transactions, tx_report) = load_transactions(&args.transactions, &items)?;
    manifest.input(&args.items)?;
    manifest.input(&args.transactions)?;
    let ds = Dataset::new(items, transactions)?;
    let users_before = ds.user_count();
    let ds = match (args.min_annual_loans, args.max_annual_loans) {
        (None, None) => ds,
        (min, max) => ds.filter_users_by_annual_loans(min.unwrap_or(0.0), max.unwrap_or(f64::INFINITY))?,
    };
    log::info!(
        "kept {} of {} users ({} transactions); {} item rows and {} transaction rows rejected, {} transactions with unknown items dropped",
        ds.user_count(),
        users_before,
        ds.transactions().len(),
        item_report.issues.len(),
        tx_report.issues.len(),
        tx_report.dropped_unknown_items,
    );
    manifest.note("users_before_filter", users_before);
    manifest.note("users_after_filter", ds.user_count());
    manifest.note("items_load", load_summary(&item_report));
    manifest.note("transactions_load", load_summary(&tx_report));

    let dir = &global.out_dir;
    let items_path = dir.join(ITEMS_FILE);
    write_file(&items_path, |out| Ok(write_items_csv(out, ds.items().values())?))?;
    let tx_path = dir.join(TRANSACTIONS_FILE);
    write_file(&tx_path, |out| Ok(write_transactions_csv(out, ds.transactions())?))?;
    let report_path = dir.join(LOAD_REPORT_FILE);
    write_file(&report_path, |out| {
        write_load_report(out, &report_path, "items", &item_report)?;
        write_load_report(out, &report_path, "transactions", &tx_report)
    })?;
    for p in [&items_path, &tx_path, &report_path] {
        manifest.output(p)?;
    }
    manifest.finish(&dir.join(MANIFEST_FILE))?;
    Ok(())
}

pub fn score(global: &GlobalArgs, args: &ScoreArgs) -> Result<(), CliError> {
    let config = resolve_config(global)?;
    let provider_choice = args.provider.clone().unwrap_or_else(|| config.provider.clone());
    let n = args.n.unwrap_or(config.n_predictions);
    let ds = load_archive(&args.dataset)?;
    let mut manifest = RunManifest::start("score", Some(config.seed), config_value(&config));
    manifest.input_dir(&args.dataset)?;
    manifest.note("provider", String::from(provider_choice.clone()));
    manifest.note("n", n);

    let provider = build_provider(&provider_choice, &ds, config.seed)?;
    let users: Vec<&UserId> = ds.users().collect();
    let lists: Vec<PredictionList> = with_workers(config.workers, || {
        users
            .par_iter()
            .map(|u| {
                provider
                    .predict(u, n)
                    .map_err(|e| e.context(format!("scoring user `{u}`")))
            })
            .collect::<Result<Vec<_>, _>>()
    })??;
    log::info!("scored {} users with {}", lists.len(), String::from(provider_choice));

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| global.out_dir.join("predictions.csv"));
    write_file(&out, |w| Ok(write_predictions_csv(w, &lists)?))?;
    manifest.output(&out)?;
    manifest.finish(&sidecar_manifest(&out))?;
    Ok(())
}

pub fn carousels(global: &GlobalArgs, args: &CarouselArgs) -> Result<(), CliError> {
    let mut config = resolve_config(global)?;
    if let Some(size) = args.carousel_size {
        config.carousel_size = size;
        config.predicted_take = config.predicted_take.min(size);
        config.combined_predicted_take = config.combined_predicted_take.min(size);
    }
    if let Some(pool) = args.pool_size {
        config.pool_size = pool;
    }
    if args.evaluation_date.is_some() {
        config.evaluation_date = args.evaluation_date;
    }
    if args.novelty_cutoff.is_some() {
        config.novelty_cutoff = args.novelty_cutoff;
    }
    config.strategies = vec![args.strategy];
    config.validate()?;

    let ds = load_archive(&args.dataset)?;
    let (lists, import) = import_predictions(&args.predictions, &ds)?;
    if !import.issues.is_empty() || import.dropped_unknown_items > 0 {
        log::warn!(
            "predictions: {} malformed rows, {} unknown items, {} already-borrowed items skipped",
            import.issues.len(),
            import.dropped_unknown_items,
            import.dropped_already_borrowed
        );
    }
    let mut manifest = RunManifest::start("carousels", Some(config.seed), config_value(&config));
    manifest.input_dir(&args.dataset)?;
    manifest.input(&args.predictions)?;

    let (evaluation_date, cutoff) = resolve_dates(&ds, &config)?;
    let users: BTreeSet<UserId> = if args.users.is_empty() {
        ds.users().cloned().chain(lists.keys().cloned()).collect()
    } else {
        args.users.iter().map(|u| UserId::from(u.as_str())).collect()
    };
    let is_cold = |u: &UserId| lists.get(u).is_none_or(|l| l.is_empty()) || !ds.has_user(u);
    let cold_specs = if users.iter().any(is_cold) {
        select_carousels_cold_start(&ds, &lists, SelectionCounts::default())?
    } else {
        Vec::new()
    };
    let event_spec = config.calendar().active_spec(evaluation_date);
    let filler = CarouselFiller::new(&ds, config.bis.weights()?, config.strategy_params(cutoff))?;
    let users: Vec<&UserId> = users.iter().collect();

    let records: Vec<Vec<CarouselRecord>> = with_workers(config.workers, || {
        users
            .par_iter()
            .map(|user| {
                let ctx = UserContext::new(&ds, user, config.recency_window);
                let preds = lists.get(*user);
                let mut specs = match preds {
                    Some(p) if !is_cold(user) => {
                        select_carousels_with_history(user, p, &ds, SelectionCounts::default())?
                    }
                    _ => cold_specs.clone(),
                };
                specs.extend(event_spec.clone());
                Ok(specs
                    .iter()
                    .map(|spec| {
                        let filled = filler.fill(args.strategy, spec, &ctx, preds);
                        CarouselRecord::new((*user).clone(), Some(args.strategy), &filled)
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>, mcrec_core::Error>>()
    })??;
    let records: Vec<CarouselRecord> = records.into_iter().flatten().collect();
    log::info!("{} carousels for {} users", records.len(), users.len());

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| global.out_dir.join("carousels.jsonl"));
    write_file(&out, |w| Ok(write_carousels_jsonl(w, &records)?))?;
    manifest.output(&out)?;
    manifest.note("evaluation_date", evaluation_date);
    manifest.note("novelty_cutoff", cutoff);
    manifest.finish(&sidecar_manifest(&out))?;
    Ok(())
}

pub fn evaluate(global: &GlobalArgs, args: &EvaluateArgs) -> Result<(), CliError> {
    let mut config = resolve_config(global)?;
    if let Some(p) = &args.provider {
        config.provider = p.clone();
    }
    config.validate()?;
    let ds = load_archive(&args.dataset)?;
    let mut manifest = RunManifest::start("evaluate", Some(config.seed), config_value(&config));
    manifest.input_dir(&args.dataset)?;
    if let Some(path) = &global.config {
        manifest.input(path)?;
    }

    let output = run_experiment(&ds, &config)?;
    let dir = &global.out_dir;
    let report_path = dir.join("report.json");
    write_file(&report_path, |w| {
        w.write_all(output.report.to_json().as_bytes())
            .map_err(|e| CliError::io(&report_path, e))
    })?;
    let measurements_path = dir.join("measurements.csv");
    write_file(&measurements_path, |w| {
        Ok(write_measurements_csv(w, &output.measurements)?)
    })?;
    let carousels_path = dir.join("carousels.jsonl");
    write_file(&carousels_path, |w| Ok(write_carousels_jsonl(w, &output.carousels)?))?;
    for p in [&report_path, &measurements_path, &carousels_path] {
        manifest.output(p)?;
    }
    let summary: BTreeMap<String, usize> = output
        .report
        .strategies
        .iter()
        .map(|(s, r)| (s.to_string(), r.carousel_count))
        .collect();
    log::info!(
        "evaluated {} test users; carousels per strategy: {summary:?}",
        output.report.n_test_users
    );
    manifest.finish(&dir.join(MANIFEST_FILE))?;
    Ok(())
}

pub fn synth(global: &GlobalArgs, args: &SynthArgs) -> Result<(), CliError> {
    let config = resolve_config(global)?;
    let defaults = SynthParams::default();
    let params = SynthParams {
        n_users: args.users,
        n_items: args.items,
        n_clusters: args.clusters,
        cluster_purity: args.purity,
        recent_fraction: args.recent_fraction,
        snapshot_date: args.snapshot_date.unwrap_or(defaults.snapshot_date),
        seed: config.seed,
        ..defaults
    };
    let data = generate(&params)?;
    let mut manifest = RunManifest::start(
        "synth",
        Some(params.seed),
        serde_json::to_value(&params).expect("params serialize"),
    );
    let dir = &global.out_dir;
    let items_path = dir.join(ITEMS_FILE);
    write_file(&items_path, |w| Ok(write_items_csv(w, data.items.values())?))?;
    let tx_path = dir.join(TRANSACTIONS_FILE);
    write_file(&tx_path, |w| Ok(write_transactions_csv(w, &data.transactions)?))?;
    manifest.output(&items_path)?;
    manifest.output(&tx_path)?;
    log::info!(
        "generated {} items and {} transactions for {} users",
        data.items.len(),
        data.transactions.len(),
        params.n_users
    );
    manifest.finish(&dir.join(MANIFEST_FILE))?;
    Ok(())
}
