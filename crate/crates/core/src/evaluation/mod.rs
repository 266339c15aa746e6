//! Ranking metrics, beyond-accuracy measurements and the experiment driver.

pub mod experiment;
pub mod metrics;
pub mod summary;

pub use experiment::{
    measure_carousel, run_experiment, write_carousels_jsonl, write_measurements_csv, CarouselMeasurement,
    ExperimentOutput, ExperimentReport, MetricsAtK, StrategyReport,
};
pub use metrics::{
    average_precision_at_k, mean_average_precision, ndcg_at_k, precision_at_k, recall_at_k, RelevanceJudgment,
};
pub use summary::{boxplot_summary, novelty_percentage, BoxplotSummary};
