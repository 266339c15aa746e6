//! Experiment configuration, read from TOML.
//!
//! ```toml
//! strategies = ["original", "diversity", "serendipity", "novelty", "combined"]
//! k_values = [10, 25, 50, 100, 250]
//! n_test_users = 100
//! holdout = 5
//! seed = 42
//! provider = "cooccurrence"
//!
//! [bis]
//! genre_weight = 2.0
//! ```
//!
//! Every key is optional; missing keys take the defaults of
//! [`ExperimentConfig::default`].

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::carousel::{EventCalendar, EventWindow, Strategy, StrategyParams};
use crate::error::{Error, Result};
use crate::recommender::ProviderChoice;
use crate::similarity::{BisWeights, PairMode};

/// Attribute weights as they appear in the config file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BisConfig {
    pub author_weight: f64,
    pub genre_weight: f64,
    pub subject_weight: f64,
    pub age_weight: f64,
    pub medium_weight: f64,
    pub fiction_weight: f64,
}

impl Default for BisConfig {
    fn default() -> Self {
        BisConfig {
            author_weight: 1.0,
            genre_weight: 2.0,
            subject_weight: 1.0,
            age_weight: 2.0,
            medium_weight: 1.0,
            fiction_weight: 1.0,
        }
    }
}

impl BisConfig {
    pub fn weights(&self) -> Result<BisWeights<f64>> {
        BisWeights::new(
            self.author_weight,
            self.genre_weight,
            self.subject_weight,
            self.age_weight,
            self.medium_weight,
            self.fiction_weight,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategies: Vec<Strategy>,
    pub k_values: Vec<usize>,
    pub n_test_users: usize,
    /// Most recent transactions per test user held out as ground truth.
    pub holdout: usize,
    pub seed: u64,
    pub provider: ProviderChoice,
    /// Length of each user's prediction list.
    pub n_predictions: usize,
    pub recency_window: usize,
    /// Date the carousels are generated for; defaults to the day of the
    /// latest transaction in the dataset.
    pub evaluation_date: Option<NaiveDate>,
    /// Items added on or after this date count as novel; defaults to 365 days
    /// before the evaluation date.
    pub novelty_cutoff: Option<NaiveDate>,
    pub pool_size: usize,
    pub carousel_size: usize,
    pub predicted_take: usize,
    pub combined_predicted_take: usize,
    pub internal_pairs: PairMode,
    /// Worker threads for per-user work; results do not depend on it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub bis: BisConfig,
    pub events: Vec<EventWindow>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            strategies: Strategy::ALL.to_vec(),
            k_values: vec![10, 25, 50, 100, 250],
            n_test_users: 100,
            holdout: 5,
            seed: 42,
            provider: ProviderChoice::Cooccurrence,
            n_predictions: 250,
            recency_window: 200,
            evaluation_date: None,
            novelty_cutoff: None,
            pool_size: 100,
            carousel_size: 15,
            predicted_take: 10,
            combined_predicted_take: 9,
            internal_pairs: PairMode::WithDiagonal,
            workers: None,
            bis: BisConfig::default(),
            events: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(vec![e.message().to_owned()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn calendar(&self) -> EventCalendar {
        EventCalendar {
            events: self.events.clone(),
        }
    }

    /// Fill parameters for a given novelty cutoff.
    pub fn strategy_params(&self, novelty_cutoff: NaiveDate) -> StrategyParams {
        StrategyParams {
            carousel_size: self.carousel_size,
            predicted_take: self.predicted_take,
            combined_predicted_take: self.combined_predicted_take,
            candidate_pool_size: self.pool_size,
            recency_window: self.recency_window,
            novelty_cutoff,
            seed: self.seed,
        }
    }

    /// Checks every constraint and reports all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.strategies.is_empty() {
            problems.push("strategies: at least one strategy is required".to_owned());
        }
        let distinct: BTreeSet<_> = self.strategies.iter().collect();
        if distinct.len() != self.strategies.len() {
            problems.push("strategies: duplicate entries".to_owned());
        }
        if self.k_values.is_empty() {
            problems.push("k_values: at least one K is required".to_owned());
        }
        if self.k_values.contains(&0) {
            problems.push("k_values: K must be at least 1".to_owned());
        }
        if let Some(&max_k) = self.k_values.iter().max() {
            if self.n_predictions < max_k {
                problems.push(format!(
                    "n_predictions ({}) is smaller than the largest K ({max_k})",
                    self.n_predictions
                ));
            }
        }
        if self.n_test_users == 0 {
            problems.push("n_test_users must be at least 1".to_owned());
        }
        if self.holdout == 0 {
            problems.push("holdout must be at least 1".to_owned());
        }
        if self.recency_window == 0 {
            problems.push("recency_window must be at least 1".to_owned());
        }
        if self.workers == Some(0) {
            problems.push("workers must be at least 1".to_owned());
        }
        if let Err(e) = self.bis.weights() {
            problems.push(format!("bis: {e}"));
        }
        for (i, e) in self.events.iter().enumerate() {
            if e.start_date > e.end_date {
                problems.push(format!("events[{i}] ({}): start_date is after end_date", e.tag));
            }
        }
        let cutoff = self.novelty_cutoff.unwrap_or(NaiveDate::MIN);
        if let Err(Error::InvalidConfig(more)) = self.strategy_params(cutoff).validate() {
            problems.extend(more);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            strategies = ["original"]
            k_values = [10]
            provider = "random"
            novelty_cutoff = "2023-01-01"

            [bis]
            genre_weight = 4.0

            [[events]]
            start_date = "2023-12-01"
            end_date = "2023-12-26"
            tag = "christmas"
            match_field = "subject"
            "#,
        )
        .unwrap();
        assert_eq!(c.strategies, [Strategy::Original]);
        assert_eq!(c.provider, ProviderChoice::Random);
        assert_eq!(c.bis.genre_weight, 4.0);
        assert_eq!(c.bis.author_weight, 1.0);
        assert_eq!(c.holdout, 5);
        assert_eq!(c.events.len(), 1);
    }

    #[test]
    fn all_problems_reported_at_once() {
        let c = ExperimentConfig {
            strategies: vec![],
            k_values: vec![0],
            holdout: 0,
            ..ExperimentConfig::default()
        };
        match c.validate() {
            Err(Error::InvalidConfig(p)) => assert_eq!(p.len(), 3, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_strategies_rejected() {
        assert!(ExperimentConfig::from_toml_str("colour = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("strategies = [\"random\"]").is_err());
    }
}
