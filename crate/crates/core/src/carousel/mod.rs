//! Carousel selection and filling.
//!
//! A carousel is a typed constraint (genre, genre combination, subject,
//! author or cyclic event) plus up to `carousel_size` items that satisfy it.
//! [`select`] decides which carousels a user gets; [`fill`] populates them
//! with one of five item-selection strategies.

pub mod fill;
pub mod select;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::catalog::{AuthorKey, Item, ItemId, UserId};
use crate::error::{Error, Result};

pub use fill::{CarouselFiller, UserContext};
pub use select::{
    select_carousels_cold_start, select_carousels_with_history, EventCalendar, EventWindow, SelectionCounts,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarouselKind {
    Genre,
    GenreCombination,
    Subject,
    Author,
    CyclicEvent,
}

impl CarouselKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CarouselKind::Genre => "genre",
            CarouselKind::GenreCombination => "genre_combination",
            CarouselKind::Subject => "subject",
            CarouselKind::Author => "author",
            CarouselKind::CyclicEvent => "cyclic_event",
        }
    }
}

/// Which item attribute a cyclic-event carousel filters on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchField {
    Genre,
    Subject,
    #[default]
    Any,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Genre(String),
    GenreCombination(BTreeSet<String>),
    Subject(String),
    Author(AuthorKey),
    CyclicEvent {
        tag: String,
        field: MatchField,
        /// Empty means "the tag itself".
        values: BTreeSet<String>,
    },
}

impl Constraint {
    pub fn kind(&self) -> CarouselKind {
        match self {
            Constraint::Genre(_) => CarouselKind::Genre,
            Constraint::GenreCombination(_) => CarouselKind::GenreCombination,
            Constraint::Subject(_) => CarouselKind::Subject,
            Constraint::Author(_) => CarouselKind::Author,
            Constraint::CyclicEvent { .. } => CarouselKind::CyclicEvent,
        }
    }

    /// Display form: the value itself, genre combinations joined by `+`.
    pub fn value_string(&self) -> String {
        match self {
            Constraint::Genre(g) => g.clone(),
            Constraint::GenreCombination(gs) => gs.iter().cloned().collect::<Vec<_>>().join("+"),
            Constraint::Subject(s) => s.clone(),
            Constraint::Author(a) => a.as_str().to_owned(),
            Constraint::CyclicEvent { tag, .. } => tag.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FromPredictions,
    FromHistory,
    Global,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::FromPredictions => "from_predictions",
            Provenance::FromHistory => "from_history",
            Provenance::Global => "global",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CarouselSpec {
    constraint: Constraint,
    provenance: Provenance,
}

impl CarouselSpec {
    pub fn new(constraint: Constraint, provenance: Provenance) -> Result<Self> {
        if let Constraint::GenreCombination(genres) = &constraint {
            if genres.len() < 2 {
                return Err(Error::InvalidParameter(
                    "a genre combination needs at least two genres".into(),
                ));
            }
        }
        Ok(CarouselSpec { constraint, provenance })
    }

    pub fn kind(&self) -> CarouselKind {
        self.constraint.kind()
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Stable textual key, used to derive per-carousel random streams.
    pub fn key(&self) -> String {
        format!("{}:{}", self.kind().as_str(), self.constraint.value_string())
    }
}

pub fn matches_constraint(item: &Item, spec: &CarouselSpec) -> bool {
    match &spec.constraint {
        Constraint::Genre(g) => item.genres.contains(g),
        Constraint::GenreCombination(gs) => gs.is_subset(&item.genres),
        Constraint::Subject(s) => item.subjects.contains(s),
        Constraint::Author(a) => item.main_author.as_ref() == Some(a),
        Constraint::CyclicEvent { tag, field, values } => {
            let in_field = |v: &String| match field {
                MatchField::Genre => item.genres.contains(v),
                MatchField::Subject => item.subjects.contains(v),
                MatchField::Any => item.genres.contains(v) || item.subjects.contains(v),
            };
            if values.is_empty() {
                in_field(tag)
            } else {
                values.iter().any(in_field)
            }
        }
    }
}

/// Which step of a strategy contributed an item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Predicted,
    Topup,
    Diversity,
    Serendipity,
    Novelty,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarouselEntry {
    pub item_id: ItemId,
    pub source: SourceTag,
}

/// A carousel spec with its selected items, in display order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilledCarousel {
    pub spec: CarouselSpec,
    pub entries: Vec<CarouselEntry>,
}

impl FilledCarousel {
    pub fn item_ids(&self) -> impl Iterator<Item = &ItemId> + '_ {
        self.entries.iter().map(|e| &e.item_id)
    }

    pub fn sources(&self) -> impl Iterator<Item = SourceTag> + '_ {
        self.entries.iter().map(|e| e.source)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, source: SourceTag) -> usize {
        self.sources().filter(|s| *s == source).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Original,
    Diversity,
    Serendipity,
    Novelty,
    Combined,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Original,
        Strategy::Diversity,
        Strategy::Serendipity,
        Strategy::Novelty,
        Strategy::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Original => "original",
            Strategy::Diversity => "diversity",
            Strategy::Serendipity => "serendipity",
            Strategy::Novelty => "novelty",
            Strategy::Combined => "combined",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown strategy `{s}` (valid: original, diversity, serendipity, novelty, combined)"
            ))
        })
    }
}

/// Knobs shared by all fill strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub carousel_size: usize,
    /// Predicted items kept by the diversity, serendipity and novelty strategies.
    pub predicted_take: usize,
    /// Predicted items kept by the combined strategy.
    pub combined_predicted_take: usize,
    pub candidate_pool_size: usize,
    pub recency_window: usize,
    pub novelty_cutoff: NaiveDate,
    pub seed: u64,
}

impl StrategyParams {
    pub fn with_cutoff(novelty_cutoff: NaiveDate) -> Self {
        StrategyParams {
            carousel_size: 15,
            predicted_take: 10,
            combined_predicted_take: 9,
            candidate_pool_size: 100,
            recency_window: 200,
            novelty_cutoff,
            seed: 0,
        }
    }

    /// Every violated constraint, or `Ok` when none are.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.carousel_size == 0 {
            problems.push("carousel_size must be at least 1".to_owned());
        }
        if self.predicted_take > self.carousel_size {
            problems.push(format!(
                "predicted_take ({}) exceeds carousel_size ({})",
                self.predicted_take, self.carousel_size
            ));
        }
        if self.combined_predicted_take > self.carousel_size {
            problems.push(format!(
                "combined_predicted_take ({}) exceeds carousel_size ({})",
                self.combined_predicted_take, self.carousel_size
            ));
        }
        if self.candidate_pool_size < self.carousel_size.saturating_sub(self.predicted_take) {
            problems.push(format!(
                "candidate_pool_size ({}) is smaller than the {} slots left after predictions",
                self.candidate_pool_size,
                self.carousel_size.saturating_sub(self.predicted_take)
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// One line of the carousel output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarouselRecord {
    pub user_id: UserId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    pub kind: CarouselKind,
    pub constraint: ConstraintValue,
    pub provenance: Provenance,
    pub items: Vec<CarouselEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintValue {
    One(String),
    Many(Vec<String>),
}

impl CarouselRecord {
    pub fn new(user_id: UserId, strategy: Option<Strategy>, carousel: &FilledCarousel) -> Self {
        let constraint = match carousel.spec.constraint() {
            Constraint::GenreCombination(gs) => ConstraintValue::Many(gs.iter().cloned().collect()),
            other => ConstraintValue::One(other.value_string()),
        };
        CarouselRecord {
            user_id,
            strategy,
            kind: carousel.spec.kind(),
            constraint,
            provenance: carousel.spec.provenance(),
            items: carousel.entries.clone(),
        }
    }

    pub fn constraint_string(&self) -> String {
        match &self.constraint {
            ConstraintValue::One(s) => s.clone(),
            ConstraintValue::Many(v) => v.join("+"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn genres(values: &[&str]) -> BTreeSet<String> {
        values.iter().map(|s| s.to_string()).collect()
    }

    fn item(genres_: &[&str], subjects: &[&str], author: &str) -> Item {
        let mut item = Item::new("x");
        item.genres = genres(genres_);
        item.subjects = genres(subjects);
        item.main_author = AuthorKey::normalize(author);
        item
    }

    fn spec(c: Constraint) -> CarouselSpec {
        CarouselSpec::new(c, Provenance::FromPredictions).unwrap()
    }

    #[test]
    fn constraint_matching() {
        let it = item(&["fantasy", "adventure"], &["dragons"], "Tolkien");
        assert!(matches_constraint(&it, &spec(Constraint::Genre("fantasy".into()))));
        assert!(!matches_constraint(
            &item(&["fantasy"], &[], ""),
            &spec(Constraint::GenreCombination(genres(&["fantasy", "romance"])))
        ));
        assert!(matches_constraint(
            &it,
            &spec(Constraint::GenreCombination(genres(&["adventure", "fantasy"])))
        ));
        assert!(matches_constraint(&it, &spec(Constraint::Subject("dragons".into()))));
        assert!(!matches_constraint(
            &it,
            &spec(Constraint::Author(AuthorKey::normalize("Keyes").unwrap()))
        ));
        assert!(matches_constraint(
            &it,
            &spec(Constraint::Author(AuthorKey::normalize("tolkien").unwrap()))
        ));
    }

    #[test]
    fn cyclic_event_matching() {
        let it = item(&["fantasy"], &["christmas"], "");
        let by_tag = Constraint::CyclicEvent {
            tag: "christmas".into(),
            field: MatchField::Any,
            values: BTreeSet::new(),
        };
        assert!(matches_constraint(&it, &spec(by_tag)));
        let genre_only = Constraint::CyclicEvent {
            tag: "christmas".into(),
            field: MatchField::Genre,
            values: BTreeSet::new(),
        };
        assert!(!matches_constraint(&it, &spec(genre_only)));
        let mapped = Constraint::CyclicEvent {
            tag: "winter".into(),
            field: MatchField::Subject,
            values: genres(&["snow", "christmas"]),
        };
        assert!(matches_constraint(&it, &spec(mapped)));
    }

    #[test]
    fn single_genre_combination_is_rejected() {
        let c = Constraint::GenreCombination(genres(&["fantasy"]));
        assert!(CarouselSpec::new(c, Provenance::Global).is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("random".parse::<Strategy>().is_err());
    }

    #[test]
    fn params_validation_lists_all_problems() {
        let mut p = StrategyParams::with_cutoff(NaiveDate::from_ymd_opt(2023, 1, 1).unwrap());
        assert!(p.validate().is_ok());
        p.carousel_size = 5;
        p.candidate_pool_size = 0;
        match p.validate() {
            Err(Error::InvalidConfig(problems)) => assert_eq!(problems.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
