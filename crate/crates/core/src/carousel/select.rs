//! Frequency-based carousel selection.
//!
//! For a user with history, attribute frequencies are taken over the top-5
//! predicted items and then over the 5 most recently borrowed distinct items,
//! the second pass skipping values the first pass already picked. Cold-start
//! users get the same procedure over pooled top-1 predictions and the 1000
//! most recent checkouts of everybody, without single-genre carousels.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{CarouselSpec, Constraint, MatchField, Provenance};
use crate::catalog::{AuthorKey, Dataset, Item, ItemId, UserId};
use crate::error::{Error, Result};
use crate::recommender::PredictionList;

pub const TOP_PREDICTED: usize = 5;
pub const RECENT_BORROWED: usize = 5;
pub const COLD_START_RECENT: usize = 1000;

/// How many carousels of each type one statistics source may contribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCounts {
    pub genres: usize,
    pub genre_combinations: usize,
    pub subjects: usize,
    pub authors: usize,
}

impl Default for SelectionCounts {
    fn default() -> Self {
        SelectionCounts {
            genres: 3,
            genre_combinations: 2,
            subjects: 3,
            authors: 3,
        }
    }
}

#[derive(Default)]
struct FeatureCounts<'a> {
    genres: BTreeMap<&'a String, usize>,
    combinations: BTreeMap<&'a BTreeSet<String>, usize>,
    subjects: BTreeMap<&'a String, usize>,
    authors: BTreeMap<&'a AuthorKey, usize>,
}

impl<'a> FeatureCounts<'a> {
    fn over(items: &[&'a Item]) -> Self {
        let mut counts = FeatureCounts::default();
        for item in items {
            for g in &item.genres {
                *counts.genres.entry(g).or_default() += 1;
            }
            if let Some(combo) = item.genre_combination() {
                *counts.combinations.entry(combo).or_default() += 1;
            }
            for s in &item.subjects {
                *counts.subjects.entry(s).or_default() += 1;
            }
            if let Some(a) = &item.main_author {
                *counts.authors.entry(a).or_default() += 1;
            }
        }
        counts
    }
}

/// Up to `n` keys by descending count, ties by ascending key, skipping `exclude`.
fn most_frequent<K: Ord + Copy>(counts: &BTreeMap<K, usize>, n: usize, exclude: &BTreeSet<K>) -> Vec<K> {
    let mut ranked: Vec<(K, usize)> = counts
        .iter()
        .filter(|(k, _)| !exclude.contains(k))
        .map(|(k, c)| (*k, *c))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(n).map(|(k, _)| k).collect()
}

/// Picks from `primary`, then from `secondary` excluding values already taken.
fn pick_two_pass<K: Ord + Copy>(
    primary: &BTreeMap<K, usize>,
    secondary: &BTreeMap<K, usize>,
    n: usize,
) -> (Vec<K>, Vec<K>) {
    let first = most_frequent(primary, n, &BTreeSet::new());
    let taken: BTreeSet<K> = first.iter().copied().collect();
    let second = most_frequent(secondary, n, &taken);
    (first, second)
}

fn frequency_procedure(
    primary: &[&Item],
    secondary: &[&Item],
    counts: SelectionCounts,
    include_single_genres: bool,
    provenance: (Provenance, Provenance),
) -> Vec<CarouselSpec> {
    let p = FeatureCounts::over(primary);
    let s = FeatureCounts::over(secondary);
    let mut specs = Vec::new();
    let mut push = |c: Constraint, prov: Provenance| {
        specs.push(CarouselSpec::new(c, prov).expect("constraint built from item data"));
    };

    let genre_n = if include_single_genres { counts.genres } else { 0 };
    let (genres_p, genres_s) = pick_two_pass(&p.genres, &s.genres, genre_n);
    let (combos_p, combos_s) = pick_two_pass(&p.combinations, &s.combinations, counts.genre_combinations);
    for g in genres_p {
        push(Constraint::Genre(g.clone()), provenance.0);
    }
    for c in combos_p {
        push(Constraint::GenreCombination(c.clone()), provenance.0);
    }
    for g in genres_s {
        push(Constraint::Genre(g.clone()), provenance.1);
    }
    for c in combos_s {
        push(Constraint::GenreCombination(c.clone()), provenance.1);
    }

    let (subjects_p, subjects_s) = pick_two_pass(&p.subjects, &s.subjects, counts.subjects);
    for v in subjects_p {
        push(Constraint::Subject(v.clone()), provenance.0);
    }
    for v in subjects_s {
        push(Constraint::Subject(v.clone()), provenance.1);
    }

    let (authors_p, authors_s) = pick_two_pass(&p.authors, &s.authors, counts.authors);
    for a in authors_p {
        push(Constraint::Author(a.clone()), provenance.0);
    }
    for a in authors_s {
        push(Constraint::Author(a.clone()), provenance.1);
    }
    specs
}

fn resolve<'a>(ds: &'a Dataset, ids: impl IntoIterator<Item = &'a ItemId>) -> Result<Vec<&'a Item>> {
    ids.into_iter()
        .map(|id| ds.item(id).ok_or_else(|| Error::UnknownItem(id.clone())))
        .collect()
}

/// The `n` most recently borrowed distinct items of a user.
fn recent_distinct<'a>(ds: &'a Dataset, user: &UserId, n: usize) -> Vec<&'a ItemId> {
    let mut seen = BTreeSet::new();
    ds.user_transactions(user)
        .iter()
        .rev()
        .map(|t| &t.item_id)
        .filter(|id| seen.insert(*id))
        .take(n)
        .collect()
}

pub fn select_carousels_with_history(
    user: &UserId,
    preds: &PredictionList,
    ds: &Dataset,
    counts: SelectionCounts,
) -> Result<Vec<CarouselSpec>> {
    if preds.is_empty() {
        return Err(Error::MissingUserData {
            user: user.clone(),
            what: "no predictions; use cold-start selection".into(),
        });
    }
    if ds.user_transactions(user).is_empty() {
        return Err(Error::MissingUserData {
            user: user.clone(),
            what: "no borrowing history; use cold-start selection".into(),
        });
    }
    let predicted = resolve(ds, preds.item_ids().take(TOP_PREDICTED))?;
    let recent = resolve(ds, recent_distinct(ds, user, RECENT_BORROWED))?;
    Ok(frequency_procedure(
        &predicted,
        &recent,
        counts,
        true,
        (Provenance::FromPredictions, Provenance::FromHistory),
    ))
}

pub fn select_carousels_cold_start(
    ds: &Dataset,
    all_preds: &BTreeMap<UserId, PredictionList>,
    counts: SelectionCounts,
) -> Result<Vec<CarouselSpec>> {
    let pooled = resolve(ds, all_preds.values().filter_map(|p| p.item_ids().next()))?;
    if pooled.is_empty() {
        return Err(Error::EmptyInput("pooled top-1 predictions"));
    }
    if ds.is_empty() {
        return Err(Error::EmptyInput("transaction log"));
    }
    let recent = resolve(ds, ds.recent_transactions_global(COLD_START_RECENT))?;
    Ok(frequency_procedure(
        &pooled,
        &recent,
        counts,
        false,
        (Provenance::Global, Provenance::Global),
    ))
}

/// A dated window during which a themed carousel is offered.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventWindow {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub tag: String,
    #[serde(default)]
    pub match_field: MatchField,
    #[serde(default)]
    pub match_values: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventCalendar {
    pub events: Vec<EventWindow>,
}

impl EventCalendar {
    /// The carousel of the first window containing `date` (bounds inclusive).
    pub fn active_spec(&self, date: NaiveDate) -> Option<CarouselSpec> {
        let event = self
            .events
            .iter()
            .find(|e| e.start_date <= date && date <= e.end_date)?;
        let constraint = Constraint::CyclicEvent {
            tag: event.tag.clone(),
            field: event.match_field,
            values: event.match_values.iter().cloned().collect(),
        };
        CarouselSpec::new(constraint, Provenance::Global).ok()
    }
}
