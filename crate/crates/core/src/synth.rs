//! Seeded synthetic library data with planted taste clusters.
//!
//! Items are split round-robin into clusters, each with its own genre,
//! subject and author vocabulary and a cluster-specific fiction share. Every
//! user belongs to one cluster, favours two of its genres, and borrows
//! exactly `ceil(purity · n)` of their `n` loans inside that cluster.
//! Popularity within a cluster is Zipf-like. A configurable fraction of items
//! is added during the final year before the snapshot date, and half of those
//! were also first published in the snapshot year.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{AuthorKey, Catalog, Item, Transaction};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_users: usize,
    pub n_items: usize,
    pub n_clusters: usize,
    pub genres_per_cluster: usize,
    pub subjects_per_cluster: usize,
    pub authors_per_cluster: usize,
    /// Share of each user's loans that fall inside their cluster.
    pub cluster_purity: f64,
    /// Share of items added in the year before `snapshot_date`.
    pub recent_fraction: f64,
    pub snapshot_date: NaiveDate,
    /// First calendar year with loans.
    pub start_year: i32,
    pub min_annual_loans: u32,
    pub max_annual_loans: u32,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_users: 500,
            n_items: 5000,
            n_clusters: 2,
            genres_per_cluster: 6,
            subjects_per_cluster: 12,
            authors_per_cluster: 150,
            cluster_purity: 0.9,
            recent_fraction: 0.2,
            snapshot_date: NaiveDate::from_ymd_opt(2023, 7, 1).expect("valid date"),
            start_year: 2020,
            min_annual_loans: 12,
            max_annual_loans: 40,
            seed: 7,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_users == 0 || self.n_items == 0 {
            problems.push("n_users and n_items must be at least 1".to_owned());
        }
        if self.n_clusters == 0 || self.n_clusters > self.n_items {
            problems.push("n_clusters must be between 1 and n_items".to_owned());
        }
        if self.genres_per_cluster < 2 || self.subjects_per_cluster == 0 || self.authors_per_cluster == 0 {
            problems.push("each cluster needs at least 2 genres, 1 subject and 1 author".to_owned());
        }
        if !(0.0..=1.0).contains(&self.cluster_purity) {
            problems.push("cluster_purity must lie in [0, 1]".to_owned());
        }
        if self.n_clusters == 1 && self.cluster_purity < 1.0 {
            problems.push("cluster_purity below 1 needs at least two clusters".to_owned());
        }
        if !(0.0..1.0).contains(&self.recent_fraction) {
            problems.push("recent_fraction must lie in [0, 1)".to_owned());
        }
        if self.min_annual_loans == 0 || self.min_annual_loans > self.max_annual_loans {
            problems.push("annual loan bounds must satisfy 1 <= min <= max".to_owned());
        }
        if self.start_year > self.snapshot_date.year() {
            problems.push("start_year is after the snapshot date".to_owned());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub items: Catalog,
    pub transactions: Vec<Transaction>,
}

const AGE_CATEGORIES: [(&str, u32); 3] = [("adult", 6), ("young-adult", 2), ("children", 2)];
const MEDIA: [(&str, u32); 4] = [("book", 7), ("ebook", 1), ("audiobook", 1), ("large-print", 1)];

fn weighted_pick<'a, R: Rng>(rng: &mut R, options: &[(&'a str, u32)]) -> &'a str {
    options.choose_weighted(rng, |o| o.1).expect("non-empty options").0
}

fn random_date<R: Rng>(rng: &mut R, from: NaiveDate, to: NaiveDate) -> NaiveDate {
    let span = (to - from).num_days().max(0);
    from + Duration::days(rng.random_range(0..=span))
}

struct ClusterIndex {
    /// Item ids of the cluster with Zipf-like popularity weights.
    items: Vec<usize>,
    all: WeightedIndex<f64>,
    /// Per genre of the vocabulary: (items carrying it, sampler).
    by_genre: Vec<Option<(Vec<usize>, WeightedIndex<f64>)>>,
}

pub fn generate(p: &SynthParams) -> Result<SynthData> {
    p.validate()?;
    let mut rng = seed::rng(seed::derive(p.seed, &["synth", "items"]));
    let snapshot = p.snapshot_date;
    let recent_from = snapshot - Duration::days(364);
    let archive_from = NaiveDate::from_ymd_opt(p.start_year - 15, 1, 1).expect("valid year");

    let genre = |c: usize, g: usize| format!("c{c}-genre-{g}");
    let subject = |c: usize, s: usize| format!("c{c}-subject-{s}");

    let n_recent = (p.recent_fraction * p.n_items as f64).round() as usize;
    let mut recent_flags: Vec<bool> = (0..p.n_items).map(|i| i < n_recent).collect();
    recent_flags.shuffle(&mut rng);

    let mut items = Vec::with_capacity(p.n_items);
    let mut item_cluster = Vec::with_capacity(p.n_items);
    for (i, &recent) in recent_flags.iter().enumerate() {
        let c = i % p.n_clusters;
        let mut item = Item::new(format!("I{:05}", i + 1));
        item.title = format!("Title {}", i + 1);
        let n_genres = *[1usize, 1, 1, 1, 1, 2, 2, 2, 2, 3].choose(&mut rng).expect("non-empty");
        for g in rand::seq::index::sample(&mut rng, p.genres_per_cluster, n_genres.min(p.genres_per_cluster)) {
            item.genres.insert(genre(c, g));
        }
        let n_subjects = rng.random_range(1..=2usize).min(p.subjects_per_cluster);
        for s in rand::seq::index::sample(&mut rng, p.subjects_per_cluster, n_subjects) {
            item.subjects.insert(subject(c, s));
        }
        // a few prolific authors per cluster
        let author_rank = ((rng.random::<f64>().powi(2)) * p.authors_per_cluster as f64) as usize;
        item.main_author = AuthorKey::normalize(&format!("author {c}-{author_rank}"));
        item.age_category = Some(weighted_pick(&mut rng, &AGE_CATEGORIES).to_owned());
        item.medium_type = Some(weighted_pick(&mut rng, &MEDIA).to_owned());
        let fiction_share = if c.is_multiple_of(2) { 0.85 } else { 0.2 };
        item.fiction = Some(rng.random_bool(fiction_share));
        if recent {
            item.added_date = Some(random_date(&mut rng, recent_from, snapshot));
            item.first_published_year = Some(if rng.random_bool(0.5) {
                snapshot.year()
            } else {
                rng.random_range(1950..snapshot.year())
            });
        } else {
            item.added_date = Some(random_date(&mut rng, archive_from, recent_from - Duration::days(1)));
            let added_year = item.added_date.map_or(snapshot.year(), |d| d.year());
            item.first_published_year = Some(rng.random_range(1900..=added_year));
        }
        items.push(item);
        item_cluster.push(c);
    }

    // Zipf-like popularity: weight 1/rank over a random ranking per cluster
    let mut weight = vec![0.0; p.n_items];
    let clusters: Vec<ClusterIndex> = (0..p.n_clusters)
        .map(|c| {
            let mut members: Vec<usize> = (0..p.n_items).filter(|&i| item_cluster[i] == c).collect();
            members.shuffle(&mut rng);
            for (rank, &i) in members.iter().enumerate() {
                weight[i] = 1.0 / (rank as f64 + 1.0).powf(0.8);
            }
            members.sort_unstable();
            let sampler = |ids: &[usize]| WeightedIndex::new(ids.iter().map(|&i| weight[i])).expect("positive weights");
            let by_genre = (0..p.genres_per_cluster)
                .map(|g| {
                    let name = genre(c, g);
                    let ids: Vec<usize> = members
                        .iter()
                        .copied()
                        .filter(|&i| items[i].genres.contains(&name))
                        .collect();
                    (!ids.is_empty()).then(|| {
                        let w = sampler(&ids);
                        (ids, w)
                    })
                })
                .collect();
            ClusterIndex {
                all: sampler(&members),
                items: members,
                by_genre,
            }
        })
        .collect();

    let mut rng = seed::rng(seed::derive(p.seed, &["synth", "loans"]));
    let mut transactions = Vec::new();
    for u in 0..p.n_users {
        let user = format!("U{:04}", u + 1);
        let c = u % p.n_clusters;
        let favourites: Vec<usize> = rand::seq::index::sample(&mut rng, p.genres_per_cluster, 2).into_vec();
        let first_year = rng.random_range(p.start_year..=snapshot.year());
        let mut slots: Vec<NaiveDate> = Vec::new();
        for year in first_year..=snapshot.year() {
            let from = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid");
            let to = NaiveDate::from_ymd_opt(year, 12, 31).expect("valid").min(snapshot);
            let share = ((to - from).num_days() + 1) as f64 / 365.0;
            let rate = rng.random_range(p.min_annual_loans..=p.max_annual_loans) as f64;
            let n = ((rate * share).round() as usize).max(1);
            slots.extend((0..n).map(|_| random_date(&mut rng, from, to)));
        }
        slots.sort_unstable();
        let n = slots.len();
        let inside = (p.cluster_purity * n as f64).ceil() as usize;
        let mut in_cluster: Vec<bool> = (0..n).map(|i| i < inside).collect();
        in_cluster.shuffle(&mut rng);

        for (day, home) in slots.into_iter().zip(in_cluster) {
            let cluster = if home {
                c
            } else {
                let other = rng.random_range(0..p.n_clusters - 1);
                if other >= c {
                    other + 1
                } else {
                    other
                }
            };
            let index = &clusters[cluster];
            let draw = |rng: &mut seed::StreamRng| -> usize {
                if home && rng.random_bool(0.7) {
                    let g = favourites[rng.random_range(0..favourites.len())];
                    if let Some((ids, w)) = &index.by_genre[g] {
                        return ids[w.sample(rng)];
                    }
                }
                index.items[index.all.sample(rng)]
            };
            // only items already in the collection on that day can be borrowed
            let mut pick = None;
            for _ in 0..50 {
                let i = draw(&mut rng);
                if items[i].added_date.is_some_and(|d| d <= day) {
                    pick = Some(i);
                    break;
                }
            }
            let i = match pick {
                Some(i) => i,
                None => *index
                    .items
                    .iter()
                    .find(|&&i| items[i].added_date.is_some_and(|d| d <= day))
                    .ok_or_else(|| Error::Invariant("cluster has no borrowable item".into()))?,
            };
            let seconds = rng.random_range(9 * 3600..20 * 3600);
            let timestamp: NaiveDateTime = day.and_hms_opt(0, 0, 0).expect("midnight") + Duration::seconds(seconds);
            transactions.push(Transaction::new(user.as_str(), items[i].item_id.clone(), timestamp));
        }
    }
    transactions.sort_by(|a, b| (&a.user_id, a.timestamp, &a.item_id).cmp(&(&b.user_id, b.timestamp, &b.item_id)));

    Ok(SynthData {
        items: items.into_iter().map(|i| (i.item_id.clone(), i)).collect(),
        transactions,
    })
}

/// Cluster index encoded in a synthetic genre/subject/author value.
pub fn cluster_of(item: &Item) -> Option<usize> {
    let g = item.genres.iter().next()?;
    g.strip_prefix('c')?.split('-').next()?.parse().ok()
}
