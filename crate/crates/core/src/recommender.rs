//! Per-user ranked prediction lists.
//!
//! Three providers: cosine-normalized item co-occurrence, a seeded random
//! baseline with linearly decaying scores, and imported lists produced by an
//! external model (file with header `user_id,item_id,score`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Dataset, ItemId, LoadIssue, UserId};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item_id: ItemId,
    pub score: f64,
}

impl ScoredItem {
    pub fn new(item_id: impl Into<ItemId>, score: f64) -> Self {
        ScoredItem {
            item_id: item_id.into(),
            score,
        }
    }
}

/// Ranked recommendations for one user: scores non-increasing, ids unique.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionList {
    user_id: UserId,
    entries: Vec<ScoredItem>,
}

fn rank_order(a: &ScoredItem, b: &ScoredItem) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.item_id.cmp(&b.item_id))
}

impl PredictionList {
    /// Validates an already ranked list.
    pub fn new(user_id: UserId, entries: Vec<ScoredItem>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (pos, e) in entries.iter().enumerate() {
            if !e.score.is_finite() {
                return Err(Error::Invariant(format!(
                    "non-finite score for `{}` in list of `{user_id}`",
                    e.item_id
                )));
            }
            if !seen.insert(&e.item_id) {
                return Err(Error::Invariant(format!(
                    "duplicate item `{}` in list of `{user_id}`",
                    e.item_id
                )));
            }
            if pos > 0 && entries[pos - 1].score < e.score {
                return Err(Error::Invariant(format!(
                    "scores increase at rank {pos} in list of `{user_id}`"
                )));
            }
        }
        Ok(PredictionList { user_id, entries })
    }

    /// Sorts by score (ties by item id) and keeps the best score per item.
    pub fn from_unranked(user_id: UserId, mut entries: Vec<ScoredItem>) -> Self {
        entries.retain(|e| e.score.is_finite());
        entries.sort_by(rank_order);
        let mut seen = BTreeSet::new();
        entries.retain(|e| seen.insert(e.item_id.clone()));
        PredictionList { user_id, entries }
    }

    pub fn empty(user_id: UserId) -> Self {
        PredictionList {
            user_id,
            entries: Vec::new(),
        }
    }

    pub fn user_id(&self) -> &UserId {
        &self.user_id
    }

    pub fn entries(&self) -> &[ScoredItem] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn item_ids(&self) -> impl Iterator<Item = &ItemId> + '_ {
        self.entries.iter().map(|e| &e.item_id)
    }

    /// Drops everything after rank `n`.
    pub fn truncated(mut self, n: usize) -> Self {
        self.entries.truncate(n);
        self
    }
}

/// The first `min(k, len)` item ids of a list.
pub fn top_k(list: &PredictionList, k: usize) -> Vec<&ItemId> {
    list.item_ids().take(k).collect()
}

/// Anything that can rank items for a user.
pub trait PredictionProvider: Sync {
    fn predict(&self, user: &UserId, n: usize) -> Result<PredictionList>;
}

/// Item-item co-occurrence over training histories.
///
/// A candidate's score is the sum, over the user's distinct borrowed items
/// `b`, of `co(b, c) / sqrt(n(b) * n(c))` where `co` counts users who
/// borrowed both and `n` counts users who borrowed each.
pub struct CooccurrenceModel<'a> {
    train: &'a Dataset,
    ids: Vec<&'a ItemId>,
    position: HashMap<&'a ItemId, u32>,
    readers: Vec<u32>,
    neighbours: Vec<Vec<(u32, u32)>>,
}

impl<'a> CooccurrenceModel<'a> {
    pub fn build(train: &'a Dataset) -> Self {
        let ids: Vec<&ItemId> = train.items().keys().collect();
        let position: HashMap<&ItemId, u32> = ids.iter().enumerate().map(|(i, id)| (*id, i as u32)).collect();
        let mut readers = vec![0u32; ids.len()];
        let mut counts: Vec<HashMap<u32, u32>> = vec![HashMap::new(); ids.len()];
        for user in train.users() {
            let distinct: BTreeSet<u32> = train
                .user_transactions(user)
                .iter()
                .map(|t| position[&t.item_id])
                .collect();
            for &a in &distinct {
                readers[a as usize] += 1;
                for &b in &distinct {
                    if a != b {
                        *counts[a as usize].entry(b).or_default() += 1;
                    }
                }
            }
        }
        let neighbours = counts
            .into_iter()
            .map(|m| {
                let mut v: Vec<(u32, u32)> = m.into_iter().collect();
                v.sort_unstable();
                v
            })
            .collect();
        CooccurrenceModel {
            train,
            ids,
            position,
            readers,
            neighbours,
        }
    }

    /// Number of users who borrowed both items.
    pub fn co_borrow_count(&self, a: &ItemId, b: &ItemId) -> u32 {
        let (Some(&pa), Some(&pb)) = (self.position.get(a), self.position.get(b)) else {
            return 0;
        };
        let list = &self.neighbours[pa as usize];
        list.binary_search_by_key(&pb, |&(c, _)| c).map_or(0, |i| list[i].1)
    }

    pub fn score(&self, user: &UserId, n: usize) -> Result<PredictionList> {
        let history: BTreeSet<u32> = self
            .train
            .user_transactions(user)
            .iter()
            .map(|t| self.position[&t.item_id])
            .collect();
        if history.is_empty() {
            return Err(Error::MissingUserData {
                user: user.clone(),
                what: "no training transactions for co-occurrence scoring".into(),
            });
        }
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for &b in &history {
            let nb = f64::from(self.readers[b as usize]);
            for &(c, co) in &self.neighbours[b as usize] {
                if history.contains(&c) {
                    continue;
                }
                let nc = f64::from(self.readers[c as usize]);
                *scores.entry(c).or_insert(0.0) += f64::from(co) / (nb * nc).sqrt();
            }
        }
        let mut entries: Vec<ScoredItem> = scores
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(c, s)| ScoredItem::new(self.ids[c as usize].clone(), s))
            .collect();
        entries.sort_by(rank_order);
        entries.truncate(n);
        PredictionList::new(user.clone(), entries)
    }
}

impl PredictionProvider for CooccurrenceModel<'_> {
    fn predict(&self, user: &UserId, n: usize) -> Result<PredictionList> {
        self.score(user, n)
    }
}

fn descending_scores(ids: Vec<ItemId>) -> Vec<ScoredItem> {
    ids.into_iter()
        .enumerate()
        .map(|(rank, id)| ScoredItem::new(id, (1000.0 - rank as f64) / 1000.0))
        .collect()
}

/// `n` seeded-uniform distinct catalog items scored 1.000, 0.999, 0.998, …
pub fn random_baseline(catalog: &Catalog, user: &UserId, n: usize, seed: u64) -> Result<PredictionList> {
    if n > catalog.len() {
        return Err(Error::InvalidParameter(format!(
            "random baseline asked for {n} items from a catalog of {}",
            catalog.len()
        )));
    }
    let ids: Vec<&ItemId> = catalog.keys().collect();
    let mut rng = seed::rng(seed::derive(seed, &["random-baseline", user.as_str()]));
    let picked = index::sample(&mut rng, ids.len(), n)
        .into_iter()
        .map(|i| ids[i].clone())
        .collect();
    PredictionList::new(user.clone(), descending_scores(picked))
}

/// Random baseline restricted to items the user has not borrowed in training.
pub struct RandomProvider<'a> {
    train: &'a Dataset,
    seed: u64,
}

impl<'a> RandomProvider<'a> {
    pub fn new(train: &'a Dataset, seed: u64) -> Self {
        RandomProvider { train, seed }
    }
}

impl PredictionProvider for RandomProvider<'_> {
    fn predict(&self, user: &UserId, n: usize) -> Result<PredictionList> {
        let borrowed = self.train.borrowed_items(user);
        let pool: Vec<&ItemId> = self.train.items().keys().filter(|id| !borrowed.contains(id)).collect();
        let mut rng = seed::rng(seed::derive(self.seed, &["random-baseline", user.as_str()]));
        let picked = index::sample(&mut rng, pool.len(), n.min(pool.len()))
            .into_iter()
            .map(|i| pool[i].clone())
            .collect();
        PredictionList::new(user.clone(), descending_scores(picked))
    }
}

/// Counts of what [`import_predictions`] discarded.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub rows_read: usize,
    pub dropped_unknown_items: usize,
    pub dropped_already_borrowed: usize,
    pub duplicate_pairs: usize,
    pub issues: Vec<LoadIssue>,
}

pub fn import_predictions(path: &Path, train: &Dataset) -> Result<(BTreeMap<UserId, PredictionList>, ImportReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(BufReader::new(file), train, path)
}

/// Parses and validates a predictions file.
///
/// Unknown or already-borrowed items are dropped; for a duplicated
/// `(user, item)` pair the highest score wins.
pub fn read_predictions<R: Read>(
    reader: R,
    train: &Dataset,
    origin: &Path,
) -> Result<(BTreeMap<UserId, PredictionList>, ImportReport)> {
    let mut report = ImportReport::default();
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv.headers().map_err(|e| Error::parse(origin, e.to_string()))?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(Error::MissingColumn {
                path: origin.to_owned(),
                column: name,
            })
    };
    let (user_col, item_col, score_col) = (column("user_id")?, column("item_id")?, column("score")?);

    let mut raw: BTreeMap<UserId, BTreeMap<ItemId, f64>> = BTreeMap::new();
    let mut borrowed_cache: HashMap<UserId, BTreeSet<ItemId>> = HashMap::new();
    for record in csv.records() {
        report.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map_or(0, |p| p.line() as usize);
                report.issues.push(LoadIssue {
                    row,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let row = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).map(str::trim).unwrap_or_default();
        let score = match field(score_col).parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            _ => {
                report.issues.push(LoadIssue {
                    row,
                    reason: format!("unparseable score `{}`", field(score_col)),
                });
                continue;
            }
        };
        let user = UserId::new(field(user_col));
        let item = ItemId::new(field(item_col));
        if train.item(&item).is_none() {
            report.dropped_unknown_items += 1;
            continue;
        }
        let borrowed = borrowed_cache
            .entry(user.clone())
            .or_insert_with(|| train.borrowed_items(&user).into_iter().cloned().collect());
        if borrowed.contains(&item) {
            report.dropped_already_borrowed += 1;
            continue;
        }
        let per_user = raw.entry(user).or_default();
        match per_user.get_mut(&item) {
            Some(existing) => {
                report.duplicate_pairs += 1;
                if score > *existing {
                    *existing = score;
                }
            }
            None => {
                per_user.insert(item, score);
            }
        }
    }
    let lists = raw
        .into_iter()
        .map(|(user, items)| {
            let entries = items.into_iter().map(|(id, s)| ScoredItem::new(id, s)).collect();
            (user.clone(), PredictionList::from_unranked(user, entries))
        })
        .collect();
    Ok((lists, report))
}

/// Lists loaded from a predictions file.
pub struct ImportedProvider {
    lists: BTreeMap<UserId, PredictionList>,
}

impl ImportedProvider {
    pub fn new(lists: BTreeMap<UserId, PredictionList>) -> Self {
        ImportedProvider { lists }
    }
}

impl PredictionProvider for ImportedProvider {
    fn predict(&self, user: &UserId, n: usize) -> Result<PredictionList> {
        self.lists
            .get(user)
            .map(|l| l.clone().truncated(n))
            .ok_or_else(|| Error::MissingUserData {
                user: user.clone(),
                what: "no imported predictions".into(),
            })
    }
}

/// Provider selection as written on the command line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProviderChoice {
    Cooccurrence,
    Random,
    Import(PathBuf),
}

impl FromStr for ProviderChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cooccurrence" => Ok(ProviderChoice::Cooccurrence),
            "random" => Ok(ProviderChoice::Random),
            _ => match s.strip_prefix("import:") {
                Some(path) if !path.is_empty() => Ok(ProviderChoice::Import(path.into())),
                _ => Err(Error::InvalidParameter(format!(
                    "unknown provider `{s}` (valid: cooccurrence, random, import:<path>)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for ProviderChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ProviderChoice> for String {
    fn from(p: ProviderChoice) -> String {
        match p {
            ProviderChoice::Cooccurrence => "cooccurrence".into(),
            ProviderChoice::Random => "random".into(),
            ProviderChoice::Import(path) => format!("import:{}", path.display()),
        }
    }
}

/// Writes lists in the `user_id,item_id,score` format.
pub fn write_predictions_csv<'a, W: Write>(out: W, lists: impl IntoIterator<Item = &'a PredictionList>) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::parse("<predictions output>", e.to_string());
    csv.write_record(["user_id", "item_id", "score"]).map_err(csv_err)?;
    for list in lists {
        for e in list.entries() {
            csv.write_record([list.user_id().as_str(), e.item_id.as_str(), &e.score.to_string()])
                .map_err(csv_err)?;
        }
    }
    csv.flush().map_err(|e| Error::io("<predictions output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Item, Transaction};
    use chrono::NaiveDate;

    fn dataset(rows: &[(&str, &str)], extra_items: &[&str]) -> Dataset {
        let mut catalog = Catalog::new();
        for id in rows.iter().map(|r| r.1).chain(extra_items.iter().copied()) {
            catalog.insert(ItemId::new(id), Item::new(id));
        }
        let base = NaiveDate::from_ymd_opt(2023, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let txs = rows
            .iter()
            .enumerate()
            .map(|(i, (u, it))| Transaction::new(*u, *it, base + chrono::Duration::hours(i as i64)))
            .collect();
        Dataset::new(catalog, txs).unwrap()
    }

    #[test]
    fn cooccurrence_prefers_frequent_neighbours() {
        // A is co-borrowed with B by u2..u4 and with C by u5 only.
        let ds = dataset(
            &[
                ("u1", "A"),
                ("u2", "A"),
                ("u2", "B"),
                ("u3", "A"),
                ("u3", "B"),
                ("u4", "A"),
                ("u4", "B"),
                ("u5", "A"),
                ("u5", "C"),
            ],
            &[],
        );
        let model = CooccurrenceModel::build(&ds);
        assert_eq!(model.co_borrow_count(&"A".into(), &"B".into()), 3);
        assert_eq!(model.co_borrow_count(&"A".into(), &"C".into()), 1);
        let list = model.score(&"u1".into(), 10).unwrap();
        let ids: Vec<_> = list.item_ids().map(ItemId::as_str).collect();
        assert_eq!(ids, ["B", "C"]);
        // 3 / sqrt(5 * 3) and 1 / sqrt(5 * 1)
        assert!((list.entries()[0].score - 3.0 / 15f64.sqrt()).abs() < 1e-12);
        assert!((list.entries()[1].score - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cooccurrence_excludes_own_and_unrelated_items() {
        let ds = dataset(&[("u1", "A"), ("u1", "B"), ("u2", "A"), ("u2", "B")], &["Z"]);
        let model = CooccurrenceModel::build(&ds);
        assert!(model.score(&"u1".into(), 10).unwrap().is_empty());
        assert!(model.score(&"nobody".into(), 10).is_err());
    }

    #[test]
    fn cooccurrence_ties_break_by_item_id() {
        let ds = dataset(&[("u1", "A"), ("u2", "A"), ("u2", "C"), ("u3", "A"), ("u3", "B")], &[]);
        let list = CooccurrenceModel::build(&ds).score(&"u1".into(), 10).unwrap();
        let ids: Vec<_> = list.item_ids().map(ItemId::as_str).collect();
        assert_eq!(ids, ["B", "C"]);
        assert_eq!(list.entries()[0].score, list.entries()[1].score);
    }

    #[test]
    fn random_baseline_scores_decline_by_a_thousandth() {
        let ds = dataset(&[("u", "A")], &["B", "C", "D", "E"]);
        let list = random_baseline(ds.items(), &"u".into(), 3, 42).unwrap();
        let scores: Vec<f64> = list.entries().iter().map(|e| e.score).collect();
        assert_eq!(scores, [1.0, 0.999, 0.998]);
        assert_eq!(list, random_baseline(ds.items(), &"u".into(), 3, 42).unwrap());
        assert!(random_baseline(ds.items(), &"u".into(), 0, 42).unwrap().is_empty());
        assert!(random_baseline(ds.items(), &"u".into(), 6, 42).is_err());
    }

    #[test]
    fn random_provider_skips_borrowed() {
        let ds = dataset(&[("u", "A"), ("u", "B")], &["C", "D"]);
        let list = RandomProvider::new(&ds, 3).predict(&"u".into(), 10).unwrap();
        let ids: BTreeSet<_> = list.item_ids().map(ItemId::as_str).collect();
        assert_eq!(ids, BTreeSet::from(["C", "D"]));
    }

    #[test]
    fn import_validates_rows() {
        let ds = dataset(&[("u1", "A"), ("u2", "B")], &["C", "D", "E", "F", "G"]);
        let body = "user_id,item_id,score\n\
                    u1,C,0.4\nu1,D,0.8\nu1,C,0.9\nu1,NOPE,0.5\nu1,A,0.7\n\
                    u2,E,0.1\nu2,F,0.3\nu2,G,bad\n";
        let (lists, report) = read_predictions(body.as_bytes(), &ds, Path::new("p.csv")).unwrap();
        assert_eq!(report.dropped_unknown_items, 1);
        assert_eq!(report.dropped_already_borrowed, 1);
        assert_eq!(report.duplicate_pairs, 1);
        assert_eq!(report.issues.len(), 1);
        let u1 = &lists[&UserId::from("u1")];
        assert_eq!(u1.entries(), [ScoredItem::new("C", 0.9), ScoredItem::new("D", 0.8)]);
        let u2: Vec<_> = lists[&UserId::from("u2")].item_ids().map(ItemId::as_str).collect();
        assert_eq!(u2, ["F", "E"]);
    }

    #[test]
    fn import_two_users_five_rows() {
        let items = ["I1", "I2", "I3", "I4", "I5"];
        let ds = dataset(&[("h", "I1")], &items[1..]);
        let mut body = String::from("user_id,item_id,score\n");
        for u in ["a", "b"] {
            for (i, it) in items.iter().enumerate() {
                body.push_str(&format!("{u},{it},{}\n", i as f64 / 10.0));
            }
        }
        let (lists, _) = read_predictions(body.as_bytes(), &ds, Path::new("p.csv")).unwrap();
        assert_eq!(lists.len(), 2);
        assert!(lists.values().all(|l| l.len() == 5));
    }

    #[test]
    fn written_predictions_reimport() {
        let ds = dataset(&[("u", "A")], &["B", "C", "D"]);
        let list = random_baseline(ds.items(), &"v".into(), 3, 1).unwrap();
        let mut buf = Vec::new();
        write_predictions_csv(&mut buf, [&list]).unwrap();
        let (lists, _) = read_predictions(buf.as_slice(), &ds, Path::new("p")).unwrap();
        assert_eq!(lists[&UserId::from("v")], list);
    }

    #[test]
    fn top_k_slices() {
        let entries = (0..10)
            .map(|i| ScoredItem::new(format!("I{i}"), 1.0 - i as f64 * 0.1))
            .collect();
        let list = PredictionList::new("u".into(), entries).unwrap();
        assert_eq!(top_k(&list, 5).len(), 5);
        assert_eq!(top_k(&list, 5)[4].as_str(), "I4");
        assert!(top_k(&list, 0).is_empty());
        assert_eq!(top_k(&list, 50).len(), 10);
    }

    #[test]
    fn list_invariants_are_checked() {
        let up = vec![ScoredItem::new("a", 0.1), ScoredItem::new("b", 0.2)];
        assert!(PredictionList::new("u".into(), up).is_err());
        let dup = vec![ScoredItem::new("a", 0.2), ScoredItem::new("a", 0.1)];
        assert!(PredictionList::new("u".into(), dup).is_err());
    }

    #[test]
    fn provider_choice_parsing() {
        assert_eq!("random".parse::<ProviderChoice>().unwrap(), ProviderChoice::Random);
        assert_eq!(
            "import:p.csv".parse::<ProviderChoice>().unwrap(),
            ProviderChoice::Import("p.csv".into())
        );
        let err = "bpr".parse::<ProviderChoice>().unwrap_err().to_string();
        assert!(err.contains("cooccurrence"));
    }
}
