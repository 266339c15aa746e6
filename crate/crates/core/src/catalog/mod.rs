//! Items, checkout transactions and the immutable [`Dataset`] built from them.

mod load;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use load::{
    load_items, load_transactions, parse_timestamp, read_items, read_transactions, write_items_csv,
    write_transactions_csv, ItemFormat, LoadIssue, LoadReport, TIMESTAMP_FORMAT,
};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Opaque catalog identifier of a title.
    ItemId
);
string_id!(
    /// Opaque library-member identifier.
    UserId
);

/// Normalized main-author key: case-folded with whitespace runs collapsed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuthorKey(String);

impl AuthorKey {
    /// Returns `None` for blank input, which is the "missing" marker.
    pub fn normalize(raw: &str) -> Option<Self> {
        let key = raw
            .split_whitespace()
            .map(str::to_lowercase)
            .collect::<Vec<_>>()
            .join(" ");
        (!key.is_empty()).then_some(AuthorKey(key))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AuthorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A catalog record. `None` and empty sets mean the attribute is missing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: ItemId,
    pub title: String,
    pub main_author: Option<AuthorKey>,
    pub genres: BTreeSet<String>,
    pub subjects: BTreeSet<String>,
    pub age_category: Option<String>,
    pub medium_type: Option<String>,
    pub fiction: Option<bool>,
    pub added_date: Option<NaiveDate>,
    pub first_published_year: Option<i32>,
}

impl Item {
    /// A bare item with every attribute missing.
    pub fn new(item_id: impl Into<ItemId>) -> Self {
        Item {
            item_id: item_id.into(),
            title: String::new(),
            main_author: None,
            genres: BTreeSet::new(),
            subjects: BTreeSet::new(),
            age_category: None,
            medium_type: None,
            fiction: None,
            added_date: None,
            first_published_year: None,
        }
    }

    /// True when all six similarity attributes are present.
    pub fn has_complete_metadata(&self) -> bool {
        self.main_author.is_some()
            && !self.genres.is_empty()
            && !self.subjects.is_empty()
            && self.age_category.is_some()
            && self.medium_type.is_some()
            && self.fiction.is_some()
    }

    /// Genre combination of this item, if it carries at least two genres.
    pub fn genre_combination(&self) -> Option<&BTreeSet<String>> {
        (self.genres.len() >= 2).then_some(&self.genres)
    }
}

pub type Catalog = BTreeMap<ItemId, Item>;

/// Held-out ground truth: the set of items each test user actually borrowed.
pub type GroundTruth = BTreeMap<UserId, BTreeSet<ItemId>>;

/// One checkout event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub user_id: UserId,
    pub item_id: ItemId,
    pub timestamp: NaiveDateTime,
}

impl Transaction {
    pub fn new(user_id: impl Into<UserId>, item_id: impl Into<ItemId>, timestamp: NaiveDateTime) -> Self {
        Transaction {
            user_id: user_id.into(),
            item_id: item_id.into(),
            timestamp,
        }
    }

    fn sort_key(&self) -> (&UserId, &NaiveDateTime, &ItemId) {
        (&self.user_id, &self.timestamp, &self.item_id)
    }
}

/// Immutable catalog + transaction log with a per-user index.
///
/// Transactions are kept sorted by `(user_id, timestamp, item_id)`, so each
/// user's history is one contiguous, chronologically ordered slice.
#[derive(Clone, Debug)]
pub struct Dataset {
    items: Arc<Catalog>,
    transactions: Vec<Transaction>,
    user_index: BTreeMap<UserId, Range<usize>>,
}

impl Dataset {
    /// Builds a dataset; every transaction must reference a catalog item.
    pub fn new(items: impl Into<Arc<Catalog>>, mut transactions: Vec<Transaction>) -> Result<Self> {
        let items = items.into();
        if let Some(t) = transactions.iter().find(|t| !items.contains_key(&t.item_id)) {
            return Err(Error::UnknownItem(t.item_id.clone()));
        }
        transactions.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Ok(Self::from_sorted(items, transactions))
    }

    fn from_sorted(items: Arc<Catalog>, transactions: Vec<Transaction>) -> Self {
        let mut user_index: BTreeMap<UserId, Range<usize>> = BTreeMap::new();
        let mut start = 0;
        for i in 1..=transactions.len() {
            if i == transactions.len() || transactions[i].user_id != transactions[start].user_id {
                user_index.insert(transactions[start].user_id.clone(), start..i);
                start = i;
            }
        }
        Dataset {
            items,
            transactions,
            user_index,
        }
    }

    pub fn items(&self) -> &Catalog {
        &self.items
    }

    pub fn shared_items(&self) -> Arc<Catalog> {
        Arc::clone(&self.items)
    }

    pub fn item(&self, id: &ItemId) -> Option<&Item> {
        self.items.get(id)
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Users in ascending id order.
    pub fn users(&self) -> impl Iterator<Item = &UserId> + '_ {
        self.user_index.keys()
    }

    pub fn user_count(&self) -> usize {
        self.user_index.len()
    }

    pub fn has_user(&self, user: &UserId) -> bool {
        self.user_index.contains_key(user)
    }

    /// Chronological history of `user`; empty for unknown users.
    pub fn user_transactions(&self, user: &UserId) -> &[Transaction] {
        self.user_index.get(user).map_or(&[], |r| &self.transactions[r.clone()])
    }

    /// Distinct items the user has borrowed.
    pub fn borrowed_items(&self, user: &UserId) -> BTreeSet<&ItemId> {
        self.user_transactions(user).iter().map(|t| &t.item_id).collect()
    }

    /// The user's `n` most recent checkouts, most recent first, re-borrows kept.
    pub fn recent_transactions(&self, user: &UserId, n: usize) -> Result<Vec<&ItemId>> {
        let range = self
            .user_index
            .get(user)
            .ok_or_else(|| Error::UnknownUser(user.clone()))?;
        Ok(self.transactions[range.clone()]
            .iter()
            .rev()
            .take(n)
            .map(|t| &t.item_id)
            .collect())
    }

    /// Like [`Dataset::recent_transactions`], resolved to catalog items.
    pub fn recent_items(&self, user: &UserId, n: usize) -> Result<Vec<&Item>> {
        Ok(self
            .recent_transactions(user, n)?
            .into_iter()
            .map(|id| &self.items[id])
            .collect())
    }

    /// The `n` most recent checkouts across all users, most recent first.
    ///
    /// Ties on timestamp are ordered by user id, then item id.
    pub fn recent_transactions_global(&self, n: usize) -> Vec<&ItemId> {
        let mut all: Vec<&Transaction> = self.transactions.iter().collect();
        all.sort_by(|a, b| {
            b.timestamp
                .cmp(&a.timestamp)
                .then_with(|| a.user_id.cmp(&b.user_id))
                .then_with(|| a.item_id.cmp(&b.item_id))
        });
        all.into_iter().take(n).map(|t| &t.item_id).collect()
    }

    /// Average loans per active calendar year for `user`.
    pub fn annual_loan_rate(&self, user: &UserId) -> f64 {
        let history = self.user_transactions(user);
        let years: BTreeSet<i32> = history.iter().map(|t| t.timestamp.year()).collect();
        if years.is_empty() {
            0.0
        } else {
            history.len() as f64 / years.len() as f64
        }
    }

    /// Keeps users whose annual loan rate lies in `[min, max]` (inclusive).
    ///
    /// The rate is loans divided by the number of distinct calendar years in
    /// which the user borrowed at least once.
    pub fn filter_users_by_annual_loans(&self, min: f64, max: f64) -> Result<Dataset> {
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN bounds fail too
        if !(min <= max) {
            return Err(Error::InvalidParameter(format!(
                "annual loan bounds must satisfy min <= max (got {min} > {max})"
            )));
        }
        let keep: BTreeSet<&UserId> = self
            .users()
            .filter(|u| {
                let rate = self.annual_loan_rate(u);
                rate >= min && rate <= max
            })
            .collect();
        let transactions = self
            .transactions
            .iter()
            .filter(|t| keep.contains(&t.user_id))
            .cloned()
            .collect();
        Ok(Self::from_sorted(self.shared_items(), transactions))
    }

    /// Holds out the `holdout` most recent checkouts of `n_test_users`
    /// seeded-randomly chosen users.
    ///
    /// Only users with more than `holdout` transactions are eligible, so
    /// every test user keeps some training history.
    pub fn split_train_test(&self, n_test_users: usize, holdout: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
        let eligible: Vec<&UserId> = self
            .user_index
            .iter()
            .filter(|(_, r)| r.len() > holdout)
            .map(|(u, _)| u)
            .collect();
        if eligible.len() < n_test_users {
            return Err(Error::InsufficientUsers {
                eligible: eligible.len(),
                requested: n_test_users,
                holdout,
            });
        }
        let mut rng = seed::rng(seed::derive(seed, &["split"]));
        let chosen: BTreeSet<&UserId> = index::sample(&mut rng, eligible.len(), n_test_users)
            .into_iter()
            .map(|i| eligible[i])
            .collect();

        let mut train = Vec::with_capacity(self.transactions.len());
        let mut truth = GroundTruth::new();
        for (user, range) in &self.user_index {
            let history = &self.transactions[range.clone()];
            if chosen.contains(user) {
                let cut = history.len() - holdout;
                train.extend_from_slice(&history[..cut]);
                truth.insert(user.clone(), history[cut..].iter().map(|t| t.item_id.clone()).collect());
            } else {
                train.extend_from_slice(history);
            }
        }
        Ok((Self::from_sorted(self.shared_items(), train), truth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn ts(y: i32, m: u32, d: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(12, 0, 0).unwrap()
    }

    fn catalog(n: usize) -> Catalog {
        (0..n)
            .map(|i| {
                let id = ItemId::new(format!("I{i:03}"));
                (id.clone(), Item::new(id))
            })
            .collect()
    }

    fn loans(user: &str, count: usize, years: &[i32]) -> Vec<Transaction> {
        (0..count)
            .map(|i| {
                let year = years[i % years.len()];
                let day = (i / years.len()) as u32;
                let t = ts(year, 1, 1) + chrono::Duration::days(day as i64);
                Transaction::new(user, format!("I{:03}", i % 100), t)
            })
            .collect()
    }

    #[test]
    fn author_key_is_case_and_space_insensitive() {
        assert_eq!(
            AuthorKey::normalize("  Marian   KEYES "),
            AuthorKey::normalize("marian keyes")
        );
        assert_eq!(AuthorKey::normalize("   "), None);
    }

    #[test]
    fn user_index_partitions_transactions() {
        let mut txs = loans("b", 7, &[2022]);
        txs.extend(loans("a", 3, &[2022]));
        let ds = Dataset::new(catalog(100), txs).unwrap();
        let total: usize = ds.users().map(|u| ds.user_transactions(u).len()).sum();
        assert_eq!(total, ds.transactions().len());
        assert_eq!(ds.users().map(UserId::as_str).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn unknown_item_is_rejected() {
        let txs = vec![Transaction::new("u", "nope", ts(2022, 1, 1))];
        assert!(matches!(Dataset::new(catalog(3), txs), Err(Error::UnknownItem(_))));
    }

    #[test]
    fn same_timestamp_orders_by_item_id() {
        let t = ts(2022, 5, 5);
        let txs = vec![Transaction::new("u", "I002", t), Transaction::new("u", "I001", t)];
        let ds = Dataset::new(catalog(3), txs).unwrap();
        let ids: Vec<_> = ds.transactions().iter().map(|t| t.item_id.as_str()).collect();
        assert_eq!(ids, ["I001", "I002"]);
    }

    #[test]
    fn annual_filter_bounds() {
        let mut txs = loans("heavy", 60, &[2022]);
        txs.extend(loans("edge", 10, &[2022]));
        txs.extend(loans("spread", 30, &[2021, 2022]));
        txs.extend(loans("light", 9, &[2022]));
        let ds = Dataset::new(catalog(100), txs).unwrap();
        assert_eq!(ds.annual_loan_rate(&"spread".into()), 15.0);

        let kept = ds.filter_users_by_annual_loans(10.0, 50.0).unwrap();
        let users: Vec<_> = kept.users().map(UserId::as_str).collect();
        assert_eq!(users, ["edge", "spread"]);

        let twice = kept.filter_users_by_annual_loans(10.0, 50.0).unwrap();
        assert_eq!(twice.transactions(), kept.transactions());
    }

    #[test]
    fn annual_filter_rejects_inverted_bounds() {
        let ds = Dataset::new(catalog(100), loans("a", 12, &[2022])).unwrap();
        assert!(ds.filter_users_by_annual_loans(50.0, 10.0).is_err());
    }

    #[test]
    fn recent_window_keeps_reborrows() {
        let txs = vec![
            Transaction::new("u", "I001", ts(2022, 1, 1)),
            Transaction::new("u", "I002", ts(2022, 2, 1)),
            Transaction::new("u", "I001", ts(2022, 3, 1)),
            Transaction::new("u", "I003", ts(2022, 4, 1)),
        ];
        let ds = Dataset::new(catalog(5), txs).unwrap();
        let recent: Vec<_> = ds
            .recent_transactions(&"u".into(), 200)
            .unwrap()
            .into_iter()
            .map(ItemId::as_str)
            .collect();
        assert_eq!(recent, ["I003", "I001", "I002", "I001"]);
        let two: Vec<_> = ds.recent_transactions(&"u".into(), 2).unwrap();
        assert_eq!(two.len(), 2);
        assert!(ds.recent_transactions(&"x".into(), 2).is_err());
    }

    #[test]
    fn recent_window_truncates_long_history() {
        let ds = Dataset::new(catalog(100), loans("u", 250, &[2020])).unwrap();
        let recent = ds.recent_transactions(&"u".into(), 200).unwrap();
        assert_eq!(recent.len(), 200);
        let last = ds.user_transactions(&"u".into()).last().unwrap();
        assert_eq!(recent[0], &last.item_id);
    }

    #[test]
    fn split_holds_out_most_recent() {
        let mut txs = Vec::new();
        for u in 0..20 {
            txs.extend(loans(&format!("u{u:02}"), 8, &[2022]));
        }
        let ds = Dataset::new(catalog(100), txs).unwrap();
        let (train, truth) = ds.split_train_test(5, 3, 7).unwrap();
        assert_eq!(truth.len(), 5);
        assert_eq!(train.transactions().len(), 20 * 8 - 5 * 3);
        for (user, held) in &truth {
            let full = ds.user_transactions(user);
            let expected: BTreeSet<ItemId> = full[full.len() - 3..].iter().map(|t| t.item_id.clone()).collect();
            assert_eq!(held, &expected);
            assert_eq!(train.user_transactions(user), &full[..full.len() - 3]);
        }

        let (train2, truth2) = ds.split_train_test(5, 3, 7).unwrap();
        assert_eq!(truth, truth2);
        assert_eq!(train.transactions(), train2.transactions());
    }

    #[test]
    fn split_with_zero_users_is_identity() {
        let ds = Dataset::new(catalog(100), loans("u", 8, &[2022])).unwrap();
        let (train, truth) = ds.split_train_test(0, 5, 1).unwrap();
        assert!(truth.is_empty());
        assert_eq!(train.transactions(), ds.transactions());
    }

    #[test]
    fn split_reports_insufficient_users() {
        let ds = Dataset::new(catalog(100), loans("u", 3, &[2022])).unwrap();
        let err = ds.split_train_test(1, 5, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientUsers {
                eligible: 0,
                requested: 1,
                ..
            }
        ));
    }

    #[test]
    fn global_recent_is_cross_user() {
        let txs = vec![
            Transaction::new("a", "I001", ts(2022, 1, 1)),
            Transaction::new("b", "I002", ts(2022, 3, 1)),
            Transaction::new("a", "I003", ts(2022, 2, 1)),
        ];
        let ds = Dataset::new(catalog(5), txs).unwrap();
        let ids: Vec<_> = ds
            .recent_transactions_global(2)
            .into_iter()
            .map(ItemId::as_str)
            .collect();
        assert_eq!(ids, ["I002", "I003"]);
    }
}
