//! Basic item similarity (BIS) and the aggregates built on it.
//!
//! BIS is a weighted average of six attribute comparisons:
//!
//! ```text
//! BIS(i, j) = ( w_author  * [author_i == author_j]
//!             + w_genre   * Jaccard(genres_i, genres_j)
//!             + w_subject * Jaccard(subjects_i, subjects_j)
//!             + w_age     * [age_i == age_j]
//!             + w_medium  * [medium_i == medium_j]
//!             + w_fiction * [fiction_i == fiction_j] ) / denominator
//! ```
//!
//! A comparison where either side is missing contributes 0, and the Jaccard
//! index of two empty sets is 0. All aggregates are plain means/maxima of BIS.
//!
//! Everything here is generic over [`Scalar`], so the same code runs on
//! floats for experiments and on exact rationals for oracles.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::{Item, UserId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A similarity value in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore<S>(S);

impl<S: Scalar> SimilarityScore<S> {
    /// Wraps a value, clamping it into `[0, 1]`.
    pub fn new(value: S) -> Self {
        let value = if value < S::zero() {
            S::zero()
        } else if value > S::one() {
            S::one()
        } else {
            value
        };
        SimilarityScore(value)
    }

    pub fn value(self) -> S {
        self.0
    }
}

/// Attribute weights for [`bis`].
///
/// The denominator equals the weight sum on construction; [`BisWeights::scaled`]
/// multiplies weights and denominator by the same factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisWeights<S> {
    author: S,
    genre: S,
    subject: S,
    age_category: S,
    medium_type: S,
    fiction: S,
    denominator: S,
}

// negated comparisons below are deliberate: they reject NaN as well
#[allow(clippy::neg_cmp_op_on_partial_ord)]
impl<S: Scalar> BisWeights<S> {
    pub fn new(author: S, genre: S, subject: S, age_category: S, medium_type: S, fiction: S) -> Result<Self> {
        let weights = [author, genre, subject, age_category, medium_type, fiction];
        if weights.iter().any(|w| !(*w >= S::zero())) {
            return Err(Error::InvalidParameter("BIS weights must be non-negative".into()));
        }
        let denominator = author + genre + subject + age_category + medium_type + fiction;
        if !(denominator > S::zero()) {
            return Err(Error::InvalidParameter(
                "at least one BIS weight must be positive".into(),
            ));
        }
        Ok(BisWeights {
            author,
            genre,
            subject,
            age_category,
            medium_type,
            fiction,
            denominator,
        })
    }

    /// Multiplies every weight and the denominator by `factor > 0`.
    pub fn scaled(&self, factor: S) -> Result<Self> {
        if !(factor > S::zero()) {
            return Err(Error::InvalidParameter("weight scale factor must be positive".into()));
        }
        Ok(BisWeights {
            author: self.author * factor,
            genre: self.genre * factor,
            subject: self.subject * factor,
            age_category: self.age_category * factor,
            medium_type: self.medium_type * factor,
            fiction: self.fiction * factor,
            denominator: self.denominator * factor,
        })
    }

    pub fn author(&self) -> S {
        self.author
    }
    pub fn genre(&self) -> S {
        self.genre
    }
    pub fn subject(&self) -> S {
        self.subject
    }
    pub fn age_category(&self) -> S {
        self.age_category
    }
    pub fn medium_type(&self) -> S {
        self.medium_type
    }
    pub fn fiction(&self) -> S {
        self.fiction
    }
    pub fn denominator(&self) -> S {
        self.denominator
    }
}

impl<S: Scalar> Default for BisWeights<S> {
    /// Genre and age category count double: 1, 2, 1, 2, 1, 1 over 8.
    fn default() -> Self {
        let n = S::from_count;
        BisWeights::new(n(1), n(2), n(1), n(2), n(1), n(1)).expect("default weights are valid")
    }
}

/// How [`internal_similarity`] treats self-pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Sum over all ordered pairs including `(i, i)`, divided by `|I|²`.
    #[default]
    WithDiagonal,
    /// Sum over ordered pairs with `i != j`, divided by `|I|(|I| - 1)`.
    DistinctPairs,
}

/// `|x ∩ y| / |x ∪ y|`, and 0 when both sets are empty.
pub fn jaccard<T: Ord, S: Scalar>(x: &BTreeSet<T>, y: &BTreeSet<T>) -> SimilarityScore<S> {
    let common = intersection_len(x, y);
    let union = x.len() + y.len() - common;
    if union == 0 {
        return SimilarityScore::new(S::zero());
    }
    SimilarityScore::new(S::from_count(common) / S::from_count(union))
}

fn intersection_len<T: Ord>(x: &BTreeSet<T>, y: &BTreeSet<T>) -> usize {
    let (mut a, mut b) = (x.iter(), y.iter());
    let (mut next_a, mut next_b) = (a.next(), b.next());
    let mut common = 0;
    while let (Some(va), Some(vb)) = (next_a, next_b) {
        match va.cmp(vb) {
            std::cmp::Ordering::Less => next_a = a.next(),
            std::cmp::Ordering::Greater => next_b = b.next(),
            std::cmp::Ordering::Equal => {
                common += 1;
                next_a = a.next();
                next_b = b.next();
            }
        }
    }
    common
}

fn exact_match<T: PartialEq, S: Scalar>(a: &Option<T>, b: &Option<T>) -> S {
    match (a, b) {
        (Some(x), Some(y)) if x == y => S::one(),
        _ => S::zero(),
    }
}

pub fn bis<S: Scalar>(i: &Item, j: &Item, w: &BisWeights<S>) -> SimilarityScore<S> {
    let author: S = exact_match(&i.main_author, &j.main_author);
    let genre: S = jaccard(&i.genres, &j.genres).value();
    let subject: S = jaccard(&i.subjects, &j.subjects).value();
    let age: S = exact_match(&i.age_category, &j.age_category);
    let medium: S = exact_match(&i.medium_type, &j.medium_type);
    let fiction: S = exact_match(&i.fiction, &j.fiction);
    let total = w.author * author
        + w.genre * genre
        + w.subject * subject
        + w.age_category * age
        + w.medium_type * medium
        + w.fiction * fiction;
    SimilarityScore::new(total / w.denominator)
}

pub fn max_bis<S: Scalar>(item: &Item, set: &[&Item], w: &BisWeights<S>) -> Result<SimilarityScore<S>> {
    let mut scores = set.iter().map(|j| bis(item, j, w).value());
    let first = scores.next().ok_or(Error::EmptyInput("MaxBIS comparison set"))?;
    let best = scores.fold(first, |best, s| if s > best { s } else { best });
    Ok(SimilarityScore::new(best))
}

pub fn avg_bis<S: Scalar>(item: &Item, set: &[&Item], w: &BisWeights<S>) -> Result<SimilarityScore<S>> {
    if set.is_empty() {
        return Err(Error::EmptyInput("AvgBIS comparison set"));
    }
    let sum = set.iter().fold(S::zero(), |acc, j| acc + bis(item, j, w).value());
    Ok(SimilarityScore::new(sum / S::from_count(set.len())))
}

pub fn avg_set_bis<S: Scalar>(items: &[&Item], others: &[&Item], w: &BisWeights<S>) -> Result<SimilarityScore<S>> {
    if items.is_empty() {
        return Err(Error::EmptyInput("AvgSetBIS item set"));
    }
    let mut sum = S::zero();
    for item in items {
        sum = sum + avg_bis(item, others, w)?.value();
    }
    Ok(SimilarityScore::new(sum / S::from_count(items.len())))
}

/// Average pairwise BIS within one list of items.
pub fn internal_similarity<S: Scalar>(
    items: &[&Item],
    w: &BisWeights<S>,
    mode: PairMode,
) -> Result<SimilarityScore<S>> {
    let n = items.len();
    if n == 0 {
        return Err(Error::EmptyInput("internal similarity item list"));
    }
    let mut sum = S::zero();
    for (a, i) in items.iter().enumerate() {
        for (b, j) in items.iter().enumerate() {
            if mode == PairMode::DistinctPairs && a == b {
                continue;
            }
            sum = sum + bis(i, j, w).value();
        }
    }
    let pairs = match mode {
        PairMode::WithDiagonal => n * n,
        PairMode::DistinctPairs if n < 2 => {
            return Err(Error::InvalidParameter(
                "distinct-pair internal similarity needs at least two items".into(),
            ))
        }
        PairMode::DistinctPairs => n * (n - 1),
    };
    Ok(SimilarityScore::new(sum / S::from_count(pairs)))
}

/// Mean MaxBIS of each top-K prediction against the held-out items.
pub fn bis_at_k<S: Scalar>(truth: &[&Item], top_k: &[&Item], w: &BisWeights<S>) -> Result<SimilarityScore<S>> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("BIS@K ground truth"));
    }
    if top_k.is_empty() {
        return Err(Error::EmptyInput("BIS@K predictions"));
    }
    let mut sum = S::zero();
    for predicted in top_k {
        sum = sum + max_bis(predicted, truth, w)?.value();
    }
    Ok(SimilarityScore::new(sum / S::from_count(top_k.len())))
}

/// Mean BIS@K over `users`, visited in id order.
pub fn abis<S: Scalar>(
    users: &BTreeSet<UserId>,
    truth_by_user: &BTreeMap<UserId, Vec<&Item>>,
    preds_by_user: &BTreeMap<UserId, Vec<&Item>>,
    k: usize,
    w: &BisWeights<S>,
) -> Result<SimilarityScore<S>> {
    if users.is_empty() {
        return Err(Error::EmptyInput("ABIS user set"));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("ABIS needs K >= 1".into()));
    }
    let mut sum = S::zero();
    for user in users {
        let missing = |what: String| Error::MissingUserData {
            user: user.clone(),
            what,
        };
        let truth = truth_by_user
            .get(user)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| missing("no ground-truth items".into()))?;
        let preds = preds_by_user
            .get(user)
            .ok_or_else(|| missing("no predictions".into()))?;
        if preds.len() < k {
            return Err(missing(format!("{} predictions, K = {k}", preds.len())));
        }
        sum = sum + bis_at_k(truth, &preds[..k], w)?.value();
    }
    Ok(SimilarityScore::new(sum / S::from_count(users.len())))
}
