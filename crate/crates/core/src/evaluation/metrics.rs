//! Exact-match ranking metrics with binary relevance.

use std::collections::BTreeSet;

use crate::catalog::ItemId;
use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// A ranked recommendation list and the items the user actually used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelevanceJudgment<T = ItemId> {
    ranked: Vec<T>,
    relevant: BTreeSet<T>,
}

impl<T: Ord + Clone + std::fmt::Debug> RelevanceJudgment<T> {
    pub fn new(ranked: Vec<T>, relevant: BTreeSet<T>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        if let Some(dup) = ranked.iter().find(|t| !seen.insert(*t)) {
            return Err(Error::InvalidParameter(format!("ranked list contains {dup:?} twice")));
        }
        Ok(RelevanceJudgment { ranked, relevant })
    }

    pub fn ranked(&self) -> &[T] {
        &self.ranked
    }

    pub fn relevant(&self) -> &BTreeSet<T> {
        &self.relevant
    }

    fn rel(&self, rank: usize) -> bool {
        self.relevant.contains(&self.ranked[rank])
    }

    fn hits(&self, k: usize) -> usize {
        (0..k.min(self.ranked.len())).filter(|&i| self.rel(i)).count()
    }
}

fn require_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidParameter("K must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Hits in the top `k` over `min(k, |ranked|)`; 0 for an empty ranking.
pub fn precision_at_k<S: Scalar, T: Ord + Clone + std::fmt::Debug>(j: &RelevanceJudgment<T>, k: usize) -> Result<S> {
    require_k(k)?;
    let shown = k.min(j.ranked.len());
    if shown == 0 {
        return Ok(S::zero());
    }
    Ok(S::from_count(j.hits(k)) / S::from_count(shown))
}

pub fn recall_at_k<S: Scalar, T: Ord + Clone + std::fmt::Debug>(j: &RelevanceJudgment<T>, k: usize) -> Result<S> {
    require_k(k)?;
    if j.relevant.is_empty() {
        return Err(Error::EmptyInput("recall relevant set"));
    }
    Ok(S::from_count(j.hits(k)) / S::from_count(j.relevant.len()))
}

/// Mean of precision@i over the relevant ranks `i <= k`, divided by the
/// number of hits in the top `k`.
pub fn average_precision_at_k<S: Scalar, T: Ord + Clone + std::fmt::Debug>(
    j: &RelevanceJudgment<T>,
    k: usize,
) -> Result<S> {
    require_k(k)?;
    let mut hits = 0usize;
    let mut sum = S::zero();
    for i in 0..k.min(j.ranked.len()) {
        if j.rel(i) {
            hits += 1;
            sum = sum + S::from_count(hits) / S::from_count(i + 1);
        }
    }
    if hits == 0 {
        return Ok(S::zero());
    }
    Ok(sum / S::from_count(hits))
}

pub fn mean_average_precision<S: Scalar, T: Ord + Clone + std::fmt::Debug>(
    judgments: &[RelevanceJudgment<T>],
    k: usize,
) -> Result<S> {
    if judgments.is_empty() {
        return Err(Error::EmptyInput("MAP judgment list"));
    }
    let mut sum = S::zero();
    for j in judgments {
        sum = sum + average_precision_at_k::<S, T>(j, k)?;
    }
    Ok(sum / S::from_count(judgments.len()))
}

fn discount<R: Real>(rank: usize) -> R {
    // rank is 1-based
    R::one() / (R::from_count(rank + 1)).log2()
}

/// Binary-relevance nDCG; 0 when the user has no relevant items.
pub fn ndcg_at_k<R: Real, T: Ord + Clone + std::fmt::Debug>(j: &RelevanceJudgment<T>, k: usize) -> Result<R> {
    require_k(k)?;
    let ideal_hits = j.relevant.len().min(k);
    if ideal_hits == 0 {
        return Ok(R::zero());
    }
    let dcg = (0..k.min(j.ranked.len()))
        .filter(|&i| j.rel(i))
        .fold(R::zero(), |acc, i| acc + discount::<R>(i + 1));
    let idcg = (1..=ideal_hits).fold(R::zero(), |acc, r| acc + discount::<R>(r));
    Ok(dcg / idcg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn judge(ranked: &[u32], relevant: &[u32]) -> RelevanceJudgment<u32> {
        RelevanceJudgment::new(ranked.to_vec(), relevant.iter().copied().collect()).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn precision_examples() {
        let j = judge(&[1, 2, 3, 4, 5], &[2, 4]);
        assert_eq!(precision_at_k::<Rational64, _>(&j, 5).unwrap(), r(2, 5));
        assert_eq!(precision_at_k::<f64, _>(&judge(&[1, 2], &[1, 2]), 2).unwrap(), 1.0);
        assert_eq!(precision_at_k::<f64, _>(&judge(&[1, 2], &[9]), 2).unwrap(), 0.0);
        assert_eq!(precision_at_k::<f64, _>(&judge(&[], &[9]), 2).unwrap(), 0.0);
        // short list: denominator is the list length
        assert_eq!(
            precision_at_k::<Rational64, _>(&judge(&[1, 2], &[1]), 10).unwrap(),
            r(1, 2)
        );
        assert!(precision_at_k::<f64, _>(&j, 0).is_err());
    }

    #[test]
    fn recall_examples() {
        let ranked: Vec<u32> = (1..=10).collect();
        let j = judge(&ranked, &[3, 20, 21, 22, 23]);
        assert_eq!(recall_at_k::<Rational64, _>(&j, 10).unwrap(), r(1, 5));
        assert_eq!(recall_at_k::<f64, _>(&judge(&[1, 2], &[1, 2]), 2).unwrap(), 1.0);
        assert_eq!(recall_at_k::<f64, _>(&judge(&[1, 2], &[5]), 2).unwrap(), 0.0);
        assert!(recall_at_k::<f64, _>(&judge(&[1], &[]), 1).is_err());
    }

    #[test]
    fn average_precision_examples() {
        assert_eq!(
            average_precision_at_k::<Rational64, _>(&judge(&[1, 2, 3, 4, 5], &[1]), 5).unwrap(),
            r(1, 1)
        );
        assert_eq!(
            average_precision_at_k::<Rational64, _>(&judge(&[1, 2, 3, 4, 5], &[2]), 5).unwrap(),
            r(1, 2)
        );
        assert_eq!(
            average_precision_at_k::<Rational64, _>(&judge(&[1, 2, 3], &[1, 3]), 3).unwrap(),
            r(5, 6)
        );
        assert_eq!(
            average_precision_at_k::<f64, _>(&judge(&[1, 2, 3], &[9]), 3).unwrap(),
            0.0
        );
    }

    #[test]
    fn map_examples() {
        let a = judge(&[1, 2], &[1]);
        let b = judge(&[1, 2], &[2]);
        assert_eq!(
            mean_average_precision::<Rational64, _>(std::slice::from_ref(&a), 2).unwrap(),
            r(1, 1)
        );
        assert_eq!(mean_average_precision::<Rational64, _>(&[a, b], 2).unwrap(), r(3, 4));
        assert!(mean_average_precision::<f64, u32>(&[], 2).is_err());
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k::<f64, _>(&judge(&[1, 2, 3], &[1]), 3).unwrap(), 1.0);
        let v: f64 = ndcg_at_k(&judge(&[1, 2], &[2]), 2).unwrap();
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert!((v - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k::<f64, _>(&judge(&[1, 2], &[]), 2).unwrap(), 0.0);
        // ideal ordering truncated at k
        assert_eq!(ndcg_at_k::<f64, _>(&judge(&[1, 2, 3], &[1, 2, 7, 8]), 2).unwrap(), 1.0);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(RelevanceJudgment::new(vec![1, 1], BTreeSet::new()).is_err());
    }
}
