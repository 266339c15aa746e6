//! Distribution summaries and per-carousel novelty.

use std::cmp::Ordering;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::carousel::FilledCarousel;
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Five-number summary; whiskers are the data extremes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary<S = f64> {
    pub n: usize,
    pub lower_whisker: S,
    pub lower_quartile: S,
    pub median: S,
    pub upper_quartile: S,
    pub upper_whisker: S,
}

/// Quantile `num/den` of sorted data by linear interpolation between the
/// order statistics at positions `floor(q·(n−1))` and the next one.
fn quantile<S: Scalar>(sorted: &[S], num: usize, den: usize) -> S {
    let scaled = num * (sorted.len() - 1);
    let lo = scaled / den;
    let rem = scaled % den;
    if rem == 0 {
        return sorted[lo];
    }
    let frac = S::from_count(rem) / S::from_count(den);
    sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
}

pub fn boxplot_summary<S: Scalar>(values: &[S]) -> Result<BoxplotSummary<S>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("boxplot values"));
    }
    let mut sorted = values.to_vec();
    let mut incomparable = false;
    sorted.sort_by(|a, b| {
        a.partial_cmp(b).unwrap_or_else(|| {
            incomparable = true;
            Ordering::Equal
        })
    });
    if incomparable {
        return Err(Error::InvalidParameter("boxplot values contain NaN".into()));
    }
    Ok(BoxplotSummary {
        n: sorted.len(),
        lower_whisker: sorted[0],
        lower_quartile: quantile(&sorted, 1, 4),
        median: quantile(&sorted, 2, 4),
        upper_quartile: quantile(&sorted, 3, 4),
        upper_whisker: sorted[sorted.len() - 1],
    })
}

/// Percentage of carousel items added on or after `cutoff`.
pub fn novelty_percentage<S: Scalar>(carousel: &FilledCarousel, catalog: &Catalog, cutoff: NaiveDate) -> Result<S> {
    if carousel.is_empty() {
        return Err(Error::EmptyInput("carousel for novelty percentage"));
    }
    let mut novel = 0usize;
    for id in carousel.item_ids() {
        let item = catalog.get(id).ok_or_else(|| Error::UnknownItem(id.clone()))?;
        if item.added_date.is_some_and(|d| d >= cutoff) {
            novel += 1;
        }
    }
    Ok(S::from_count(100) * S::from_count(novel) / S::from_count(carousel.len()))
}
