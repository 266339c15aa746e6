//! Item-selection strategies that populate a carousel.
//!
//! Every strategy starts from the user's matching, not-yet-borrowed predicted
//! items in rank order and then adds collection items by its own criterion:
//!
//! * original — predicted items up to the carousel size, random top-up;
//! * diversity — greedy minimum average BIS to the carousel built so far;
//! * serendipity — minimum average BIS to the user's recent history;
//! * novelty — recently added items, first-published-recently first;
//! * combined — a novelty → serendipity → diversity round-robin.
//!
//! Random draws come from streams keyed by (seed, user, carousel), so a
//! carousel's contents do not depend on which other carousels were filled.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use chrono::Datelike;
use rand::seq::index;

use super::{matches_constraint, CarouselEntry, CarouselSpec, FilledCarousel, SourceTag, Strategy, StrategyParams};
use crate::catalog::{Dataset, Item, ItemId, UserId};
use crate::error::Result;
use crate::recommender::PredictionList;
use crate::scalar::Scalar;
use crate::seed;
use crate::similarity::{avg_bis, bis, BisWeights, SimilarityScore};

/// Per-user inputs shared by all carousels of that user.
#[derive(Clone, Debug)]
pub struct UserContext<'a> {
    user: UserId,
    borrowed: BTreeSet<&'a ItemId>,
    recent: Vec<&'a Item>,
}

impl<'a> UserContext<'a> {
    /// Unknown users are treated as having no history.
    pub fn new(ds: &'a Dataset, user: &UserId, recency_window: usize) -> Self {
        let recent = ds.recent_items(user, recency_window).unwrap_or_default();
        UserContext {
            user: user.clone(),
            borrowed: ds.borrowed_items(user),
            recent,
        }
    }

    pub fn user(&self) -> &UserId {
        &self.user
    }

    pub fn has_history(&self) -> bool {
        !self.recent.is_empty()
    }

    pub fn has_borrowed(&self, item: &ItemId) -> bool {
        self.borrowed.contains(item)
    }

    /// Most recent checkouts first, limited to the recency window.
    pub fn recent(&self) -> &[&'a Item] {
        &self.recent
    }
}

/// Matching items for one (user, carousel), computed once and reused by
/// every strategy.
#[derive(Clone, Debug)]
pub struct PreparedCarousel<'a> {
    spec: CarouselSpec,
    user: UserId,
    /// Matching, not-borrowed predicted items in rank order.
    predicted: Vec<&'a Item>,
    /// Matching, not-borrowed collection items in id order.
    eligible: Vec<&'a Item>,
}

impl<'a> PreparedCarousel<'a> {
    pub fn spec(&self) -> &CarouselSpec {
        &self.spec
    }

    pub fn predicted(&self) -> &[&'a Item] {
        &self.predicted
    }

    pub fn eligible(&self) -> &[&'a Item] {
        &self.eligible
    }

    fn stream(&self, seed: u64, label: &str) -> seed::StreamRng {
        let key = self.spec.key();
        seed::rng(seed::derive(seed, &["carousel", self.user.as_str(), &key, label]))
    }
}

pub struct CarouselFiller<'a, S> {
    ds: &'a Dataset,
    weights: BisWeights<S>,
    params: StrategyParams,
}

impl<'a, S: Scalar> CarouselFiller<'a, S> {
    pub fn new(ds: &'a Dataset, weights: BisWeights<S>, params: StrategyParams) -> Result<Self> {
        params.validate()?;
        Ok(CarouselFiller { ds, weights, params })
    }

    pub fn params(&self) -> &StrategyParams {
        &self.params
    }

    pub fn weights(&self) -> &BisWeights<S> {
        &self.weights
    }

    pub fn prepare(
        &self,
        spec: &CarouselSpec,
        ctx: &UserContext<'a>,
        preds: Option<&PredictionList>,
    ) -> PreparedCarousel<'a> {
        let usable = |item: &&Item| matches_constraint(item, spec) && !ctx.has_borrowed(&item.item_id);
        let mut seen = BTreeSet::new();
        let predicted = preds
            .into_iter()
            .flat_map(|p| p.item_ids())
            .filter_map(|id| self.ds.item(id))
            .filter(usable)
            .filter(|item| seen.insert(&item.item_id))
            .take(self.params.carousel_size)
            .collect();
        let eligible = self.ds.items().values().filter(usable).collect();
        PreparedCarousel {
            spec: spec.clone(),
            user: ctx.user().clone(),
            predicted,
            eligible,
        }
    }

    pub fn fill(
        &self,
        strategy: Strategy,
        spec: &CarouselSpec,
        ctx: &UserContext<'a>,
        preds: Option<&PredictionList>,
    ) -> FilledCarousel {
        let prepared = self.prepare(spec, ctx, preds);
        self.fill_prepared(strategy, &prepared, ctx)
    }

    pub fn fill_prepared(
        &self,
        strategy: Strategy,
        prepared: &PreparedCarousel<'a>,
        ctx: &UserContext<'a>,
    ) -> FilledCarousel {
        let entries = match strategy {
            Strategy::Original => self.original(prepared),
            Strategy::Diversity => self.diversity(prepared),
            Strategy::Serendipity => self.serendipity(prepared, ctx),
            Strategy::Novelty => self.novelty(prepared),
            Strategy::Combined => self.combined(prepared, ctx),
        };
        FilledCarousel {
            spec: prepared.spec.clone(),
            entries,
        }
    }

    /// The seeded-random candidate pool: up to `candidate_pool_size` eligible
    /// items not in `selected`, returned in id order.
    pub fn candidate_pool(&self, prepared: &PreparedCarousel<'a>, selected: &[&ItemId]) -> Vec<&'a Item> {
        let selected: BTreeSet<&ItemId> = selected.iter().copied().collect();
        let remaining: Vec<&'a Item> = prepared
            .eligible
            .iter()
            .copied()
            .filter(|item| !selected.contains(&item.item_id))
            .collect();
        let amount = self.params.candidate_pool_size.min(remaining.len());
        let mut rng = prepared.stream(self.params.seed, "pool");
        let mut picked = index::sample(&mut rng, remaining.len(), amount).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| remaining[i]).collect()
    }

    /// Eligible items added on or after the cutoff, in novelty priority order.
    pub fn novelty_candidates(&self, prepared: &PreparedCarousel<'a>, selected: &[&ItemId]) -> Vec<&'a Item> {
        let cutoff = self.params.novelty_cutoff;
        let selected: BTreeSet<&ItemId> = selected.iter().copied().collect();
        let first_published_recently = |item: &Item| item.first_published_year.is_some_and(|y| y >= cutoff.year());
        let mut novel: Vec<&'a Item> = prepared
            .eligible
            .iter()
            .copied()
            .filter(|item| item.added_date.is_some_and(|d| d >= cutoff))
            .filter(|item| !selected.contains(&item.item_id))
            .collect();
        novel.sort_by(|a, b| {
            first_published_recently(b)
                .cmp(&first_published_recently(a))
                .then_with(|| b.added_date.cmp(&a.added_date))
                .then_with(|| a.item_id.cmp(&b.item_id))
        });
        novel
    }

    fn head(prepared: &PreparedCarousel<'a>, take: usize) -> Vec<&'a Item> {
        prepared.predicted.iter().copied().take(take).collect()
    }

    fn original(&self, prepared: &PreparedCarousel<'a>) -> Vec<CarouselEntry> {
        let size = self.params.carousel_size;
        let predicted = Self::head(prepared, size);
        let mut entries = tagged(&predicted, SourceTag::Predicted);
        let taken: BTreeSet<&ItemId> = predicted.iter().map(|i| &i.item_id).collect();
        let rest: Vec<&Item> = prepared
            .eligible
            .iter()
            .copied()
            .filter(|item| !taken.contains(&item.item_id))
            .collect();
        let need = (size - entries.len()).min(rest.len());
        let mut rng = prepared.stream(self.params.seed, "topup");
        for i in index::sample(&mut rng, rest.len(), need) {
            entries.push(entry(rest[i], SourceTag::Topup));
        }
        entries
    }

    fn diversity(&self, prepared: &PreparedCarousel<'a>) -> Vec<CarouselEntry> {
        let mut carousel = Self::head(prepared, self.params.predicted_take);
        let mut entries = tagged(&carousel, SourceTag::Predicted);
        let ids: Vec<&ItemId> = carousel.iter().map(|i| &i.item_id).collect();
        let mut state = DiversityState::new(self.candidate_pool(prepared, &ids), &carousel, &self.weights);
        while carousel.len() < self.params.carousel_size {
            let Some(item) = state.take_best(&BTreeSet::new()) else {
                break;
            };
            state.observe(item, &self.weights);
            carousel.push(item);
            entries.push(entry(item, SourceTag::Diversity));
        }
        entries
    }

    fn serendipity(&self, prepared: &PreparedCarousel<'a>, ctx: &UserContext<'a>) -> Vec<CarouselEntry> {
        if !ctx.has_history() {
            return self.diversity(prepared);
        }
        let carousel = Self::head(prepared, self.params.predicted_take);
        let mut entries = tagged(&carousel, SourceTag::Predicted);
        let ids: Vec<&ItemId> = carousel.iter().map(|i| &i.item_id).collect();
        let pool = self.candidate_pool(prepared, &ids);
        let slots = self.params.carousel_size - carousel.len();
        for item in self.serendipity_order(pool, ctx).into_iter().take(slots) {
            entries.push(entry(item, SourceTag::Serendipity));
        }
        entries
    }

    /// Pool ordered by ascending average BIS to the user's recent history.
    fn serendipity_order(&self, pool: Vec<&'a Item>, ctx: &UserContext<'a>) -> Vec<&'a Item> {
        let mut scored: Vec<(S, &'a Item)> = pool
            .into_iter()
            .map(|item| {
                let score = avg_bis(item, ctx.recent(), &self.weights).expect("history is non-empty");
                (score.value(), item)
            })
            .collect();
        // pool is in id order and the sort is stable, so ties keep id order
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        scored.into_iter().map(|(_, item)| item).collect()
    }

    fn novelty(&self, prepared: &PreparedCarousel<'a>) -> Vec<CarouselEntry> {
        let carousel = Self::head(prepared, self.params.predicted_take);
        let mut entries = tagged(&carousel, SourceTag::Predicted);
        let ids: Vec<&ItemId> = carousel.iter().map(|i| &i.item_id).collect();
        let slots = self.params.carousel_size - carousel.len();
        for item in self.novelty_candidates(prepared, &ids).into_iter().take(slots) {
            entries.push(entry(item, SourceTag::Novelty));
        }
        entries
    }

    fn combined(&self, prepared: &PreparedCarousel<'a>, ctx: &UserContext<'a>) -> Vec<CarouselEntry> {
        let mut carousel = Self::head(prepared, self.params.combined_predicted_take);
        let mut entries = tagged(&carousel, SourceTag::Predicted);
        let ids: Vec<&ItemId> = carousel.iter().map(|i| &i.item_id).collect();
        let mut selected: BTreeSet<&'a ItemId> = carousel.iter().map(|i| &i.item_id).collect();

        let novelty = self.novelty_candidates(prepared, &ids);
        let pool = self.candidate_pool(prepared, &ids);
        let serendipity = if ctx.has_history() {
            self.serendipity_order(pool.clone(), ctx)
        } else {
            Vec::new()
        };
        let mut diversity = DiversityState::new(pool, &carousel, &self.weights);
        let (mut nov_at, mut ser_at) = (0, 0);

        let next_in = |list: &[&'a Item], at: &mut usize, selected: &BTreeSet<&'a ItemId>| {
            while let Some(item) = list.get(*at) {
                *at += 1;
                if !selected.contains(&item.item_id) {
                    return Some(*item);
                }
            }
            None
        };

        'rounds: while carousel.len() < self.params.carousel_size {
            let mut progressed = false;
            for turn in [SourceTag::Novelty, SourceTag::Serendipity, SourceTag::Diversity] {
                if carousel.len() >= self.params.carousel_size {
                    break 'rounds;
                }
                let (pick, tag) = match turn {
                    SourceTag::Novelty => (next_in(&novelty, &mut nov_at, &selected), turn),
                    SourceTag::Serendipity if ctx.has_history() => {
                        (next_in(&serendipity, &mut ser_at, &selected), turn)
                    }
                    // without history the serendipity turn uses the diversity criterion
                    _ => (diversity.take_best(&selected), SourceTag::Diversity),
                };
                if let Some(item) = pick {
                    diversity.observe(item, &self.weights);
                    selected.insert(&item.item_id);
                    carousel.push(item);
                    entries.push(entry(item, tag));
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        entries
    }
}

/// Incremental state of the greedy diversity criterion: for each pool
/// candidate, the running BIS sum against the carousel in insertion order.
struct DiversityState<'a, S> {
    pool: Vec<&'a Item>,
    sums: Vec<S>,
    taken: Vec<bool>,
    carousel_len: usize,
}

impl<'a, S: Scalar> DiversityState<'a, S> {
    fn new(pool: Vec<&'a Item>, carousel: &[&'a Item], w: &BisWeights<S>) -> Self {
        let sums = pool
            .iter()
            .map(|c| carousel.iter().fold(S::zero(), |acc, j| acc + bis(c, j, w).value()))
            .collect();
        DiversityState {
            taken: vec![false; pool.len()],
            pool,
            sums,
            carousel_len: carousel.len(),
        }
    }

    /// Records that `item` joined the carousel.
    fn observe(&mut self, item: &Item, w: &BisWeights<S>) {
        for (c, sum) in self.pool.iter().zip(self.sums.iter_mut()) {
            *sum = *sum + bis(c, item, w).value();
        }
        self.carousel_len += 1;
        if let Some(i) = self.pool.iter().position(|c| c.item_id == item.item_id) {
            self.taken[i] = true;
        }
    }

    /// Removes and returns the free candidate with the lowest average BIS;
    /// ties go to the lowest item id (the pool is in id order).
    fn take_best(&mut self, exclude: &BTreeSet<&ItemId>) -> Option<&'a Item> {
        let mut best: Option<(usize, S)> = None;
        for (i, c) in self.pool.iter().enumerate() {
            if self.taken[i] || exclude.contains(&c.item_id) {
                continue;
            }
            let avg = if self.carousel_len == 0 {
                S::zero()
            } else {
                SimilarityScore::new(self.sums[i] / S::from_count(self.carousel_len)).value()
            };
            if best.is_none_or(|(_, b)| avg < b) {
                best = Some((i, avg));
            }
        }
        let (i, _) = best?;
        self.taken[i] = true;
        Some(self.pool[i])
    }
}

fn entry(item: &Item, source: SourceTag) -> CarouselEntry {
    CarouselEntry {
        item_id: item.item_id.clone(),
        source,
    }
}

fn tagged(items: &[&Item], source: SourceTag) -> Vec<CarouselEntry> {
    items.iter().map(|i| entry(i, source)).collect()
}
