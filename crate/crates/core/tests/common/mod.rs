#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::NaiveDate;
use mcrec_core::catalog::{AuthorKey, Catalog, Item, Transaction};
use mcrec_core::Dataset;
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

const GENRES: [&str; 5] = ["fantasy", "romance", "thriller", "history", "poetry"];
const SUBJECTS: [&str; 4] = ["dragons", "war", "cooking", "travel"];
const AUTHORS: [&str; 3] = ["Le Guin", "Pratchett", "Mantel"];

fn pick(values: &'static [&'static str]) -> impl Strategy<Value = String> {
    (0..values.len()).prop_map(move |i| values[i].to_owned())
}

fn words(values: &'static [&'static str], max: usize) -> impl Strategy<Value = BTreeSet<String>> {
    btree_set(pick(values), 0..=max)
}

/// Items over small vocabularies, so that overlaps and ties are common.
pub fn item(id: String) -> impl Strategy<Value = Item> {
    (
        proptest::option::weighted(0.8, pick(&AUTHORS)),
        words(&GENRES, 3),
        words(&SUBJECTS, 2),
        proptest::option::weighted(0.8, pick(&["adult", "children"])),
        proptest::option::weighted(0.8, pick(&["book", "ebook"])),
        proptest::option::weighted(0.8, any::<bool>()),
        proptest::option::weighted(0.7, 0i64..1500),
        proptest::option::weighted(0.7, 1990i32..2024),
    )
        .prop_map(
            move |(author, genres, subjects, age, medium, fiction, added, published)| {
                let mut it = Item::new(id.as_str());
                it.main_author = author.and_then(|a| AuthorKey::normalize(&a));
                it.genres = genres;
                it.subjects = subjects;
                it.age_category = age;
                it.medium_type = medium;
                it.fiction = fiction;
                it.added_date = added.map(|d| date(2019, 1, 1) + chrono::Duration::days(d));
                it.first_published_year = published;
                it
            },
        )
}

pub fn any_item() -> impl Strategy<Value = Item> {
    item("x".to_owned())
}

pub fn complete_item() -> impl Strategy<Value = Item> {
    (
        pick(&AUTHORS),
        btree_set(pick(&GENRES), 1..=3),
        btree_set(pick(&SUBJECTS), 1..=2),
        pick(&["adult", "children"]),
        pick(&["book", "ebook"]),
        any::<bool>(),
    )
        .prop_map(|(a, g, s, age, medium, fiction)| {
            let mut it = Item::new("c");
            it.main_author = AuthorKey::normalize(&a);
            it.genres = g;
            it.subjects = s;
            it.age_category = Some(age);
            it.medium_type = Some(medium);
            it.fiction = Some(fiction);
            it
        })
}

/// `n` items with ids `I00`, `I01`, ….
pub fn items(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Item>> {
    vec(any_item(), n).prop_map(|mut v| {
        for (i, it) in v.iter_mut().enumerate() {
            it.item_id = format!("I{i:02}").into();
        }
        v
    })
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn catalog(items: Vec<Item>) -> Catalog {
    items.into_iter().map(|i| (i.item_id.clone(), i)).collect()
}

/// Dataset from `(user, item index, day offset)` triples.
pub fn dataset(items: Vec<Item>, loans: &[(usize, usize, i64)]) -> Dataset {
    let ids: Vec<_> = items.iter().map(|i| i.item_id.clone()).collect();
    let base = date(2020, 1, 1).and_hms_opt(12, 0, 0).unwrap();
    let txs = loans
        .iter()
        .map(|&(u, i, d)| {
            Transaction::new(
                format!("U{u}"),
                ids[i % ids.len()].clone(),
                base + chrono::Duration::days(d),
            )
        })
        .collect();
    Dataset::new(catalog(items), txs).unwrap()
}
