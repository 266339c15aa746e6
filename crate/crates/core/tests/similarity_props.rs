mod common;

use common::{any_item, complete_item, items};
use mcrec_core::catalog::Item;
use mcrec_core::similarity::{avg_bis, avg_set_bis, bis, internal_similarity, jaccard, max_bis};
use mcrec_core::{ExactWeights, PairMode, Rational, Weights};
use proptest::prelude::*;

fn exact(i: &Item, j: &Item) -> Rational {
    bis(i, j, &ExactWeights::default()).value()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bis_is_symmetric_and_bounded(a in any_item(), b in any_item()) {
        prop_assert_eq!(exact(&a, &b), exact(&b, &a));
        let v = bis(&a, &b, &Weights::default()).value();
        prop_assert_eq!(v, bis(&b, &a, &Weights::default()).value());
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn complete_items_are_self_similar(a in complete_item()) {
        prop_assert_eq!(exact(&a, &a), Rational::from_integer(1));
    }

    #[test]
    fn scaling_weights_changes_nothing(a in any_item(), b in any_item(), num in 1i64..50, den in 1i64..50) {
        let w = ExactWeights::default();
        let scaled = w.scaled(Rational::new(num, den)).unwrap();
        prop_assert_eq!(bis(&a, &b, &w).value(), bis(&a, &b, &scaled).value());
        // power-of-two scaling is exact in binary floating point too
        let f = Weights::default();
        let f4 = f.scaled(4.0).unwrap();
        prop_assert_eq!(bis(&a, &b, &f).value(), bis(&a, &b, &f4).value());
    }

    #[test]
    fn jaccard_is_symmetric(a in any_item(), b in any_item()) {
        let x: Rational = jaccard(&a.genres, &b.genres).value();
        let y: Rational = jaccard(&b.genres, &a.genres).value();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn max_dominates_avg(a in any_item(), set in items(1..=8)) {
        let refs: Vec<&Item> = set.iter().collect();
        let w = ExactWeights::default();
        prop_assert!(max_bis(&a, &refs, &w).unwrap().value() >= avg_bis(&a, &refs, &w).unwrap().value());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn internal_similarity_matches_double_loop(list in items(1..=10)) {
        let refs: Vec<&Item> = list.iter().collect();
        let w = Weights::default();
        let mut sum = 0.0;
        for i in &list {
            for j in &list {
                sum += bis(i, j, &w).value();
            }
        }
        let expected = sum / (list.len() * list.len()) as f64;
        let got = internal_similarity(&refs, &w, PairMode::WithDiagonal).unwrap().value();
        prop_assert!((got - expected).abs() <= 1e-12);

        if list.len() >= 2 {
            let mut off = 0.0;
            for (a, i) in list.iter().enumerate() {
                for (b, j) in list.iter().enumerate() {
                    if a != b {
                        off += bis(i, j, &w).value();
                    }
                }
            }
            let expected = off / (list.len() * (list.len() - 1)) as f64;
            let got = internal_similarity(&refs, &w, PairMode::DistinctPairs).unwrap().value();
            prop_assert!((got - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn set_similarity_is_mean_of_item_averages(a in items(1..=6), b in items(1..=6)) {
        let ra: Vec<&Item> = a.iter().collect();
        let rb: Vec<&Item> = b.iter().collect();
        let w = ExactWeights::default();
        let mut sum = Rational::from_integer(0);
        for i in &a {
            for j in &b {
                sum += bis(i, j, &w).value();
            }
        }
        let expected = sum / Rational::from_integer((a.len() * b.len()) as i64);
        prop_assert_eq!(avg_set_bis(&ra, &rb, &w).unwrap().value(), expected);
    }
}

#[test]
fn singleton_complete_list_is_fully_similar() {
    let mut it = Item::new("solo");
    it.main_author = mcrec_core::catalog::AuthorKey::normalize("Morrison");
    it.genres = ["literary".to_owned()].into();
    it.subjects = ["family".to_owned()].into();
    it.age_category = Some("adult".into());
    it.medium_type = Some("book".into());
    it.fiction = Some(true);
    let v = internal_similarity(&[&it], &ExactWeights::default(), PairMode::WithDiagonal).unwrap();
    assert_eq!(v.value(), Rational::from_integer(1));
}
