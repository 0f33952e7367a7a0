use std::time::{Duration, Instant};

use ner_workbench_core::matcher::Dictionary;
use proptest::test_runner::{RngAlgorithm, TestRng};
use proptest::prelude::{Rng, RngExt};

/// CJK ideographs from a 300-character window so patterns hit often.
fn ideograph(rng: &mut impl Rng) -> char {
    char::from_u32(0x4E00 + rng.random_range(0..300)).unwrap()
}

fn workload(seed: u8) -> (String, Vec<String>) {
    let mut rng = TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]);
    let mut text = String::new();
    while text.len() < 1 << 20 {
        text.push(ideograph(&mut rng));
    }
    let mut patterns = std::collections::BTreeSet::new();
    while patterns.len() < 10_000 {
        let len = rng.random_range(2..6);
        patterns.insert((0..len).map(|_| ideograph(&mut rng)).collect::<String>());
    }
    (text, patterns.into_iter().collect())
}

#[test]
fn one_megabyte_against_ten_thousand_surfaces() {
    let (text, patterns) = workload(7);
    let started = Instant::now();
    let dict = Dictionary::compile(patterns.iter().enumerate().map(|(i, p)| (p.as_str(), i)));
    let hits = dict.annotate(&text);
    let elapsed = started.elapsed();
    assert_eq!(dict.len(), 10_000);
    assert!(!hits.is_empty());
    assert!(hits.windows(2).all(|w| w[0].end <= w[1].start));
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
}
