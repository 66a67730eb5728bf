//! The bracket tag language for nested mentions.
//!
//! Encodes span sets into the four-symbol language `{ [ ] + - }`,
//! decodes them back, validates malformed sequences and repairs
//! crossing span sets.
//!
//! Run with: `cargo run --release --example tag_codec`

use std::collections::BTreeSet;

use mentions::tags::{
    decode_tags, encode_mentions, is_laminar, laminarize, validate, MentionSpan, TagSequence,
    DEFAULT_DEPTH_CAP,
};

fn spans(pairs: &[(usize, usize)]) -> BTreeSet<MentionSpan> {
    pairs.iter().map(|&(s, e)| MentionSpan::new(s, e)).collect()
}

fn main() {
    println!("=== Encoding nested span sets ===\n");
    let cases: Vec<(BTreeSet<MentionSpan>, usize)> = vec![
        (spans(&[]), 3),
        (spans(&[(0, 2)]), 3),
        (spans(&[(0, 2), (1, 1)]), 3),
        (spans(&[(0, 4), (1, 2), (3, 4)]), 5),
    ];
    for (set, words) in &cases {
        let tags = encode_mentions(set, *words, DEFAULT_DEPTH_CAP).unwrap();
        let shown: Vec<String> = set.iter().map(|s| s.to_string()).collect();
        println!(
            "{:>24}  over {} words  ->  {}",
            if shown.is_empty() { "{}".to_string() } else { shown.join(" ") },
            words,
            tags
        );
        assert_eq!(&decode_tags(&tags).unwrap(), set);
    }

    println!("\n=== Pointer alignment ===\n");
    let tags = encode_mentions(&spans(&[(0, 2), (1, 1)]), 3, DEFAULT_DEPTH_CAP).unwrap();
    println!("symbols:  {tags}");
    let words: Vec<String> = tags.alignment().iter().map(|w| w.to_string()).collect();
    println!("words:    {}", words.join(" "));
    println!("(the pointer advances only on + and -)");

    println!("\n=== Validation ===\n");
    for text in ["[ + + ] -", "] -", "+ -", "[ -", "[ [ + ] ] -"] {
        let tags = TagSequence::parse(text).unwrap();
        let words = tags.word_count().max(1);
        match validate(&tags, words, DEFAULT_DEPTH_CAP) {
            mentions::tags::Validation::Ok => println!("{text:>12}  ok"),
            mentions::tags::Validation::Violation { position, kind } => {
                println!("{text:>12}  position {position}: {kind}")
            }
        }
    }

    println!("\n=== Repairing crossing spans ===\n");
    let crossing = spans(&[(0, 2), (1, 3), (5, 5)]);
    println!("input is laminar: {}", is_laminar(&crossing));
    let repaired = laminarize(&crossing);
    let shown: Vec<String> = repaired.iter().map(|s| s.to_string()).collect();
    println!("kept after greedy repair: {}", shown.join(" "));
    assert!(is_laminar(&repaired));
}
