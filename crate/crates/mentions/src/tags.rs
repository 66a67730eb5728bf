//! The bracket tag language for nested mention spans, and its codec.
//!
//! A sentence of M words is tagged with a sequence over four symbols:
//! `[` opens a mention at the current word, `]` closes the most recently
//! opened one, `+` advances to the next word while brackets are open and
//! `-` advances while none are. The pointer into the sentence moves only
//! on `+`/`-`, so a word may carry any number of bracket symbols followed
//! by exactly one advance.
//!
//! Bracket matching is LIFO, which makes the language express exactly the
//! laminar span families: any two encoded spans are nested or disjoint.
//! Per word the canonical symbol order is all OPENs (longest span first),
//! then all CLOSEs, then one advance; the decoder enforces the same order
//! so training targets are unambiguous.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Maximum bracket nesting depth accepted by default.
pub const DEFAULT_DEPTH_CAP: usize = 8;

/// One symbol of the tag language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TagSymbol {
    /// `[` — a mention starts at the pointer word.
    Open,
    /// `]` — the innermost open mention ends at the pointer word.
    Close,
    /// `+` — advance the pointer; at least one mention is open.
    AdvanceIn,
    /// `-` — advance the pointer; no mention is open.
    AdvanceOut,
}

impl TagSymbol {
    pub const ALL: [TagSymbol; 4] = [
        TagSymbol::Open,
        TagSymbol::Close,
        TagSymbol::AdvanceIn,
        TagSymbol::AdvanceOut,
    ];

    /// Index into the model's 4-way output distribution, ordered `[ ] + -`.
    pub fn index(self) -> usize {
        match self {
            TagSymbol::Open => 0,
            TagSymbol::Close => 1,
            TagSymbol::AdvanceIn => 2,
            TagSymbol::AdvanceOut => 3,
        }
    }

    pub fn from_index(index: usize) -> TagSymbol {
        Self::ALL[index]
    }

    pub fn is_advance(self) -> bool {
        matches!(self, TagSymbol::AdvanceIn | TagSymbol::AdvanceOut)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TagSymbol::Open => "[",
            TagSymbol::Close => "]",
            TagSymbol::AdvanceIn => "+",
            TagSymbol::AdvanceOut => "-",
        }
    }
}

impl fmt::Display for TagSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TagSymbol {
    type Err = TagError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "[" => Ok(TagSymbol::Open),
            "]" => Ok(TagSymbol::Close),
            "+" => Ok(TagSymbol::AdvanceIn),
            "-" => Ok(TagSymbol::AdvanceOut),
            other => Err(TagError::UnknownSymbol { text: other.to_string() }),
        }
    }
}

/// An inclusive token-index span within one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
}

impl MentionSpan {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start <= end, "span start {start} > end {end}");
        MentionSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &MentionSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn disjoint(&self, other: &MentionSpan) -> bool {
        self.end < other.start || other.end < self.start
    }

    /// Nested-or-disjoint test; crossing pairs are what the tag language
    /// cannot express.
    pub fn compatible(&self, other: &MentionSpan) -> bool {
        self.contains(other) || other.contains(self) || self.disjoint(other)
    }
}

impl fmt::Display for MentionSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.start, self.end)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TagError {
    #[error("crossing spans {a} and {b} cannot be bracket-encoded")]
    CrossingSpans { a: MentionSpan, b: MentionSpan },
    #[error("duplicate span {span}")]
    DuplicateSpan { span: MentionSpan },
    #[error("span {span} exceeds word count {word_count}")]
    SpanOutOfRange { span: MentionSpan, word_count: usize },
    #[error("nesting depth {depth} exceeds cap {cap}")]
    DepthCapExceeded { depth: usize, cap: usize },
    #[error("invalid tag sequence at position {position}: {kind}")]
    Invalid { position: usize, kind: ViolationKind },
    #[error("unknown tag symbol {text:?}")]
    UnknownSymbol { text: String },
}

/// What went wrong at a sequence position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `]` with no open bracket.
    CloseAtDepthZero,
    /// `+` while no bracket is open.
    AdvanceInAtDepthZero,
    /// `-` while brackets are open.
    AdvanceOutAtPositiveDepth,
    /// `[` after a `]` at the same word (canonical order is OPEN* CLOSE* ADVANCE).
    OpenAfterClose,
    /// `[` beyond the configured nesting depth cap.
    DepthCapExceeded,
    /// Symbols continue after the pointer left the last word.
    SymbolAfterLastAdvance,
    /// Sequence ended with open brackets or before the pointer reached the end.
    Truncated,
    /// Two identical spans decoded.
    DuplicateSpan,
    /// Advance count does not match the expected word count.
    WordCountMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            ViolationKind::CloseAtDepthZero => "CLOSE at depth 0",
            ViolationKind::AdvanceInAtDepthZero => "ADVANCE_IN at depth 0",
            ViolationKind::AdvanceOutAtPositiveDepth => "ADVANCE_OUT at positive depth",
            ViolationKind::OpenAfterClose => "OPEN after CLOSE at the same word",
            ViolationKind::DepthCapExceeded => "nesting depth cap exceeded",
            ViolationKind::SymbolAfterLastAdvance => "symbol after the last word was advanced",
            ViolationKind::Truncated => "sequence ended early (unclosed brackets or missing advances)",
            ViolationKind::DuplicateSpan => "duplicate span",
            ViolationKind::WordCountMismatch => "advance count does not match word count",
        };
        f.write_str(text)
    }
}

/// A tag sequence together with the word index each symbol was emitted at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSequence {
    symbols: Vec<TagSymbol>,
    alignment: Vec<usize>,
}

impl TagSequence {
    /// Build from raw symbols, recomputing the pointer alignment. The
    /// sequence is not validated beyond alignment bookkeeping; use
    /// [`validate`] or [`decode_tags`] for grammar checks.
    pub fn from_symbols(symbols: Vec<TagSymbol>) -> Self {
        let mut alignment = Vec::with_capacity(symbols.len());
        let mut word = 0usize;
        for &sym in &symbols {
            alignment.push(word);
            if sym.is_advance() {
                word += 1;
            }
        }
        TagSequence { symbols, alignment }
    }

    pub fn symbols(&self) -> &[TagSymbol] {
        &self.symbols
    }

    /// Word index each symbol is aligned to.
    pub fn alignment(&self) -> &[usize] {
        &self.alignment
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Number of words the pointer advanced over (= advance symbol count).
    pub fn word_count(&self) -> usize {
        self.symbols.iter().filter(|s| s.is_advance()).count()
    }

    /// Parse the space-separated rendering, e.g. `"[ + ] -"`.
    pub fn parse(text: &str) -> Result<Self, TagError> {
        let symbols = text
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TagSequence::from_symbols(symbols))
    }
}

impl fmt::Display for TagSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, sym) in self.symbols.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{sym}")?;
        }
        Ok(())
    }
}

/// Encode a laminar span set over `word_count` words into the canonical
/// tag sequence: per word all OPENs (longest first), then all CLOSEs, then
/// one advance.
pub fn encode_mentions(
    spans: &BTreeSet<MentionSpan>,
    word_count: usize,
    depth_cap: usize,
) -> Result<TagSequence, TagError> {
    for span in spans {
        if span.end >= word_count {
            return Err(TagError::SpanOutOfRange { span: *span, word_count });
        }
    }
    let sorted: Vec<MentionSpan> = spans.iter().copied().collect();
    for (k, a) in sorted.iter().enumerate() {
        for b in &sorted[k + 1..] {
            if !a.compatible(b) {
                return Err(TagError::CrossingSpans { a: *a, b: *b });
            }
        }
    }

    let mut opens_at: Vec<Vec<MentionSpan>> = vec![Vec::new(); word_count];
    let mut closes_at: Vec<usize> = vec![0; word_count];
    for span in spans {
        opens_at[span.start].push(*span);
        closes_at[span.end] += 1;
    }
    for opens in &mut opens_at {
        // Longest span first so LIFO closes match inner spans first.
        opens.sort_by(|a, b| b.end.cmp(&a.end));
    }

    let mut symbols = Vec::with_capacity(word_count + 2 * spans.len());
    let mut depth = 0usize;
    for word in 0..word_count {
        for _ in &opens_at[word] {
            depth += 1;
            if depth > depth_cap {
                return Err(TagError::DepthCapExceeded { depth, cap: depth_cap });
            }
            symbols.push(TagSymbol::Open);
        }
        for _ in 0..closes_at[word] {
            depth -= 1;
            symbols.push(TagSymbol::Close);
        }
        symbols.push(if depth > 0 { TagSymbol::AdvanceIn } else { TagSymbol::AdvanceOut });
    }
    Ok(TagSequence::from_symbols(symbols))
}

/// Decode a tag sequence back into its span set, validating as it goes.
/// CLOSE pops the most recently opened unmatched OPEN.
pub fn decode_tags(tags: &TagSequence) -> Result<BTreeSet<MentionSpan>, TagError> {
    decode_with_cap(tags, usize::MAX, None)
}

fn decode_with_cap(
    tags: &TagSequence,
    depth_cap: usize,
    expected_words: Option<usize>,
) -> Result<BTreeSet<MentionSpan>, TagError> {
    let mut spans = BTreeSet::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut word = 0usize;
    let mut closed_at_word = false;
    let err = |position: usize, kind: ViolationKind| TagError::Invalid { position, kind };

    for (pos, &sym) in tags.symbols().iter().enumerate() {
        if let Some(m) = expected_words {
            if word >= m {
                return Err(err(pos, ViolationKind::SymbolAfterLastAdvance));
            }
        }
        match sym {
            TagSymbol::Open => {
                if closed_at_word {
                    return Err(err(pos, ViolationKind::OpenAfterClose));
                }
                if stack.len() + 1 > depth_cap {
                    return Err(err(pos, ViolationKind::DepthCapExceeded));
                }
                stack.push(word);
            }
            TagSymbol::Close => {
                let start = match stack.pop() {
                    Some(s) => s,
                    None => return Err(err(pos, ViolationKind::CloseAtDepthZero)),
                };
                closed_at_word = true;
                let span = MentionSpan::new(start, word);
                if !spans.insert(span) {
                    return Err(err(pos, ViolationKind::DuplicateSpan));
                }
            }
            TagSymbol::AdvanceIn => {
                if stack.is_empty() {
                    return Err(err(pos, ViolationKind::AdvanceInAtDepthZero));
                }
                word += 1;
                closed_at_word = false;
            }
            TagSymbol::AdvanceOut => {
                if !stack.is_empty() {
                    return Err(err(pos, ViolationKind::AdvanceOutAtPositiveDepth));
                }
                word += 1;
                closed_at_word = false;
            }
        }
    }
    if !stack.is_empty() {
        return Err(err(tags.len(), ViolationKind::Truncated));
    }
    if let Some(m) = expected_words {
        if word != m {
            return Err(err(
                tags.len(),
                if word < m { ViolationKind::Truncated } else { ViolationKind::WordCountMismatch },
            ));
        }
    }
    Ok(spans)
}

/// Validation verdict for a tag sequence against a word count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Ok,
    Violation { position: usize, kind: ViolationKind },
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }
}

/// Check every TagSequence invariant against `word_count` words; reports
/// the first violation position and kind.
pub fn validate(tags: &TagSequence, word_count: usize, depth_cap: usize) -> Validation {
    match decode_with_cap(tags, depth_cap, Some(word_count)) {
        Ok(_) => Validation::Ok,
        Err(TagError::Invalid { position, kind }) => Validation::Violation { position, kind },
        Err(_) => unreachable!("decode_with_cap only raises Invalid"),
    }
}

/// Largest laminar subset under the deterministic greedy rule: sort by
/// (start ascending, end descending), keep each span compatible with
/// everything kept so far.
pub fn laminarize(spans: &BTreeSet<MentionSpan>) -> BTreeSet<MentionSpan> {
    let mut sorted: Vec<MentionSpan> = spans.iter().copied().collect();
    sorted.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    let mut kept: Vec<MentionSpan> = Vec::new();
    for span in sorted {
        if kept.iter().all(|k| k.compatible(&span)) {
            kept.push(span);
        }
    }
    kept.into_iter().collect()
}

/// True if every pair of spans is nested or disjoint.
pub fn is_laminar(spans: &BTreeSet<MentionSpan>) -> bool {
    let v: Vec<MentionSpan> = spans.iter().copied().collect();
    for (k, a) in v.iter().enumerate() {
        for b in &v[k + 1..] {
            if !a.compatible(b) {
                return false;
            }
        }
    }
    true
}

/// Maximum nesting depth of a laminar span set.
pub fn nesting_depth(spans: &BTreeSet<MentionSpan>) -> usize {
    spans
        .iter()
        .map(|s| spans.iter().filter(|t| t.contains(s)).count())
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(spans: &[(usize, usize)]) -> BTreeSet<MentionSpan> {
        spans.iter().map(|&(s, e)| MentionSpan::new(s, e)).collect()
    }

    fn syms(text: &str) -> TagSequence {
        TagSequence::parse(text).unwrap()
    }

    #[test]
    fn encode_empty_set() {
        let tags = encode_mentions(&set(&[]), 3, DEFAULT_DEPTH_CAP).unwrap();
        assert_eq!(tags.to_string(), "- - -");
    }

    #[test]
    fn encode_single_span() {
        let tags = encode_mentions(&set(&[(0, 2)]), 3, DEFAULT_DEPTH_CAP).unwrap();
        assert_eq!(tags.to_string(), "[ + + ] -");
        assert_eq!(tags.alignment(), &[0, 0, 1, 2, 2]);
    }

    #[test]
    fn encode_nested_spans() {
        let tags = encode_mentions(&set(&[(0, 2), (1, 1)]), 3, DEFAULT_DEPTH_CAP).unwrap();
        assert_eq!(tags.to_string(), "[ + [ ] + ] -");
    }

    #[test]
    fn encode_rejects_crossing_spans() {
        let err = encode_mentions(&set(&[(0, 2), (1, 3)]), 4, DEFAULT_DEPTH_CAP).unwrap_err();
        match err {
            TagError::CrossingSpans { a, b } => {
                assert_eq!((a.start, a.end), (0, 2));
                assert_eq!((b.start, b.end), (1, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn encode_rejects_excess_depth() {
        let spans = set(&[(0, 4), (1, 3), (2, 2)]);
        assert!(encode_mentions(&spans, 5, 2).is_err());
        assert!(encode_mentions(&spans, 5, 3).is_ok());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_tags(&syms("- - -")).unwrap(), set(&[]));
        assert_eq!(decode_tags(&syms("[ + + ] -")).unwrap(), set(&[(0, 2)]));
        let err = decode_tags(&syms("] -")).unwrap_err();
        assert_eq!(
            err,
            TagError::Invalid { position: 0, kind: ViolationKind::CloseAtDepthZero }
        );
    }

    #[test]
    fn decode_reports_duplicates() {
        // Two brackets opened at word 0 and both closed at word 1 decode to
        // the same span twice.
        let err = decode_tags(&syms("[ [ + ] ] -")).unwrap_err();
        assert_eq!(
            err,
            TagError::Invalid { position: 4, kind: ViolationKind::DuplicateSpan }
        );
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&syms("[ + + ] -"), 3, DEFAULT_DEPTH_CAP).is_ok());
        assert_eq!(
            validate(&syms("+ -"), 1, DEFAULT_DEPTH_CAP),
            Validation::Violation { position: 0, kind: ViolationKind::AdvanceInAtDepthZero }
        );
        assert_eq!(
            validate(&syms("[ -"), 1, DEFAULT_DEPTH_CAP),
            Validation::Violation { position: 1, kind: ViolationKind::AdvanceOutAtPositiveDepth }
        );
        // Unclosed bracket.
        assert_eq!(
            validate(&syms("[ +"), 1, DEFAULT_DEPTH_CAP),
            Validation::Violation { position: 2, kind: ViolationKind::Truncated }
        );
        // Symbols past the last word.
        assert_eq!(
            validate(&syms("- -"), 1, DEFAULT_DEPTH_CAP),
            Validation::Violation { position: 1, kind: ViolationKind::SymbolAfterLastAdvance }
        );
        // Too few advances.
        assert_eq!(
            validate(&syms("-"), 2, DEFAULT_DEPTH_CAP),
            Validation::Violation { position: 1, kind: ViolationKind::Truncated }
        );
    }

    #[test]
    fn symbol_count_identity() {
        let spans = set(&[(0, 3), (1, 2), (2, 2), (5, 5)]);
        let tags = encode_mentions(&spans, 7, DEFAULT_DEPTH_CAP).unwrap();
        assert_eq!(tags.len(), 7 + 2 * spans.len());
    }

    #[test]
    fn laminarize_cases() {
        let already = set(&[(0, 4), (1, 2), (3, 4)]);
        assert_eq!(laminarize(&already), already);

        assert_eq!(laminarize(&set(&[(0, 2), (1, 3)])), set(&[(0, 2)]));

        // Idempotent and a subset of the input.
        let mixed = set(&[(0, 2), (1, 3), (2, 5), (4, 4)]);
        let once = laminarize(&mixed);
        assert!(is_laminar(&once));
        assert!(once.is_subset(&mixed));
        assert_eq!(laminarize(&once), once);
    }

    /// Random laminar span set over `m` words with bounded depth.
    pub(crate) fn random_laminar(
        rng: &mut ChaCha8Rng,
        m: usize,
        max_depth: usize,
    ) -> BTreeSet<MentionSpan> {
        let mut spans = BTreeSet::new();
        let attempts = rng.random_range(0..=(2 * m));
        for _ in 0..attempts {
            let start = rng.random_range(0..m);
            let end = rng.random_range(start..m.min(start + 6));
            let candidate = MentionSpan::new(start, end);
            let mut trial = spans.clone();
            if trial.insert(candidate)
                && is_laminar(&trial)
                && nesting_depth(&trial) <= max_depth
            {
                spans = trial;
            }
        }
        spans
    }

    #[test]
    fn round_trip_random_laminar_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7a67);
        for _ in 0..1000 {
            let m = rng.random_range(1..=12);
            let spans = random_laminar(&mut rng, m, 4);
            let tags = encode_mentions(&spans, m, DEFAULT_DEPTH_CAP).unwrap();
            assert!(validate(&tags, m, DEFAULT_DEPTH_CAP).is_ok());
            assert_eq!(decode_tags(&tags).unwrap(), spans);
            assert_eq!(tags.len(), m + 2 * spans.len());
        }
    }

    #[test]
    fn parse_display_round_trip() {
        let tags = syms("[ + [ ] + ] -");
        assert_eq!(TagSequence::parse(&tags.to_string()).unwrap(), tags);
    }
}
