//! Corpus data model, file format, synthetic generation and the
//! partial-annotation simulator.
//!
//! The on-disk format is line-delimited JSON, one document per line, with
//! the field names `doc_id` / `sentences` / `mentions` / `clusters`.
//! Mentions carry a sentence index and inclusive token offsets; clusters
//! are lists of mention indices. Singletons are mentions that belong to no
//! cluster.
//!
//! Synthetic documents are built so mentions are detectable from surface
//! cues alone: every mention starts with a determiner-class token and ends
//! with an entity-specific head token, fillers never overlap either class.
//! Coreference chains follow entity reuse within a document.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tags::{is_laminar, MentionSpan};

pub const DETERMINERS: [&str; 4] = ["the", "a", "this", "that"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed document record: {message}")]
    Parse { line: usize, message: String },
    #[error("document {doc_id}: {message}")]
    Invalid { doc_id: String, message: String },
}

/// A mention occurrence: a span within one sentence of a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mention {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

impl Mention {
    pub fn new(sentence: usize, start: usize, end: usize) -> Self {
        Mention { sentence, start, end }
    }

    pub fn span(&self) -> MentionSpan {
        MentionSpan::new(self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Vec<String>>,
    pub mentions: Vec<Mention>,
    pub clusters: Vec<Vec<usize>>,
}

impl Document {
    /// Check the structural invariants; `Err` names the document.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |message: String| {
            Err(CorpusError::Invalid { doc_id: self.doc_id.clone(), message })
        };
        if self.sentences.iter().any(|s| s.is_empty()) {
            return fail("empty sentence".to_string());
        }
        for (i, m) in self.mentions.iter().enumerate() {
            if m.sentence >= self.sentences.len() {
                return fail(format!("mention {i} references sentence {} of {}", m.sentence, self.sentences.len()));
            }
            if m.start > m.end || m.end >= self.sentences[m.sentence].len() {
                return fail(format!(
                    "mention {i} span ({},{}) out of range for sentence of {} tokens",
                    m.start,
                    m.end,
                    self.sentences[m.sentence].len()
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for m in &self.mentions {
            if !seen.insert(*m) {
                return fail(format!("duplicate mention ({},{},{})", m.sentence, m.start, m.end));
            }
        }
        let mut clustered = BTreeSet::new();
        for (c, cluster) in self.clusters.iter().enumerate() {
            for &idx in cluster {
                if idx >= self.mentions.len() {
                    return fail(format!("cluster {c} references mention {idx} of {}", self.mentions.len()));
                }
                if !clustered.insert(idx) {
                    return fail(format!("mention {idx} appears in more than one cluster"));
                }
            }
        }
        Ok(())
    }

    /// Gold spans grouped per sentence.
    pub fn spans_in_sentence(&self, sentence: usize) -> BTreeSet<MentionSpan> {
        self.mentions
            .iter()
            .filter(|m| m.sentence == sentence)
            .map(|m| m.span())
            .collect()
    }

    /// All mentions as (sentence, start, end) keys.
    pub fn mention_keys(&self) -> BTreeSet<(usize, usize, usize)> {
        self.mentions.iter().map(|m| (m.sentence, m.start, m.end)).collect()
    }

    /// Cluster index for each mention, if any.
    pub fn cluster_of_mention(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.mentions.len()];
        for (c, cluster) in self.clusters.iter().enumerate() {
            for &idx in cluster {
                out[idx] = Some(c);
            }
        }
        out
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Corpus { documents }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for doc in &self.documents {
            doc.validate()?;
        }
        Ok(())
    }

    pub fn total_mentions(&self) -> usize {
        self.documents.iter().map(|d| d.mentions.len()).sum()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            let line = serde_json::to_string(doc).expect("document serializes");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, CorpusError> {
        let mut documents = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(line)
                .map_err(|e| CorpusError::Parse { line: i + 1, message: e.to_string() })?;
            documents.push(doc);
        }
        let corpus = Corpus { documents };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        fs::write(path, self.to_jsonl()).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(&text)
    }
}

/// Token → id map with `<unk>` at 0, built from a training corpus.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
}

impl Vocab {
    pub const UNK: usize = 0;

    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut set = BTreeSet::new();
        for doc in &corpus.documents {
            for sentence in &doc.sentences {
                for token in sentence {
                    set.insert(token.clone());
                }
            }
        }
        let mut tokens = vec!["<unk>".to_string()];
        tokens.extend(set);
        Vocab { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        // Tokens are sorted after the <unk> slot, so binary search works.
        match self.tokens[1..].binary_search_by(|t| t.as_str().cmp(token)) {
            Ok(pos) => pos + 1,
            Err(_) => Self::UNK,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

// ── Synthetic generation ─────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GenConfig {
    pub num_docs: usize,
    pub sentences_per_doc: (usize, usize),
    /// Filler tokens per sentence before mention insertion.
    pub sentence_len: (usize, usize),
    pub entities_per_doc: (usize, usize),
    /// Chain size range for entities that are mentioned more than once
    /// (the lower bound is clamped to 2).
    pub mentions_per_entity: (usize, usize),
    /// Per-entity probability of being a singleton, spread linearly over
    /// the entity vocabulary. Heterogeneous propensities give mentions a
    /// spectrum of annotated fractions under chain-only annotation.
    #[serde(default = "default_singleton_propensity")]
    pub singleton_propensity: (f64, f64),
    /// Probability that a mention embeds a nested mention.
    pub nesting_prob: f64,
    pub max_nesting_depth: usize,
    pub filler_vocab: usize,
    pub modifier_vocab: usize,
    pub entity_vocab: usize,
}

fn default_singleton_propensity() -> (f64, f64) {
    (0.15, 0.85)
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            num_docs: 10,
            sentences_per_doc: (3, 5),
            sentence_len: (4, 8),
            entities_per_doc: (2, 4),
            mentions_per_entity: (2, 3),
            singleton_propensity: default_singleton_propensity(),
            nesting_prob: 0.15,
            max_nesting_depth: 2,
            filler_vocab: 40,
            modifier_vocab: 12,
            entity_vocab: 30,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("inconsistent generator config: {0}")]
    Config(String),
}

fn check_range(name: &str, (lo, hi): (usize, usize)) -> Result<(), GenError> {
    if lo == 0 && name != "mentions_per_entity" {
        return Err(GenError::Config(format!("{name} lower bound must be positive")));
    }
    if lo > hi {
        return Err(GenError::Config(format!("{name} range ({lo},{hi}) is inverted")));
    }
    Ok(())
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        check_range("sentences_per_doc", self.sentences_per_doc)?;
        check_range("sentence_len", self.sentence_len)?;
        check_range("entities_per_doc", self.entities_per_doc)?;
        check_range("mentions_per_entity", self.mentions_per_entity)?;
        if !(0.0..=1.0).contains(&self.nesting_prob) {
            return Err(GenError::Config(format!(
                "nesting_prob {} outside [0, 1]",
                self.nesting_prob
            )));
        }
        let (lo, hi) = self.singleton_propensity;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(GenError::Config(format!(
                "singleton_propensity ({lo},{hi}) is not a subrange of [0, 1]"
            )));
        }
        if self.max_nesting_depth == 0 || self.max_nesting_depth > crate::tags::DEFAULT_DEPTH_CAP {
            return Err(GenError::Config(format!(
                "max_nesting_depth {} outside 1..={}",
                self.max_nesting_depth,
                crate::tags::DEFAULT_DEPTH_CAP
            )));
        }
        if self.entities_per_doc.1 > self.entity_vocab {
            return Err(GenError::Config(format!(
                "entities_per_doc upper bound {} exceeds entity_vocab {}",
                self.entities_per_doc.1, self.entity_vocab
            )));
        }
        if self.filler_vocab == 0 || self.modifier_vocab == 0 {
            return Err(GenError::Config("vocab sizes must be positive".to_string()));
        }
        Ok(())
    }
}

fn range_sample(rng: &mut impl Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

/// Mix the master seed with a document index; lets parallel and serial
/// generation agree.
fn split_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over master + golden-ratio stride.
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct PendingMention {
    entity: usize,
    start: usize,
    end: usize,
}

/// Emit one mention's tokens into `tokens`, recording it (and any nested
/// mentions) into `emitted`. Returns the inclusive span.
fn emit_mention(
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    entities: &[usize],
    entity: usize,
    depth: usize,
    tokens: &mut Vec<String>,
    emitted: &mut Vec<PendingMention>,
) -> (usize, usize) {
    let start = tokens.len();
    tokens.push(DETERMINERS[rng.random_range(0..DETERMINERS.len())].to_string());
    if rng.random_range(0.0..1.0) < 0.5 {
        tokens.push(format!("mod{}", rng.random_range(0..cfg.modifier_vocab)));
    }
    if depth < cfg.max_nesting_depth && rng.random_range(0.0..1.0) < cfg.nesting_prob {
        let nested_entity = entities[rng.random_range(0..entities.len())];
        emit_mention(rng, cfg, entities, nested_entity, depth + 1, tokens, emitted);
    }
    tokens.push(format!("ent{entity}"));
    let end = tokens.len() - 1;
    emitted.push(PendingMention { entity, start, end });
    (start, end)
}

/// Generate a fully annotated corpus (singletons included) from surface
/// cues that make mentions learnable by construction.
pub fn synth_generate(cfg: &GenConfig, seed: u64) -> Result<Corpus, GenError> {
    cfg.validate()?;
    let mut documents = Vec::with_capacity(cfg.num_docs);
    for doc_index in 0..cfg.num_docs {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, doc_index as u64));
        let num_sentences = range_sample(&mut rng, cfg.sentences_per_doc);
        let num_entities = range_sample(&mut rng, cfg.entities_per_doc);
        let entities: Vec<usize> = index_sample(&mut rng, cfg.entity_vocab, num_entities)
            .into_iter()
            .collect();

        // Decide how many times each entity is mentioned, then scatter the
        // mention requests over sentences. An entity's singleton
        // probability depends on its id, spreading the chained fraction
        // across the vocabulary.
        let (q_lo, q_hi) = cfg.singleton_propensity;
        let mut requests: Vec<(usize, usize)> = Vec::new(); // (sentence, entity)
        for &entity in &entities {
            let q = q_lo
                + (q_hi - q_lo) * entity as f64 / (cfg.entity_vocab.max(2) - 1) as f64;
            let count = if rng.random_range(0.0..1.0) < q {
                1
            } else {
                let (lo, hi) = cfg.mentions_per_entity;
                range_sample(&mut rng, (lo.max(2), hi.max(2)))
            };
            for _ in 0..count {
                requests.push((rng.random_range(0..num_sentences), entity));
            }
        }
        requests.sort_by_key(|&(sentence, _)| sentence);

        let mut sentences = Vec::with_capacity(num_sentences);
        let mut mentions: Vec<(usize, PendingMention)> = Vec::new();
        for s in 0..num_sentences {
            let mut tokens: Vec<String> = Vec::new();
            let filler_budget = range_sample(&mut rng, cfg.sentence_len);
            let wanted: Vec<usize> = requests
                .iter()
                .filter(|&&(sentence, _)| sentence == s)
                .map(|&(_, entity)| entity)
                .collect();
            let segments = wanted.len() + 1;
            let fill = |tokens: &mut Vec<String>, rng: &mut ChaCha8Rng, n: usize| {
                for _ in 0..n {
                    tokens.push(format!("w{}", rng.random_range(0..cfg.filler_vocab)));
                }
            };
            let base = filler_budget / segments;
            let extra = filler_budget % segments;
            for (k, &entity) in wanted.iter().enumerate() {
                fill(&mut tokens, &mut rng, base + usize::from(k < extra));
                let mut emitted = Vec::new();
                emit_mention(&mut rng, cfg, &entities, entity, 1, &mut tokens, &mut emitted);
                mentions.extend(emitted.into_iter().map(|m| (s, m)));
            }
            fill(&mut tokens, &mut rng, base.max(1));
            sentences.push(tokens);
        }

        mentions.sort_by_key(|(s, m)| (*s, m.start, m.end));
        let mut entity_members: std::collections::BTreeMap<usize, Vec<usize>> =
            std::collections::BTreeMap::new();
        let doc_mentions: Vec<Mention> = mentions
            .iter()
            .enumerate()
            .map(|(idx, (s, m))| {
                entity_members.entry(m.entity).or_default().push(idx);
                Mention::new(*s, m.start, m.end)
            })
            .collect();
        let clusters: Vec<Vec<usize>> = entity_members
            .into_values()
            .filter(|members| members.len() >= 2)
            .collect();

        let doc = Document {
            doc_id: format!("synth-{doc_index:04}"),
            sentences,
            mentions: doc_mentions,
            clusters,
        };
        debug_assert!(doc.validate().is_ok());
        documents.push(doc);
    }
    let corpus = Corpus { documents };
    debug_assert!(corpus
        .documents
        .iter()
        .all(|d| (0..d.sentences.len()).all(|s| is_laminar(&d.spans_in_sentence(s)))));
    Ok(corpus)
}

// ── Partial annotation ───────────────────────────────────────────────

/// How to degrade a fully annotated corpus into a partially annotated one.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PartialPolicy {
    /// Remove every mention that belongs to no chain of size >= 2.
    pub drop_singletons: bool,
    /// Independent drop probability for the remaining mentions.
    pub drop_rate: f64,
    /// If a chain falls below two members, drop its last member too.
    pub collapse_broken_chains: bool,
    pub seed: u64,
}

impl Default for PartialPolicy {
    fn default() -> Self {
        PartialPolicy {
            drop_singletons: true,
            drop_rate: 0.0,
            collapse_broken_chains: false,
            seed: 0,
        }
    }
}

/// Apply a partial-annotation policy. Returns the degraded corpus for
/// training and the untouched full gold for evaluation.
pub fn partialize(corpus: &Corpus, policy: &PartialPolicy) -> (Corpus, Corpus) {
    let full = corpus.clone();
    let mut partial_docs = Vec::with_capacity(corpus.documents.len());
    for (doc_index, doc) in corpus.documents.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(policy.seed, doc_index as u64));
        let cluster_of = doc.cluster_of_mention();
        let chained: Vec<bool> = (0..doc.mentions.len())
            .map(|i| {
                cluster_of[i]
                    .map(|c| doc.clusters[c].len() >= 2)
                    .unwrap_or(false)
            })
            .collect();

        let mut keep: Vec<bool> = (0..doc.mentions.len())
            .map(|i| !(policy.drop_singletons && !chained[i]))
            .collect();
        for flag in keep.iter_mut() {
            // Draw for every mention so the consumed randomness does not
            // depend on the singleton flag.
            let drop = rng.random_range(0.0..1.0) < policy.drop_rate;
            if drop {
                *flag = false;
            }
        }

        for cluster in &doc.clusters {
            let survivors: Vec<usize> = cluster.iter().copied().filter(|&i| keep[i]).collect();
            if survivors.len() == 1 && policy.collapse_broken_chains {
                keep[survivors[0]] = false;
            }
        }

        let mut remap = vec![usize::MAX; doc.mentions.len()];
        let mut mentions = Vec::new();
        for (i, m) in doc.mentions.iter().enumerate() {
            if keep[i] {
                remap[i] = mentions.len();
                mentions.push(*m);
            }
        }
        let clusters: Vec<Vec<usize>> = doc
            .clusters
            .iter()
            .map(|cluster| {
                cluster
                    .iter()
                    .copied()
                    .filter(|&i| keep[i])
                    .map(|i| remap[i])
                    .collect::<Vec<usize>>()
            })
            .filter(|c| c.len() >= 2)
            .collect();

        partial_docs.push(Document {
            doc_id: doc.doc_id.clone(),
            sentences: doc.sentences.clone(),
            mentions,
            clusters,
        });
    }
    (Corpus { documents: partial_docs }, full)
}
