//! Shared forward-pass plumbing: building per-document graphs for both
//! detectors, with or without the coreference head on top.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::autodiff::nn::{EncodedSentence, Encoder, Linear, Params};
use crate::autodiff::{NodeId, Tape};
use crate::coref::{
    mention_repr, score_antecedents, select_candidates, AntecedentTable, CorefHead, Phase,
    ScoredCandidate,
};
use crate::corpus::{Document, Vocab};
use crate::spans::{
    encoding_units, enumerate_spans, gold_unit_spans, ScoredSpan, SpanScorer, UnitSpan,
};
use crate::tagger::{
    beam_decode, mention_confidence_nodes, NeuralDecoder, Tagger, TaggerStep,
};
use crate::tags::{decode_tags, encode_mentions, laminarize, TagError, TagSequence};

use super::checkpoint::ModelConfig;

/// Mention identity for evaluation: (document, unit, start, end).
pub type MentionKey = (usize, usize, usize, usize);

pub fn token_ids(vocab: &Vocab, sentence: &[String]) -> Vec<usize> {
    sentence.iter().map(|t| vocab.id(t)).collect()
}

/// Gold tag sequences per sentence; crossing gold spans are repaired with
/// the greedy laminar restriction first (the tagger-path convention).
pub fn gold_tag_sequences(doc: &Document, depth_cap: usize) -> Result<Vec<TagSequence>, TagError> {
    (0..doc.sentences.len())
        .map(|s| {
            let spans = laminarize(&doc.spans_in_sentence(s));
            encode_mentions(&spans, doc.sentences[s].len(), depth_cap)
        })
        .collect()
}

/// Map every clustered gold mention to its cluster id, keyed the same way
/// candidates are.
pub fn gold_cluster_map(doc: &Document, cfg: &ModelConfig) -> BTreeMap<UnitSpan, usize> {
    let keys = gold_unit_spans(doc, cfg.scope());
    let cluster_of = doc.cluster_of_mention();
    keys.iter()
        .enumerate()
        .filter_map(|(i, key)| cluster_of[i].map(|c| (*key, c)))
        .collect()
}

// ── Span-model graphs ────────────────────────────────────────────────

pub struct SpanDocGraph {
    pub encs: Vec<EncodedSentence>,
    /// Every enumerated span with its representation and probability.
    pub scored: Vec<(UnitSpan, ScoredSpan)>,
    /// Labels against the document's (possibly partial) annotation.
    pub labels: Vec<f64>,
    scorer: SpanScorer,
}

impl SpanDocGraph {
    pub fn build(
        tape: &mut Tape,
        params: &Params,
        cfg: &ModelConfig,
        vocab: &Vocab,
        doc: &Document,
    ) -> SpanDocGraph {
        let encoder = Encoder::register(tape, params);
        let scorer = SpanScorer::register(tape, params, &cfg.span);
        let units = encoding_units(doc, cfg.scope());
        let gold: BTreeSet<UnitSpan> = gold_unit_spans(doc, cfg.scope()).into_iter().collect();

        let mut encs = Vec::with_capacity(units.len());
        let mut scored = Vec::new();
        let mut labels = Vec::new();
        for (unit, tokens) in units.iter().enumerate() {
            let ids = token_ids(vocab, tokens);
            let enc = encoder.encode(tape, &ids);
            for s in scorer.score_unit(tape, &enc, &enumerate_spans(tokens.len(), cfg.span.max_len)) {
                let key = UnitSpan { unit, span: s.span };
                labels.push(if gold.contains(&key) { 1.0 } else { 0.0 });
                scored.push((key, s));
            }
            encs.push(enc);
        }
        SpanDocGraph { encs, scored, labels, scorer }
    }

    pub fn probability_nodes(&self) -> Vec<NodeId> {
        self.scored.iter().map(|(_, s)| s.prob).collect()
    }

    /// Span keys whose probability value exceeds tau.
    pub fn predicted(&self, tape: &Tape, tau: f64) -> Vec<UnitSpan> {
        self.scored
            .iter()
            .filter(|(_, s)| tape.value(s.prob).item() > tau)
            .map(|(key, _)| *key)
            .collect()
    }

    /// Representation and probability for a candidate, reusing the
    /// enumerated node when present (gold spans beyond max_len are scored
    /// on demand).
    pub fn candidate_nodes(&self, tape: &mut Tape, key: UnitSpan) -> (NodeId, NodeId) {
        if let Some((_, s)) = self.scored.iter().find(|(k, _)| *k == key) {
            return (s.repr, s.prob);
        }
        let repr = self.scorer.span_repr(tape, &self.encs[key.unit], key.span);
        let prob = self.scorer.span_prob(tape, repr);
        (repr, prob)
    }
}

/// Coreference layer over span-model candidates (train phase: union with
/// gold; test phase: thresholded predictions only).
pub struct CorefGraph {
    pub candidates: Vec<ScoredCandidate>,
    pub table: AntecedentTable,
}

pub fn span_coref_graph(
    tape: &mut Tape,
    params: &Params,
    cfg: &ModelConfig,
    doc: &Document,
    graph: &SpanDocGraph,
    phase: Phase,
) -> CorefGraph {
    let head = CorefHead::register(tape, params);
    let predicted = graph.predicted(tape, cfg.loss.tau);
    let gold = gold_unit_spans(doc, cfg.scope());
    let keys = select_candidates(&predicted, &gold, phase);
    let clusters = gold_cluster_map(doc, cfg);

    let candidates: Vec<ScoredCandidate> = keys
        .into_iter()
        .map(|key| {
            let (repr, prob) = graph.candidate_nodes(tape, key);
            let s_m = head.s_m_span(tape, prob);
            ScoredCandidate {
                key,
                gold_cluster: clusters.get(&key).copied(),
                repr,
                s_m,
            }
        })
        .collect();
    let table = score_antecedents(tape, &head, &candidates, cfg.max_antecedents);
    CorefGraph { candidates, table }
}

/// Encoder states for every sentence of a document on one tape.
pub fn encode_doc(
    tape: &mut Tape,
    params: &Params,
    vocab: &Vocab,
    doc: &Document,
) -> Vec<EncodedSentence> {
    let encoder = Encoder::register(tape, params);
    doc.sentences
        .iter()
        .map(|sentence| encoder.encode(tape, &token_ids(vocab, sentence)))
        .collect()
}

// ── Tagger graphs ────────────────────────────────────────────────────

pub struct TaggerDocGraph {
    pub encs: Vec<EncodedSentence>,
    /// Flattened step distributions and their gold symbols across the
    /// document's sentences.
    pub step_dists: Vec<NodeId>,
    pub step_symbols: Vec<crate::tags::TagSymbol>,
}

impl TaggerDocGraph {
    /// Teacher-forced pass over the given per-sentence tag sequences.
    pub fn build(
        tape: &mut Tape,
        params: &Params,
        cfg: &ModelConfig,
        vocab: &Vocab,
        doc: &Document,
        tags: &[TagSequence],
    ) -> Result<(TaggerDocGraph, Vec<Vec<TaggerStep>>), TagError> {
        assert_eq!(tags.len(), doc.sentences.len());
        let encoder = Encoder::register(tape, params);
        let tagger = Tagger::register(tape, params);
        let mut encs = Vec::new();
        let mut step_dists = Vec::new();
        let mut step_symbols = Vec::new();
        let mut per_sentence = Vec::new();
        for (sentence, gold) in doc.sentences.iter().zip(tags) {
            let ids = token_ids(vocab, sentence);
            let enc = encoder.encode(tape, &ids);
            let steps = tagger.forward_teacher_forced(tape, &enc, gold, cfg.depth_cap)?;
            step_dists.extend(steps.iter().map(|s| s.dist));
            step_symbols.extend_from_slice(gold.symbols());
            per_sentence.push(steps);
            encs.push(enc);
        }
        Ok((TaggerDocGraph { encs, step_dists, step_symbols }, per_sentence))
    }
}

/// The tagger's predicted pass for one document: greedy constrained
/// decoding per sentence, then a teacher-forced re-run over the predicted
/// symbols on the tape so confidences stay differentiable.
pub struct TaggerPredictedPass {
    pub decoded: Vec<TagSequence>,
    pub steps: Vec<Vec<TaggerStep>>,
}

pub fn tagger_predicted_pass(
    tape: &mut Tape,
    params: &Params,
    cfg: &ModelConfig,
    vocab: &Vocab,
    doc: &Document,
    encs: &[EncodedSentence],
    beam: usize,
) -> TaggerPredictedPass {
    let tagger = Tagger::register(tape, params);
    let mut decoded = Vec::new();
    let mut steps = Vec::new();
    for (s, sentence) in doc.sentences.iter().enumerate() {
        let ids = token_ids(vocab, sentence);
        let scorer = NeuralDecoder::new(params, &ids);
        let one_best = beam_decode(&scorer, ids.len(), beam, cfg.depth_cap);
        let pass2 = tagger
            .forward_teacher_forced(tape, &encs[s], &one_best.tags, cfg.depth_cap)
            .expect("decoded sequences are always valid");
        decoded.push(one_best.tags);
        steps.push(pass2);
    }
    TaggerPredictedPass { decoded, steps }
}

/// Coreference layer over tagger candidates. Mention representations come
/// from a coref-owned layer over the shared encoder states; confidences
/// are max-over-word-block probabilities from the predicted pass.
pub fn tagger_coref_graph(
    tape: &mut Tape,
    params: &Params,
    cfg: &ModelConfig,
    doc: &Document,
    encs: &[EncodedSentence],
    pass2: &TaggerPredictedPass,
    phase: Phase,
) -> CorefGraph {
    let head = CorefHead::register(tape, params);
    let repr_layer = Linear::register(tape, params, "coref.repr");

    let mut predicted = Vec::new();
    for (unit, tags) in pass2.decoded.iter().enumerate() {
        for span in decode_tags(tags).expect("decoded sequences are always valid") {
            predicted.push(UnitSpan { unit, span });
        }
    }
    let gold = gold_unit_spans(doc, cfg.scope());
    let keys = select_candidates(&predicted, &gold, phase);
    let clusters = gold_cluster_map(doc, cfg);

    let candidates: Vec<ScoredCandidate> = keys
        .into_iter()
        .map(|key| {
            let repr = mention_repr(tape, &repr_layer, &encs[key.unit], key.span);
            let (p_open, p_close) =
                mention_confidence_nodes(tape, &pass2.steps[key.unit], key.span)
                    .expect("every word has at least one decoder step");
            let open_prob = tape.pick(p_open, crate::tags::TagSymbol::Open.index());
            let close_prob = tape.pick(p_close, crate::tags::TagSymbol::Close.index());
            let s_m = head.s_m_tagger(tape, open_prob, close_prob);
            ScoredCandidate {
                key,
                gold_cluster: clusters.get(&key).copied(),
                repr,
                s_m,
            }
        })
        .collect();
    let table = score_antecedents(tape, &head, &candidates, cfg.max_antecedents);
    CorefGraph { candidates, table }
}
