//! The exhaustive span-scoring mention detector.
//!
//! Every candidate span (i, j) in an encoding unit gets a probability
//! `sigma(V · relu(W_m · m_ij + b_m))` where the span representation
//! `m_ij = relu(W_h · [h_i, h_j, x_avg] + b_h)` combines the endpoint
//! encoder states with the averaged word embeddings of the span. Two
//! optional variants replace parts of the representation: a bucketed
//! span-size embedding appended to the features, and learned attention
//! pooling over the embeddings instead of the average (which requires a
//! maximum span length).
//!
//! Per-span probabilities are independent given the encoder states, so
//! scoring order never changes values.

use rand::Rng;
use thiserror::Error;

use crate::autodiff::nn::{EncodedSentence, Linear, Params};
use crate::autodiff::{NodeId, Tape};
use crate::corpus::Document;
use crate::tags::MentionSpan;

/// Span-length buckets for the size-embedding variant: 1, 2, 3, 4, 5-7,
/// 8-15, 16+.
pub const SIZE_BUCKETS: usize = 7;

pub fn size_bucket(len: usize) -> usize {
    match len {
        0 => panic!("zero-length span"),
        1 => 0,
        2 => 1,
        3 => 2,
        4 => 3,
        5..=7 => 4,
        8..=15 => 5,
        _ => 6,
    }
}

/// Whether spans are enumerated within sentences or over the whole
/// document as one token stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanScope {
    Sentence,
    Document,
}

#[derive(Debug, Error)]
pub enum SpanConfigError {
    #[error("attention pooling requires max_len to be set")]
    AttentionNeedsMaxLen,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpanScorerConfig {
    pub scope: SpanScope,
    /// Optional cap on enumerated span length (tokens).
    pub max_len: Option<usize>,
    pub size_embedding: bool,
    pub attention_pooling: bool,
}

impl Default for SpanScorerConfig {
    fn default() -> Self {
        SpanScorerConfig {
            scope: SpanScope::Sentence,
            max_len: None,
            size_embedding: false,
            attention_pooling: false,
        }
    }
}

impl SpanScorerConfig {
    pub fn validate(&self) -> Result<(), SpanConfigError> {
        if self.attention_pooling && self.max_len.is_none() {
            return Err(SpanConfigError::AttentionNeedsMaxLen);
        }
        Ok(())
    }
}

/// All (i, j) with i <= j within one unit of `unit_len` tokens, filtered
/// by `max_len`. Without a cap the count is unit_len·(unit_len+1)/2.
pub fn enumerate_spans(unit_len: usize, max_len: Option<usize>) -> Vec<MentionSpan> {
    let mut out = Vec::new();
    for i in 0..unit_len {
        for j in i..unit_len {
            if let Some(cap) = max_len {
                if j - i + 1 > cap {
                    break;
                }
            }
            out.push(MentionSpan::new(i, j));
        }
    }
    out
}

/// A span addressed by its encoding unit (sentence index, or 0 for
/// document scope).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct UnitSpan {
    pub unit: usize,
    pub span: MentionSpan,
}

/// The token streams the encoder sees: one per sentence, or the whole
/// document flattened, per the configured scope.
pub fn encoding_units(doc: &Document, scope: SpanScope) -> Vec<Vec<String>> {
    match scope {
        SpanScope::Sentence => doc.sentences.clone(),
        SpanScope::Document => {
            vec![doc.sentences.iter().flatten().cloned().collect()]
        }
    }
}

/// Gold mentions of a document mapped to unit-relative spans.
pub fn gold_unit_spans(doc: &Document, scope: SpanScope) -> Vec<UnitSpan> {
    match scope {
        SpanScope::Sentence => doc
            .mentions
            .iter()
            .map(|m| UnitSpan { unit: m.sentence, span: m.span() })
            .collect(),
        SpanScope::Document => {
            let mut offsets = vec![0usize; doc.sentences.len()];
            let mut total = 0;
            for (s, sentence) in doc.sentences.iter().enumerate() {
                offsets[s] = total;
                total += sentence.len();
            }
            doc.mentions
                .iter()
                .map(|m| UnitSpan {
                    unit: 0,
                    span: MentionSpan::new(offsets[m.sentence] + m.start, offsets[m.sentence] + m.end),
                })
                .collect()
        }
    }
}

/// Registered span-scoring layers on a tape.
pub struct SpanScorer {
    repr: Linear,
    hidden: Linear,
    score_v: NodeId,
    size_emb: Option<NodeId>,
    attn_v: Option<NodeId>,
}

/// Dimensions of the span scorer head.
#[derive(Debug, Clone, Copy)]
pub struct SpanDims {
    pub d_emb: usize,
    pub d_hidden: usize,
    /// Span representation and hidden scoring layer width.
    pub d_span: usize,
    pub d_size: usize,
}

impl SpanScorer {
    pub fn init_params(
        params: &mut Params,
        cfg: &SpanScorerConfig,
        dims: &SpanDims,
        rng: &mut impl Rng,
    ) {
        let mut feat = 2 * 2 * dims.d_hidden + dims.d_emb;
        if cfg.size_embedding {
            feat += dims.d_size;
        }
        Linear::init_relu(params, "span.repr", dims.d_span, feat, rng);
        Linear::init_relu(params, "span.hidden", dims.d_span, dims.d_span, rng);
        params.insert_uniform("span.score_v", &[dims.d_span], rng);
        if cfg.size_embedding {
            params.insert_uniform("span.size_emb", &[SIZE_BUCKETS, dims.d_size], rng);
        }
        if cfg.attention_pooling {
            params.insert_uniform("span.attn_v", &[dims.d_emb], rng);
        }
    }

    pub fn register(tape: &mut Tape, params: &Params, cfg: &SpanScorerConfig) -> Self {
        SpanScorer {
            repr: Linear::register(tape, params, "span.repr"),
            hidden: Linear::register(tape, params, "span.hidden"),
            score_v: tape.param(params, "span.score_v"),
            size_emb: cfg.size_embedding.then(|| tape.param(params, "span.size_emb")),
            attn_v: cfg.attention_pooling.then(|| tape.param(params, "span.attn_v")),
        }
    }

    /// Pooled embedding over x_i..x_j: arithmetic mean, or learned
    /// attention when the variant is enabled.
    fn pooled_embedding(&self, tape: &mut Tape, enc: &EncodedSentence, span: MentionSpan) -> NodeId {
        let xs = &enc.embeddings[span.start..=span.end];
        match self.attn_v {
            None => tape.mean(xs),
            Some(v) => {
                let scores: Vec<NodeId> = xs.iter().map(|&x| tape.dot(v, x)).collect();
                let logits = tape.concat(&scores);
                let weights = tape.softmax(logits);
                tape.weighted_sum(weights, xs)
            }
        }
    }

    /// The span representation m_ij = relu(W_h·[h_i, h_j, x_pool(+size)] + b_h).
    pub fn span_repr(&self, tape: &mut Tape, enc: &EncodedSentence, span: MentionSpan) -> NodeId {
        assert!(
            span.end < enc.states.len(),
            "span {span} out of range for unit of {} tokens",
            enc.states.len()
        );
        let pooled = self.pooled_embedding(tape, enc, span);
        let mut features = vec![enc.states[span.start], enc.states[span.end], pooled];
        if let Some(table) = self.size_emb {
            features.push(tape.row(table, size_bucket(span.len())));
        }
        let feat = tape.concat(&features);
        let pre = self.repr.apply(tape, feat);
        tape.relu(pre)
    }

    /// Detection probability, strictly inside (0, 1).
    pub fn span_prob(&self, tape: &mut Tape, repr: NodeId) -> NodeId {
        let pre = self.hidden.apply(tape, repr);
        let hidden = tape.relu(pre);
        let score = tape.dot(self.score_v, hidden);
        tape.sigmoid(score)
    }

    /// Representation and probability for every span of one unit.
    pub fn score_unit(
        &self,
        tape: &mut Tape,
        enc: &EncodedSentence,
        spans: &[MentionSpan],
    ) -> Vec<ScoredSpan> {
        spans
            .iter()
            .map(|&span| {
                let repr = self.span_repr(tape, enc, span);
                let prob = self.span_prob(tape, repr);
                ScoredSpan { span, repr, prob }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScoredSpan {
    pub span: MentionSpan,
    pub repr: NodeId,
    pub prob: NodeId,
}

/// Spans whose probability strictly exceeds the threshold. The result may
/// contain crossing spans; the span model is unconstrained.
pub fn decode_mentions(scored: &[(MentionSpan, f64)], tau: f64) -> Vec<MentionSpan> {
    scored
        .iter()
        .filter(|(_, p)| *p > tau)
        .map(|(span, _)| *span)
        .collect()
}
