//! Evaluation: mention detection P/R/F1 against the given corpus and,
//! for multitask checkpoints, the coreference metrics with their CoNLL
//! average. Also the decode and score-dump surfaces the CLI exposes.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::autodiff::nn::Params;
use crate::autodiff::Tape;
use crate::coref::{cluster_decode, Phase};
use crate::corpus::{Corpus, CorpusError, Document, Vocab};
use crate::metrics::{
    evaluate_coref, mention_prf, Clustering, ClusteringError, CorefReport, Prf,
};
use crate::spans::{gold_unit_spans, SpanScope};
use crate::tagger::{beam_decode, DecodedSequence, NeuralDecoder};
use crate::tags::decode_tags;

use super::checkpoint::{Checkpoint, CheckpointError, ModelConfig};
use super::config::ModelKind;
use super::runner::{span_coref_graph, tagger_coref_graph, token_ids, MentionKey, SpanDocGraph};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("clustering invariant violated: {0}")]
    Clustering(#[from] ClusteringError),
    #[error("span score dump requires a span-model checkpoint")]
    NotASpanModel,
}

/// Decode-time overrides; unset fields fall back to the checkpoint's
/// stored settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalSettings {
    pub tau: Option<f64>,
    pub beam: Option<usize>,
}

impl EvalSettings {
    fn tau(&self, cfg: &ModelConfig) -> f64 {
        self.tau.unwrap_or(cfg.loss.tau)
    }
    fn beam(&self, cfg: &ModelConfig) -> usize {
        self.beam.unwrap_or(cfg.loss.beam)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mention: Prf,
    pub coref: Option<CorefReport>,
    pub documents: usize,
    pub predicted_mentions: usize,
    pub gold_mentions: usize,
}

/// Predicted mention keys for one document.
fn predict_doc(
    cfg: &ModelConfig,
    vocab: &Vocab,
    params: &Params,
    doc_index: usize,
    doc: &Document,
    settings: &EvalSettings,
) -> Vec<MentionKey> {
    match cfg.model {
        ModelKind::Span => {
            let mut tape = Tape::new();
            let graph = SpanDocGraph::build(&mut tape, params, cfg, vocab, doc);
            graph
                .predicted(&tape, settings.tau(cfg))
                .into_iter()
                .map(|u| (doc_index, u.unit, u.span.start, u.span.end))
                .collect()
        }
        ModelKind::Tagger => decode_doc_tags(cfg, vocab, params, doc, settings.beam(cfg))
            .iter()
            .enumerate()
            .flat_map(|(s, d)| {
                decode_tags(&d.tags)
                    .expect("decoded sequences are always valid")
                    .into_iter()
                    .map(move |span| (doc_index, s, span.start, span.end))
            })
            .collect(),
    }
}

/// Beam-decode every sentence of a document.
pub fn decode_doc_tags(
    cfg: &ModelConfig,
    vocab: &Vocab,
    params: &Params,
    doc: &Document,
    beam: usize,
) -> Vec<DecodedSequence> {
    doc.sentences
        .iter()
        .map(|sentence| {
            let ids = token_ids(vocab, sentence);
            let scorer = NeuralDecoder::new(params, &ids);
            beam_decode(&scorer, ids.len(), beam, cfg.depth_cap)
        })
        .collect()
}

fn gold_keys(cfg: &ModelConfig, doc_index: usize, doc: &Document) -> Vec<MentionKey> {
    gold_unit_spans(doc, cfg.scope())
        .into_iter()
        .map(|u| (doc_index, u.unit, u.span.start, u.span.end))
        .collect()
}

/// Gold chains (size >= 2) of one document as mention-key clusters.
fn gold_clustering(
    cfg: &ModelConfig,
    doc_index: usize,
    doc: &Document,
) -> Result<Clustering<MentionKey>, ClusteringError> {
    let keys = gold_keys(cfg, doc_index, doc);
    let clusters: Vec<BTreeSet<MentionKey>> = doc
        .clusters
        .iter()
        .filter(|c| c.len() >= 2)
        .map(|cluster| cluster.iter().map(|&m| keys[m]).collect())
        .collect();
    Clustering::new(clusters)
}

/// Predicted chains for one document (test-phase candidates).
fn predicted_clustering(
    cfg: &ModelConfig,
    vocab: &Vocab,
    params: &Params,
    doc_index: usize,
    doc: &Document,
    settings: &EvalSettings,
) -> Result<Clustering<MentionKey>, ClusteringError> {
    let mut tape = Tape::new();
    let coref_graph = match cfg.model {
        ModelKind::Span => {
            let mut eval_cfg = cfg.clone();
            eval_cfg.loss.tau = settings.tau(cfg);
            let graph = SpanDocGraph::build(&mut tape, params, &eval_cfg, vocab, doc);
            span_coref_graph(&mut tape, params, &eval_cfg, doc, &graph, Phase::Test)
        }
        ModelKind::Tagger => {
            let encs = super::runner::encode_doc(&mut tape, params, vocab, doc);
            let pass2 = super::runner::tagger_predicted_pass(
                &mut tape,
                params,
                cfg,
                vocab,
                doc,
                &encs,
                settings.beam(cfg),
            );
            tagger_coref_graph(&mut tape, params, cfg, doc, &encs, &pass2, Phase::Test)
        }
    };

    let rows: Vec<Vec<f64>> = coref_graph
        .table
        .scores
        .iter()
        .map(|row| row.iter().map(|&s| tape.value(s).item()).collect())
        .collect();
    let clusters = cluster_decode(&rows, &coref_graph.table.window_start);
    let sets: Vec<BTreeSet<MentionKey>> = clusters
        .into_iter()
        .map(|members| {
            members
                .into_iter()
                .map(|i| {
                    let u = coref_graph.candidates[i].key;
                    (doc_index, u.unit, u.span.start, u.span.end)
                })
                .collect()
        })
        .collect();
    Clustering::new(sets)
}

/// Evaluate raw model pieces (used during training without a checkpoint).
pub fn evaluate_with(
    cfg: &ModelConfig,
    vocab: &Vocab,
    params: &Params,
    corpus: &Corpus,
    settings: &EvalSettings,
) -> Result<EvalReport, EvalError> {
    corpus.validate()?;
    let mut predicted: BTreeSet<MentionKey> = BTreeSet::new();
    let mut gold: BTreeSet<MentionKey> = BTreeSet::new();
    let mut pairs = Vec::new();
    for (i, doc) in corpus.documents.iter().enumerate() {
        predicted.extend(predict_doc(cfg, vocab, params, i, doc, settings));
        gold.extend(gold_keys(cfg, i, doc));
        if cfg.multitask {
            let g = gold_clustering(cfg, i, doc)?;
            let p = predicted_clustering(cfg, vocab, params, i, doc, settings)?;
            pairs.push((g, p));
        }
    }
    let mention = mention_prf(&predicted, &gold);
    let coref = cfg.multitask.then(|| evaluate_coref(&pairs));
    Ok(EvalReport {
        mention,
        coref,
        documents: corpus.documents.len(),
        predicted_mentions: predicted.len(),
        gold_mentions: gold.len(),
    })
}

/// Evaluate a checkpoint against a corpus.
pub fn evaluate_model(
    ckpt: &Checkpoint,
    corpus: &Corpus,
    settings: &EvalSettings,
) -> Result<EvalReport, EvalError> {
    ckpt.validate()?;
    evaluate_with(&ckpt.config, &ckpt.vocab, &ckpt.params, corpus, settings)
}

/// Human-readable table plus machine-readable key=value lines.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>8} {:>10} {:>8}", "metric", "recall", "precision", "f1");
    let row = |out: &mut String, name: &str, p: &Prf| {
        let _ = writeln!(
            out,
            "{:<12} {:>8.4} {:>10.4} {:>8.4}",
            name, p.recall, p.precision, p.f1
        );
    };
    row(&mut out, "mention", &report.mention);
    if let Some(c) = &report.coref {
        row(&mut out, "muc", &c.muc);
        row(&mut out, "b_cubed", &c.b_cubed);
        row(&mut out, "ceaf_phi4", &c.ceaf_phi4);
        let _ = writeln!(out, "{:<12} {:>28.4}", "conll_avg", c.conll_avg);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "documents={}", report.documents);
    let _ = writeln!(out, "gold_mentions={}", report.gold_mentions);
    let _ = writeln!(out, "predicted_mentions={}", report.predicted_mentions);
    let _ = writeln!(out, "mention_recall={}", report.mention.recall);
    let _ = writeln!(out, "mention_precision={}", report.mention.precision);
    let _ = writeln!(out, "mention_f1={}", report.mention.f1);
    if let Some(c) = &report.coref {
        let _ = writeln!(out, "muc_f1={}", c.muc.f1);
        let _ = writeln!(out, "b_cubed_f1={}", c.b_cubed.f1);
        let _ = writeln!(out, "ceaf_phi4_f1={}", c.ceaf_phi4.f1);
        let _ = writeln!(out, "conll_avg_f1={}", c.conll_avg);
    }
    out
}

/// TSV of every enumerated span's probability and gold label:
/// doc_id, sent_id, i, j, probability, label.
pub fn dump_span_scores(ckpt: &Checkpoint, corpus: &Corpus) -> Result<String, EvalError> {
    ckpt.validate()?;
    if ckpt.config.model != ModelKind::Span {
        return Err(EvalError::NotASpanModel);
    }
    corpus.validate()?;
    let mut out = String::from("doc_id\tsent_id\ti\tj\tprobability\tlabel\n");
    for doc in &corpus.documents {
        let mut tape = Tape::new();
        let graph = SpanDocGraph::build(&mut tape, &ckpt.params, &ckpt.config, &ckpt.vocab, doc);
        for ((key, scored), label) in graph.scored.iter().zip(&graph.labels) {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                doc.doc_id,
                key.unit,
                key.span.start,
                key.span.end,
                tape.value(scored.prob).item(),
                label
            );
        }
    }
    Ok(out)
}

/// One line per sentence: the decoded tag string and the extracted spans.
pub fn decode_corpus(
    ckpt: &Checkpoint,
    corpus: &Corpus,
    beam: Option<usize>,
) -> Result<String, EvalError> {
    ckpt.validate()?;
    corpus.validate()?;
    let cfg = &ckpt.config;
    let settings = EvalSettings { tau: None, beam };
    let mut out = String::new();
    for (doc_index, doc) in corpus.documents.iter().enumerate() {
        match cfg.model {
            ModelKind::Tagger => {
                for (s, decoded) in
                    decode_doc_tags(cfg, &ckpt.vocab, &ckpt.params, doc, settings.beam(cfg))
                        .iter()
                        .enumerate()
                {
                    let spans: Vec<String> = decode_tags(&decoded.tags)
                        .expect("decoded sequences are always valid")
                        .iter()
                        .map(|sp| sp.to_string())
                        .collect();
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}",
                        doc.doc_id,
                        s,
                        decoded.tags,
                        if spans.is_empty() { "-".to_string() } else { spans.join(" ") }
                    );
                }
            }
            ModelKind::Span => {
                // The span model has no tag string; emit spans per unit.
                let keys = predict_doc(cfg, &ckpt.vocab, &ckpt.params, doc_index, doc, &settings);
                let mut by_unit: std::collections::BTreeMap<usize, Vec<String>> =
                    std::collections::BTreeMap::new();
                for (_, unit, start, end) in keys {
                    by_unit
                        .entry(unit)
                        .or_default()
                        .push(crate::tags::MentionSpan::new(start, end).to_string());
                }
                let units = match cfg.scope() {
                    SpanScope::Sentence => doc.sentences.len(),
                    SpanScope::Document => 1,
                };
                for unit in 0..units {
                    let spans = by_unit.get(&unit).cloned().unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}",
                        doc.doc_id,
                        unit,
                        "-",
                        if spans.is_empty() { "-".to_string() } else { spans.join(" ") }
                    );
                }
            }
        }
    }
    Ok(out)
}

/// Predicted clusters exported in the corpus file format: each document
/// keeps its text, mentions become the predicted chain members and
/// `clusters` holds the predicted chains.
pub fn export_predicted_clusters(
    ckpt: &Checkpoint,
    corpus: &Corpus,
    settings: &EvalSettings,
) -> Result<Corpus, EvalError> {
    ckpt.validate()?;
    corpus.validate()?;
    let cfg = &ckpt.config;
    let mut documents = Vec::with_capacity(corpus.documents.len());
    for (doc_index, doc) in corpus.documents.iter().enumerate() {
        let clustering =
            predicted_clustering(cfg, &ckpt.vocab, &ckpt.params, doc_index, doc, settings)?;
        let mut mentions = Vec::new();
        let mut clusters = Vec::new();
        for cluster in clustering.clusters() {
            let mut ids = Vec::new();
            for &(_, unit, start, end) in cluster {
                let mention = match cfg.scope() {
                    SpanScope::Sentence => Some(crate::corpus::Mention::new(unit, start, end)),
                    // Document scope: map flat offsets back into one
                    // sentence; cross-sentence spans cannot be stored.
                    SpanScope::Document => global_to_sentence(doc, start, end),
                };
                if let Some(m) = mention {
                    ids.push(mentions.len());
                    mentions.push(m);
                }
            }
            if ids.len() >= 2 {
                clusters.push(ids);
            }
        }
        documents.push(Document {
            doc_id: doc.doc_id.clone(),
            sentences: doc.sentences.clone(),
            mentions,
            clusters,
        });
    }
    Ok(Corpus::new(documents))
}

fn global_to_sentence(doc: &Document, start: usize, end: usize) -> Option<crate::corpus::Mention> {
    let mut offset = 0;
    for (s, sentence) in doc.sentences.iter().enumerate() {
        let next = offset + sentence.len();
        if start >= offset && end < next {
            return Some(crate::corpus::Mention::new(s, start - offset, end - offset));
        }
        offset = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_generate, GenConfig};
    use crate::harness::train::train_in_memory;
    use crate::harness::RunConfig;

    fn trained(model: ModelKind) -> (Checkpoint, Corpus) {
        let corpus =
            synth_generate(&GenConfig { num_docs: 4, ..GenConfig::default() }, 30).unwrap();
        let mut cfg = RunConfig::in_memory(model, 2);
        cfg.d_emb = 8;
        cfg.d_hidden = 8;
        cfg.epochs = 2;
        cfg.multitask = true;
        let outcome = train_in_memory(&cfg, &corpus, None).unwrap();
        (outcome.checkpoint, corpus)
    }

    #[test]
    fn concurrent_document_evaluation_matches_sequential() {
        // Parameters are a read-only snapshot during evaluation, so
        // per-document passes can run on any number of threads.
        let (ckpt, corpus) = trained(ModelKind::Span);
        let sequential: Vec<Vec<MentionKey>> = corpus
            .documents
            .iter()
            .enumerate()
            .map(|(i, d)| predict_doc(&ckpt.config, &ckpt.vocab, &ckpt.params, i, d, &EvalSettings::default()))
            .collect();
        let concurrent: Vec<Vec<MentionKey>> = std::thread::scope(|scope| {
            let handles: Vec<_> = corpus
                .documents
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let (cfg, vocab, params) = (&ckpt.config, &ckpt.vocab, &ckpt.params);
                    scope.spawn(move || {
                        predict_doc(cfg, vocab, params, i, d, &EvalSettings::default())
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(sequential, concurrent);
    }

    #[test]
    fn tau_sweep_emits_one_report_per_point() {
        let (ckpt, corpus) = trained(ModelKind::Span);
        let taus: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let mut reports = Vec::new();
        for &tau in &taus {
            let settings = EvalSettings { tau: Some(tau), beam: None };
            reports.push(evaluate_model(&ckpt, &corpus, &settings).unwrap());
        }
        assert_eq!(reports.len(), 9);
        // Recall is monotone nonincreasing in tau.
        for pair in reports.windows(2) {
            assert!(pair[1].mention.recall <= pair[0].mention.recall + 1e-12);
        }
    }

    #[test]
    fn score_dump_rejects_tagger_checkpoints() {
        let (ckpt, corpus) = trained(ModelKind::Tagger);
        assert!(matches!(
            dump_span_scores(&ckpt, &corpus),
            Err(EvalError::NotASpanModel)
        ));
    }

    #[test]
    fn exported_clusters_form_a_valid_corpus() {
        let (ckpt, corpus) = trained(ModelKind::Span);
        let predicted =
            export_predicted_clusters(&ckpt, &corpus, &EvalSettings { tau: Some(0.1), beam: None })
                .unwrap();
        predicted.validate().unwrap();
        // Round-trips through the corpus file format.
        let text = predicted.to_jsonl();
        assert_eq!(Corpus::from_jsonl(&text).unwrap(), predicted);
        for doc in &predicted.documents {
            for cluster in &doc.clusters {
                assert!(cluster.len() >= 2, "exported singleton chain");
            }
        }
    }
}
