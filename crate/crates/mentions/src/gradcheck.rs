//! Ready-made gradient-check instances for every model: tiny fixed
//! inputs, analytic gradients from the tape, and a forward-only loss
//! closure for the finite-difference comparison. Used by the `grad-check`
//! CLI subcommand and the acceptance suite.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::check::{check_gradients, GradCheckReport};
use crate::autodiff::nn::{Encoder, Linear, Params};
use crate::autodiff::{NodeId, Tape, Tensor};
use crate::coref::{antecedent_loss, mention_repr, score_antecedents, CorefHead, ScoredCandidate};
use crate::harness::runner::{span_coref_graph, SpanDocGraph};
use crate::harness::{ModelConfig, ModelKind, RunConfig};
use crate::objectives::{multitask_combine, span_loss, tagger_loss, LossMode};
use crate::corpus::{Corpus, Document, Mention, Vocab};
use crate::spans::UnitSpan;
use crate::tagger::{mention_confidence_nodes, Tagger};
use crate::tags::{MentionSpan, TagSequence, TagSymbol};

type LossBuilder = Box<dyn Fn(&Params) -> (f64, Option<(Tape, NodeId)>)>;

pub struct GradCheckCase {
    pub name: &'static str,
    pub params: Params,
    build: LossBuilder,
}

impl GradCheckCase {
    /// Analytic-vs-numeric comparison at the stored parameters.
    pub fn run(&self, eps: f64) -> GradCheckReport {
        let (_, built) = (self.build)(&self.params);
        let (tape, loss) = built.expect("loss graph");
        let analytic: BTreeMap<String, Tensor> =
            tape.backward(loss).into_param_grads(&tape, &self.params);
        check_gradients(&self.params, &analytic, |p| (self.build)(p).0, eps)
    }
}

/// A two-sentence document with a small chain, the shared fixture for the
/// full-model checks.
fn tiny_doc() -> (Corpus, Document) {
    let doc = Document {
        doc_id: "gc".to_string(),
        sentences: vec![
            vec!["the".into(), "ent1".into(), "w0".into(), "w1".into()],
            vec!["w2".into(), "the".into(), "ent1".into()],
        ],
        mentions: vec![Mention::new(0, 0, 1), Mention::new(1, 1, 2)],
        clusters: vec![vec![0, 1]],
    };
    (Corpus::new(vec![doc.clone()]), doc)
}

fn tiny_run_config(model: ModelKind) -> RunConfig {
    let mut cfg = RunConfig::in_memory(model, 0);
    cfg.d_emb = 3;
    cfg.d_hidden = 2;
    cfg.d_span = Some(4);
    cfg.d_dist = 2;
    cfg
}

/// Every model's gradient check on instances with M <= 5 and dims <= 8.
pub fn all_cases(seed: u64) -> Vec<GradCheckCase> {
    let mut cases = Vec::new();

    // ── Sequence tagger, teacher-forced NLL ─────────────────────────
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x01);
        let mut params = Params::new();
        Encoder::init_params(&mut params, 6, 3, 2, &mut rng);
        Tagger::init_params(&mut params, 3, 2, &mut rng);
        let build: LossBuilder = Box::new(|p: &Params| {
            let tokens = [1usize, 3, 2, 5, 4];
            let spans = [MentionSpan::new(0, 3), MentionSpan::new(1, 1)]
                .into_iter()
                .collect();
            let gold = crate::tags::encode_mentions(&spans, tokens.len(), 8).unwrap();
            let mut tape = Tape::new();
            let encoder = Encoder::register(&mut tape, p);
            let tagger = Tagger::register(&mut tape, p);
            let enc = encoder.encode(&mut tape, &tokens);
            let steps = tagger
                .forward_teacher_forced(&mut tape, &enc, &gold, 8)
                .expect("valid gold");
            let dists: Vec<NodeId> = steps.iter().map(|s| s.dist).collect();
            let loss = tagger_loss(&mut tape, &dists, gold.symbols(), LossMode::Plain);
            let v = tape.value(loss).item();
            (v, Some((tape, loss)))
        });
        cases.push(GradCheckCase { name: "tagger_nll", params, build });
    }

    // ── Span scorer: base and both ablation variants ────────────────
    for (name, size_embedding, attention) in [
        ("span_scorer", false, false),
        ("span_size_embedding", true, false),
        ("span_attention_pooling", false, true),
    ] {
        let mut cfg = tiny_run_config(ModelKind::Span);
        cfg.size_embedding = size_embedding;
        cfg.attention_pooling = attention;
        if attention {
            cfg.span_max_len = Some(4);
        }
        cfg.seed = seed ^ 0x02;
        let vocab = Vocab::from_corpus(&tiny_doc().0);
        let params = crate::harness::init_params(&cfg, &vocab);
        let mcfg = ModelConfig::from_run(&cfg);
        let build: LossBuilder = Box::new(move |p: &Params| {
            let (_, doc) = tiny_doc();
            let mut tape = Tape::new();
            let graph = SpanDocGraph::build(&mut tape, p, &mcfg, &vocab, &doc);
            let probs = graph.probability_nodes();
            let loss = span_loss(&mut tape, &probs, &graph.labels, LossMode::Plain);
            let v = tape.value(loss).item();
            (v, Some((tape, loss)))
        });
        cases.push(GradCheckCase { name, params, build });
    }

    // ── Coreference head on span candidates ─────────────────────────
    {
        let mut cfg = tiny_run_config(ModelKind::Span);
        cfg.multitask = true;
        cfg.seed = seed ^ 0x03;
        let vocab = Vocab::from_corpus(&tiny_doc().0);
        let params = crate::harness::init_params(&cfg, &vocab);
        let mcfg = ModelConfig::from_run(&cfg);
        let build: LossBuilder = Box::new(move |p: &Params| {
            let (_, doc) = tiny_doc();
            let mut tape = Tape::new();
            let graph = SpanDocGraph::build(&mut tape, p, &mcfg, &vocab, &doc);
            let coref = span_coref_graph(
                &mut tape,
                p,
                &mcfg,
                &doc,
                &graph,
                crate::coref::Phase::Train,
            );
            let loss = antecedent_loss(&mut tape, &coref.candidates, &coref.table);
            let v = tape.value(loss).item();
            (v, Some((tape, loss)))
        });
        cases.push(GradCheckCase { name: "coref_antecedent_ranking", params, build });
    }

    // ── Tagger-path confidences feeding the coreference head ────────
    {
        let mut cfg = tiny_run_config(ModelKind::Tagger);
        cfg.multitask = true;
        cfg.seed = seed ^ 0x04;
        let vocab = Vocab::from_corpus(&tiny_doc().0);
        let params = crate::harness::init_params(&cfg, &vocab);
        let build: LossBuilder = Box::new(move |p: &Params| {
            let (_, doc) = tiny_doc();
            let mut tape = Tape::new();
            let encoder = Encoder::register(&mut tape, p);
            let tagger = Tagger::register(&mut tape, p);
            let head = CorefHead::register(&mut tape, p);
            let repr_layer = Linear::register(&mut tape, p, "coref.repr");
            // A frozen stand-in for the predicted pass keeps the loss a
            // smooth function of the parameters.
            let predicted = [
                TagSequence::parse("[ + ] - - -").unwrap(),
                TagSequence::parse("- [ + ] -").unwrap(),
            ];
            let spans = [
                UnitSpan { unit: 0, span: MentionSpan::new(0, 1) },
                UnitSpan { unit: 1, span: MentionSpan::new(1, 2) },
            ];
            let mut candidates = Vec::new();
            for (unit, sentence) in doc.sentences.iter().enumerate() {
                let ids: Vec<usize> = sentence.iter().map(|t| vocab.id(t)).collect();
                let enc = encoder.encode(&mut tape, &ids);
                let steps = tagger
                    .forward_teacher_forced(&mut tape, &enc, &predicted[unit], 8)
                    .expect("valid sequence");
                let key = spans[unit];
                let (open_dist, close_dist) =
                    mention_confidence_nodes(&tape, &steps, key.span).expect("steps cover words");
                let p_open = tape.pick(open_dist, TagSymbol::Open.index());
                let p_close = tape.pick(close_dist, TagSymbol::Close.index());
                let s_m = head.s_m_tagger(&mut tape, p_open, p_close);
                let repr = mention_repr(&mut tape, &repr_layer, &enc, key.span);
                candidates.push(ScoredCandidate {
                    key,
                    gold_cluster: Some(0),
                    repr,
                    s_m,
                });
            }
            let table = score_antecedents(&mut tape, &head, &candidates, 50);
            let loss = antecedent_loss(&mut tape, &candidates, &table);
            let v = tape.value(loss).item();
            (v, Some((tape, loss)))
        });
        cases.push(GradCheckCase { name: "tagger_confidence_coref", params, build });
    }

    // ── Multitask combiner over both losses ─────────────────────────
    {
        let mut cfg = tiny_run_config(ModelKind::Span);
        cfg.multitask = true;
        cfg.seed = seed ^ 0x05;
        let vocab = Vocab::from_corpus(&tiny_doc().0);
        let mut params = crate::harness::init_params(&cfg, &vocab);
        // Non-trivial task weights so the combiner gradient is exercised
        // away from the identity point.
        params.insert("multitask.s_md", Tensor::scalar(0.3));
        params.insert("multitask.s_cr", Tensor::scalar(-0.2));
        let mcfg = ModelConfig::from_run(&cfg);
        let build: LossBuilder = Box::new(move |p: &Params| {
            let (_, doc) = tiny_doc();
            let mut tape = Tape::new();
            let graph = SpanDocGraph::build(&mut tape, p, &mcfg, &vocab, &doc);
            let probs = graph.probability_nodes();
            let det = span_loss(&mut tape, &probs, &graph.labels, LossMode::Plain);
            let coref_graph = span_coref_graph(
                &mut tape,
                p,
                &mcfg,
                &doc,
                &graph,
                crate::coref::Phase::Train,
            );
            let coref = antecedent_loss(&mut tape, &coref_graph.candidates, &coref_graph.table);
            let s_md = tape.param(p, "multitask.s_md");
            let s_cr = tape.param(p, "multitask.s_cr");
            let loss = multitask_combine(&mut tape, det, coref, s_md, s_cr);
            let v = tape.value(loss).item();
            (v, Some((tape, loss)))
        });
        cases.push(GradCheckCase { name: "multitask_combiner", params, build });
    }

    cases
}
