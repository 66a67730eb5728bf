//! Training loops for the stand-alone detectors and the multitask
//! detector+coreference models.
//!
//! Batch granularity is one document: build the graph, take the loss,
//! backpropagate, update. Training is single-threaded and fully
//! deterministic under a fixed seed: identical config and seed give
//! bit-identical checkpoints and metric logs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::nn::{Encoder, Linear, Params};
use crate::autodiff::optim::{OptimError, Optimizer};
use crate::autodiff::{Tape, Tensor};
use crate::coref::{antecedent_loss, CorefHead, Phase};
use crate::corpus::{Corpus, CorpusError, Vocab};
use crate::objectives::{
    multitask_combine, multitask_combine_value, span_loss, tagger_loss,
};
use crate::spans::{SpanDims, SpanScorer};
use crate::tagger::Tagger;
use crate::tags::TagError;

use super::checkpoint::{Checkpoint, ModelConfig};
use super::config::{ConfigError, ModelKind, RunConfig};
use super::eval::{evaluate_with, EvalError, EvalReport, EvalSettings};
use super::runner::{
    gold_tag_sequences, span_coref_graph, tagger_coref_graph, tagger_predicted_pass,
    SpanDocGraph, TaggerDocGraph,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("document {doc_id}: gold tags cannot be encoded: {source}")]
    GoldTags {
        doc_id: String,
        #[source]
        source: TagError,
    },
    #[error("training diverged: non-finite loss at epoch {epoch}, document {doc_index}")]
    Diverged { epoch: usize, doc_index: usize },
    #[error("optimizer failure at epoch {epoch}, document {doc_index}: {source}")]
    Optim {
        epoch: usize,
        doc_index: usize,
        #[source]
        source: OptimError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Loss values from one document step.
#[derive(Debug, Clone, Copy)]
struct StepValues {
    det: f64,
    coref: Option<f64>,
    combined: Option<f64>,
    s_md: Option<f64>,
    s_cr: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Per-epoch metric log (TSV plus `#` summary lines).
    pub log: String,
    pub epochs_run: usize,
    pub selected_epoch: usize,
    /// Evaluation of the selected parameters on the training corpus.
    pub final_train: EvalReport,
}

/// Initialise every parameter the configured model needs, in a fixed
/// order so the seed fully determines the values.
pub fn init_params(cfg: &RunConfig, vocab: &Vocab) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params::new();
    Encoder::init_params(&mut params, vocab.len(), cfg.d_emb, cfg.d_hidden, &mut rng);
    let d_span = cfg.d_span();
    match cfg.model {
        ModelKind::Tagger => Tagger::init_params(&mut params, cfg.d_emb, cfg.d_hidden, &mut rng),
        ModelKind::Span => {
            let dims = SpanDims {
                d_emb: cfg.d_emb,
                d_hidden: cfg.d_hidden,
                d_span,
                d_size: 8,
            };
            SpanScorer::init_params(&mut params, &cfg.span_config(), &dims, &mut rng);
        }
    }
    if cfg.multitask {
        CorefHead::init_params(&mut params, d_span, d_span, cfg.d_dist, &mut rng);
        if cfg.model == ModelKind::Tagger {
            Linear::init_relu(
                &mut params,
                "coref.repr",
                d_span,
                4 * cfg.d_hidden + cfg.d_emb,
                &mut rng,
            );
        }
        params.insert("multitask.s_md", Tensor::scalar(0.0));
        params.insert("multitask.s_cr", Tensor::scalar(0.0));
    }
    params
}

fn doc_step(
    cfg: &RunConfig,
    mcfg: &ModelConfig,
    vocab: &Vocab,
    params: &Params,
    doc: &crate::corpus::Document,
) -> Result<(BTreeMap<String, Tensor>, StepValues), TrainError> {
    let mut tape = Tape::new();
    let (loss, values) = match cfg.model {
        ModelKind::Span => {
            let graph = SpanDocGraph::build(&mut tape, params, mcfg, vocab, doc);
            let probs = graph.probability_nodes();
            let det = span_loss(&mut tape, &probs, &graph.labels, cfg.loss.mode);
            if !cfg.multitask {
                let v = tape.value(det).item();
                (det, StepValues { det: v, coref: None, combined: None, s_md: None, s_cr: None })
            } else {
                let coref_graph =
                    span_coref_graph(&mut tape, params, mcfg, doc, &graph, Phase::Train);
                let coref = antecedent_loss(&mut tape, &coref_graph.candidates, &coref_graph.table);
                let s_md = tape.param(params, "multitask.s_md");
                let s_cr = tape.param(params, "multitask.s_cr");
                let combined = multitask_combine(&mut tape, det, coref, s_md, s_cr);
                let values = StepValues {
                    det: tape.value(det).item(),
                    coref: Some(tape.value(coref).item()),
                    combined: Some(tape.value(combined).item()),
                    s_md: Some(tape.value(s_md).item()),
                    s_cr: Some(tape.value(s_cr).item()),
                };
                (combined, values)
            }
        }
        ModelKind::Tagger => {
            let gold = gold_tag_sequences(doc, cfg.depth_cap).map_err(|source| {
                TrainError::GoldTags { doc_id: doc.doc_id.clone(), source }
            })?;
            let (graph, _steps) =
                TaggerDocGraph::build(&mut tape, params, mcfg, vocab, doc, &gold).map_err(
                    |source| TrainError::GoldTags { doc_id: doc.doc_id.clone(), source },
                )?;
            let det = tagger_loss(&mut tape, &graph.step_dists, &graph.step_symbols, cfg.loss.mode);
            if !cfg.multitask {
                let v = tape.value(det).item();
                (det, StepValues { det: v, coref: None, combined: None, s_md: None, s_cr: None })
            } else {
                let pass2 = tagger_predicted_pass(&mut tape, params, mcfg, vocab, doc, &graph.encs, 1);
                let coref_graph = tagger_coref_graph(
                    &mut tape,
                    params,
                    mcfg,
                    doc,
                    &graph.encs,
                    &pass2,
                    Phase::Train,
                );
                let coref = antecedent_loss(&mut tape, &coref_graph.candidates, &coref_graph.table);
                let s_md = tape.param(params, "multitask.s_md");
                let s_cr = tape.param(params, "multitask.s_cr");
                let combined = multitask_combine(&mut tape, det, coref, s_md, s_cr);
                let values = StepValues {
                    det: tape.value(det).item(),
                    coref: Some(tape.value(coref).item()),
                    combined: Some(tape.value(combined).item()),
                    s_md: Some(tape.value(s_md).item()),
                    s_cr: Some(tape.value(s_cr).item()),
                };
                (combined, values)
            }
        }
    };

    // Bookkeeping identity: the combined loss must equal the combiner
    // applied to its logged parts, bit for bit.
    if let (Some(c), Some(cf), Some(smd), Some(scr)) =
        (values.combined, values.coref, values.s_md, values.s_cr)
    {
        debug_assert_eq!(
            c.to_bits(),
            multitask_combine_value(values.det, cf, smd, scr).to_bits()
        );
    }

    let grads = tape.backward(loss).into_param_grads(&tape, params);
    Ok((grads, values))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".to_string())
}

/// Train a model in memory. `dev` enables per-epoch evaluation and
/// best-F1 model selection; without it the final parameters are kept.
pub fn train_in_memory(
    cfg: &RunConfig,
    train: &Corpus,
    dev: Option<&Corpus>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate(false)?;
    train.validate()?;
    if let Some(d) = dev {
        d.validate()?;
    }

    let vocab = Vocab::from_corpus(train);
    let mut params = init_params(cfg, &vocab);
    let mcfg = ModelConfig::from_run(cfg);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5u64.rotate_left(61));

    let eval_split = if dev.is_some() {
        "dev"
    } else if cfg.stop_at_train_f1.is_some() {
        "train"
    } else {
        "none"
    };
    let flags = if cfg.multitask { "pass1=gold,pass2=predicted" } else { "-" };

    let mut log = String::new();
    let _ = writeln!(
        log,
        "epoch\tdet_loss\tcoref_loss\tcombined_loss\tdoc_det\tdoc_coref\tdoc_s_md\tdoc_s_cr\tdoc_combined\teval_recall\teval_precision\teval_f1\tflags"
    );

    let mut best: Option<(f64, usize, Params)> = None;
    let mut epochs_run = 0;
    let settings = EvalSettings::default();

    for epoch in 1..=cfg.epochs {
        epochs_run = epoch;
        let mut order: Vec<usize> = (0..train.documents.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut det_sum = 0.0;
        let mut coref_sum = 0.0;
        let mut combined_sum = 0.0;
        let mut last: Option<StepValues> = None;
        for &doc_index in &order {
            let doc = &train.documents[doc_index];
            let (grads, values) = doc_step(cfg, &mcfg, &vocab, &params, doc)?;
            if !values.det.is_finite()
                || values.combined.map(|c| !c.is_finite()).unwrap_or(false)
            {
                return Err(TrainError::Diverged { epoch, doc_index });
            }
            optimizer
                .step(&mut params, &grads)
                .map_err(|source| TrainError::Optim { epoch, doc_index, source })?;
            det_sum += values.det;
            coref_sum += values.coref.unwrap_or(0.0);
            combined_sum += values.combined.unwrap_or(0.0);
            last = Some(values);
        }
        let n = train.documents.len() as f64;
        let last = last.expect("corpus is nonempty");

        let eval_prf = match (dev, cfg.stop_at_train_f1) {
            (Some(d), _) => {
                Some(evaluate_with(&mcfg, &vocab, &params, d, &settings)?.mention)
            }
            (None, Some(_)) => {
                Some(evaluate_with(&mcfg, &vocab, &params, train, &settings)?.mention)
            }
            (None, None) => None,
        };

        let _ = writeln!(
            log,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            epoch,
            det_sum / n,
            fmt_opt(cfg.multitask.then_some(coref_sum / n)),
            fmt_opt(cfg.multitask.then_some(combined_sum / n)),
            last.det,
            fmt_opt(last.coref),
            fmt_opt(last.s_md),
            fmt_opt(last.s_cr),
            fmt_opt(last.combined),
            fmt_opt(eval_prf.map(|p| p.recall)),
            fmt_opt(eval_prf.map(|p| p.precision)),
            fmt_opt(eval_prf.map(|p| p.f1)),
            flags
        );

        if let Some(prf) = eval_prf {
            if dev.is_some() {
                // Ties keep the later epoch: on a flat dev curve the most
                // recent parameters carry the most detector training.
                let improved = best.as_ref().map(|(f, _, _)| prf.f1 >= *f).unwrap_or(true);
                if improved {
                    best = Some((prf.f1, epoch, params.clone()));
                }
            }
            if let Some(target) = cfg.stop_at_train_f1 {
                if prf.f1 >= target {
                    break;
                }
            }
        }
    }

    let (selected_epoch, selected_params) = match best {
        Some((_, epoch, p)) => (epoch, p),
        None => (epochs_run, params),
    };

    let final_train = evaluate_with(&mcfg, &vocab, &selected_params, train, &settings)?;
    let _ = writeln!(log, "# eval_split={eval_split}");
    let _ = writeln!(log, "# selected_epoch={selected_epoch}");
    let _ = writeln!(
        log,
        "# train_mention_recall={} train_mention_precision={} train_mention_f1={}",
        final_train.mention.recall, final_train.mention.precision, final_train.mention.f1
    );
    if let Some(coref) = &final_train.coref {
        let _ = writeln!(log, "# train_conll_avg={}", coref.conll_avg);
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(mcfg, vocab, selected_params),
        log,
        epochs_run,
        selected_epoch,
        final_train,
    })
}

/// File-level wrapper: load corpora, train, and write the checkpoint,
/// metric log and resolved config into `out_dir`.
///
/// See the tests below for the contracts the loop keeps: decreasing
/// teacher-forced NLL on a tiny corpus, divergence reporting, and the
/// final logged metrics matching a fresh evaluation of the checkpoint.
pub fn run_training(cfg: &RunConfig) -> Result<(TrainOutcome, PathBuf), TrainError> {
    cfg.validate(true)?;
    let train = Corpus::load(&cfg.train_corpus)?;
    let dev = cfg.eval_corpus.as_ref().map(|p| Corpus::load(p)).transpose()?;

    let outcome = train_in_memory(cfg, &train, dev.as_ref())?;

    let out_dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("run-{}-{}", cfg.model, cfg.seed)));
    let io_err = |path: &std::path::Path, source: std::io::Error| TrainError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
    let ckpt_path = out_dir.join("checkpoint.json");
    outcome.checkpoint.save(&ckpt_path).map_err(EvalError::from).map_err(TrainError::Eval)?;
    let log_path = out_dir.join("metrics.tsv");
    std::fs::write(&log_path, &outcome.log).map_err(|e| io_err(&log_path, e))?;
    let cfg_path = out_dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| io_err(&cfg_path, e))?;
    Ok((outcome, ckpt_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_generate, GenConfig};
    use crate::harness::eval::evaluate_model;
    use crate::objectives::LossMode;

    fn tiny_corpus(docs: usize, seed: u64) -> Corpus {
        synth_generate(&GenConfig { num_docs: docs, ..GenConfig::default() }, seed).unwrap()
    }

    fn tiny_config(model: ModelKind) -> RunConfig {
        let mut cfg = RunConfig::in_memory(model, 5);
        cfg.d_emb = 8;
        cfg.d_hidden = 8;
        cfg.epochs = 8;
        cfg
    }

    #[test]
    fn one_epoch_smoke_writes_a_checkpoint() {
        let corpus = tiny_corpus(5, 1);
        let mut cfg = tiny_config(ModelKind::Span);
        cfg.epochs = 1;
        let outcome = train_in_memory(&cfg, &corpus, None).unwrap();
        assert!(outcome.checkpoint.validate().is_ok());
        assert!(outcome.checkpoint.params.num_values() > 0);
        for (_, tensor) in outcome.checkpoint.params.iter() {
            assert!(tensor.all_finite());
        }
    }

    fn epoch_det_losses(log: &str) -> Vec<f64> {
        log.lines()
            .skip(1)
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
            .collect()
    }

    #[test]
    fn teacher_forced_nll_decreases_over_epochs() {
        let corpus = tiny_corpus(4, 2);
        let cfg = tiny_config(ModelKind::Tagger);
        let outcome = train_in_memory(&cfg, &corpus, None).unwrap();
        let losses = epoch_det_losses(&outcome.log);
        assert!(
            losses.last().unwrap() < losses.first().unwrap(),
            "NLL did not decrease: {losses:?}"
        );
    }

    #[test]
    fn final_logged_metrics_match_checkpoint_evaluation() {
        let corpus = tiny_corpus(4, 3);
        for model in [ModelKind::Span, ModelKind::Tagger] {
            let cfg = tiny_config(model);
            let outcome = train_in_memory(&cfg, &corpus, None).unwrap();
            let report = evaluate_model(
                &outcome.checkpoint,
                &corpus,
                &super::super::eval::EvalSettings::default(),
            )
            .unwrap();
            assert_eq!(
                report.mention.f1.to_bits(),
                outcome.final_train.mention.f1.to_bits()
            );
            let logged = outcome
                .log
                .lines()
                .find(|l| l.starts_with("# train_mention_recall="))
                .unwrap()
                .to_string();
            assert!(logged.contains(&format!("train_mention_f1={}", report.mention.f1)));
        }
    }

    #[test]
    fn checkpoint_file_round_trip_preserves_evaluation() {
        let corpus = tiny_corpus(4, 4);
        let cfg = tiny_config(ModelKind::Span);
        let outcome = train_in_memory(&cfg, &corpus, None).unwrap();
        let reloaded = Checkpoint::from_json(&outcome.checkpoint.to_json()).unwrap();
        let settings = super::super::eval::EvalSettings::default();
        let before = evaluate_model(&outcome.checkpoint, &corpus, &settings).unwrap();
        let after = evaluate_model(&reloaded, &corpus, &settings).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn divergence_aborts_with_epoch_and_document() {
        let corpus = tiny_corpus(3, 6);
        let mut cfg = tiny_config(ModelKind::Span);
        cfg.optimizer = crate::autodiff::optim::OptimizerKind::Sgd;
        cfg.lr = 1e18;
        cfg.epochs = 5;
        match train_in_memory(&cfg, &corpus, None) {
            Err(TrainError::Diverged { epoch, .. }) => assert!(epoch >= 1),
            Err(TrainError::Optim { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn dev_selection_prefers_best_f1_epoch() {
        let corpus = tiny_corpus(5, 8);
        let mut cfg = tiny_config(ModelKind::Span);
        cfg.loss.mode = LossMode::Plain;
        cfg.epochs = 4;
        let outcome = train_in_memory(&cfg, &corpus, Some(&corpus)).unwrap();
        assert!(outcome.selected_epoch >= 1 && outcome.selected_epoch <= 4);
        assert!(outcome.log.contains("# eval_split=dev"));
        assert!(outcome
            .log
            .contains(&format!("# selected_epoch={}", outcome.selected_epoch)));
    }
}
