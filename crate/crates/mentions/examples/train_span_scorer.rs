//! Train the exhaustive span scorer and sweep its decode threshold.
//!
//! Every candidate span gets an independent detection probability;
//! decoding keeps the spans above tau, so recall falls monotonically as
//! the threshold rises.
//!
//! Run with: `cargo run --release --example train_span_scorer`

use mentions::corpus::{synth_generate, GenConfig};
use mentions::harness::{
    dump_span_scores, evaluate_with, train_in_memory, EvalSettings, ModelKind, RunConfig,
};

fn main() {
    let train = synth_generate(&GenConfig { num_docs: 30, ..Default::default() }, 21).unwrap();
    let eval = synth_generate(&GenConfig { num_docs: 10, ..Default::default() }, 22).unwrap();

    let mut cfg = RunConfig::in_memory(ModelKind::Span, 1);
    cfg.d_emb = 16;
    cfg.d_hidden = 32;
    cfg.lr = 0.005;
    cfg.epochs = 40;

    println!("training the span scorer on {} documents...", train.len());
    let outcome = train_in_memory(&cfg, &train, None).unwrap();
    let ckpt = &outcome.checkpoint;
    println!(
        "training mention F1 at tau=0.5: {:.3}\n",
        outcome.final_train.mention.f1
    );

    println!("=== Threshold sweep on held-out documents ===\n");
    println!("{:>5} {:>8} {:>10} {:>8}", "tau", "recall", "precision", "f1");
    for tau in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
        let settings = EvalSettings { tau: Some(tau), beam: None };
        let report =
            evaluate_with(&ckpt.config, &ckpt.vocab, &ckpt.params, &eval, &settings).unwrap();
        println!(
            "{:>5.1} {:>8.3} {:>10.3} {:>8.3}",
            tau, report.mention.recall, report.mention.precision, report.mention.f1
        );
    }

    println!("\n=== Per-span score dump (first rows) ===\n");
    let tiny = mentions::corpus::Corpus::new(vec![eval.documents[0].clone()]);
    let tsv = dump_span_scores(ckpt, &tiny).unwrap();
    for line in tsv.lines().take(8) {
        println!("{line}");
    }
}
