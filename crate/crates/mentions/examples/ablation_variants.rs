//! Span-representation ablations: span-size embeddings and attention
//! pooling over the word embeddings instead of the average.
//!
//! Run with: `cargo run --release --example ablation_variants`

use mentions::corpus::{synth_generate, GenConfig};
use mentions::harness::{evaluate_with, train_in_memory, EvalSettings, ModelKind, RunConfig};

fn main() {
    let train = synth_generate(&GenConfig { num_docs: 25, ..Default::default() }, 51).unwrap();
    let eval = synth_generate(&GenConfig { num_docs: 10, ..Default::default() }, 52).unwrap();

    println!("{:<26} {:>8} {:>10} {:>8}", "variant", "recall", "precision", "f1");
    for (name, size_embedding, attention) in [
        ("average pooling (base)", false, false),
        ("+ span-size embedding", true, false),
        ("attention pooling", false, true),
    ] {
        let mut cfg = RunConfig::in_memory(ModelKind::Span, 9);
        cfg.d_emb = 16;
        cfg.d_hidden = 32;
        cfg.lr = 0.005;
        cfg.epochs = 30;
        cfg.size_embedding = size_embedding;
        cfg.attention_pooling = attention;
        if attention {
            // Attention pooling requires a maximum span length.
            cfg.span_max_len = Some(8);
        }
        let outcome = train_in_memory(&cfg, &train, None).unwrap();
        let ckpt = &outcome.checkpoint;
        let report = evaluate_with(
            &ckpt.config,
            &ckpt.vocab,
            &ckpt.params,
            &eval,
            &EvalSettings::default(),
        )
        .unwrap();
        println!(
            "{:<26} {:>8.3} {:>10.3} {:>8.3}",
            name, report.mention.recall, report.mention.precision, report.mention.f1
        );
    }
}
