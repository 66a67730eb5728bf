//! Multitask detection + coreference resolution.
//!
//! The span detector and the pairwise coreference head share the sentence
//! encoder; their losses are combined with learned task weights. Each
//! pair score decomposes as s = s_c + s_m(k) + s_m(a), where s_m scales
//! the detector's confidence by a learned scalar v.
//!
//! Run with: `cargo run --release --example multitask_coref`

use mentions::corpus::{partialize, synth_generate, GenConfig, PartialPolicy};
use mentions::harness::{
    evaluate_with, export_predicted_clusters, render_report, train_in_memory, EvalSettings,
    ModelKind, RunConfig,
};

fn main() {
    let gen = GenConfig {
        num_docs: 60,
        sentences_per_doc: (3, 5),
        sentence_len: (1, 2),
        entities_per_doc: (3, 5),
        mentions_per_entity: (2, 4),
        singleton_propensity: (0.05, 0.9),
        nesting_prob: 0.0,
        max_nesting_depth: 2,
        filler_vocab: 1,
        modifier_vocab: 1,
        entity_vocab: 24,
    };
    let train_full = synth_generate(&gen, 100).unwrap();
    let eval_full = synth_generate(&GenConfig { num_docs: 20, ..gen }, 200).unwrap();
    let (train_partial, _) = partialize(
        &train_full,
        &PartialPolicy { drop_singletons: true, drop_rate: 0.3, collapse_broken_chains: false, seed: 7 },
    );

    let mut cfg = RunConfig::in_memory(ModelKind::Span, 1);
    cfg.multitask = true;
    cfg.loss.mode = mentions::objectives::LossMode::Weighted { w: 0.3 };
    cfg.d_emb = 24;
    cfg.d_hidden = 24;
    cfg.lr = 0.005;
    cfg.epochs = 60;

    println!("multitask training (span detector + coreference head)...");
    let outcome = train_in_memory(&cfg, &train_partial, None).unwrap();

    // The per-epoch log carries both task losses and the learned task
    // weights; show how they evolved.
    println!("\nepoch  det_loss  coref_loss  s_md      s_cr");
    for line in outcome.log.lines().skip(1).filter(|l| !l.starts_with('#')) {
        let cols: Vec<&str> = line.split('\t').collect();
        let epoch: usize = cols[0].parse().unwrap();
        if epoch % 10 == 0 {
            let f = |s: &str| s.parse::<f64>().unwrap();
            println!(
                "{:>5}  {:>8.4}  {:>10.4}  {:>8.4}  {:>8.4}",
                epoch,
                f(cols[1]),
                f(cols[2]),
                f(cols[6]),
                f(cols[7])
            );
        }
    }

    let ckpt = &outcome.checkpoint;
    let report = evaluate_with(
        &ckpt.config,
        &ckpt.vocab,
        &ckpt.params,
        &eval_full,
        &EvalSettings::default(),
    )
    .unwrap();
    println!("\n=== Evaluation against full gold ===\n");
    print!("{}", render_report(&report));

    // Predicted chains come back in the corpus file format.
    let predicted = export_predicted_clusters(ckpt, &eval_full, &EvalSettings::default()).unwrap();
    let doc = &predicted.documents[0];
    println!("\npredicted chains for {}:", doc.doc_id);
    for (c, cluster) in doc.clusters.iter().enumerate() {
        let texts: Vec<String> = cluster
            .iter()
            .map(|&m| {
                let m = doc.mentions[m];
                doc.sentences[m.sentence][m.start..=m.end].join(" ")
            })
            .collect();
        println!("  chain {c}: {}", texts.join(" | "));
    }
}
