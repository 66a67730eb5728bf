//! Synthetic coreference corpora and the partial-annotation simulator.
//!
//! Generates documents whose mentions are detectable from surface cues
//! (determiner-initial, entity-head-final), then degrades the annotation
//! the way chain-only corpora are annotated: singletons vanish entirely
//! and a fraction of the remaining mentions is dropped.
//!
//! Run with: `cargo run --release --example generate_corpus`

use mentions::corpus::{partialize, synth_generate, GenConfig, PartialPolicy};

fn main() {
    let cfg = GenConfig { num_docs: 30, nesting_prob: 0.3, ..GenConfig::default() };
    let corpus = synth_generate(&cfg, 1234).unwrap();

    let doc = &corpus.documents[0];
    println!("=== {} ===", doc.doc_id);
    for (s, sentence) in doc.sentences.iter().enumerate() {
        println!("  [{s}] {}", sentence.join(" "));
    }
    println!("  mentions:");
    for (i, m) in doc.mentions.iter().enumerate() {
        let text = doc.sentences[m.sentence][m.start..=m.end].join(" ");
        println!("    {i}: sentence {} span ({},{})  \"{text}\"", m.sentence, m.start, m.end);
    }
    println!("  chains: {:?}", doc.clusters);

    let chained: usize = corpus
        .documents
        .iter()
        .map(|d| d.clusters.iter().map(Vec::len).sum::<usize>())
        .sum();
    println!(
        "\ncorpus: {} documents, {} mentions ({} in chains, {} singletons)",
        corpus.len(),
        corpus.total_mentions(),
        chained,
        corpus.total_mentions() - chained
    );

    println!("\n=== Partial annotation ===\n");
    for drop_rate in [0.0, 0.3, 0.6] {
        let policy = PartialPolicy {
            drop_singletons: true,
            drop_rate,
            collapse_broken_chains: false,
            seed: 9,
        };
        let (partial, full) = partialize(&corpus, &policy);
        println!(
            "drop_singletons + p={drop_rate:<4}  keeps {:>4} of {} mentions ({:.1}%)",
            partial.total_mentions(),
            full.total_mentions(),
            100.0 * partial.total_mentions() as f64 / full.total_mentions() as f64
        );
    }

    println!("\nThe file format is JSON lines; first document:");
    let line = corpus.to_jsonl().lines().next().unwrap().to_string();
    println!("{}...", &line[..line.len().min(160)]);
}
