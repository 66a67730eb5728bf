//! Train the sequence tagger and decode with constrained beam search.
//!
//! The decoder emits bracket symbols while a pointer walks the sentence;
//! grammar masking guarantees every decoded sequence is well formed.
//!
//! Run with: `cargo run --release --example train_tagger`

use mentions::corpus::{synth_generate, GenConfig};
use mentions::harness::{decode_corpus, train_in_memory, ModelKind, RunConfig};
use mentions::tagger::{beam_decode, NeuralDecoder};
use mentions::tags::decode_tags;

fn main() {
    let corpus = synth_generate(&GenConfig { num_docs: 20, ..Default::default() }, 8).unwrap();

    let mut cfg = RunConfig::in_memory(ModelKind::Tagger, 1);
    cfg.d_emb = 16;
    cfg.d_hidden = 32;
    cfg.lr = 0.005;
    cfg.epochs = 60;
    cfg.stop_at_train_f1 = Some(0.99);

    println!("training the tagger on {} documents...", corpus.len());
    let outcome = train_in_memory(&cfg, &corpus, None).unwrap();
    println!(
        "done after {} epochs; training mention F1 = {:.3}\n",
        outcome.epochs_run, outcome.final_train.mention.f1
    );

    let ckpt = &outcome.checkpoint;
    println!("=== Beam decoding a document ===\n");
    let doc = &corpus.documents[0];
    for (s, sentence) in doc.sentences.iter().enumerate() {
        let ids: Vec<usize> = sentence.iter().map(|t| ckpt.vocab.id(t)).collect();
        let scorer = NeuralDecoder::new(&ckpt.params, &ids);
        let decoded = beam_decode(&scorer, ids.len(), 4, ckpt.config.depth_cap);
        let spans = decode_tags(&decoded.tags).unwrap();
        println!("  sentence: {}", sentence.join(" "));
        println!("  tags:     {}   (log-prob {:.3})", decoded.tags, decoded.score);
        let gold = doc.spans_in_sentence(s);
        let hits = spans.intersection(&gold).count();
        println!("  spans:    {spans:?}  ({hits}/{} gold)\n", gold.len());
    }

    println!("=== The decode surface the CLI exposes ===\n");
    let tiny = mentions::corpus::Corpus::new(vec![corpus.documents[1].clone()]);
    print!("{}", decode_corpus(ckpt, &tiny, Some(4)).unwrap());
}
