//! Coreference metrics: MUC, B³, CEAF-φ4 and the CoNLL average.
//!
//! Run with: `cargo run --release --example coref_metrics`

use std::collections::BTreeSet;

use mentions::metrics::{b_cubed, ceaf_phi4, conll_average, evaluate_coref, muc, Clustering};

fn clustering(spec: &[&[&str]]) -> Clustering<String> {
    Clustering::new(
        spec.iter()
            .map(|c| c.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>())
            .collect(),
    )
    .unwrap()
}

fn show(name: &str, gold: &Clustering<String>, pred: &Clustering<String>) {
    println!("--- {name} ---");
    for (metric, prf) in [
        ("MUC", muc(gold, pred)),
        ("B³", b_cubed(gold, pred)),
        ("CEAF-φ4", ceaf_phi4(gold, pred)),
    ] {
        println!(
            "  {metric:<8} R={:.3}  P={:.3}  F1={:.3}",
            prf.recall, prf.precision, prf.f1
        );
    }
    let avg = conll_average(&muc(gold, pred), &b_cubed(gold, pred), &ceaf_phi4(gold, pred));
    println!("  CoNLL average = {avg:.3}\n");
}

fn main() {
    let gold = clustering(&[&["john", "he", "the-ceo"], &["mary", "she"]]);

    println!("gold: [[john, he, the-ceo], [mary, she]]\n");

    show("perfect prediction", &gold, &gold.clone());

    println!("pred: [[john, he], [the-ceo, mary], [she]]");
    show(
        "partial overlap",
        &gold,
        &clustering(&[&["john", "he"], &["the-ceo", "mary"], &["she"]]),
    );

    println!("pred: [[john, he, the-ceo, mary, she]]");
    show(
        "over-clustering",
        &gold,
        &clustering(&[&["john", "he", "the-ceo", "mary", "she"]]),
    );

    // The textbook decomposition case.
    let g = clustering(&[&["a", "b", "c"]]);
    let p = clustering(&[&["a", "b"], &["c"]]);
    println!("gold {{a,b,c}} vs pred {{a,b}},{{c}}:");
    println!("  MUC F1 = {:.4} (exactly 2/3)", muc(&g, &p).f1);
    println!("  B³  F1 = {:.4} (exactly 5/7)\n", b_cubed(&g, &p).f1);

    // Corpus-level aggregation sums counts over documents.
    let pairs = vec![(g.clone(), p.clone()), (gold.clone(), gold)];
    let report = evaluate_coref(&pairs);
    println!("two-document corpus aggregate:");
    println!(
        "  MUC {:.3}  B³ {:.3}  CEAF-φ4 {:.3}  CoNLL {:.3}",
        report.muc.f1, report.b_cubed.f1, report.ceaf_phi4.f1, report.conll_avg
    );
}
