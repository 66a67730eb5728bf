//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measurements (run with `-- --show-output` to see them).
//!
//! The heavy directional experiments (criteria 6 and 7) train real models
//! on a seeded synthetic corpus; expect a few minutes of CPU per test.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mentions::autodiff::check::DEFAULT_EPSILON;
use mentions::corpus::{partialize, synth_generate, Corpus, GenConfig, PartialPolicy};
use mentions::gradcheck::all_cases;
use mentions::harness::{
    evaluate_with, train_in_memory, EvalSettings, ModelKind, RunConfig,
};
use mentions::metrics::{
    b_cubed, ceaf_phi4, conll_average, mention_prf, muc, Clustering, Prf,
};
use mentions::objectives::{
    multitask_combine_value, soft_tagger_targets, span_loss, tagger_loss, LossMode,
};
use mentions::spans::decode_mentions;
use mentions::tagger::{beam_decode, StepScorer};
use mentions::tags::{
    decode_tags, encode_mentions, is_laminar, nesting_depth, validate, MentionSpan, TagSequence,
    TagSymbol,
};

// ── Criterion 1: gradient integrity ──────────────────────────────────

#[test]
fn criterion_1_gradient_integrity() {
    let start = std::time::Instant::now();
    let mut worst = 0.0f64;
    for case in all_cases(0) {
        let report = case.run(DEFAULT_EPSILON);
        assert!(
            report.passes(1e-3),
            "criterion 1 FAIL: {} max relative error {}",
            case.name,
            report.max_rel_error
        );
        worst = worst.max(report.max_rel_error);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion 1 FAIL: took {elapsed:?}");
    println!("criterion 1 (gradient integrity): PASS — worst relative error {worst:.2e} in {elapsed:?}");
}

// ── Criterion 2: tag-grammar round trip ──────────────────────────────

fn random_laminar(rng: &mut ChaCha8Rng, m: usize, max_depth: usize) -> BTreeSet<MentionSpan> {
    let mut spans = BTreeSet::new();
    for _ in 0..rng.random_range(0..=2 * m) {
        let start = rng.random_range(0..m);
        let end = rng.random_range(start..m.min(start + 6));
        let mut trial = spans.clone();
        if trial.insert(MentionSpan::new(start, end))
            && is_laminar(&trial)
            && nesting_depth(&trial) <= max_depth
        {
            spans = trial;
        }
    }
    spans
}

/// Deterministic pseudo-random step scorer: a pure function of
/// (prefix, word), so beam search and exhaustive replay agree exactly.
struct TableModel {
    seed: u64,
}

impl StepScorer for TableModel {
    type State = Vec<TagSymbol>;
    fn start(&self) -> Vec<TagSymbol> {
        Vec::new()
    }
    fn distribution(&self, state: &Vec<TagSymbol>, word: usize) -> [f64; 4] {
        let mut key = self.seed ^ (word as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for s in state {
            key = key.wrapping_mul(0x100_0000_1B3).wrapping_add(s.index() as u64 + 1);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut d = [0.0; 4];
        let mut total = 0.0;
        for v in d.iter_mut() {
            *v = rng.random_range(-1.0..1.0f64).exp();
            total += *v;
        }
        for v in d.iter_mut() {
            *v /= total;
        }
        d
    }
    fn advance(&self, state: &Vec<TagSymbol>, symbol: TagSymbol) -> Vec<TagSymbol> {
        let mut s = state.clone();
        s.push(symbol);
        s
    }
}

#[test]
fn criterion_2_tag_grammar_round_trip() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC2);
    for _ in 0..1000 {
        let m = rng.random_range(1..=12);
        let spans = random_laminar(&mut rng, m, 4);
        let tags = encode_mentions(&spans, m, 8).expect("laminar sets encode");
        assert!(validate(&tags, m, 8).is_ok(), "criterion 2 FAIL: encode output invalid");
        assert_eq!(decode_tags(&tags).unwrap(), spans, "criterion 2 FAIL: round trip");
    }
    // Beam-decoded sequences always validate.
    for round in 0..200 {
        let m = rng.random_range(1..=9);
        let beam = [1, 2, 4][round % 3];
        let scorer = TableModel { seed: rng.random() };
        let decoded = beam_decode(&scorer, m, beam, 8);
        assert!(
            validate(&decoded.tags, m, 8).is_ok(),
            "criterion 2 FAIL: beam output invalid"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "criterion 2 FAIL: took {elapsed:?}");
    println!("criterion 2 (tag-grammar round trip): PASS — 1000 round trips, 200 valid decodes in {elapsed:?}");
}

// ── Criterion 3: beam oracle ─────────────────────────────────────────

fn all_valid_sequences(m: usize, depth_cap: usize) -> Vec<TagSequence> {
    let all_spans: Vec<MentionSpan> = (0..m)
        .flat_map(|i| (i..m).map(move |j| MentionSpan::new(i, j)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << all_spans.len()) {
        let spans: BTreeSet<MentionSpan> = all_spans
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, s)| *s)
            .collect();
        if !is_laminar(&spans) || nesting_depth(&spans) > depth_cap {
            continue;
        }
        out.push(encode_mentions(&spans, m, depth_cap).unwrap());
    }
    out
}

fn replay_score<S: StepScorer>(scorer: &S, tags: &TagSequence) -> f64 {
    let mut state = scorer.start();
    let mut score = 0.0;
    for (&sym, &word) in tags.symbols().iter().zip(tags.alignment()) {
        let d = scorer.distribution(&state, word);
        score += d[sym.index()].ln();
        state = scorer.advance(&state, sym);
    }
    score
}

#[test]
fn criterion_3_beam_oracle() {
    let start = std::time::Instant::now();
    for seed in 0..100u64 {
        let m = (seed % 4 + 1) as usize;
        let scorer = TableModel { seed: seed.wrapping_mul(0x51AB) };
        let decoded = beam_decode(&scorer, m, 64, 2);
        let (best_score, best_seq) = all_valid_sequences(m, 2)
            .into_iter()
            .map(|seq| (replay_score(&scorer, &seq), seq))
            .max_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then_with(|| b.1.symbols().cmp(a.1.symbols()))
            })
            .unwrap();
        assert_eq!(
            decoded.tags, best_seq,
            "criterion 3 FAIL: seed {seed} beam {} (score {}) vs oracle {} (score {})",
            decoded.tags, decoded.score, best_seq, best_score
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion 3 FAIL: took {elapsed:?}");
    println!("criterion 3 (beam oracle): PASS — 100/100 exhaustive-argmax matches in {elapsed:?}");
}

// ── Criterion 4: loss-mode identities ────────────────────────────────

#[test]
fn criterion_4_loss_mode_identities() {
    use mentions::autodiff::nn::Params;
    use mentions::autodiff::{Tape, Tensor};

    let mut rng = ChaCha8Rng::seed_from_u64(4);

    // Mode equivalences within 1e-12 on random instances.
    for _ in 0..50 {
        let n = rng.random_range(1..=10);
        let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let labels: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0.0..1.0) < 0.5))
            .collect();
        let value = |mode: LossMode| {
            let mut tape = Tape::new();
            let nodes: Vec<_> = probs.iter().map(|&p| tape.leaf(Tensor::scalar(p))).collect();
            let loss = span_loss(&mut tape, &nodes, &labels, mode);
            tape.value(loss).item()
        };
        let plain = value(LossMode::Plain);
        assert!((value(LossMode::Weighted { w: 1.0 }) - plain).abs() < 1e-12);
        assert!((value(LossMode::Soft { rho: 0.0 }) - plain).abs() < 1e-12);

        let len = rng.random_range(1..=8);
        let dists: Vec<Vec<f64>> = (0..len)
            .map(|_| {
                let mut v: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..2.0)).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                v
            })
            .collect();
        let gold: Vec<TagSymbol> = (0..len)
            .map(|_| TagSymbol::from_index(rng.random_range(0..4)))
            .collect();
        let tag_value = |mode: LossMode| {
            let mut tape = Tape::new();
            let nodes: Vec<_> = dists
                .iter()
                .map(|d| tape.leaf(Tensor::vector(d.clone())))
                .collect();
            let loss = tagger_loss(&mut tape, &nodes, &gold, mode);
            tape.value(loss).item()
        };
        let plain = tag_value(LossMode::Plain);
        assert!((tag_value(LossMode::Weighted { w: 1.0 }) - plain).abs() < 1e-12);
        assert!((tag_value(LossMode::Soft { rho: 0.0 }) - plain).abs() < 1e-12);
    }

    // Soft target vector at the paper's operating point.
    assert_eq!(soft_tagger_targets(0.1), [0.1, 0.1, 0.1, 0.7]);

    // Per-negative gradient scaling by exactly w (same float up to
    // multiplication-order rounding).
    let w = 0.01;
    let labels = [1.0, 0.0, 0.0, 1.0, 0.0];
    let mut params = Params::new();
    params.insert(
        "logits",
        Tensor::vector((0..5).map(|_| rng.random_range(-1.0..1.0)).collect()),
    );
    let grad_for = |mode: LossMode| {
        let mut tape = Tape::new();
        let logits = tape.param(&params, "logits");
        let probs: Vec<_> = (0..5)
            .map(|i| {
                let logit = tape.pick(logits, i);
                tape.sigmoid(logit)
            })
            .collect();
        let loss = span_loss(&mut tape, &probs, &labels, mode);
        tape.backward(loss).into_param_grads(&tape, &params)["logits"].clone()
    };
    let plain = grad_for(LossMode::Plain);
    let weighted = grad_for(LossMode::Weighted { w });
    for i in 0..5 {
        if labels[i] == 0.0 {
            let expected = w * plain.data()[i];
            assert!(
                (weighted.data()[i] - expected).abs() <= 1e-14 * expected.abs().max(1e-300),
                "criterion 4 FAIL: negative {i} gradient {} vs w·plain {}",
                weighted.data()[i],
                expected
            );
        } else {
            assert_eq!(weighted.data()[i].to_bits(), plain.data()[i].to_bits());
        }
    }

    // The soft-negative BCE term is minimised at p = rho: golden-section
    // search to 1e-6.
    let rho = 0.1;
    let term = |p: f64| -(rho * p.ln() + (1.0 - rho) * (1.0 - p).ln());
    let (mut a, mut b) = (1e-9, 1.0 - 1e-9);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-9 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if term(c) < term(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let argmin = 0.5 * (a + b);
    assert!(
        (argmin - rho).abs() < 1e-6,
        "criterion 4 FAIL: soft-negative term minimised at {argmin}, expected {rho}"
    );

    println!("criterion 4 (loss-mode identities): PASS — w=1 and rho=0 identities < 1e-12, exact w-scaling, argmin at rho ± 1e-6");
}

// ── Criterion 5: metric oracles ──────────────────────────────────────

fn muc_oracle(gold: &Clustering<u32>, pred: &Clustering<u32>) -> Prf {
    fn side(keyed: &Clustering<u32>, other: &Clustering<u32>) -> (f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        for cluster in keyed.clusters() {
            let ms: Vec<u32> = cluster.iter().copied().collect();
            let mut comp: Vec<usize> = (0..ms.len()).collect();
            fn find(c: &mut Vec<usize>, i: usize) -> usize {
                if c[i] != i {
                    let r = find(c, c[i]);
                    c[i] = r;
                }
                c[i]
            }
            for i in 0..ms.len() {
                for j in i + 1..ms.len() {
                    if other
                        .clusters()
                        .iter()
                        .any(|c| c.contains(&ms[i]) && c.contains(&ms[j]))
                    {
                        let (a, b) = (find(&mut comp, i), find(&mut comp, j));
                        comp[a] = b;
                    }
                }
            }
            let components: BTreeSet<usize> = (0..ms.len()).map(|i| find(&mut comp, i)).collect();
            num += (ms.len() - components.len()) as f64;
            den += (ms.len() - 1) as f64;
        }
        (num, den)
    }
    let (rn, rd) = side(gold, pred);
    let (pn, pd) = side(pred, gold);
    Prf::new(
        if rd > 0.0 { rn / rd } else { 0.0 },
        if pd > 0.0 { pn / pd } else { 0.0 },
    )
}

fn b_cubed_oracle(gold: &Clustering<u32>, pred: &Clustering<u32>) -> Prf {
    fn side(keyed: &Clustering<u32>, other: &Clustering<u32>) -> (f64, f64) {
        let mentions: Vec<u32> = keyed.mentions().into_iter().collect();
        let mut num = 0.0;
        for &m in &mentions {
            let same: Vec<u32> = mentions
                .iter()
                .copied()
                .filter(|&n| keyed.clusters().iter().any(|c| c.contains(&m) && c.contains(&n)))
                .collect();
            let both = same
                .iter()
                .filter(|&&n| other.clusters().iter().any(|c| c.contains(&m) && c.contains(&n)))
                .count();
            num += both as f64 / same.len() as f64;
        }
        (num, mentions.len() as f64)
    }
    let (rn, rd) = side(gold, pred);
    let (pn, pd) = side(pred, gold);
    Prf::new(
        if rd > 0.0 { rn / rd } else { 0.0 },
        if pd > 0.0 { pn / pd } else { 0.0 },
    )
}

fn phi4(a: &BTreeSet<u32>, b: &BTreeSet<u32>) -> f64 {
    2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64
}

fn ceaf_oracle(gold: &Clustering<u32>, pred: &Clustering<u32>) -> Prf {
    fn assignments(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn rec(n: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if prefix.len() == k {
                out.push(prefix.clone());
                return;
            }
            for j in 0..n {
                if !prefix.contains(&j) {
                    prefix.push(j);
                    rec(n, k, prefix, out);
                    prefix.pop();
                }
            }
        }
        let mut out = Vec::new();
        rec(n, k, &mut Vec::new(), &mut out);
        out
    }
    let (small, large, gold_small) = if gold.len() <= pred.len() {
        (gold, pred, true)
    } else {
        (pred, gold, false)
    };
    let mut best = 0.0f64;
    for assignment in assignments(large.len(), small.len()) {
        let total: f64 = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                if gold_small {
                    phi4(&small.clusters()[i], &large.clusters()[j])
                } else {
                    phi4(&large.clusters()[j], &small.clusters()[i])
                }
            })
            .sum();
        best = best.max(total);
    }
    Prf::new(
        if gold.is_empty() { 0.0 } else { best / gold.len() as f64 },
        if pred.is_empty() { 0.0 } else { best / pred.len() as f64 },
    )
}

#[test]
fn criterion_5_metric_oracles() {
    let start = std::time::Instant::now();

    // The worked example first: gold {{a,b,c}}, pred {{a,b},{c}}.
    let gold = Clustering::new(vec![[0u32, 1, 2].into()]).unwrap();
    let pred = Clustering::new(vec![[0u32, 1].into(), [2u32].into()]).unwrap();
    let m = muc(&gold, &pred);
    assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12, "criterion 5 FAIL: MUC F {}", m.f1);
    let b = b_cubed(&gold, &pred);
    assert!((b.f1 - 5.0 / 7.0).abs() < 1e-12, "criterion 5 FAIL: B³ F {}", b.f1);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5EAF);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.random_range(1..=8usize);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<u32> {
            (0..n as u32)
                .filter(|_| rng.random_range(0.0..1.0) < 0.8)
                .collect()
        };
        let cluster = |rng: &mut ChaCha8Rng, ms: &[u32]| -> Clustering<u32> {
            let mut clusters: Vec<BTreeSet<u32>> = Vec::new();
            for &m in ms {
                let slot = rng.random_range(0..4usize);
                if slot < clusters.len() {
                    clusters[slot].insert(m);
                } else {
                    clusters.push([m].into());
                }
            }
            Clustering::new(clusters).unwrap()
        };
        let gold_ms = sample(&mut rng);
        let pred_ms = sample(&mut rng);
        if gold_ms.is_empty() || pred_ms.is_empty() {
            continue;
        }
        let gold = cluster(&mut rng, &gold_ms);
        let pred = cluster(&mut rng, &pred_ms);
        if gold.len() > 5 || pred.len() > 5 {
            continue;
        }
        for (fast, slow, name) in [
            (muc(&gold, &pred), muc_oracle(&gold, &pred), "MUC"),
            (b_cubed(&gold, &pred), b_cubed_oracle(&gold, &pred), "B³"),
            (ceaf_phi4(&gold, &pred), ceaf_oracle(&gold, &pred), "CEAF-φ4"),
        ] {
            assert!(
                (fast.recall - slow.recall).abs() < 1e-9
                    && (fast.precision - slow.precision).abs() < 1e-9,
                "criterion 5 FAIL: {name} {fast:?} vs oracle {slow:?}"
            );
        }
        checked += 1;
    }
    // Sanity: the average is the plain mean.
    let p = |f1: f64| Prf { recall: f1, precision: f1, f1 };
    assert!((conll_average(&p(0.5), &p(0.7), &p(0.9)) - 0.7).abs() < 1e-12);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "criterion 5 FAIL: took {elapsed:?}");
    println!("criterion 5 (metric oracles): PASS — worked example exact, 200 random clusterings match in {elapsed:?}");
}

// ── Criteria 6 and 7: directional synthetic reproductions ────────────

fn experiment_gen_config(num_docs: usize) -> GenConfig {
    GenConfig {
        num_docs,
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
    }
}

/// 200 partially annotated training documents (drop_singletons + p = 0.3)
/// and 50 fully annotated evaluation documents.
fn experiment_corpora() -> (Corpus, Corpus) {
    let train_full = synth_generate(&experiment_gen_config(200), 100).unwrap();
    let eval_full = synth_generate(&experiment_gen_config(50), 200).unwrap();
    let policy = PartialPolicy {
        drop_singletons: true,
        drop_rate: 0.3,
        collapse_broken_chains: false,
        seed: 7,
    };
    let (train_partial, _) = partialize(&train_full, &policy);
    (train_partial, eval_full)
}

fn experiment_config(model: ModelKind, mode: LossMode, seed: u64, epochs: usize) -> RunConfig {
    let mut cfg = RunConfig::in_memory(model, seed);
    cfg.loss.mode = mode;
    cfg.d_emb = 24;
    cfg.d_hidden = 24;
    cfg.lr = 0.005;
    cfg.epochs = epochs;
    cfg
}

const EXPERIMENT_SEEDS: [u64; 3] = [42, 13, 99];
const TAUS: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

/// Train one span model and return (recall at each tau, F1 at 0.5).
fn span_run(train: &Corpus, eval: &Corpus, mode: LossMode, seed: u64) -> ([f64; 7], f64) {
    let cfg = experiment_config(ModelKind::Span, mode, seed, 80);
    let outcome = train_in_memory(&cfg, train, None).expect("training succeeds");
    let ckpt = &outcome.checkpoint;
    let mut recalls = [0.0; 7];
    let mut f1_at_half = 0.0;
    for (k, &tau) in TAUS.iter().enumerate() {
        let settings = EvalSettings { tau: Some(tau), beam: None };
        let report = evaluate_with(&ckpt.config, &ckpt.vocab, &ckpt.params, eval, &settings)
            .expect("evaluation succeeds");
        recalls[k] = report.mention.recall;
        if tau == 0.5 {
            f1_at_half = report.mention.f1;
        }
    }
    (recalls, f1_at_half)
}

#[test]
fn criterion_6_partial_annotation_directional_span() {
    let start = std::time::Instant::now();
    let (train, eval) = experiment_corpora();

    let mut plain_curve = [0.0; 7];
    let mut soft_curve = [0.0; 7];
    let (mut plain_f1, mut soft_f1) = (0.0, 0.0);
    for &seed in &EXPERIMENT_SEEDS {
        let (pr, pf) = span_run(&train, &eval, LossMode::Plain, seed);
        let (sr, sf) = span_run(&train, &eval, LossMode::Soft { rho: 0.1 }, seed);
        for k in 0..7 {
            plain_curve[k] += pr[k] / 3.0;
            soft_curve[k] += sr[k] / 3.0;
        }
        plain_f1 += pf / 3.0;
        soft_f1 += sf / 3.0;
    }

    let at_half = TAUS.iter().position(|&t| t == 0.5).unwrap();
    assert!(
        soft_curve[at_half] > plain_curve[at_half],
        "criterion 6 FAIL (span): soft recall {} not above plain {} at tau=0.5",
        soft_curve[at_half],
        plain_curve[at_half]
    );
    let dominated = (0..7).filter(|&k| soft_curve[k] >= plain_curve[k]).count();
    assert!(
        dominated >= 6,
        "criterion 6 FAIL (span): soft curve above plain at only {dominated}/7 points\n plain {plain_curve:?}\n soft  {soft_curve:?}"
    );
    assert!(
        soft_f1 >= plain_f1 - 0.02,
        "criterion 6 FAIL (span): soft F1 {soft_f1} drops more than 2 points below plain {plain_f1}"
    );

    println!(
        "criterion 6 (partial annotation, span): PASS — 3-seed recall@0.5 soft {:.3} > plain {:.3}, curve dominance {dominated}/7, F1 {:.3} vs {:.3}, in {:?}",
        soft_curve[at_half], plain_curve[at_half], soft_f1, plain_f1, start.elapsed()
    );
}

#[test]
fn criterion_6_partial_annotation_directional_tagger() {
    let start = std::time::Instant::now();
    let (train, eval) = experiment_corpora();

    let mut plain = (0.0, 0.0); // (recall, f1)
    let mut weighted = (0.0, 0.0);
    for &seed in &EXPERIMENT_SEEDS {
        for (slot, mode) in [
            (&mut plain, LossMode::Plain),
            (&mut weighted, LossMode::Weighted { w: 0.01 }),
        ] {
            let cfg = experiment_config(ModelKind::Tagger, mode, seed, 60);
            let outcome = train_in_memory(&cfg, &train, None).expect("training succeeds");
            let ckpt = &outcome.checkpoint;
            let report = evaluate_with(
                &ckpt.config,
                &ckpt.vocab,
                &ckpt.params,
                &eval,
                &EvalSettings::default(),
            )
            .expect("evaluation succeeds");
            slot.0 += report.mention.recall / 3.0;
            slot.1 += report.mention.f1 / 3.0;
        }
    }

    assert!(
        weighted.0 > plain.0,
        "criterion 6 FAIL (tagger): weighted recall {} not above plain {}",
        weighted.0,
        plain.0
    );
    assert!(
        weighted.1 >= plain.1 - 0.02,
        "criterion 6 FAIL (tagger): weighted F1 {} drops more than 2 points below plain {}",
        weighted.1,
        plain.1
    );
    println!(
        "criterion 6 (partial annotation, tagger): PASS — 3-seed one-best recall weighted {:.3} > plain {:.3}, F1 {:.3} vs {:.3}, in {:?}",
        weighted.0, plain.0, weighted.1, plain.1, start.elapsed()
    );
}

#[test]
fn criterion_7_multitask_smoke_and_decomposition() {
    let start = std::time::Instant::now();
    let (train, eval) = experiment_corpora();

    // Pair-score decomposition on sampled pairs: s - s_c == s_m(k) + s_m(a)
    // exactly, recomposed in graph order.
    {
        use mentions::autodiff::nn::Params;
        use mentions::autodiff::{Tape, Tensor};
        use mentions::coref::CorefHead;
        let mut rng = ChaCha8Rng::seed_from_u64(0x707);
        let mut params = Params::new();
        CorefHead::init_params(&mut params, 3, 4, 2, &mut rng);
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        for _ in 0..50 {
            let k = tape.leaf(Tensor::vector((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()));
            let a = tape.leaf(Tensor::vector((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()));
            let smk = tape.leaf(Tensor::scalar(rng.random_range(-2.0..2.0)));
            let sma = tape.leaf(Tensor::scalar(rng.random_range(-2.0..2.0)));
            let sc = head.s_c(&mut tape, k, a, rng.random_range(1..40));
            let s = head.pair_score(&mut tape, sc, smk, sma);
            let recomposed =
                tape.value(sc).item() + (tape.value(smk).item() + tape.value(sma).item());
            assert_eq!(
                tape.value(s).item().to_bits(),
                recomposed.to_bits(),
                "criterion 7 FAIL: pair score does not decompose additively"
            );
        }
    }

    // Multitask training completes for both modes; the logged combined
    // loss equals the combiner applied to the logged parts; the modified
    // loss gives at least the plain CoNLL average (3-seed mean).
    let run = |mode: LossMode| -> f64 {
        let mut avg = 0.0;
        for &seed in &EXPERIMENT_SEEDS {
            let mut cfg = experiment_config(ModelKind::Span, mode, seed, 80);
            cfg.multitask = true;
            let outcome = train_in_memory(&cfg, &train, None).expect("multitask training completes");

            // Bookkeeping identity from the metric log.
            let mut checked_rows = 0;
            for line in outcome.log.lines().skip(1) {
                if line.starts_with('#') {
                    continue;
                }
                let cols: Vec<&str> = line.split('\t').collect();
                let (det, coref, s_md, s_cr, combined): (f64, f64, f64, f64, f64) = (
                    cols[4].parse().unwrap(),
                    cols[5].parse().unwrap(),
                    cols[6].parse().unwrap(),
                    cols[7].parse().unwrap(),
                    cols[8].parse().unwrap(),
                );
                assert_eq!(
                    combined.to_bits(),
                    multitask_combine_value(det, coref, s_md, s_cr).to_bits(),
                    "criterion 7 FAIL: logged combined loss does not equal the combiner of its logged parts"
                );
                checked_rows += 1;
            }
            assert!(checked_rows > 0);

            let ckpt = &outcome.checkpoint;
            let report = evaluate_with(
                &ckpt.config,
                &ckpt.vocab,
                &ckpt.params,
                &eval,
                &EvalSettings::default(),
            )
            .expect("evaluation succeeds");
            avg += report.coref.expect("coref metrics present").conll_avg / 3.0;
        }
        avg
    };

    let plain_conll = run(LossMode::Plain);
    let weighted_conll = run(LossMode::Weighted { w: 0.3 });
    assert!(
        weighted_conll >= plain_conll,
        "criterion 7 FAIL: modified-loss CoNLL {weighted_conll} below plain {plain_conll}"
    );
    println!(
        "criterion 7 (multitask smoke + decomposition): PASS — combined-loss identity exact, 3-seed CoNLL avg weighted(0.3) {:.3} >= plain {:.3}, in {:?}",
        weighted_conll, plain_conll, start.elapsed()
    );
}

// ── Criterion 8: overfit sanity ──────────────────────────────────────

#[test]
fn criterion_8_overfit_sanity() {
    let start = std::time::Instant::now();
    let tiny = synth_generate(
        &GenConfig { num_docs: 3, ..GenConfig::default() },
        5,
    )
    .unwrap();

    let mut span_cfg = RunConfig::in_memory(ModelKind::Span, 3);
    span_cfg.d_emb = 16;
    span_cfg.d_hidden = 32;
    span_cfg.lr = 0.01;
    span_cfg.epochs = 200;
    span_cfg.stop_at_train_f1 = Some(0.99);
    let span = train_in_memory(&span_cfg, &tiny, None).unwrap();
    assert!(
        span.final_train.mention.f1 >= 0.99,
        "criterion 8 FAIL: span training F1 {} after {} epochs",
        span.final_train.mention.f1,
        span.epochs_run
    );

    let mut tagger_cfg = RunConfig::in_memory(ModelKind::Tagger, 3);
    tagger_cfg.d_emb = 16;
    tagger_cfg.d_hidden = 32;
    tagger_cfg.lr = 0.005;
    tagger_cfg.epochs = 200;
    tagger_cfg.stop_at_train_f1 = Some(0.99);
    let tagger = train_in_memory(&tagger_cfg, &tiny, None).unwrap();
    assert!(
        tagger.final_train.mention.f1 >= 0.99,
        "criterion 8 FAIL: tagger training F1 {} after {} epochs",
        tagger.final_train.mention.f1,
        tagger.epochs_run
    );

    println!(
        "criterion 8 (overfit sanity): PASS — span F1 {:.3} in {} epochs, tagger F1 {:.3} in {} epochs, in {:?}",
        span.final_train.mention.f1,
        span.epochs_run,
        tagger.final_train.mention.f1,
        tagger.epochs_run,
        start.elapsed()
    );
}

// ── Criterion 9: determinism ─────────────────────────────────────────

#[test]
fn criterion_9_determinism() {
    let start = std::time::Instant::now();
    let corpus = synth_generate(&GenConfig { num_docs: 5, ..GenConfig::default() }, 77).unwrap();
    let (partial, _) = partialize(
        &corpus,
        &PartialPolicy { drop_singletons: true, drop_rate: 0.2, collapse_broken_chains: false, seed: 3 },
    );

    for model in [ModelKind::Span, ModelKind::Tagger] {
        let mut cfg = RunConfig::in_memory(model, 11);
        cfg.d_emb = 8;
        cfg.d_hidden = 8;
        cfg.epochs = 3;
        cfg.multitask = true;
        let a = train_in_memory(&cfg, &partial, Some(&corpus)).unwrap();
        let b = train_in_memory(&cfg, &partial, Some(&corpus)).unwrap();
        assert_eq!(
            a.checkpoint.to_json(),
            b.checkpoint.to_json(),
            "criterion 9 FAIL: {model} checkpoints differ between identical runs"
        );
        assert_eq!(a.log, b.log, "criterion 9 FAIL: {model} metric logs differ");

        // Evaluating the same checkpoint twice agrees bitwise.
        let r1 = evaluate_with(
            &a.checkpoint.config,
            &a.checkpoint.vocab,
            &a.checkpoint.params,
            &corpus,
            &EvalSettings::default(),
        )
        .unwrap();
        let r2 = evaluate_with(
            &a.checkpoint.config,
            &a.checkpoint.vocab,
            &a.checkpoint.params,
            &corpus,
            &EvalSettings::default(),
        )
        .unwrap();
        assert_eq!(r1.mention.f1.to_bits(), r2.mention.f1.to_bits());
    }
    println!("criterion 9 (determinism): PASS — bit-identical checkpoints, logs and evaluations, in {:?}", start.elapsed());
}

// ── Supporting check: decode threshold semantics on real outputs ─────

#[test]
fn decode_threshold_monotonicity() {
    let scored: Vec<(MentionSpan, f64)> = (0..20)
        .map(|i| (MentionSpan::new(i, i), (i as f64 + 0.5) / 20.0))
        .collect();
    let mut last = usize::MAX;
    for tau in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let n = decode_mentions(&scored, tau).len();
        assert!(n <= last);
        last = n;
    }
    // Also exercise detection PRF on sets, the aggregation the reports use.
    let a: BTreeSet<u32> = [1, 2, 3].into();
    let b: BTreeSet<u32> = [2, 3, 4].into();
    let prf = mention_prf(&a, &b);
    assert!((prf.f1 - 2.0 / 3.0).abs() < 1e-12);
}
