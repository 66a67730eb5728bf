//! Pairwise coreference head over detected mentions.
//!
//! Each mention pair is scored `s(m_k, m_a) = s_c(m_k, m_a) + s_m(m_k) +
//! s_m(m_a)`: a learned pairwise compatibility plus per-mention detector
//! confidences scaled by a learned scalar `v`. The tagger contributes
//! `v · P(open at i) · P(close at j)` from its predicted-pass
//! distributions, the span model `v · P(m_ij)`. Antecedent sets are the
//! preceding candidates (capped at the K nearest) plus a dummy with fixed
//! score 0; training marginalises over all gold antecedents, decoding
//! links each candidate to its argmax antecedent when that score beats
//! the dummy.

use std::collections::BTreeMap;

use rand::Rng;

use crate::autodiff::nn::{Linear, Params};
use crate::autodiff::{NodeId, Tape};
use crate::spans::UnitSpan;

/// Antecedent-distance buckets in candidate-index units:
/// 1, 2, 3, 4, 5-7, 8-15, 16-31, 32+.
pub const DISTANCE_BUCKETS: usize = 8;

pub fn distance_bucket(delta: usize) -> usize {
    match delta {
        0 => panic!("antecedent distance must be at least 1"),
        1 => 0,
        2 => 1,
        3 => 2,
        4 => 3,
        5..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        _ => 7,
    }
}

/// Default cap on the number of antecedents considered per candidate.
pub const DEFAULT_MAX_ANTECEDENTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Test,
}

/// Candidate mention spans for the resolver: at train time the union of
/// detected and gold spans, at test time the detected spans only. The
/// result is deduplicated and in document order.
pub fn select_candidates(
    predicted: &[UnitSpan],
    gold: &[UnitSpan],
    phase: Phase,
) -> Vec<UnitSpan> {
    let mut set: Vec<UnitSpan> = predicted.to_vec();
    if phase == Phase::Train {
        set.extend_from_slice(gold);
    }
    set.sort();
    set.dedup();
    set
}

/// Registered coreference layers on a tape.
pub struct CorefHead {
    /// Scale on the detector confidence.
    v: NodeId,
    sc_hidden: Linear,
    sc_v: NodeId,
    sc_b: NodeId,
    dist_emb: NodeId,
}

impl CorefHead {
    pub fn init_params(
        params: &mut Params,
        d_repr: usize,
        d_hidden: usize,
        d_dist: usize,
        rng: &mut impl Rng,
    ) {
        params.insert_uniform("coref.v", &[1], rng);
        Linear::init_relu(params, "coref.sc_hidden", d_hidden, 3 * d_repr + d_dist, rng);
        params.insert_uniform("coref.sc_v", &[d_hidden], rng);
        params.insert_uniform("coref.sc_b", &[1], rng);
        params.insert_uniform("coref.dist_emb", &[DISTANCE_BUCKETS, d_dist], rng);
    }

    pub fn register(tape: &mut Tape, params: &Params) -> Self {
        CorefHead {
            v: tape.param(params, "coref.v"),
            sc_hidden: Linear::register(tape, params, "coref.sc_hidden"),
            sc_v: tape.param(params, "coref.sc_v"),
            sc_b: tape.param(params, "coref.sc_b"),
            dist_emb: tape.param(params, "coref.dist_emb"),
        }
    }

    /// Tagger-path mention score: v · P(open at start) · P(close at end).
    pub fn s_m_tagger(&self, tape: &mut Tape, p_open: NodeId, p_close: NodeId) -> NodeId {
        let vp = tape.mul(self.v, p_open);
        tape.mul(vp, p_close)
    }

    /// Span-path mention score: v · P(m_ij).
    pub fn s_m_span(&self, tape: &mut Tape, prob: NodeId) -> NodeId {
        tape.mul(self.v, prob)
    }

    /// Pairwise compatibility over `[m_k, m_a, m_k ⊙ m_a, distance]`.
    /// `delta` is the candidate-index distance k - a, at least 1.
    pub fn s_c(&self, tape: &mut Tape, repr_k: NodeId, repr_a: NodeId, delta: usize) -> NodeId {
        let product = tape.mul(repr_k, repr_a);
        let dist = tape.row(self.dist_emb, distance_bucket(delta));
        let features = tape.concat(&[repr_k, repr_a, product, dist]);
        let pre = self.sc_hidden.apply(tape, features);
        let hidden = tape.relu(pre);
        let dot = tape.dot(self.sc_v, hidden);
        tape.add(dot, self.sc_b)
    }

    /// Full pair score; the mention scores are summed first so that
    /// s = s_c + (s_m_k + s_m_a) decomposes additively.
    pub fn pair_score(
        &self,
        tape: &mut Tape,
        s_c: NodeId,
        s_m_k: NodeId,
        s_m_a: NodeId,
    ) -> NodeId {
        let mentions = tape.add(s_m_k, s_m_a);
        tape.add(s_c, mentions)
    }
}

/// Mention representation for the tagger path, built the same way the
/// span model builds m_ij but with coref-owned weights:
/// relu(W·[h_i, h_j, mean(x_i..x_j)] + b).
pub fn mention_repr(
    tape: &mut Tape,
    layer: &Linear,
    enc: &crate::autodiff::nn::EncodedSentence,
    span: crate::tags::MentionSpan,
) -> NodeId {
    let pooled = tape.mean(&enc.embeddings[span.start..=span.end]);
    let features = tape.concat(&[enc.states[span.start], enc.states[span.end], pooled]);
    let pre = layer.apply(tape, features);
    tape.relu(pre)
}

/// One candidate ready for antecedent ranking.
pub struct ScoredCandidate {
    pub key: UnitSpan,
    /// Gold cluster id, if this span is a gold mention of some chain.
    pub gold_cluster: Option<usize>,
    /// Span representation m_ij.
    pub repr: NodeId,
    /// Detector confidence score (already scaled by v).
    pub s_m: NodeId,
}

/// Pairwise scores for every candidate against its antecedent window.
pub struct AntecedentTable {
    /// `scores[k][x]` scores candidate k against candidate
    /// `window_start[k] + x`.
    pub scores: Vec<Vec<NodeId>>,
    pub window_start: Vec<usize>,
}

/// Score every candidate against its preceding candidates (capped at the
/// `max_antecedents` nearest). Candidates must be in document order.
pub fn score_antecedents(
    tape: &mut Tape,
    head: &CorefHead,
    candidates: &[ScoredCandidate],
    max_antecedents: usize,
) -> AntecedentTable {
    let mut scores = Vec::with_capacity(candidates.len());
    let mut window_start = Vec::with_capacity(candidates.len());
    for k in 0..candidates.len() {
        let start = k.saturating_sub(max_antecedents);
        window_start.push(start);
        let mut row = Vec::with_capacity(k - start);
        for a in start..k {
            let sc = head.s_c(tape, candidates[k].repr, candidates[a].repr, k - a);
            row.push(head.pair_score(tape, sc, candidates[k].s_m, candidates[a].s_m));
        }
        scores.push(row);
    }
    AntecedentTable { scores, window_start }
}

/// Marginal antecedent log-likelihood, summed over candidates: for each
/// candidate the negative log of the total softmax mass on its gold
/// antecedents, where the dummy antecedent scores a fixed 0 and is the
/// gold when no true antecedent is in the window.
pub fn antecedent_loss(
    tape: &mut Tape,
    candidates: &[ScoredCandidate],
    table: &AntecedentTable,
) -> NodeId {
    assert_eq!(candidates.len(), table.scores.len());
    let mut per_candidate = Vec::with_capacity(candidates.len());
    for (k, row) in table.scores.iter().enumerate() {
        let start = table.window_start[k];
        let mut entries: Vec<NodeId> = row.clone();
        let dummy = tape.scalar(0.0);
        entries.push(dummy);
        let logits = tape.concat(&entries);
        let dist = tape.softmax(logits);

        let gold_positions: Vec<usize> = match candidates[k].gold_cluster {
            None => vec![row.len()],
            Some(cluster) => {
                let hits: Vec<usize> = (start..k)
                    .filter(|&a| candidates[a].gold_cluster == Some(cluster))
                    .map(|a| a - start)
                    .collect();
                if hits.is_empty() {
                    vec![row.len()]
                } else {
                    hits
                }
            }
        };
        let picked: Vec<NodeId> = gold_positions.iter().map(|&i| tape.pick(dist, i)).collect();
        let mass = tape.add_n(&picked);
        let log_mass = tape.log(mass);
        per_candidate.push(tape.scale(log_mass, -1.0));
    }
    if per_candidate.is_empty() {
        return tape.scalar(0.0);
    }
    tape.add_n(&per_candidate)
}

/// Link each candidate to its best-scoring antecedent when that beats the
/// dummy score of 0 (ties broken towards the earlier candidate), then
/// take connected components. Clusters of size 1 are dropped from the
/// output, matching chain-only reference annotation.
pub fn cluster_decode(score_rows: &[Vec<f64>], window_starts: &[usize]) -> Vec<Vec<usize>> {
    let n = score_rows.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for (k, row) in score_rows.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (x, &s) in row.iter().enumerate() {
            let a = window_starts[k] + x;
            let better = match best {
                None => true,
                // Strict improvement only: the earlier candidate wins ties.
                Some((_, bs)) => s > bs,
            };
            if better {
                best = Some((a, s));
            }
        }
        if let Some((a, s)) = best {
            if s > 0.0 {
                let (ra, rk) = (find(&mut parent, a), find(&mut parent, k));
                if ra != rk {
                    parent[rk] = ra;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().filter(|g| g.len() >= 2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::check::{check_gradients, DEFAULT_EPSILON};
    use crate::autodiff::Tensor;
    use crate::tags::MentionSpan;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn us(unit: usize, start: usize, end: usize) -> UnitSpan {
        UnitSpan { unit, span: MentionSpan::new(start, end) }
    }

    #[test]
    fn candidate_selection_rules() {
        let predicted = vec![us(0, 0, 1)];
        let gold = vec![us(0, 2, 3)];

        let train = select_candidates(&predicted, &gold, Phase::Train);
        assert_eq!(train, vec![us(0, 0, 1), us(0, 2, 3)]);

        // Union is idempotent when predictions equal gold.
        let same = select_candidates(&gold, &gold, Phase::Train);
        assert_eq!(same, gold);

        let test = select_candidates(&predicted, &gold, Phase::Test);
        assert_eq!(test, predicted);

        let empty = select_candidates(&[], &gold, Phase::Test);
        assert!(empty.is_empty());
    }

    fn head_params(seed: u64, d_repr: usize) -> Params {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::new();
        CorefHead::init_params(&mut params, d_repr, 4, 3, &mut rng);
        params
    }

    #[test]
    fn mention_scores_scale_with_v() {
        let mut params = head_params(1, 2);
        params.insert("coref.v", Tensor::scalar(2.0));
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        let one = tape.scalar(1.0);
        let s = head.s_m_tagger(&mut tape, one, one);
        assert_eq!(tape.value(s).item(), 2.0);

        let mut params = head_params(1, 2);
        params.insert("coref.v", Tensor::scalar(4.0));
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        let half = tape.scalar(0.5);
        let s = head.s_m_span(&mut tape, half);
        assert_eq!(tape.value(s).item(), 2.0);

        // v = 0 zeroes every mention score, reducing s to s_c.
        let mut params = head_params(1, 2);
        params.insert("coref.v", Tensor::scalar(0.0));
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        let p = tape.scalar(0.9);
        let s = head.s_m_span(&mut tape, p);
        assert_eq!(tape.value(s).item(), 0.0);
    }

    #[test]
    fn zero_weights_give_zero_pair_compatibility() {
        let mut params = head_params(2, 3);
        for name in ["coref.sc_hidden.w", "coref.sc_hidden.b", "coref.sc_v", "coref.sc_b", "coref.dist_emb"] {
            let shape = params.get(name).unwrap().shape().to_vec();
            params.insert(name, Tensor::zeros(&shape));
        }
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        let a = tape.leaf(Tensor::vector(vec![1.0, -2.0, 0.5]));
        let b = tape.leaf(Tensor::vector(vec![0.3, 0.7, -1.1]));
        let sc = head.s_c(&mut tape, a, b, 3);
        assert_eq!(tape.value(sc).item(), 0.0);
    }

    #[test]
    fn s_c_hand_evaluation_2dim() {
        // d_repr=2, hidden=1, d_dist=1, zero distance embedding, weights
        // chosen so only the elementwise-product pathway is active:
        // s_c = 1·relu(w·[k, a, k⊙a, 0] + 0) with w = [0,0,0,0,1,1,0].
        let mut params = Params::new();
        params.insert(
            "coref.sc_hidden.w",
            Tensor::from_vec(&[1, 7], vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0]),
        );
        params.insert("coref.sc_hidden.b", Tensor::zeros(&[1]));
        params.insert("coref.sc_v", Tensor::vector(vec![1.0]));
        params.insert("coref.sc_b", Tensor::zeros(&[1]));
        params.insert("coref.dist_emb", Tensor::zeros(&[DISTANCE_BUCKETS, 1]));
        params.insert("coref.v", Tensor::scalar(0.0));

        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        let k = tape.leaf(Tensor::vector(vec![2.0, 3.0]));
        let a = tape.leaf(Tensor::vector(vec![0.5, -1.0]));
        let sc = head.s_c(&mut tape, k, a, 1);
        // k⊙a = (1.0, -3.0); sum = -2 → relu → 0.
        assert_eq!(tape.value(sc).item(), 0.0);

        let a2 = tape.leaf(Tensor::vector(vec![0.5, 1.0]));
        let sc2 = head.s_c(&mut tape, k, a2, 1);
        // k⊙a = (1.0, 3.0); sum = 4 → relu → 4.
        assert_eq!(tape.value(sc2).item(), 4.0);
    }

    fn build_candidates(
        tape: &mut Tape,
        reprs: &[Vec<f64>],
        s_m: &[f64],
        gold: &[Option<usize>],
    ) -> Vec<ScoredCandidate> {
        reprs
            .iter()
            .zip(s_m)
            .zip(gold)
            .enumerate()
            .map(|(i, ((r, &m), &g))| ScoredCandidate {
                key: us(0, i, i),
                gold_cluster: g,
                repr: tape.leaf(Tensor::vector(r.clone())),
                s_m: tape.leaf(Tensor::scalar(m)),
            })
            .collect()
    }

    #[test]
    fn single_candidate_loss_is_zero() {
        let params = head_params(3, 2);
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        let cands = build_candidates(&mut tape, &[vec![0.1, 0.2]], &[0.3], &[Some(0)]);
        let table = score_antecedents(&mut tape, &head, &cands, DEFAULT_MAX_ANTECEDENTS);
        let loss = antecedent_loss(&mut tape, &cands, &table);
        assert_eq!(tape.value(loss).item(), 0.0);
    }

    #[test]
    fn confident_link_drives_loss_to_zero() {
        // Two candidates in one gold cluster; force a huge pair score via
        // the mention scores, so the softmax mass concentrates on the
        // true antecedent.
        let mut params = head_params(4, 2);
        for name in ["coref.sc_hidden.w", "coref.sc_hidden.b", "coref.sc_v", "coref.sc_b", "coref.dist_emb"] {
            let shape = params.get(name).unwrap().shape().to_vec();
            params.insert(name, Tensor::zeros(&shape));
        }
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        let cands = build_candidates(
            &mut tape,
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
            &[20.0, 20.0],
            &[Some(0), Some(0)],
        );
        let table = score_antecedents(&mut tape, &head, &cands, DEFAULT_MAX_ANTECEDENTS);
        let loss = antecedent_loss(&mut tape, &cands, &table);
        // s(2,1) = 0 + 20 + 20 = 40 vs dummy 0; loss ≈ -log σ(40) ≈ 0.
        assert!(tape.value(loss).item() < 1e-12);
    }

    #[test]
    fn three_candidate_hand_computed_marginal() {
        // Zero s_c weights and chosen mention scores make the pair score
        // table explicit: s(k,a) = s_m[k] + s_m[a].
        let mut params = head_params(5, 2);
        for name in ["coref.sc_hidden.w", "coref.sc_hidden.b", "coref.sc_v", "coref.sc_b", "coref.dist_emb"] {
            let shape = params.get(name).unwrap().shape().to_vec();
            params.insert(name, Tensor::zeros(&shape));
        }
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        let s_m = [0.5, -0.25, 1.0];
        // Clusters: {0, 2}同, 1 alone.
        let cands = build_candidates(
            &mut tape,
            &[vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]],
            &s_m,
            &[Some(0), None, Some(0)],
        );
        let table = score_antecedents(&mut tape, &head, &cands, DEFAULT_MAX_ANTECEDENTS);
        let loss = antecedent_loss(&mut tape, &cands, &table);

        // Candidate 0: only dummy → 0.
        // Candidate 1: gold = dummy; antecedents {0}: scores
        //   [s01 = 0.5-0.25 = 0.25, dummy 0]; -log softmax_dummy.
        // Candidate 2: gold = {0}; scores [s20 = 1.5, s21 = 0.75, 0].
        let softmax = |xs: &[f64], i: usize| {
            let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
            exps[i] / exps.iter().sum::<f64>()
        };
        let expected = -softmax(&[0.25, 0.0], 1).ln() - softmax(&[1.5, 0.75, 0.0], 0).ln();
        assert!((tape.value(loss).item() - expected).abs() < 1e-12);
    }

    #[test]
    fn uniform_scores_have_closed_form_loss() {
        // v = 0 and zero s_c weights → every score 0 → uniform softmax:
        // loss = Σ_k [ln(n_k + 1) - ln |gold_k|].
        let mut params = head_params(6, 2);
        for name in ["coref.sc_hidden.w", "coref.sc_hidden.b", "coref.sc_v", "coref.sc_b", "coref.dist_emb"] {
            let shape = params.get(name).unwrap().shape().to_vec();
            params.insert(name, Tensor::zeros(&shape));
        }
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        let gold = [Some(0), Some(0), Some(0), None];
        let cands = build_candidates(
            &mut tape,
            &[vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]],
            &[0.0; 4],
            &gold,
        );
        let table = score_antecedents(&mut tape, &head, &cands, DEFAULT_MAX_ANTECEDENTS);
        let loss = antecedent_loss(&mut tape, &cands, &table);
        // k=0: 0; k=1: ln(2) - ln(1); k=2: ln(3) - ln(2); k=3: ln(4) - ln(1).
        let expected = (2.0f64).ln() + ((3.0f64).ln() - (2.0f64).ln()) + (4.0f64).ln();
        assert!((tape.value(loss).item() - expected).abs() < 1e-12);
    }

    #[test]
    fn pair_score_decomposes_additively() {
        let params = head_params(7, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let mut tape = Tape::new();
        let head = CorefHead::register(&mut tape, &params);
        for _ in 0..20 {
            let k = tape.leaf(Tensor::vector((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()));
            let a = tape.leaf(Tensor::vector((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()));
            let smk = tape.scalar(rng.random_range(-2.0..2.0));
            let sma = tape.scalar(rng.random_range(-2.0..2.0));
            let sc = head.s_c(&mut tape, k, a, 2);
            let s = head.pair_score(&mut tape, sc, smk, sma);
            let recomposed =
                tape.value(sc).item() + (tape.value(smk).item() + tape.value(sma).item());
            assert_eq!(tape.value(s).item().to_bits(), recomposed.to_bits());
        }
    }

    #[test]
    fn antecedent_loss_gradient_check() {
        // Reprs are rows of the 3-wide distance table, so d_repr = 3.
        let params = head_params(8, 3);
        let loss_for = |p: &Params| -> (f64, Option<(Tape, NodeId)>) {
            let mut tape = Tape::new();
            let head = CorefHead::register(&mut tape, p);
            // Reprs come from parameters so the check covers them too.
            let base = tape.param(p, "coref.dist_emb");
            let r0 = tape.row(base, 0);
            let r1 = tape.row(base, 1);
            let r2 = tape.row(base, 2);
            let prob = tape.scalar(0.7);
            let s_m0 = head.s_m_span(&mut tape, prob);
            let prob1 = tape.scalar(0.4);
            let s_m1 = head.s_m_span(&mut tape, prob1);
            let prob2 = tape.scalar(0.9);
            let s_m2 = head.s_m_span(&mut tape, prob2);
            let cands = vec![
                ScoredCandidate { key: us(0, 0, 0), gold_cluster: Some(0), repr: r0, s_m: s_m0 },
                ScoredCandidate { key: us(0, 1, 1), gold_cluster: None, repr: r1, s_m: s_m1 },
                ScoredCandidate { key: us(0, 2, 2), gold_cluster: Some(0), repr: r2, s_m: s_m2 },
            ];
            let table = score_antecedents(&mut tape, &head, &cands, DEFAULT_MAX_ANTECEDENTS);
            let loss = antecedent_loss(&mut tape, &cands, &table);
            let v = tape.value(loss).item();
            (v, Some((tape, loss)))
        };
        let (_, built) = loss_for(&params);
        let (tape, loss) = built.unwrap();
        let analytic = tape.backward(loss).into_param_grads(&tape, &params);
        let report = check_gradients(&params, &analytic, |p| loss_for(p).0, DEFAULT_EPSILON);
        assert!(report.passes(1e-3), "max rel error {}", report.max_rel_error);
    }

    #[test]
    fn cluster_decode_cases() {
        // All pair scores negative → no links, no chains.
        let rows = vec![vec![], vec![-1.0], vec![-0.5, -2.0]];
        let starts = vec![0, 0, 0];
        assert!(cluster_decode(&rows, &starts).is_empty());

        // Chain a←b←c via argmax links.
        let rows = vec![vec![], vec![3.0], vec![0.5, 2.0]];
        let clusters = cluster_decode(&rows, &starts);
        assert_eq!(clusters, vec![vec![0, 1, 2]]);

        // Tie between two antecedents: earlier index wins.
        let rows = vec![vec![], vec![-1.0], vec![2.0, 2.0]];
        let clusters = cluster_decode(&rows, &starts);
        assert_eq!(clusters, vec![vec![0, 2]]);

        // Output is a partition: no candidate in two clusters.
        let rows = vec![vec![], vec![1.0], vec![1.0, -1.0], vec![-1.0, -1.0, 5.0]];
        let starts = vec![0, 0, 0, 0];
        let clusters = cluster_decode(&rows, &starts);
        let mut seen = std::collections::BTreeSet::new();
        for c in &clusters {
            for &i in c {
                assert!(seen.insert(i));
            }
        }
        assert_eq!(clusters, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn argmax_antecedent_is_shift_invariant() {
        // Adding a constant to every real antecedent's score must not
        // change the argmax among them (the link/no-link decision against
        // the dummy is not shift invariant and is not asserted here).
        let rows: Vec<Vec<f64>> = vec![vec![], vec![0.2], vec![0.9, 0.4], vec![0.1, 0.8, 0.3]];
        let argmax = |row: &[f64]| -> Option<usize> {
            row.iter()
                .enumerate()
                .fold(None, |best: Option<(usize, f64)>, (i, &s)| match best {
                    Some((_, bs)) if bs >= s => best,
                    _ => Some((i, s)),
                })
                .map(|(i, _)| i)
        };
        for row in &rows {
            if row.is_empty() {
                continue;
            }
            let shifted: Vec<f64> = row.iter().map(|s| s + 13.5).collect();
            assert_eq!(argmax(row), argmax(&shifted));
        }
    }

    #[test]
    #[should_panic(expected = "distance must be at least 1")]
    fn zero_distance_is_rejected() {
        distance_bucket(0);
    }
}
