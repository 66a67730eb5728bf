//! Mention detection P/R/F1 and coreference metrics: MUC, B³, CEAF-φ4
//! and their CoNLL average.
//!
//! MUC and B³ aggregate counts corpus-wide before the final division;
//! CEAF sums per-document optimal alignment scores. The alignment is
//! solved exactly with an augmenting-path maximum-weight matching —
//! greedy alignment is not sufficient for correctness.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use thiserror::Error;

/// Recall / precision / F1 triple, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Prf {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(recall: f64, precision: f64) -> Self {
        let f1 = if recall + precision > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { recall, precision, f1 }
    }

    pub const ZERO: Prf = Prf { recall: 0.0, precision: 0.0, f1: 0.0 };
}

/// Ratio-of-sums accumulator for one metric over many documents.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricCounts {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

impl MetricCounts {
    pub fn add(&mut self, other: &MetricCounts) {
        self.recall_num += other.recall_num;
        self.recall_den += other.recall_den;
        self.precision_num += other.precision_num;
        self.precision_den += other.precision_den;
    }

    pub fn prf(&self) -> Prf {
        let r = if self.recall_den > 0.0 { self.recall_num / self.recall_den } else { 0.0 };
        let p = if self.precision_den > 0.0 { self.precision_num / self.precision_den } else { 0.0 };
        Prf::new(r, p)
    }
}

#[derive(Debug, Error)]
pub enum ClusteringError {
    #[error("clusters overlap: a mention appears in two clusters")]
    Overlap,
    #[error("empty cluster")]
    EmptyCluster,
}

/// Disjoint mention sets for one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering<K: Ord + Clone> {
    clusters: Vec<BTreeSet<K>>,
}

impl<K: Ord + Clone> Clustering<K> {
    pub fn new(clusters: Vec<BTreeSet<K>>) -> Result<Self, ClusteringError> {
        let mut seen = BTreeSet::new();
        for cluster in &clusters {
            if cluster.is_empty() {
                return Err(ClusteringError::EmptyCluster);
            }
            for m in cluster {
                if !seen.insert(m.clone()) {
                    return Err(ClusteringError::Overlap);
                }
            }
        }
        Ok(Clustering { clusters })
    }

    pub fn from_slices(clusters: &[&[K]]) -> Result<Self, ClusteringError> {
        Self::new(clusters.iter().map(|c| c.iter().cloned().collect()).collect())
    }

    pub fn clusters(&self) -> &[BTreeSet<K>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn mentions(&self) -> BTreeSet<K> {
        self.clusters.iter().flatten().cloned().collect()
    }

    fn cluster_of(&self) -> BTreeMap<&K, usize> {
        let mut map = BTreeMap::new();
        for (i, cluster) in self.clusters.iter().enumerate() {
            for m in cluster {
                map.insert(m, i);
            }
        }
        map
    }

    /// Drop clusters below `min_size` (the shared-task convention removes
    /// predicted singletons before scoring).
    pub fn without_small_clusters(&self, min_size: usize) -> Clustering<K> {
        Clustering {
            clusters: self
                .clusters
                .iter()
                .filter(|c| c.len() >= min_size)
                .cloned()
                .collect(),
        }
    }
}

// ── Mention detection ────────────────────────────────────────────────

/// Exact-match set P/R/F1. An empty predicted set scores precision 0 by
/// convention.
pub fn mention_prf<K: Ord>(predicted: &BTreeSet<K>, gold: &BTreeSet<K>) -> Prf {
    let hits = predicted.intersection(gold).count() as f64;
    let r = if gold.is_empty() { 0.0 } else { hits / gold.len() as f64 };
    let p = if predicted.is_empty() { 0.0 } else { hits / predicted.len() as f64 };
    Prf::new(r, p)
}

// ── MUC ──────────────────────────────────────────────────────────────

fn muc_side<K: Ord + Clone>(keyed: &Clustering<K>, other: &Clustering<K>) -> (f64, f64) {
    let other_of = other.cluster_of();
    let mut num = 0.0;
    let mut den = 0.0;
    for cluster in keyed.clusters() {
        let mut touched = BTreeSet::new();
        let mut unmatched = 0usize;
        for m in cluster {
            match other_of.get(m) {
                Some(&c) => {
                    touched.insert(c);
                }
                None => unmatched += 1,
            }
        }
        let partitions = touched.len() + unmatched;
        num += (cluster.len() - partitions) as f64;
        den += (cluster.len() - 1) as f64;
    }
    (num, den)
}

pub fn muc_counts<K: Ord + Clone>(gold: &Clustering<K>, pred: &Clustering<K>) -> MetricCounts {
    let (recall_num, recall_den) = muc_side(gold, pred);
    let (precision_num, precision_den) = muc_side(pred, gold);
    MetricCounts { recall_num, recall_den, precision_num, precision_den }
}

pub fn muc<K: Ord + Clone>(gold: &Clustering<K>, pred: &Clustering<K>) -> Prf {
    muc_counts(gold, pred).prf()
}

// ── B³ ───────────────────────────────────────────────────────────────

fn b_cubed_side<K: Ord + Clone>(keyed: &Clustering<K>, other: &Clustering<K>) -> (f64, f64) {
    let other_of = other.cluster_of();
    let mut num = 0.0;
    let mut den = 0.0;
    for cluster in keyed.clusters() {
        for m in cluster {
            let overlap = match other_of.get(m) {
                Some(&c) => cluster.intersection(&other.clusters()[c]).count() as f64,
                None => 0.0,
            };
            num += overlap / cluster.len() as f64;
            den += 1.0;
        }
    }
    (num, den)
}

pub fn b_cubed_counts<K: Ord + Clone>(gold: &Clustering<K>, pred: &Clustering<K>) -> MetricCounts {
    let (recall_num, recall_den) = b_cubed_side(gold, pred);
    let (precision_num, precision_den) = b_cubed_side(pred, gold);
    MetricCounts { recall_num, recall_den, precision_num, precision_den }
}

pub fn b_cubed<K: Ord + Clone>(gold: &Clustering<K>, pred: &Clustering<K>) -> Prf {
    b_cubed_counts(gold, pred).prf()
}

// ── CEAF-φ4 ──────────────────────────────────────────────────────────

fn phi4<K: Ord + Clone>(a: &BTreeSet<K>, b: &BTreeSet<K>) -> f64 {
    2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64
}

/// Maximum-weight one-to-one assignment over a dense weight matrix
/// (augmenting-path Hungarian method on the negated costs). Returns the
/// total weight and, per row, the matched column.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let nr = weights.len();
    if nr == 0 {
        return (0.0, Vec::new());
    }
    let nc = weights[0].len();
    if nc == 0 {
        return (0.0, vec![None; nr]);
    }
    // The assignment routine wants rows <= cols; transpose if needed.
    if nr > nc {
        let transposed: Vec<Vec<f64>> =
            (0..nc).map(|j| (0..nr).map(|i| weights[i][j]).collect()).collect();
        let (total, by_col) = max_weight_assignment(&transposed);
        let mut by_row = vec![None; nr];
        for (j, row) in by_col.into_iter().enumerate() {
            if let Some(i) = row {
                by_row[i] = Some(j);
            }
        }
        return (total, by_row);
    }

    // Minimise negated weights with row/column potentials.
    let inf = f64::INFINITY;
    let cost = |i: usize, j: usize| -weights[i][j];
    let mut u = vec![0.0; nr + 1];
    let mut v = vec![0.0; nc + 1];
    let mut matched_row = vec![0usize; nc + 1]; // 1-based row matched to col, 0 = none
    let mut way = vec![0usize; nc + 1];
    for i in 1..=nr {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; nc + 1];
        let mut used = vec![false; nc + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=nc {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=nc {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut by_row = vec![None; nr];
    let mut total = 0.0;
    for j in 1..=nc {
        if matched_row[j] > 0 {
            by_row[matched_row[j] - 1] = Some(j - 1);
            total += weights[matched_row[j] - 1][j - 1];
        }
    }
    (total, by_row)
}

pub fn ceaf_phi4_counts<K: Ord + Clone>(gold: &Clustering<K>, pred: &Clustering<K>) -> MetricCounts {
    let weights: Vec<Vec<f64>> = gold
        .clusters()
        .iter()
        .map(|g| pred.clusters().iter().map(|p| phi4(g, p)).collect())
        .collect();
    let (total, _) = max_weight_assignment(&weights);
    MetricCounts {
        recall_num: total,
        recall_den: gold.len() as f64,
        precision_num: total,
        precision_den: pred.len() as f64,
    }
}

pub fn ceaf_phi4<K: Ord + Clone>(gold: &Clustering<K>, pred: &Clustering<K>) -> Prf {
    ceaf_phi4_counts(gold, pred).prf()
}

// ── CoNLL average and corpus-level reports ───────────────────────────

/// Unweighted mean of the three F1 scores.
pub fn conll_average(muc: &Prf, b_cubed: &Prf, ceaf: &Prf) -> f64 {
    (muc.f1 + b_cubed.f1 + ceaf.f1) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorefReport {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_phi4: Prf,
    pub conll_avg: f64,
}

/// Score many documents: MUC and B³ aggregate raw counts, CEAF sums
/// per-document alignment scores and cluster counts.
pub fn evaluate_coref<K: Ord + Clone>(pairs: &[(Clustering<K>, Clustering<K>)]) -> CorefReport {
    let mut muc_total = MetricCounts::default();
    let mut b3_total = MetricCounts::default();
    let mut ceaf_total = MetricCounts::default();
    for (gold, pred) in pairs {
        muc_total.add(&muc_counts(gold, pred));
        b3_total.add(&b_cubed_counts(gold, pred));
        ceaf_total.add(&ceaf_phi4_counts(gold, pred));
    }
    let muc = muc_total.prf();
    let b_cubed = b3_total.prf();
    let ceaf = ceaf_total.prf();
    CorefReport {
        muc,
        b_cubed,
        ceaf_phi4: ceaf,
        conll_avg: conll_average(&muc, &b_cubed, &ceaf),
    }
}
