//! Training objectives: plain likelihood / cross-entropy plus the two
//! partial-annotation modifications, and the multitask combiner.
//!
//! Negative examples are `-`-tagged decoder steps for the tagger and
//! unannotated spans for the span scorer. `weighted` multiplies only
//! their loss terms by `w`; `soft` replaces their hard targets with a
//! distribution that admits probability `rho` of being positive:
//! `(rho, rho, rho, 1-3rho)` over `[ ] + -` for the tagger, `y_neg = rho`
//! for spans. Positive-example terms are bit-identical to plain mode
//! under both modifications.

use thiserror::Error;

use crate::autodiff::{NodeId, Tape};
use crate::tags::TagSymbol;

#[derive(Debug, Error)]
pub enum LossConfigError {
    #[error("negative-example weight w={0} outside (0, 1]")]
    BadWeight(f64),
    #[error("soft-target prior rho={0} outside {1} for this model")]
    BadRho(f64, &'static str),
    #[error("decode threshold tau={0} outside [0, 1]")]
    BadTau(f64),
    #[error("beam width must be at least 1")]
    BadBeam,
}

/// Which loss the trainer optimizes. Weighted and soft modes are mutually
/// exclusive per run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum LossMode {
    Plain,
    /// Multiply negative-example terms by `w` in (0, 1].
    Weighted { w: f64 },
    /// Give negative examples probability `rho` of being positive.
    Soft { rho: f64 },
}

impl LossMode {
    pub fn name(&self) -> &'static str {
        match self {
            LossMode::Plain => "plain",
            LossMode::Weighted { .. } => "weighted",
            LossMode::Soft { .. } => "soft",
        }
    }
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossMode::Plain => write!(f, "plain"),
            LossMode::Weighted { w } => write!(f, "weighted(w={w})"),
            LossMode::Soft { rho } => write!(f, "soft(rho={rho})"),
        }
    }
}

/// Loss mode plus the decode-time knobs every experiment names explicitly.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    #[serde(flatten)]
    pub mode: LossMode,
    /// Span-model decode threshold.
    pub tau: f64,
    /// Tagger beam width.
    pub beam: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { mode: LossMode::Plain, tau: 0.5, beam: 4 }
    }
}

impl LossConfig {
    fn validate_common(&self) -> Result<(), LossConfigError> {
        if let LossMode::Weighted { w } = self.mode {
            if !(w > 0.0 && w <= 1.0) {
                return Err(LossConfigError::BadWeight(w));
            }
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(LossConfigError::BadTau(self.tau));
        }
        if self.beam == 0 {
            return Err(LossConfigError::BadBeam);
        }
        Ok(())
    }

    /// Tagger soft targets need 1 - 3·rho > 0.
    pub fn validate_for_tagger(&self) -> Result<(), LossConfigError> {
        self.validate_common()?;
        if let LossMode::Soft { rho } = self.mode {
            if !(0.0..(1.0 / 3.0)).contains(&rho) {
                return Err(LossConfigError::BadRho(rho, "[0, 1/3)"));
            }
        }
        Ok(())
    }

    pub fn validate_for_spans(&self) -> Result<(), LossConfigError> {
        self.validate_common()?;
        if let LossMode::Soft { rho } = self.mode {
            if !(0.0..1.0).contains(&rho) {
                return Err(LossConfigError::BadRho(rho, "[0, 1)"));
            }
        }
        Ok(())
    }
}

/// The soft-target distribution for a negative tagger step, over the
/// symbol order `[ ] + -`.
pub fn soft_tagger_targets(rho: f64) -> [f64; 4] {
    [rho, rho, rho, 1.0 - 3.0 * rho]
}

/// Negative log-likelihood of a gold tag sequence given per-step
/// 4-way distributions, averaged over steps. Steps whose gold symbol is
/// `-` are the negatives.
pub fn tagger_loss(
    tape: &mut Tape,
    step_distributions: &[NodeId],
    gold: &[TagSymbol],
    mode: LossMode,
) -> NodeId {
    assert_eq!(
        step_distributions.len(),
        gold.len(),
        "tagger_loss: {} distributions for {} gold symbols",
        step_distributions.len(),
        gold.len()
    );
    assert!(!gold.is_empty(), "tagger_loss: empty sequence");
    let mut terms = Vec::with_capacity(gold.len());
    for (&dist, &sym) in step_distributions.iter().zip(gold) {
        let negative = sym == TagSymbol::AdvanceOut;
        let term = match (mode, negative) {
            (LossMode::Soft { rho }, true) => {
                // Cross-entropy against (rho, rho, rho, 1-3rho); zero
                // coefficients are skipped so rho=0 reduces to plain.
                let targets = soft_tagger_targets(rho);
                let mut parts = Vec::new();
                for (idx, &coeff) in targets.iter().enumerate() {
                    if coeff == 0.0 {
                        continue;
                    }
                    let p = tape.pick(dist, idx);
                    let lp = tape.log(p);
                    parts.push(tape.scale(lp, -coeff));
                }
                tape.add_n(&parts)
            }
            _ => {
                let p = tape.pick(dist, sym.index());
                let lp = tape.log(p);
                let nll = tape.scale(lp, -1.0);
                match (mode, negative) {
                    (LossMode::Weighted { w }, true) => tape.scale(nll, w),
                    _ => nll,
                }
            }
        };
        terms.push(term);
    }
    let total = tape.add_n(&terms);
    tape.scale(total, 1.0 / gold.len() as f64)
}

/// Binary cross-entropy over span probabilities, averaged over the
/// enumerated spans. Labels must lie in [0, 1]; spans labelled 0 are the
/// negatives the loss modifications act on.
pub fn span_loss(
    tape: &mut Tape,
    probabilities: &[NodeId],
    labels: &[f64],
    mode: LossMode,
) -> NodeId {
    assert_eq!(
        probabilities.len(),
        labels.len(),
        "span_loss: {} probabilities for {} labels",
        probabilities.len(),
        labels.len()
    );
    assert!(!labels.is_empty(), "span_loss: no spans");
    let mut terms = Vec::with_capacity(labels.len());
    for (&p, &label) in probabilities.iter().zip(labels) {
        assert!(
            (0.0..=1.0).contains(&label),
            "span_loss: label {label} outside [0, 1]"
        );
        let negative = label == 0.0;
        let term = match (mode, negative) {
            (LossMode::Soft { rho }, true) => bce_term(tape, p, rho),
            (LossMode::Weighted { w }, true) => {
                let t = bce_term(tape, p, 0.0);
                tape.scale(t, w)
            }
            _ => bce_term(tape, p, label),
        };
        terms.push(term);
    }
    let total = tape.add_n(&terms);
    tape.scale(total, 1.0 / labels.len() as f64)
}

/// -[y·log p + (1-y)·log(1-p)], skipping zero coefficients.
fn bce_term(tape: &mut Tape, p: NodeId, y: f64) -> NodeId {
    let mut parts = Vec::new();
    if y > 0.0 {
        let lp = tape.log(p);
        parts.push(tape.scale(lp, -y));
    }
    if y < 1.0 {
        let neg = tape.scale(p, -1.0);
        let one_minus = tape.add_const(neg, 1.0);
        let lq = tape.log(one_minus);
        parts.push(tape.scale(lq, -(1.0 - y)));
    }
    tape.add_n(&parts)
}

/// Homoscedastic-uncertainty multitask combination of a detection loss and
/// a coreference loss with learnable log-variances:
/// `exp(-s_md)·L_md + s_md/2 + exp(-s_cr)·L_cr + s_cr/2`.
pub fn multitask_combine(
    tape: &mut Tape,
    detection_loss: NodeId,
    coref_loss: NodeId,
    s_md: NodeId,
    s_cr: NodeId,
) -> NodeId {
    let mut terms = Vec::with_capacity(4);
    for (loss, s) in [(detection_loss, s_md), (coref_loss, s_cr)] {
        let neg_s = tape.scale(s, -1.0);
        let weight = tape.exp(neg_s);
        terms.push(tape.mul(weight, loss));
        terms.push(tape.scale(s, 0.5));
    }
    tape.add_n(&terms)
}

/// Plain evaluation of the combiner, for log bookkeeping checks.
pub fn multitask_combine_value(l_md: f64, l_cr: f64, s_md: f64, s_cr: f64) -> f64 {
    (-s_md).exp() * l_md + s_md / 2.0 + (-s_cr).exp() * l_cr + s_cr / 2.0
}
