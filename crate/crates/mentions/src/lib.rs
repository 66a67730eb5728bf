//! Entity mention detection under partial annotation, with multitask
//! coreference resolution as the downstream task.
//!
//! The crate provides two neural mention detectors over a shared BiLSTM
//! sentence encoder:
//!
//! * a sequence tagger over the bracket language `{ [ ] + - }` with a
//!   pointer-synchronised decoder and grammar-constrained beam search
//!   ([`tagger`], [`tags`]);
//! * an exhaustive span scorer that assigns a detection probability to
//!   every candidate span ([`spans`]).
//!
//! Both can be trained on partially annotated corpora — where unannotated
//! spans may still be true mentions — using two loss modifications: a
//! weight `w` on negative examples, or soft targets with a positive prior
//! `rho` ([`objectives`]). A pairwise coreference head trained jointly via
//! uncertainty-weighted multitask learning sits on top ([`coref`]), and
//! standard coreference metrics (MUC, B³, CEAF-φ4, CoNLL average) close
//! the loop ([`metrics`]).
//!
//! Everything runs on a small self-contained f64 autodiff tape
//! ([`autodiff`]) and a synthetic corpus generator with a
//! partial-annotation simulator ([`corpus`]), so the full training and
//! evaluation cycle works on a desktop CPU with no external data.
//!
//! Start with the runnable examples (`cargo run --release --example ...`);
//! each one demonstrates a single capability end to end. A thin CLI binary
//! (`mentions`) exposes the same workflows as subcommands.

pub mod autodiff;
pub mod coref;
pub mod corpus;
pub mod gradcheck;
pub mod harness;
pub mod metrics;
pub mod objectives;
pub mod spans;
pub mod tagger;
pub mod tags;

pub use corpus::{Corpus, Document, Mention};
pub use tags::{MentionSpan, TagSequence, TagSymbol};
