//! Grid experiments over loss modes and decode thresholds, emitting the
//! TSV used for recall-vs-threshold curves.

use std::fmt::Write as _;

use crate::corpus::Corpus;
use crate::objectives::LossMode;

use super::config::{ModelKind, RunConfig};
use super::eval::{evaluate_with, EvalSettings};
use super::train::{train_in_memory, TrainError};

/// One evaluated grid point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub mode: LossMode,
    pub tau: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub avg_f1: Option<f64>,
}

/// The default mode grid covers the operating points of interest:
/// weighted w in {0.01, 0.3} and soft rho = 0.1 next to the plain loss.
pub fn default_modes() -> Vec<LossMode> {
    vec![
        LossMode::Plain,
        LossMode::Weighted { w: 0.01 },
        LossMode::Weighted { w: 0.3 },
        LossMode::Soft { rho: 0.1 },
    ]
}

/// Default threshold grid 0.1..=0.9 (includes the 0.5 operating point).
pub fn default_taus() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// Train once per mode, evaluate once per grid point. For the tagger the
/// threshold does not apply: one row per mode with the tau column blank.
pub fn run_sweep(
    base: &RunConfig,
    modes: &[LossMode],
    taus: &[f64],
    train: &Corpus,
    eval: &Corpus,
) -> Result<(Vec<SweepRow>, String), TrainError> {
    let mut rows = Vec::new();
    for &mode in modes {
        let mut cfg = base.clone();
        cfg.loss.mode = mode;
        let outcome = train_in_memory(&cfg, train, None)?;
        let ckpt = &outcome.checkpoint;
        let taus_for_model: Vec<Option<f64>> = match cfg.model {
            ModelKind::Span => taus.iter().copied().map(Some).collect(),
            ModelKind::Tagger => vec![None],
        };
        for tau in taus_for_model {
            let settings = EvalSettings { tau, beam: None };
            let report =
                evaluate_with(&ckpt.config, &ckpt.vocab, &ckpt.params, eval, &settings)?;
            rows.push(SweepRow {
                mode,
                tau: tau.unwrap_or(f64::NAN),
                recall: report.mention.recall,
                precision: report.mention.precision,
                f1: report.mention.f1,
                avg_f1: report.coref.map(|c| c.conll_avg),
            });
        }
    }
    let tsv = render_tsv(&rows);
    Ok((rows, tsv))
}

pub fn render_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from("mode\tw\trho\ttau\trecall\tprecision\tf1\tavg_f1\n");
    for row in rows {
        let (w, rho) = match row.mode {
            LossMode::Plain => ("NA".to_string(), "NA".to_string()),
            LossMode::Weighted { w } => (w.to_string(), "NA".to_string()),
            LossMode::Soft { rho } => ("NA".to_string(), rho.to_string()),
        };
        let tau = if row.tau.is_nan() { "NA".to_string() } else { row.tau.to_string() };
        let avg = row.avg_f1.map(|v| v.to_string()).unwrap_or_else(|| "NA".to_string());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.mode.name(),
            w,
            rho,
            tau,
            row.recall,
            row.precision,
            row.f1,
            avg
        );
    }
    out
}
