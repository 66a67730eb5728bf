//! Thin command-line front end over the library harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mentions::autodiff::check::DEFAULT_EPSILON;
use mentions::corpus::{partialize, synth_generate, Corpus, GenConfig, PartialPolicy};
use mentions::gradcheck::all_cases;
use mentions::harness::{
    decode_corpus, default_modes, default_taus, dump_span_scores, evaluate_model, render_report,
    run_sweep, run_training, Checkpoint, EvalSettings, ModelKind, RunConfig,
};
use mentions::objectives::LossMode;

#[derive(Parser)]
#[command(name = "mentions", version, about = "Mention detection under partial annotation, with multitask coreference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct LossArgs {
    /// plain, weighted or soft
    #[arg(long)]
    loss_mode: Option<String>,
    /// Negative-example weight for weighted mode.
    #[arg(long)]
    w: Option<f64>,
    /// Positive prior for soft-target mode.
    #[arg(long)]
    rho: Option<f64>,
    /// Span decode threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Tagger beam width.
    #[arg(long)]
    beam: Option<usize>,
}

impl LossArgs {
    fn mode(&self) -> Result<Option<LossMode>, String> {
        match self.loss_mode.as_deref() {
            None => Ok(None),
            Some("plain") => Ok(Some(LossMode::Plain)),
            Some("weighted") => {
                let w = self.w.ok_or("--loss-mode weighted requires --w")?;
                Ok(Some(LossMode::Weighted { w }))
            }
            Some("soft") => {
                let rho = self.rho.ok_or("--loss-mode soft requires --rho")?;
                Ok(Some(LossMode::Soft { rho }))
            }
            Some(other) => Err(format!("unknown loss mode {other:?}")),
        }
    }

    fn apply(&self, cfg: &mut RunConfig) -> Result<(), String> {
        if let Some(mode) = self.mode()? {
            cfg.loss.mode = mode;
        }
        if let Some(tau) = self.tau {
            cfg.loss.tau = tau;
        }
        if let Some(beam) = self.beam {
            cfg.loss.beam = beam;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a fully annotated synthetic corpus.
    GenData {
        /// Generator config (TOML); flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        docs: Option<usize>,
        /// Nesting probability q.
        #[arg(long)]
        nesting: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Degrade a fully annotated corpus into a partial one.
    Partialize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = true)]
        drop_singletons: bool,
        #[arg(long, default_value_t = 0.0)]
        drop_rate: f64,
        #[arg(long, default_value_t = false)]
        collapse_broken_chains: bool,
        #[arg(long)]
        seed: u64,
    },
    /// Train a detector (optionally with the multitask coreference head).
    Train {
        /// Run config (TOML). Flags override its fields.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: Option<ModelKind>,
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long)]
        multitask: Option<bool>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate a checkpoint against a corpus.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        beam: Option<usize>,
        /// Write per-span probabilities (span model) as TSV.
        #[arg(long)]
        dump_scores: Option<PathBuf>,
    },
    /// Decode a corpus: one line per sentence with tags and spans.
    Decode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        beam: Option<usize>,
    },
    /// Train/evaluate over a grid of loss modes and thresholds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated thresholds (default 0.1..=0.9).
        #[arg(long)]
        taus: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify analytic gradients against finite differences.
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::GenData { config, docs, nesting, seed, out } => {
            let mut gen = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| format!("reading {}: {e}", path.display()))?;
                    toml::from_str::<GenConfig>(&text).map_err(|e| e.to_string())?
                }
                None => GenConfig::default(),
            };
            if let Some(n) = docs {
                gen.num_docs = n;
            }
            if let Some(q) = nesting {
                gen.nesting_prob = q;
            }
            let corpus = synth_generate(&gen, seed).map_err(|e| e.to_string())?;
            corpus.save(&out).map_err(|e| e.to_string())?;
            println!(
                "wrote {} documents ({} mentions) to {}",
                corpus.len(),
                corpus.total_mentions(),
                out.display()
            );
            Ok(())
        }
        Command::Partialize {
            input,
            output,
            drop_singletons,
            drop_rate,
            collapse_broken_chains,
            seed,
        } => {
            let corpus = Corpus::load(&input).map_err(|e| e.to_string())?;
            let policy = PartialPolicy { drop_singletons, drop_rate, collapse_broken_chains, seed };
            let (partial, full) = partialize(&corpus, &policy);
            partial.save(&output).map_err(|e| e.to_string())?;
            println!(
                "kept {} of {} mentions; partial corpus written to {}",
                partial.total_mentions(),
                full.total_mentions(),
                output.display()
            );
            Ok(())
        }
        Command::Train { config, model, loss, multitask, seed, out_dir } => {
            let mut cfg = RunConfig::load(&config).map_err(|e| e.to_string())?;
            if let Some(m) = model {
                cfg.model = m;
            }
            loss.apply(&mut cfg)?;
            if let Some(m) = multitask {
                cfg.multitask = m;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out_dir {
                cfg.out_dir = Some(dir);
            }
            let (outcome, ckpt_path) = run_training(&cfg).map_err(|e| e.to_string())?;
            println!(
                "trained {} epochs (selected {}), checkpoint at {}",
                outcome.epochs_run,
                outcome.selected_epoch,
                ckpt_path.display()
            );
            print!("{}", render_report(&outcome.final_train));
            Ok(())
        }
        Command::Eval { checkpoint, corpus, tau, beam, dump_scores } => {
            let ckpt = Checkpoint::load(&checkpoint).map_err(|e| e.to_string())?;
            let corpus = Corpus::load(&corpus).map_err(|e| e.to_string())?;
            let settings = EvalSettings { tau, beam };
            let report = evaluate_model(&ckpt, &corpus, &settings).map_err(|e| e.to_string())?;
            print!("{}", render_report(&report));
            if let Some(path) = dump_scores {
                let tsv = dump_span_scores(&ckpt, &corpus).map_err(|e| e.to_string())?;
                std::fs::write(&path, tsv).map_err(|e| e.to_string())?;
                println!("span scores written to {}", path.display());
            }
            Ok(())
        }
        Command::Decode { checkpoint, corpus, beam } => {
            let ckpt = Checkpoint::load(&checkpoint).map_err(|e| e.to_string())?;
            let corpus = Corpus::load(&corpus).map_err(|e| e.to_string())?;
            let out = decode_corpus(&ckpt, &corpus, beam).map_err(|e| e.to_string())?;
            print!("{out}");
            Ok(())
        }
        Command::Sweep { config, taus, out } => {
            let cfg = RunConfig::load(&config).map_err(|e| e.to_string())?;
            let train = Corpus::load(&cfg.train_corpus).map_err(|e| e.to_string())?;
            let eval_path = cfg
                .eval_corpus
                .clone()
                .ok_or("sweep requires eval_corpus in the config")?;
            let eval = Corpus::load(&eval_path).map_err(|e| e.to_string())?;
            let tau_grid = match taus {
                None => default_taus(),
                Some(list) => list
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()))
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let (_, tsv) =
                run_sweep(&cfg, &default_modes(), &tau_grid, &train, &eval).map_err(|e| e.to_string())?;
            std::fs::write(&out, &tsv).map_err(|e| e.to_string())?;
            println!("sweep written to {}", out.display());
            Ok(())
        }
        Command::GradCheck { seed } => {
            println!("gradient checks (central differences, eps = {DEFAULT_EPSILON}):");
            let mut all_ok = true;
            for case in all_cases(seed) {
                let report = case.run(DEFAULT_EPSILON);
                let status = if report.passes(1e-3) { "ok" } else { "FAIL" };
                all_ok &= report.passes(1e-3);
                println!(
                    "  {:<28} max_rel_error={:.3e}  {}",
                    case.name, report.max_rel_error, status
                );
            }
            if all_ok {
                Ok(())
            } else {
                Err("gradient check failed".to_string())
            }
        }
    }
}
