//! The sequence-to-sequence mention tagger.
//!
//! The encoder contextualises the sentence; an LSTM decoder, initialised
//! with the encoder state at the last word, emits tag symbols while a
//! pointer tracks which word is being tagged. At each step the 4-way
//! distribution is `softmax(relu(W_o·[d_t, h_i] + b_o))` over `[ ] + -`;
//! the pointer moves only on `+`/`-`. Training is teacher-forced; decoding
//! is beam search constrained to the tag grammar, so every decoded
//! sequence is valid by construction.
//!
//! Beam decoding is forward-only and shares its arithmetic kernels with
//! the tape, so greedy decoding and a teacher-forced re-run over the
//! decoded symbols produce identical distributions.

use rand::Rng;

use crate::autodiff::nn::{EncodedSentence, Encoder, Linear, LstmCell, LstmState, Params};
use crate::autodiff::{matvec_into, sigmoid_scalar, softmax_in_place, NodeId, Tape};
use crate::tags::{validate, MentionSpan, TagError, TagSequence, TagSymbol};

/// Symbol-embedding row used for the start-of-sequence input.
pub const SOS_INDEX: usize = 4;

/// One decoder step: the pointer word and the 4-way distribution node.
#[derive(Debug, Clone, Copy)]
pub struct TaggerStep {
    pub step: usize,
    pub word: usize,
    pub dist: NodeId,
}

/// Registered tagger layers on a tape.
pub struct Tagger {
    sym_emb: NodeId,
    dec: LstmCell,
    out: Linear,
}

impl Tagger {
    /// Parameters: symbol embeddings (4 symbols + SOS), the decoder LSTM
    /// (hidden size 2·d_hidden so the encoder state can initialise it),
    /// and the 4-way output projection over `[d_t, h_i]`.
    pub fn init_params(params: &mut Params, d_emb: usize, d_hidden: usize, rng: &mut impl Rng) {
        params.insert_uniform("tagger.sym_emb", &[5, d_emb], rng);
        LstmCell::init(params, "tagger.dec", d_emb, 2 * d_hidden, rng);
        Linear::init_relu(params, "tagger.out", 4, 4 * d_hidden, rng);
    }

    pub fn register(tape: &mut Tape, params: &Params) -> Self {
        Tagger {
            sym_emb: tape.param(params, "tagger.sym_emb"),
            dec: LstmCell::register(tape, params, "tagger.dec"),
            out: Linear::register(tape, params, "tagger.out"),
        }
    }

    /// Run the decoder over a gold sequence with teacher forcing: step t
    /// consumes the embedding of gold symbol t-1 (SOS at t=0) and the
    /// pointer trajectory is recomputed from the gold advances.
    pub fn forward_teacher_forced(
        &self,
        tape: &mut Tape,
        enc: &EncodedSentence,
        gold: &TagSequence,
        depth_cap: usize,
    ) -> Result<Vec<TaggerStep>, TagError> {
        let word_count = enc.states.len();
        match validate(gold, word_count, depth_cap) {
            crate::tags::Validation::Ok => {}
            crate::tags::Validation::Violation { position, kind } => {
                return Err(TagError::Invalid { position, kind });
            }
        }
        let mut state = LstmState { h: enc.final_h, c: enc.final_c };
        let mut prev = SOS_INDEX;
        let mut steps = Vec::with_capacity(gold.len());
        for (t, (&sym, &word)) in gold.symbols().iter().zip(gold.alignment()).enumerate() {
            let input = tape.row(self.sym_emb, prev);
            state = self.dec.step(tape, input, state);
            let features = tape.concat(&[state.h, enc.states[word]]);
            let pre = self.out.apply(tape, features);
            let logits = tape.relu(pre);
            let dist = tape.softmax(logits);
            steps.push(TaggerStep { step: t, word, dist });
            prev = sym.index();
        }
        Ok(steps)
    }
}

/// Max over the steps aligned to a word of the probability of one symbol,
/// returned as the node that attains it (so gradients flow to the argmax).
/// Confidence for a span is the pair at its start and end words.
pub fn mention_confidence_nodes(
    tape: &Tape,
    steps: &[TaggerStep],
    span: MentionSpan,
) -> Option<(NodeId, NodeId)> {
    let p_open = max_symbol_prob_node(tape, steps, span.start, TagSymbol::Open)?;
    let p_close = max_symbol_prob_node(tape, steps, span.end, TagSymbol::Close)?;
    Some((p_open, p_close))
}

fn max_symbol_prob_node(
    tape: &Tape,
    steps: &[TaggerStep],
    word: usize,
    symbol: TagSymbol,
) -> Option<NodeId> {
    let mut best: Option<(f64, NodeId)> = None;
    for s in steps.iter().filter(|s| s.word == word) {
        let p = tape.value(s.dist).data()[symbol.index()];
        if best.map(|(b, _)| p > b).unwrap_or(true) {
            best = Some((p, s.dist));
        }
    }
    best.map(|(_, dist)| dist)
}

/// Value-level mention confidence from decoded step distributions.
pub fn mention_confidence(decoded: &DecodedSequence, span: MentionSpan) -> Option<(f64, f64)> {
    let max_at = |word: usize, sym: TagSymbol| {
        decoded
            .tags
            .alignment()
            .iter()
            .zip(&decoded.step_distributions)
            .filter(|(&w, _)| w == word)
            .map(|(_, d)| d[sym.index()])
            .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a: f64| a.max(p))))
    };
    Some((max_at(span.start, TagSymbol::Open)?, max_at(span.end, TagSymbol::Close)?))
}

// ── Constrained beam search ──────────────────────────────────────────

/// Autoregressive scorer abstraction: the neural decoder implements it,
/// tests drive the beam with table-built models.
pub trait StepScorer {
    type State: Clone;
    /// Decoder state ready to emit the first symbol.
    fn start(&self) -> Self::State;
    /// Probability distribution over `[ ] + -` at the pointer word.
    fn distribution(&self, state: &Self::State, word: usize) -> [f64; 4];
    /// Consume an emitted symbol.
    fn advance(&self, state: &Self::State, symbol: TagSymbol) -> Self::State;
}

/// Grammar bookkeeping for one decode prefix.
#[derive(Debug, Clone)]
struct GrammarState {
    word: usize,
    /// Open words of unclosed brackets, outermost first.
    stack: Vec<usize>,
    /// A close was emitted at the current word (no more opens here).
    closed_this_word: bool,
    /// Open word of the most recent close at this word, for duplicate-span
    /// masking.
    last_close_open_word: Option<usize>,
}

impl GrammarState {
    fn new() -> Self {
        GrammarState {
            word: 0,
            stack: Vec::new(),
            closed_this_word: false,
            last_close_open_word: None,
        }
    }

    /// Closing brackets in LIFO order needs strictly increasing close
    /// words within a same-open-word run (else a duplicate span), so a
    /// prefix is completable only if the minimal schedule fits before the
    /// last word.
    fn closable_by_last_word(&self, base_word: usize, last_word: usize, extra_top: Option<usize>) -> bool {
        let mut need = base_word;
        let mut prev: Option<usize> = None;
        let tops = extra_top.into_iter().chain(self.stack.iter().rev().copied());
        for open_word in tops {
            if prev == Some(open_word) {
                need += 1;
            }
            if need > last_word {
                return false;
            }
            prev = Some(open_word);
        }
        true
    }

    fn legal(&self, word_count: usize, depth_cap: usize) -> [bool; 4] {
        let last_word = word_count - 1;
        let depth = self.stack.len();
        let open_ok = !self.closed_this_word
            && depth < depth_cap
            && self.closable_by_last_word(self.word, last_word, Some(self.word));
        let close_ok = depth > 0
            && self.last_close_open_word != self.stack.last().copied();
        let advance_in_ok = depth > 0
            && self.word < last_word
            && self.closable_by_last_word(self.word + 1, last_word, None);
        let advance_out_ok = depth == 0;
        let mut mask = [false; 4];
        mask[TagSymbol::Open.index()] = open_ok;
        mask[TagSymbol::Close.index()] = close_ok;
        mask[TagSymbol::AdvanceIn.index()] = advance_in_ok;
        mask[TagSymbol::AdvanceOut.index()] = advance_out_ok;
        mask
    }

    fn apply(&mut self, symbol: TagSymbol) {
        match symbol {
            TagSymbol::Open => self.stack.push(self.word),
            TagSymbol::Close => {
                let open_word = self.stack.pop().expect("close on empty stack");
                self.closed_this_word = true;
                self.last_close_open_word = Some(open_word);
            }
            TagSymbol::AdvanceIn | TagSymbol::AdvanceOut => {
                self.word += 1;
                self.closed_this_word = false;
                self.last_close_open_word = None;
            }
        }
    }

    fn finished(&self, word_count: usize) -> bool {
        self.word == word_count
    }
}

/// A completed decode: the (always grammatical) tag sequence, its score
/// as the sum of chosen-symbol log probabilities, and the per-step
/// distributions.
#[derive(Debug, Clone)]
pub struct DecodedSequence {
    pub tags: TagSequence,
    pub score: f64,
    pub step_distributions: Vec<[f64; 4]>,
}

struct BeamItem<S> {
    scorer_state: S,
    grammar: GrammarState,
    symbols: Vec<TagSymbol>,
    distributions: Vec<[f64; 4]>,
    score: f64,
}

impl<S: Clone> BeamItem<S> {
    fn finished(&self, word_count: usize) -> bool {
        self.grammar.finished(word_count)
    }
}

/// Grammar-constrained beam search. The returned sequence always passes
/// validation; with `beam == 1` this is greedy constrained decoding.
///
/// Decoding widens iteratively: the result is the best completion over
/// all widths up to `beam`. A single pruned pass is not monotone in the
/// width (a garden path can crowd out the narrower beam's winner), so the
/// guarantee score(B2) >= score(B1) for B2 > B1 comes from the widening.
pub fn beam_decode<S: StepScorer>(
    scorer: &S,
    word_count: usize,
    beam: usize,
    depth_cap: usize,
) -> DecodedSequence {
    assert!(beam >= 1, "beam width must be at least 1");
    let mut best: Option<DecodedSequence> = None;
    for width in 1..=beam {
        let pass = beam_pass(scorer, word_count, width, depth_cap);
        let improves = best
            .as_ref()
            .map(|b| pass.score > b.score)
            .unwrap_or(true);
        if improves {
            best = Some(pass);
        }
    }
    best.unwrap()
}

/// One standard beam pass at a fixed width. Completed sequences move to a
/// side pool as soon as they rank within the beam; the pool is never
/// pruned.
fn beam_pass<S: StepScorer>(
    scorer: &S,
    word_count: usize,
    beam: usize,
    depth_cap: usize,
) -> DecodedSequence {
    assert!(word_count >= 1, "cannot decode an empty sentence");
    let max_steps = word_count * (2 * depth_cap + 1);

    let mut items = vec![BeamItem {
        scorer_state: scorer.start(),
        grammar: GrammarState::new(),
        symbols: Vec::new(),
        distributions: Vec::new(),
        score: 0.0,
    }];
    let mut finished: Vec<BeamItem<S::State>> = Vec::new();

    for _ in 0..max_steps {
        if items.is_empty() {
            break;
        }
        // (parent index, symbol, distribution, score).
        let mut candidates: Vec<(usize, TagSymbol, [f64; 4], f64)> = Vec::new();
        for (idx, item) in items.iter().enumerate() {
            let dist = scorer.distribution(&item.scorer_state, item.grammar.word);
            let legal = item.grammar.legal(word_count, depth_cap);
            for sym in TagSymbol::ALL {
                if legal[sym.index()] {
                    let p = dist[sym.index()];
                    candidates.push((idx, sym, dist, item.score + p.ln()));
                }
            }
        }
        debug_assert!(!candidates.is_empty(), "grammar must always allow a symbol");
        candidates.sort_by(|a, b| {
            b.3.total_cmp(&a.3).then_with(|| {
                // Deterministic tie-break: prefix order, then symbol order.
                (items[a.0].symbols.as_slice(), a.1.index())
                    .cmp(&(items[b.0].symbols.as_slice(), b.1.index()))
            })
        });

        candidates.truncate(beam);

        let mut next = Vec::with_capacity(beam);
        for (idx, sym, dist, score) in candidates {
            let parent = &items[idx];
            let mut grammar = parent.grammar.clone();
            grammar.apply(sym);
            let mut symbols = parent.symbols.clone();
            symbols.push(sym);
            let mut distributions = parent.distributions.clone();
            distributions.push(dist);
            let child = BeamItem {
                scorer_state: scorer.advance(&parent.scorer_state, sym),
                grammar,
                symbols,
                distributions,
                score,
            };
            if child.finished(word_count) {
                finished.push(child);
            } else {
                next.push(child);
            }
        }
        items = next;
    }

    let best = finished
        .into_iter()
        .max_by(|a, b| a.score.total_cmp(&b.score).then_with(|| b.symbols.cmp(&a.symbols)))
        .expect("beam always completes at least one sequence");
    let tags = TagSequence::from_symbols(best.symbols);
    debug_assert!(validate(&tags, word_count, depth_cap).is_ok());
    DecodedSequence {
        tags,
        score: best.score,
        step_distributions: best.distributions,
    }
}

// ── Forward-only neural decoder ──────────────────────────────────────

/// Raw-value view of the tagger for beam decoding: encoder states are
/// materialised once per sentence, decoder steps run tape-free on the
/// shared kernels.
pub struct NeuralDecoder {
    word_count: usize,
    /// Contextual encoder states h_i, each of length 2·d_hidden.
    states: Vec<Vec<f64>>,
    initial_h: Vec<f64>,
    initial_c: Vec<f64>,
    sym_emb: Vec<Vec<f64>>,
    // Decoder LSTM gate parameters, order i, f, g, o.
    wx: [Vec<f64>; 4],
    wh: [Vec<f64>; 4],
    b: [Vec<f64>; 4],
    out_w: Vec<f64>,
    out_b: Vec<f64>,
    hidden: usize,
    d_emb: usize,
}

#[derive(Clone)]
pub struct RawLstmState {
    h: Vec<f64>,
    c: Vec<f64>,
}

impl NeuralDecoder {
    /// Runs the encoder for one sentence (on a scratch tape, values only)
    /// and captures the decoder parameters.
    pub fn new(params: &Params, token_ids: &[usize]) -> Self {
        let mut tape = Tape::new();
        let encoder = Encoder::register(&mut tape, params);
        let enc = encoder.encode(&mut tape, token_ids);
        let states = enc
            .states
            .iter()
            .map(|&s| tape.value(s).data().to_vec())
            .collect();
        let initial_h = tape.value(enc.final_h).data().to_vec();
        let initial_c = tape.value(enc.final_c).data().to_vec();

        let emb = params.get("tagger.sym_emb").expect("tagger params present");
        let d_emb = emb.cols();
        let sym_emb = (0..emb.rows())
            .map(|r| emb.data()[r * d_emb..(r + 1) * d_emb].to_vec())
            .collect();
        let gate = |g: &str, kind: &str| params.get(&format!("tagger.dec.{kind}_{g}")).unwrap().data().to_vec();
        let wx = [gate("i", "wx"), gate("f", "wx"), gate("g", "wx"), gate("o", "wx")];
        let wh = [gate("i", "wh"), gate("f", "wh"), gate("g", "wh"), gate("o", "wh")];
        let b = [gate("i", "b"), gate("f", "b"), gate("g", "b"), gate("o", "b")];
        let hidden = b[0].len();
        NeuralDecoder {
            word_count: token_ids.len(),
            states,
            initial_h,
            initial_c,
            sym_emb,
            wx,
            wh,
            b,
            out_w: params.get("tagger.out.w").unwrap().data().to_vec(),
            out_b: params.get("tagger.out.b").unwrap().data().to_vec(),
            hidden,
            d_emb,
        }
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// One raw LSTM step, mirroring the tape kernel order exactly.
    fn lstm_step(&self, state: &RawLstmState, input: &[f64]) -> RawLstmState {
        let h = self.hidden;
        let mut gates = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
        for k in 0..4 {
            let mut from_x = vec![0.0; h];
            matvec_into(&self.wx[k], h, self.d_emb, input, &mut from_x);
            let mut from_h = vec![0.0; h];
            matvec_into(&self.wh[k], h, h, &state.h, &mut from_h);
            for r in 0..h {
                gates[k][r] = (from_x[r] + from_h[r]) + self.b[k][r];
            }
        }
        let mut c = vec![0.0; h];
        let mut new_h = vec![0.0; h];
        for r in 0..h {
            let i = sigmoid_scalar(gates[0][r]);
            let f = sigmoid_scalar(gates[1][r]);
            let g = gates[2][r].tanh();
            let o = sigmoid_scalar(gates[3][r]);
            c[r] = f * state.c[r] + i * g;
            new_h[r] = o * c[r].tanh();
        }
        RawLstmState { h: new_h, c }
    }
}

impl StepScorer for NeuralDecoder {
    type State = RawLstmState;

    fn start(&self) -> RawLstmState {
        let init = RawLstmState { h: self.initial_h.clone(), c: self.initial_c.clone() };
        self.lstm_step(&init, &self.sym_emb[SOS_INDEX])
    }

    fn distribution(&self, state: &RawLstmState, word: usize) -> [f64; 4] {
        let mut features = Vec::with_capacity(state.h.len() + self.states[word].len());
        features.extend_from_slice(&state.h);
        features.extend_from_slice(&self.states[word]);
        let mut logits = vec![0.0; 4];
        matvec_into(&self.out_w, 4, features.len(), &features, &mut logits);
        for (l, b) in logits.iter_mut().zip(&self.out_b) {
            *l += b;
        }
        for l in logits.iter_mut() {
            if *l < 0.0 {
                *l = 0.0;
            }
        }
        softmax_in_place(&mut logits);
        [logits[0], logits[1], logits[2], logits[3]]
    }

    fn advance(&self, state: &RawLstmState, symbol: TagSymbol) -> RawLstmState {
        self.lstm_step(state, &self.sym_emb[symbol.index()])
    }
}
