//! Named parameter store and the layers every model composes: embeddings,
//! LSTM / BiLSTM, and affine layers.

use std::collections::BTreeMap;

use rand::Rng;

use super::{NodeId, Tape, Tensor};

/// All learned tensors of a model, keyed by name. BTreeMap keeps iteration
/// order deterministic, which checkpointing and optimizer updates rely on.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Params {
    map: BTreeMap<String, Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Params { map: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) {
        self.map.insert(name.to_string(), tensor);
    }

    /// New parameter drawn uniformly from [-0.1, 0.1].
    pub fn insert_uniform(&mut self, name: &str, shape: &[usize], rng: &mut impl Rng) {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        self.map.insert(name.to_string(), Tensor::from_vec(shape, data));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.map.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.map.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.map.values().map(Tensor::len).sum()
    }
}

/// Affine layer `W·x + b`, with parameters `<prefix>.w` and `<prefix>.b`.
pub struct Linear {
    pub w: NodeId,
    pub b: NodeId,
}

impl Linear {
    pub fn init(params: &mut Params, prefix: &str, out_dim: usize, in_dim: usize, rng: &mut impl Rng) {
        params.insert_uniform(&format!("{prefix}.w"), &[out_dim, in_dim], rng);
        params.insert_uniform(&format!("{prefix}.b"), &[out_dim], rng);
    }

    /// Init for layers feeding a relu: the bias is drawn from [0, 0.2] so
    /// units start in the active half-space (the same class of trick as
    /// the forget-gate bias; dead units at small widths otherwise collapse
    /// the scoring heads to a constant).
    pub fn init_relu(
        params: &mut Params,
        prefix: &str,
        out_dim: usize,
        in_dim: usize,
        rng: &mut impl Rng,
    ) {
        params.insert_uniform(&format!("{prefix}.w"), &[out_dim, in_dim], rng);
        let bias = (0..out_dim).map(|_| rng.random_range(0.0..0.2)).collect();
        params.insert(&format!("{prefix}.b"), Tensor::vector(bias));
    }

    pub fn register(tape: &mut Tape, params: &Params, prefix: &str) -> Self {
        Linear {
            w: tape.param(params, &format!("{prefix}.w")),
            b: tape.param(params, &format!("{prefix}.b")),
        }
    }

    pub fn apply(&self, tape: &mut Tape, x: NodeId) -> NodeId {
        tape.affine(self.w, x, self.b)
    }
}

const GATES: [&str; 4] = ["i", "f", "g", "o"];

/// Single-direction LSTM cell with per-gate parameters
/// `<prefix>.wx_{i,f,g,o}`, `<prefix>.wh_*`, `<prefix>.b_*`.
///
/// Standard gating: input/forget/output gates are sigmoids, the cell
/// candidate is a tanh; the forget-gate bias is initialised to 1.0.
pub struct LstmCell {
    wx: [NodeId; 4],
    wh: [NodeId; 4],
    b: [NodeId; 4],
    hidden_dim: usize,
}

impl LstmCell {
    pub fn init(
        params: &mut Params,
        prefix: &str,
        in_dim: usize,
        hidden_dim: usize,
        rng: &mut impl Rng,
    ) {
        for gate in GATES {
            params.insert_uniform(&format!("{prefix}.wx_{gate}"), &[hidden_dim, in_dim], rng);
            params.insert_uniform(&format!("{prefix}.wh_{gate}"), &[hidden_dim, hidden_dim], rng);
            if gate == "f" {
                params.insert(&format!("{prefix}.b_{gate}"), Tensor::vector(vec![1.0; hidden_dim]));
            } else {
                params.insert_uniform(&format!("{prefix}.b_{gate}"), &[hidden_dim], rng);
            }
        }
    }

    pub fn register(tape: &mut Tape, params: &Params, prefix: &str) -> Self {
        let mut wx = Vec::with_capacity(4);
        let mut wh = Vec::with_capacity(4);
        let mut b = Vec::with_capacity(4);
        for gate in GATES {
            wx.push(tape.param(params, &format!("{prefix}.wx_{gate}")));
            wh.push(tape.param(params, &format!("{prefix}.wh_{gate}")));
            b.push(tape.param(params, &format!("{prefix}.b_{gate}")));
        }
        let hidden_dim = tape.value(b[0]).len();
        LstmCell {
            wx: wx.try_into().unwrap(),
            wh: wh.try_into().unwrap(),
            b: b.try_into().unwrap(),
            hidden_dim,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn zero_state(&self, tape: &mut Tape) -> LstmState {
        let h = tape.leaf(Tensor::zeros(&[self.hidden_dim]));
        let c = tape.leaf(Tensor::zeros(&[self.hidden_dim]));
        LstmState { h, c }
    }

    fn gate_preact(&self, tape: &mut Tape, k: usize, x: NodeId, h: NodeId) -> NodeId {
        let from_x = tape.matvec(self.wx[k], x);
        let from_h = tape.matvec(self.wh[k], h);
        let s = tape.add(from_x, from_h);
        tape.add(s, self.b[k])
    }

    pub fn step(&self, tape: &mut Tape, x: NodeId, state: LstmState) -> LstmState {
        let pre_i = self.gate_preact(tape, 0, x, state.h);
        let i = tape.sigmoid(pre_i);
        let pre_f = self.gate_preact(tape, 1, x, state.h);
        let f = tape.sigmoid(pre_f);
        let pre_g = self.gate_preact(tape, 2, x, state.h);
        let g = tape.tanh(pre_g);
        let pre_o = self.gate_preact(tape, 3, x, state.h);
        let o = tape.sigmoid(pre_o);

        let keep = tape.mul(f, state.c);
        let write = tape.mul(i, g);
        let c = tape.add(keep, write);
        let c_act = tape.tanh(c);
        let h = tape.mul(o, c_act);
        LstmState { h, c }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: NodeId,
    pub c: NodeId,
}

/// Output of a bidirectional encoder pass over one sentence.
pub struct BiLstmStates {
    /// Per-word contextual state: `[fwd_i ; bwd_i]`, length 2·hidden.
    pub states: Vec<NodeId>,
    /// `[fwd ; bwd]` hidden state at the last word (the forward cell's
    /// final state and the backward cell's first).
    pub final_h: NodeId,
    /// Matching cell states.
    pub final_c: NodeId,
}

/// Run both directions over an embedded sentence and concatenate per word.
/// Panics on an empty sentence; callers validate at the corpus boundary.
pub fn bilstm_encode(
    tape: &mut Tape,
    fwd: &LstmCell,
    bwd: &LstmCell,
    inputs: &[NodeId],
) -> BiLstmStates {
    assert!(!inputs.is_empty(), "bilstm_encode: empty sentence");
    let m = inputs.len();

    let mut fwd_states = Vec::with_capacity(m);
    let mut state = fwd.zero_state(tape);
    for &x in inputs {
        state = fwd.step(tape, x, state);
        fwd_states.push(state);
    }

    let mut bwd_states = vec![None; m];
    let mut state = bwd.zero_state(tape);
    for i in (0..m).rev() {
        state = bwd.step(tape, inputs[i], state);
        bwd_states[i] = Some(state);
    }
    let bwd_states: Vec<LstmState> = bwd_states.into_iter().map(Option::unwrap).collect();

    let states = (0..m)
        .map(|i| tape.concat(&[fwd_states[i].h, bwd_states[i].h]))
        .collect();
    let final_h = tape.concat(&[fwd_states[m - 1].h, bwd_states[m - 1].h]);
    let final_c = tape.concat(&[fwd_states[m - 1].c, bwd_states[m - 1].c]);
    BiLstmStates { states, final_h, final_c }
}

/// The sentence encoder shared by the tagger, the span scorer and the
/// coreference head: an embedding table plus a bidirectional LSTM.
///
/// Parameter names: `enc.emb`, `enc.fwd.*`, `enc.bwd.*`.
pub struct Encoder {
    emb: NodeId,
    fwd: LstmCell,
    bwd: LstmCell,
}

/// Per-sentence encoder output on a tape.
pub struct EncodedSentence {
    /// Word embeddings x_1..x_M.
    pub embeddings: Vec<NodeId>,
    /// Contextual states h_1..h_M, each of length 2·d_hidden.
    pub states: Vec<NodeId>,
    /// Encoder state at the last word, used to initialise decoders.
    pub final_h: NodeId,
    pub final_c: NodeId,
}

impl Encoder {
    pub fn init_params(
        params: &mut Params,
        vocab_size: usize,
        d_emb: usize,
        d_hidden: usize,
        rng: &mut impl Rng,
    ) {
        params.insert_uniform("enc.emb", &[vocab_size, d_emb], rng);
        LstmCell::init(params, "enc.fwd", d_emb, d_hidden, rng);
        LstmCell::init(params, "enc.bwd", d_emb, d_hidden, rng);
    }

    pub fn register(tape: &mut Tape, params: &Params) -> Self {
        Encoder {
            emb: tape.param(params, "enc.emb"),
            fwd: LstmCell::register(tape, params, "enc.fwd"),
            bwd: LstmCell::register(tape, params, "enc.bwd"),
        }
    }

    pub fn encode(&self, tape: &mut Tape, token_ids: &[usize]) -> EncodedSentence {
        assert!(!token_ids.is_empty(), "encode: empty sentence");
        let embeddings: Vec<NodeId> =
            token_ids.iter().map(|&id| tape.row(self.emb, id)).collect();
        let out = bilstm_encode(tape, &self.fwd, &self.bwd, &embeddings);
        EncodedSentence {
            embeddings,
            states: out.states,
            final_h: out.final_h,
            final_c: out.final_c,
        }
    }
}
