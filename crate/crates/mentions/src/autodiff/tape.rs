//! Define-by-run operation tape.
//!
//! Forward calls append nodes; nodes always refer to earlier nodes, so the
//! tape order is a topological order and `backward` is a single reverse
//! sweep. One tape covers one forward/backward pass over one example; it
//! is rebuilt per example and confined to one thread.
//!
//! Shape mismatches are programmer errors and panic with the op name and
//! the offending shapes. Data-dependent failures (non-finite losses, NaN
//! gradients) are surfaced as `Result`s higher up the stack.

use std::collections::BTreeMap;
use std::collections::HashMap;

use super::nn::Params;
use super::{ops, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatVec { w: NodeId, x: NodeId },
    Add { a: NodeId, b: NodeId },
    AddN { parts: Vec<NodeId> },
    Mul { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    AddConst { x: NodeId },
    Concat { parts: Vec<NodeId> },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    Tanh { x: NodeId },
    Softmax { x: NodeId },
    Log { x: NodeId },
    Exp { x: NodeId },
    Pick { x: NodeId, index: usize },
    Dot { a: NodeId, b: NodeId },
    Sum { x: NodeId },
    Row { table: NodeId, index: usize },
    /// Σ_k weights[k] · parts[k], weights a vector of len(parts).
    WeightedSum { weights: NodeId, parts: Vec<NodeId> },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only record of one forward computation.
pub struct Tape {
    nodes: Vec<Node>,
    /// Parameter name → node, so each parameter appears once per tape.
    param_nodes: HashMap<String, NodeId>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), param_nodes: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    /// Record a constant (non-parameter) input.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.leaf(Tensor::scalar(v))
    }

    /// Record a named parameter; repeated registration returns the same node.
    /// The value is snapshotted, so later parameter updates do not affect
    /// an in-flight tape.
    pub fn param(&mut self, params: &Params, name: &str) -> NodeId {
        if let Some(&id) = self.param_nodes.get(name) {
            return id;
        }
        let tensor = params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
            .clone();
        let id = self.push(Op::Leaf, tensor);
        self.param_nodes.insert(name.to_string(), id);
        id
    }

    // ── Forward ops ──────────────────────────────────────────────

    /// y = W·x for a (rows × cols) matrix and a length-cols vector.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let wt = self.value(w);
        let xt = self.value(x);
        assert_eq!(
            wt.shape().len(),
            2,
            "matvec: weight must be a matrix, got shape {:?}",
            wt.shape()
        );
        let (rows, cols) = (wt.rows(), wt.cols());
        assert_eq!(
            cols,
            xt.len(),
            "matvec: inner dims disagree, W is {rows}x{cols} but x has length {}",
            xt.len()
        );
        let mut out = vec![0.0; rows];
        ops::matvec_into(wt.data(), rows, cols, xt.data(), &mut out);
        self.push(Op::MatVec { w, x }, Tensor::vector(out))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "add: shapes differ, {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let shape = ta.shape().to_vec();
        self.push(Op::Add { a, b }, Tensor::from_vec(&shape, data))
    }

    /// Element-wise sum of any number of same-shaped tensors.
    pub fn add_n(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "add_n: empty part list");
        let shape = self.value(parts[0]).shape().to_vec();
        let mut data = vec![0.0; self.value(parts[0]).len()];
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.shape(), &shape[..], "add_n: shapes differ, {:?} vs {:?}", t.shape(), shape);
            for (acc, v) in data.iter_mut().zip(t.data()) {
                *acc += v;
            }
        }
        self.push(Op::AddN { parts: parts.to_vec() }, Tensor::from_vec(&shape, data))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "mul: shapes differ, {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let shape = ta.shape().to_vec();
        self.push(Op::Mul { a, b }, Tensor::from_vec(&shape, data))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let data = self.value(x).data().iter().map(|v| v * c).collect();
        let shape = self.value(x).shape().to_vec();
        self.push(Op::Scale { x, c }, Tensor::from_vec(&shape, data))
    }

    pub fn add_const(&mut self, x: NodeId, c: f64) -> NodeId {
        let data = self.value(x).data().iter().map(|v| v + c).collect();
        let shape = self.value(x).shape().to_vec();
        self.push(Op::AddConst { x }, Tensor::from_vec(&shape, data))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat: empty part list");
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        self.push(Op::Concat { parts: parts.to_vec() }, Tensor::vector(data))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let mut out = vec![0.0; t.len()];
        ops::relu(t.data(), &mut out);
        let shape = t.shape().to_vec();
        self.push(Op::Relu { x }, Tensor::from_vec(&shape, out))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let mut out = vec![0.0; t.len()];
        ops::sigmoid(t.data(), &mut out);
        let shape = t.shape().to_vec();
        self.push(Op::Sigmoid { x }, Tensor::from_vec(&shape, out))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let mut out = vec![0.0; t.len()];
        ops::tanh(t.data(), &mut out);
        let shape = t.shape().to_vec();
        self.push(Op::Tanh { x }, Tensor::from_vec(&shape, out))
    }

    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let mut out = t.data().to_vec();
        ops::softmax_in_place(&mut out);
        let shape = t.shape().to_vec();
        self.push(Op::Softmax { x }, Tensor::from_vec(&shape, out))
    }

    pub fn log(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v.ln()).collect();
        let shape = t.shape().to_vec();
        self.push(Op::Log { x }, Tensor::from_vec(&shape, data))
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v.exp()).collect();
        let shape = t.shape().to_vec();
        self.push(Op::Exp { x }, Tensor::from_vec(&shape, data))
    }

    /// Scalar element `x[index]`.
    pub fn pick(&mut self, x: NodeId, index: usize) -> NodeId {
        let t = self.value(x);
        assert!(
            index < t.len(),
            "pick: index {index} out of range for length {}",
            t.len()
        );
        let v = t.data()[index];
        self.push(Op::Pick { x, index }, Tensor::scalar(v))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.len(),
            tb.len(),
            "dot: lengths differ, {} vs {}",
            ta.len(),
            tb.len()
        );
        let v = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).sum();
        self.push(Op::Dot { a, b }, Tensor::scalar(v))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).data().iter().sum();
        self.push(Op::Sum { x }, Tensor::scalar(v))
    }

    /// Row `index` of a matrix-shaped node (embedding lookup).
    pub fn row(&mut self, table: NodeId, index: usize) -> NodeId {
        let t = self.value(table);
        let (rows, cols) = (t.rows(), t.cols());
        assert!(index < rows, "row: index {index} out of range for {rows} rows");
        let data = t.data()[index * cols..(index + 1) * cols].to_vec();
        self.push(Op::Row { table, index }, Tensor::vector(data))
    }

    /// Σ_k weights[k]·parts[k]; `weights` is a vector with one entry per part.
    pub fn weighted_sum(&mut self, weights: NodeId, parts: &[NodeId]) -> NodeId {
        let wt = self.value(weights);
        assert_eq!(
            wt.len(),
            parts.len(),
            "weighted_sum: {} weights for {} parts",
            wt.len(),
            parts.len()
        );
        assert!(!parts.is_empty(), "weighted_sum: empty part list");
        let dim = self.value(parts[0]).len();
        let mut out = vec![0.0; dim];
        for (k, &p) in parts.iter().enumerate() {
            let t = self.value(p);
            assert_eq!(t.len(), dim, "weighted_sum: part {k} has length {}", t.len());
            let w = self.value(weights).data()[k];
            for (o, v) in out.iter_mut().zip(t.data()) {
                *o += w * v;
            }
        }
        self.push(
            Op::WeightedSum { weights, parts: parts.to_vec() },
            Tensor::vector(out),
        )
    }

    /// Arithmetic mean of same-shaped tensors.
    pub fn mean(&mut self, parts: &[NodeId]) -> NodeId {
        let s = self.add_n(parts);
        self.scale(s, 1.0 / parts.len() as f64)
    }

    /// W·x + b.
    pub fn affine(&mut self, w: NodeId, x: NodeId, b: NodeId) -> NodeId {
        let wx = self.matvec(w, x);
        self.add(wx, b)
    }

    // ── Backward ─────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Panics if the loss is not scalar.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        assert!(
            self.value(loss).is_scalar(),
            "backward: loss must be scalar, got shape {:?}",
            self.value(loss).shape()
        );
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.backward_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, delta: &[f64]) {
        let slot = &mut grads[id.0];
        match slot {
            Some(t) => {
                for (acc, d) in t.data_mut().iter_mut().zip(delta) {
                    *acc += d;
                }
            }
            None => {
                let shape = self.value(id).shape().to_vec();
                *slot = Some(Tensor::from_vec(&shape, delta.to_vec()));
            }
        }
    }

    fn backward_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatVec { w, x } => {
                let wt = self.value(*w);
                let xt = self.value(*x);
                let (rows, cols) = (wt.rows(), wt.cols());
                let mut dw = vec![0.0; rows * cols];
                for r in 0..rows {
                    for c in 0..cols {
                        dw[r * cols + c] = gd[r] * xt.data()[c];
                    }
                }
                self.accumulate(grads, *w, &dw);
                let mut dx = vec![0.0; cols];
                for r in 0..rows {
                    let row = &wt.data()[r * cols..(r + 1) * cols];
                    for c in 0..cols {
                        dx[c] += row[c] * gd[r];
                    }
                }
                self.accumulate(grads, *x, &dx);
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, gd);
                self.accumulate(grads, *b, gd);
            }
            Op::AddN { parts } => {
                for &p in parts {
                    self.accumulate(grads, p, gd);
                }
            }
            Op::Mul { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da: Vec<f64> = gd.iter().zip(tb.data()).map(|(g, v)| g * v).collect();
                let db: Vec<f64> = gd.iter().zip(ta.data()).map(|(g, v)| g * v).collect();
                self.accumulate(grads, *a, &da);
                self.accumulate(grads, *b, &db);
            }
            Op::Scale { x, c } => {
                let dx: Vec<f64> = gd.iter().map(|g| g * c).collect();
                self.accumulate(grads, *x, &dx);
            }
            Op::AddConst { x } => {
                self.accumulate(grads, *x, gd);
            }
            Op::Concat { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    self.accumulate(grads, p, &gd[offset..offset + len]);
                    offset += len;
                }
            }
            Op::Relu { x } => {
                let xt = self.value(*x);
                let dx: Vec<f64> = gd
                    .iter()
                    .zip(xt.data())
                    .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accumulate(grads, *x, &dx);
            }
            Op::Sigmoid { x } => {
                let y = self.value(NodeId(i));
                let dx: Vec<f64> = gd
                    .iter()
                    .zip(y.data())
                    .map(|(g, &p)| g * p * (1.0 - p))
                    .collect();
                self.accumulate(grads, *x, &dx);
            }
            Op::Tanh { x } => {
                let y = self.value(NodeId(i));
                let dx: Vec<f64> = gd
                    .iter()
                    .zip(y.data())
                    .map(|(g, &t)| g * (1.0 - t * t))
                    .collect();
                self.accumulate(grads, *x, &dx);
            }
            Op::Softmax { x } => {
                let y = self.value(NodeId(i));
                let inner: f64 = gd.iter().zip(y.data()).map(|(g, s)| g * s).sum();
                let dx: Vec<f64> = gd
                    .iter()
                    .zip(y.data())
                    .map(|(g, &s)| s * (g - inner))
                    .collect();
                self.accumulate(grads, *x, &dx);
            }
            Op::Log { x } => {
                let xt = self.value(*x);
                let dx: Vec<f64> = gd.iter().zip(xt.data()).map(|(g, v)| g / v).collect();
                self.accumulate(grads, *x, &dx);
            }
            Op::Exp { x } => {
                let y = self.value(NodeId(i));
                let dx: Vec<f64> = gd.iter().zip(y.data()).map(|(g, v)| g * v).collect();
                self.accumulate(grads, *x, &dx);
            }
            Op::Pick { x, index } => {
                let mut dx = vec![0.0; self.value(*x).len()];
                dx[*index] = gd[0];
                self.accumulate(grads, *x, &dx);
            }
            Op::Dot { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da: Vec<f64> = tb.data().iter().map(|v| gd[0] * v).collect();
                let db: Vec<f64> = ta.data().iter().map(|v| gd[0] * v).collect();
                self.accumulate(grads, *a, &da);
                self.accumulate(grads, *b, &db);
            }
            Op::Sum { x } => {
                let dx = vec![gd[0]; self.value(*x).len()];
                self.accumulate(grads, *x, &dx);
            }
            Op::Row { table, index } => {
                let t = self.value(*table);
                let cols = t.cols();
                let mut dt = vec![0.0; t.len()];
                dt[index * cols..(index + 1) * cols].copy_from_slice(gd);
                self.accumulate(grads, *table, &dt);
            }
            Op::WeightedSum { weights, parts } => {
                let wt = self.value(*weights);
                let mut dw = vec![0.0; wt.len()];
                for (k, &p) in parts.iter().enumerate() {
                    let pt = self.value(p);
                    dw[k] = gd.iter().zip(pt.data()).map(|(g, v)| g * v).sum();
                    let dp: Vec<f64> = gd.iter().map(|g| g * wt.data()[k]).collect();
                    self.accumulate(grads, p, &dp);
                }
                self.accumulate(grads, *weights, &dw);
            }
        }
    }
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. a node, if any path reached it.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Gradients keyed by parameter name. Parameters the loss never
    /// touched get an exactly-zero tensor of the right shape.
    pub fn into_param_grads(self, tape: &Tape, params: &Params) -> BTreeMap<String, Tensor> {
        let mut out = BTreeMap::new();
        for (name, tensor) in params.iter() {
            let grad = tape
                .param_nodes
                .get(name)
                .and_then(|id| self.grads[id.0].clone())
                .unwrap_or_else(|| Tensor::zeros(tensor.shape()));
            out.insert(name.clone(), grad);
        }
        out
    }

    /// Merge another gradient map into `into`, adding element-wise.
    pub fn accumulate_param_grads(
        into: &mut BTreeMap<String, Tensor>,
        from: BTreeMap<String, Tensor>,
    ) {
        for (name, tensor) in from {
            match into.get_mut(&name) {
                Some(acc) => {
                    for (a, v) in acc.data_mut().iter_mut().zip(tensor.data()) {
                        *a += v;
                    }
                }
                None => {
                    into.insert(name, tensor);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::nn::Params;

    #[test]
    fn sum_gradient_is_all_ones() {
        let mut params = Params::new();
        params.insert("x", Tensor::vector(vec![1.0, -2.0, 3.0]));
        let mut tape = Tape::new();
        let x = tape.param(&params, "x");
        let loss = tape.sum(x);
        let grads = tape.backward(loss).into_param_grads(&tape, &params);
        assert_eq!(grads["x"].data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn sigmoid_gradient_at_zero_is_quarter() {
        let mut params = Params::new();
        params.insert("x", Tensor::scalar(0.0));
        let mut tape = Tape::new();
        let x = tape.param(&params, "x");
        let s = tape.sigmoid(x);
        let loss = tape.sum(s);
        assert!((tape.value(s).item() - 0.5).abs() < 1e-15);
        let grads = tape.backward(loss).into_param_grads(&tape, &params);
        assert!((grads["x"].item() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_of_uniform_logits() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![0.0; 4]));
        let s = tape.softmax(x);
        for &p in tape.value(s).data() {
            assert!((p - 0.25).abs() < 1e-12);
        }
        let total: f64 = tape.value(s).data().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn relu_clamps_negatives() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![-1.0, 2.0]));
        let r = tape.relu(x);
        assert_eq!(tape.value(r).data(), &[0.0, 2.0]);
    }

    #[test]
    fn untouched_parameter_gets_exact_zero_gradient() {
        let mut params = Params::new();
        params.insert("used", Tensor::scalar(2.0));
        params.insert("unused", Tensor::vector(vec![1.0, 1.0]));
        let mut tape = Tape::new();
        let x = tape.param(&params, "used");
        let loss = tape.scale(x, 3.0);
        let grads = tape.backward(loss).into_param_grads(&tape, &params);
        assert_eq!(grads["unused"].data(), &[0.0, 0.0]);
        assert_eq!(grads["used"].item(), 3.0);
    }

    #[test]
    #[should_panic(expected = "matvec: inner dims disagree")]
    fn matvec_shape_mismatch_panics() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_vec(&[2, 3], vec![0.0; 6]));
        let x = tape.leaf(Tensor::vector(vec![0.0; 2]));
        tape.matvec(w, x);
    }

    #[test]
    #[should_panic(expected = "loss must be scalar")]
    fn non_scalar_loss_panics() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        tape.backward(x);
    }
}
