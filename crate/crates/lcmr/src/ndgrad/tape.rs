//! Operation tape for reverse-mode gradient accumulation.
//!
//! The tape records the coarse-grained forward operations the models are
//! built from, each holding its input refs, output ref, and whatever
//! forward intermediates its backward rule needs (attention weights in
//! particular). Replaying the ops in reverse accumulates gradients into
//! node buffers and parameter `grad` arrays.
//!
//! Node values and gradients live in flat bump arenas; `clear` resets the
//! tape between batches while keeping capacity.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::ndgrad::math;
use crate::ndgrad::param::{ParamId, ParamStore};

/// Index of a value node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(u32);

#[derive(Debug, Clone, Copy)]
struct Span {
    off: usize,
    len: usize,
}

/// A memory matrix operand of [`Tape::attend`]: either a whole N×d
/// parameter or a set of rows gathered from one (word embeddings).
#[derive(Debug, Clone)]
pub enum MemRef {
    Full(ParamId),
    Rows(ParamId, Rc<Vec<u32>>),
}

impl MemRef {
    fn count(&self, store: &ParamStore) -> usize {
        match self {
            MemRef::Full(id) => store.get(*id).rows(),
            MemRef::Rows(_, rows) => rows.len(),
        }
    }

    fn width(&self, store: &ParamStore) -> usize {
        let id = match self {
            MemRef::Full(id) | MemRef::Rows(id, _) => *id,
        };
        store.get(id).row_len()
    }

    fn row<'a>(&self, store: &'a ParamStore, j: usize) -> &'a [f64] {
        match self {
            MemRef::Full(id) => store.get(*id).row(j),
            MemRef::Rows(id, rows) => store.get(*id).row(rows[j] as usize),
        }
    }

    fn row_index(&self, j: usize) -> usize {
        match self {
            MemRef::Full(_) => j,
            MemRef::Rows(_, rows) => rows[j] as usize,
        }
    }

    fn param(&self) -> ParamId {
        match self {
            MemRef::Full(id) | MemRef::Rows(id, _) => *id,
        }
    }

    fn check_rows(&self, store: &ParamStore) -> Result<()> {
        if let MemRef::Rows(id, rows) = self {
            let n = store.get(*id).rows();
            for &r in rows.iter() {
                if r as usize >= n {
                    return Err(Error::Index(format!(
                        "memory row {r} out of range for parameter '{}' with {n} rows",
                        store.get(*id).name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
enum Op {
    EmbedLookup {
        table: ParamId,
        row: usize,
        out: NodeId,
    },
    Concat {
        a: NodeId,
        b: NodeId,
        out: NodeId,
    },
    Attend {
        query: NodeId,
        keys: MemRef,
        values: MemRef,
        beta: f64,
        weights: Span,
        out: NodeId,
    },
    SigmoidDot {
        weights: ParamId,
        input: NodeId,
        out: NodeId,
    },
    Bce {
        pred: NodeId,
        label: f64,
        out: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
        out: NodeId,
    },
    Sum {
        input: NodeId,
        out: NodeId,
    },
    Mean {
        terms: Vec<NodeId>,
        out: NodeId,
    },
    Affine {
        weight: ParamId,
        bias: ParamId,
        input: NodeId,
        out: NodeId,
    },
    Relu {
        input: NodeId,
        out: NodeId,
    },
}

impl Op {
    fn out(&self) -> NodeId {
        match self {
            Op::EmbedLookup { out, .. }
            | Op::Concat { out, .. }
            | Op::Attend { out, .. }
            | Op::SigmoidDot { out, .. }
            | Op::Bce { out, .. }
            | Op::Mul { out, .. }
            | Op::Sum { out, .. }
            | Op::Mean { out, .. }
            | Op::Affine { out, .. }
            | Op::Relu { out, .. } => *out,
        }
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Span>,
    vals: Vec<f64>,
    grads: Vec<f64>,
    weights: Vec<f64>,
    ops: Vec<Op>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops all recorded nodes and ops, keeping allocated capacity.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.vals.clear();
        self.grads.clear();
        self.weights.clear();
        self.ops.clear();
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        let s = self.nodes[id.0 as usize];
        &self.vals[s.off..s.off + s.len]
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        debug_assert_eq!(v.len(), 1);
        v[0]
    }

    /// Gradient of the last backward pass w.r.t. a node.
    pub fn grad(&self, id: NodeId) -> &[f64] {
        let s = self.nodes[id.0 as usize];
        &self.grads[s.off..s.off + s.len]
    }

    /// Cached attention weights of the attend op that produced `out`.
    pub fn attention_weights(&self, out: NodeId) -> Option<&[f64]> {
        self.ops.iter().rev().find_map(|op| match op {
            Op::Attend { out: o, weights, .. } if *o == out => {
                Some(&self.weights[weights.off..weights.off + weights.len])
            }
            _ => None,
        })
    }

    fn alloc(&mut self, len: usize) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Span {
            off: self.vals.len(),
            len,
        });
        self.vals.resize(self.vals.len() + len, 0.0);
        self.grads.resize(self.grads.len() + len, 0.0);
        id
    }

    fn node_mut(&mut self, id: NodeId) -> &mut [f64] {
        let s = self.nodes[id.0 as usize];
        &mut self.vals[s.off..s.off + s.len]
    }

    /// An input node holding the given values. Gradients are accumulated
    /// for it but flow no further.
    pub fn leaf(&mut self, values: &[f64]) -> NodeId {
        let id = self.alloc(values.len());
        self.node_mut(id).copy_from_slice(values);
        id
    }

    /// Row `index` of an embedding table; backward adds the upstream
    /// gradient only to that row.
    pub fn embed_lookup(
        &mut self,
        store: &ParamStore,
        table: ParamId,
        index: usize,
    ) -> Result<NodeId> {
        let p = store.get(table);
        if index >= p.rows() {
            return Err(Error::Index(format!(
                "embed_lookup: row {index} out of range for '{}' with {} rows",
                p.name,
                p.rows()
            )));
        }
        let out = self.alloc(p.row_len());
        self.node_mut(out).copy_from_slice(store.get(table).row(index));
        self.ops.push(Op::EmbedLookup { table, row: index, out });
        Ok(out)
    }

    /// `a` followed by `b`; backward splits the gradient at `a.len()`.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        let out = self.alloc(la + lb);
        let sa = self.nodes[a.0 as usize];
        let sb = self.nodes[b.0 as usize];
        let so = self.nodes[out.0 as usize];
        self.vals.copy_within(sa.off..sa.off + sa.len, so.off);
        self.vals.copy_within(sb.off..sb.off + sb.len, so.off + la);
        let _ = lb;
        self.ops.push(Op::Concat { a, b, out });
        out
    }

    /// Scaled dot-product attention over memory rows: weights
    /// `a_j = softmax_j(beta * query . keys_j)` (cached on the tape),
    /// output the weighted sum of value rows.
    pub fn attend(
        &mut self,
        store: &ParamStore,
        query: NodeId,
        keys: MemRef,
        values: MemRef,
        beta: f64,
    ) -> Result<NodeId> {
        let n = keys.count(store);
        if n == 0 {
            return Err(Error::InvalidArgument(
                "attend: empty memory (no key rows)".into(),
            ));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "attend: beta must be > 0, got {beta}"
            )));
        }
        let d = self.value(query).len();
        if keys.width(store) != d || values.width(store) != d {
            return Err(Error::InvalidArgument(format!(
                "attend: query dim {d} does not match memory width {}/{}",
                keys.width(store),
                values.width(store)
            )));
        }
        if values.count(store) != n {
            return Err(Error::InvalidArgument(format!(
                "attend: {n} key rows vs {} value rows",
                values.count(store)
            )));
        }
        keys.check_rows(store)?;
        values.check_rows(store)?;

        let w_off = self.weights.len();
        {
            let sq = self.nodes[query.0 as usize];
            for j in 0..n {
                let q = &self.vals[sq.off..sq.off + sq.len];
                let s = math::dot(q, keys.row(store, j));
                self.weights.push(s);
            }
        }
        math::softmax_scaled(&mut self.weights[w_off..w_off + n], beta);
        debug_assert!(
            (self.weights[w_off..w_off + n].iter().sum::<f64>() - 1.0).abs() < 1e-9,
            "attention weights must sum to 1"
        );

        let out = self.alloc(d);
        for j in 0..n {
            let a = self.weights[w_off + j];
            let row = values.row(store, j);
            let so = self.nodes[out.0 as usize];
            for c in 0..d {
                self.vals[so.off + c] += a * row[c];
            }
        }
        self.ops.push(Op::Attend {
            query,
            keys,
            values,
            beta,
            weights: Span { off: w_off, len: n },
            out,
        });
        Ok(out)
    }

    /// `sigmoid(weights . input)`, numerically stable for large |logit|.
    pub fn sigmoid_dot(
        &mut self,
        store: &ParamStore,
        weights: ParamId,
        input: NodeId,
    ) -> Result<NodeId> {
        let w = store.get(weights);
        let z = self.value(input);
        if w.len() != z.len() {
            return Err(Error::InvalidArgument(format!(
                "sigmoid_dot: weight len {} vs input len {}",
                w.len(),
                z.len()
            )));
        }
        let v = math::sigmoid(math::dot(&w.value, z));
        let out = self.alloc(1);
        self.node_mut(out)[0] = v;
        self.ops.push(Op::SigmoidDot { weights, input, out });
        Ok(out)
    }

    /// Binary cross-entropy of a scalar prediction against a 0/1 label.
    pub fn bce_loss(&mut self, pred: NodeId, label: f64) -> Result<NodeId> {
        if label != 0.0 && label != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "bce_loss: label must be 0 or 1, got {label}"
            )));
        }
        if self.value(pred).len() != 1 {
            return Err(Error::InvalidArgument(
                "bce_loss: prediction must be scalar".into(),
            ));
        }
        let v = math::bce(self.scalar(pred), label);
        let out = self.alloc(1);
        self.node_mut(out)[0] = v;
        self.ops.push(Op::Bce { pred, label, out });
        Ok(out)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb {
            return Err(Error::InvalidArgument(format!(
                "mul: length mismatch {la} vs {lb}"
            )));
        }
        let out = self.alloc(la);
        let sa = self.nodes[a.0 as usize];
        let sb = self.nodes[b.0 as usize];
        let so = self.nodes[out.0 as usize];
        for c in 0..la {
            self.vals[so.off + c] = self.vals[sa.off + c] * self.vals[sb.off + c];
        }
        self.ops.push(Op::Mul { a, b, out });
        Ok(out)
    }

    /// Sum of all components, as a scalar node.
    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let v: f64 = self.value(input).iter().sum();
        let out = self.alloc(1);
        self.node_mut(out)[0] = v;
        self.ops.push(Op::Sum { input, out });
        out
    }

    /// Mean of scalar nodes (the per-batch loss reduction).
    pub fn mean(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("mean: no terms".into()));
        }
        for &t in terms {
            if self.value(t).len() != 1 {
                return Err(Error::InvalidArgument("mean: terms must be scalars".into()));
            }
        }
        let v = terms.iter().map(|&t| self.scalar(t)).sum::<f64>() / terms.len() as f64;
        let out = self.alloc(1);
        self.node_mut(out)[0] = v;
        self.ops.push(Op::Mean {
            terms: terms.to_vec(),
            out,
        });
        Ok(out)
    }

    /// Dense layer `weight * input + bias` with `weight` of shape
    /// (out_dim, in_dim) and `bias` of shape (out_dim,).
    pub fn affine(
        &mut self,
        store: &ParamStore,
        weight: ParamId,
        bias: ParamId,
        input: NodeId,
    ) -> Result<NodeId> {
        let w = store.get(weight);
        let b = store.get(bias);
        if w.shape.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "affine: weight '{}' must be a matrix, got shape {:?}",
                w.name, w.shape
            )));
        }
        let (rows, cols) = (w.shape[0], w.shape[1]);
        if self.value(input).len() != cols || b.len() != rows {
            return Err(Error::InvalidArgument(format!(
                "affine: weight {rows}x{cols} vs input len {} and bias len {}",
                self.value(input).len(),
                b.len()
            )));
        }
        let out = self.alloc(rows);
        let si = self.nodes[input.0 as usize];
        let so = self.nodes[out.0 as usize];
        for r in 0..rows {
            let wrow = w.row(r);
            let mut acc = b.value[r];
            for c in 0..cols {
                acc += wrow[c] * self.vals[si.off + c];
            }
            self.vals[so.off + r] = acc;
        }
        self.ops.push(Op::Affine {
            weight,
            bias,
            input,
            out,
        });
        Ok(out)
    }

    /// Rectifier.
    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let len = self.value(input).len();
        let out = self.alloc(len);
        let si = self.nodes[input.0 as usize];
        let so = self.nodes[out.0 as usize];
        for c in 0..len {
            self.vals[so.off + c] = self.vals[si.off + c].max(0.0);
        }
        self.ops.push(Op::Relu { input, out });
        out
    }

    /// Accumulates `d loss / d param` into every parameter touched in the
    /// forward pass, where the loss is the scalar output of the last
    /// recorded op. Node gradients are reset; parameter gradients are
    /// accumulated on top of whatever they already hold.
    pub fn backward(&mut self, store: &mut ParamStore) -> Result<()> {
        let tail = match self.ops.last() {
            Some(op) => op.out(),
            None => {
                return Err(Error::State(
                    "backward on an empty tape (no recorded ops)".into(),
                ))
            }
        };
        if self.value(tail).len() != 1 {
            return Err(Error::State(format!(
                "backward: tape tail must be a scalar loss, got length {}",
                self.value(tail).len()
            )));
        }

        self.grads.fill(0.0);
        let tail_span = self.nodes[tail.0 as usize];
        self.grads[tail_span.off] = 1.0;

        let nodes = &self.nodes;
        let span = |id: NodeId| nodes[id.0 as usize];

        // Scratch reused across ops; upstream gradients are copied out of
        // the arena first so reads never alias writes.
        let mut up: Vec<f64> = Vec::new();
        let mut dlda: Vec<f64> = Vec::new();
        let mut ds: Vec<f64> = Vec::new();

        for op in self.ops.iter().rev() {
            let so = span(op.out());
            up.clear();
            up.extend_from_slice(&self.grads[so.off..so.off + so.len]);

            match op {
                Op::EmbedLookup { table, row, out: _ } => {
                    let p = store.get_mut(*table);
                    let w = p.row_len();
                    let dst = &mut p.grad[row * w..(row + 1) * w];
                    for (d, g) in dst.iter_mut().zip(&up) {
                        *d += g;
                    }
                }
                Op::Concat { a, b, out: _ } => {
                    let sa = span(*a);
                    for c in 0..sa.len {
                        self.grads[sa.off + c] += up[c];
                    }
                    let sb = span(*b);
                    for c in 0..sb.len {
                        self.grads[sb.off + c] += up[sa.len + c];
                    }
                }
                Op::Attend {
                    query,
                    keys,
                    values,
                    beta,
                    weights,
                    out: _,
                } => {
                    let n = weights.len;
                    let a = &self.weights[weights.off..weights.off + n];
                    let sq = span(*query);
                    let d = sq.len;

                    // d loss / d a_j = up . values_j
                    dlda.clear();
                    for j in 0..n {
                        dlda.push(math::dot(&up, values.row(store, j)));
                    }
                    // Softmax jacobian: ds_j = a_j (dlda_j - sum_k a_k dlda_k)
                    let s: f64 = a.iter().zip(&dlda).map(|(aj, dj)| aj * dj).sum();
                    ds.clear();
                    for j in 0..n {
                        ds.push(a[j] * (dlda[j] - s));
                    }
                    // Query gradient: beta * sum_j ds_j keys_j
                    for j in 0..n {
                        let coef = beta * ds[j];
                        let krow = keys.row(store, j);
                        for c in 0..d {
                            self.grads[sq.off + c] += coef * krow[c];
                        }
                    }
                    // Key gradients: beta * ds_j * query
                    {
                        let q = &self.vals[sq.off..sq.off + d];
                        let kp = store.get_mut(keys.param());
                        let w = kp.row_len();
                        for j in 0..n {
                            let r = keys.row_index(j);
                            let coef = beta * ds[j];
                            let dst = &mut kp.grad[r * w..(r + 1) * w];
                            for c in 0..d {
                                dst[c] += coef * q[c];
                            }
                        }
                    }
                    // Value gradients: a_j * upstream
                    {
                        let vp = store.get_mut(values.param());
                        let w = vp.row_len();
                        for j in 0..n {
                            let r = values.row_index(j);
                            let dst = &mut vp.grad[r * w..(r + 1) * w];
                            for c in 0..d {
                                dst[c] += a[j] * up[c];
                            }
                        }
                    }
                }
                Op::SigmoidDot {
                    weights,
                    input,
                    out,
                } => {
                    let o = self.vals[span(*out).off];
                    let coef = up[0] * o * (1.0 - o);
                    let si = span(*input);
                    {
                        let w = store.get(*weights);
                        for c in 0..si.len {
                            self.grads[si.off + c] += coef * w.value[c];
                        }
                    }
                    let w = store.get_mut(*weights);
                    for c in 0..si.len {
                        w.grad[c] += coef * self.vals[si.off + c];
                    }
                }
                Op::Bce { pred, label, out: _ } => {
                    let sp = span(*pred);
                    let p = math::clamp_prob(self.vals[sp.off]);
                    let dpred = -(label / p) + (1.0 - label) / (1.0 - p);
                    self.grads[sp.off] += up[0] * dpred;
                }
                Op::Mul { a, b, out: _ } => {
                    let sa = span(*a);
                    let sb = span(*b);
                    for c in 0..sa.len {
                        let av = self.vals[sa.off + c];
                        let bv = self.vals[sb.off + c];
                        self.grads[sa.off + c] += up[c] * bv;
                        self.grads[sb.off + c] += up[c] * av;
                    }
                }
                Op::Sum { input, out: _ } => {
                    let si = span(*input);
                    for c in 0..si.len {
                        self.grads[si.off + c] += up[0];
                    }
                }
                Op::Mean { terms, out: _ } => {
                    let g = up[0] / terms.len() as f64;
                    for &t in terms {
                        let st = span(t);
                        self.grads[st.off] += g;
                    }
                }
                Op::Affine {
                    weight,
                    bias,
                    input,
                    out: _,
                } => {
                    let si = span(*input);
                    let (rows, cols) = {
                        let w = store.get(*weight);
                        (w.shape[0], w.shape[1])
                    };
                    // d input = W^T up
                    {
                        let w = store.get(*weight);
                        for r in 0..rows {
                            let wrow = w.row(r);
                            for c in 0..cols {
                                self.grads[si.off + c] += up[r] * wrow[c];
                            }
                        }
                    }
                    // dW = up x^T, db = up
                    {
                        let w = store.get_mut(*weight);
                        for r in 0..rows {
                            let dst = &mut w.grad[r * cols..(r + 1) * cols];
                            for c in 0..cols {
                                dst[c] += up[r] * self.vals[si.off + c];
                            }
                        }
                    }
                    let b = store.get_mut(*bias);
                    for r in 0..rows {
                        b.grad[r] += up[r];
                    }
                }
                Op::Relu { input, out } => {
                    let si = span(*input);
                    let so = span(*out);
                    for c in 0..si.len {
                        if self.vals[so.off + c] > 0.0 {
                            self.grads[si.off + c] += up[c];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
