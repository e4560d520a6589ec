//! Tape-based reverse-mode automatic differentiation over 2-D `f64` arrays.
//!
//! A [`Graph`] records every operation of one forward pass. Batched
//! sequence data is stored as stacked blocks: a batch of `B` sequences of
//! length `L` is a `[B*L x d]` matrix, and the block-aware operations
//! (attention, sequence projection, pooling, tiling) take the block length
//! as a parameter.

use std::collections::HashMap;

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{PolicyError, Result};
use crate::params::{ParamId, ParamStore};

pub type Tensor = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4;

enum Op {
    Leaf,
    Param,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    AddTiled(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    RowMask(NodeId, Vec<f64>),
    Gelu(NodeId),
    Exp(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    Gather {
        table: NodeId,
        ids: Vec<usize>,
    },
    SeqProject {
        w: NodeId,
        x: NodeId,
    },
    Attention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        lq: usize,
        lk: usize,
        heads: usize,
        probs: Vec<Tensor>,
    },
    ConcatBlocks {
        a: NodeId,
        la: usize,
        b: NodeId,
        lb: usize,
    },
    ConcatCols(NodeId, NodeId),
    MeanBlocks {
        x: NodeId,
        block: usize,
    },
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Pick {
        x: NodeId,
        idx: Vec<usize>,
        weights: Vec<f64>,
    },
    Sum(NodeId),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// One recorded forward pass.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, NodeId>,
}

fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn check_blocks(rows: usize, block: usize, what: &str) -> Result<usize> {
    if block == 0 || rows % block != 0 {
        return Err(PolicyError::Shape(format!("{what}: {rows} rows are not a whole number of {block}-row blocks")));
    }
    Ok(rows / block)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
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

    /// Shapes of every recorded node, in recording order.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.nodes.iter().map(|n| n.value.dim()).collect()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn dim(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.dim()
    }

    /// A constant input.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// A parameter; repeated calls with the same id share one node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&n) = self.params.get(&id) {
            return n;
        }
        let n = self.push(store.get(id).clone(), Op::Param);
        self.params.insert(id, n);
        n
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (da, db) = (self.dim(a), self.dim(b));
        if da.1 != db.0 {
            return Err(PolicyError::Shape(format!("matmul {da:?} x {db:?}")));
        }
        let v = self.value(a).dot(self.value(b));
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.dim(a) != self.dim(b) {
            return Err(PolicyError::Shape(format!("add {:?} + {:?}", self.dim(a), self.dim(b))));
        }
        let v = self.value(a) + self.value(b);
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// `x + bias` with a `[1 x n]` bias broadcast over rows.
    pub fn add_row(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (dx, db) = (self.dim(x), self.dim(bias));
        if db.0 != 1 || db.1 != dx.1 {
            return Err(PolicyError::Shape(format!("add_row {dx:?} + {db:?}")));
        }
        let v = self.value(x) + self.value(bias);
        Ok(self.push(v, Op::AddRow(x, bias)))
    }

    /// Adds `p` (`[L x n]`) to every `L`-row block of `x`.
    pub fn add_tiled(&mut self, x: NodeId, p: NodeId) -> Result<NodeId> {
        let (dx, dp) = (self.dim(x), self.dim(p));
        if dp.1 != dx.1 {
            return Err(PolicyError::Shape(format!("add_tiled {dx:?} + {dp:?}")));
        }
        let blocks = check_blocks(dx.0, dp.0, "add_tiled")?;
        let mut v = self.value(x).clone();
        let pv = self.value(p);
        for b in 0..blocks {
            let mut blk = v.slice_mut(s![b * dp.0..(b + 1) * dp.0, ..]);
            blk += pv;
        }
        Ok(self.push(v, Op::AddTiled(x, p)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.dim(a) != self.dim(b) {
            return Err(PolicyError::Shape(format!("mul {:?} * {:?}", self.dim(a), self.dim(b))));
        }
        let v = self.value(a) * self.value(b);
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let v = self.value(x) * c;
        self.push(v, Op::Scale(x, c))
    }

    /// Multiplies row `r` by the constant `mask[r]`.
    pub fn row_mask(&mut self, x: NodeId, mask: Vec<f64>) -> Result<NodeId> {
        if mask.len() != self.dim(x).0 {
            return Err(PolicyError::Shape(format!("row_mask {} rows, mask {}", self.dim(x).0, mask.len())));
        }
        let mut v = self.value(x).clone();
        for (mut row, &m) in v.rows_mut().into_iter().zip(&mask) {
            row *= m;
        }
        Ok(self.push(v, Op::RowMask(x, mask)))
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let v = self
            .value(x)
            .mapv(|z| 0.5 * z * (1.0 + (GELU_C * (z + 0.044715 * z * z * z)).tanh()));
        self.push(v, Op::Gelu(x))
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).mapv(f64::exp);
        self.push(v, Op::Exp(x))
    }

    /// Row-wise layer normalization with `[1 x n]` gain and shift.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let n = self.dim(x).1;
        if self.dim(gamma) != (1, n) || self.dim(beta) != (1, n) {
            return Err(PolicyError::Shape(format!("layer_norm over {n} columns")));
        }
        let xv = self.value(x);
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / n as f64;
            row.mapv_inplace(|v| v - mean);
            let var = row.fold(0.0, |a, &v| a + v * v) / n as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| v * inv);
            inv_std.push(inv);
        }
        let v = &xhat * self.value(gamma) + self.value(beta);
        Ok(self.push(
            v,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    /// Row lookup: output row `i` is `table[ids[i]]`.
    pub fn gather(&mut self, table: NodeId, ids: Vec<usize>) -> Result<NodeId> {
        let (rows, cols) = self.dim(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(PolicyError::Shape(format!("gather id {bad} from {rows} rows")));
        }
        let tv = self.value(table);
        let mut v = Tensor::zeros((ids.len(), cols));
        for (mut row, &i) in v.rows_mut().into_iter().zip(&ids) {
            row.assign(&tv.row(i));
        }
        Ok(self.push(v, Op::Gather { table, ids }))
    }

    /// Per block `X_b` of `x`, computes `W X_b`: mixes positions, mapping
    /// `L_in`-row blocks to `L_out`-row blocks where `w` is `[L_out x L_in]`.
    pub fn seq_project(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (lo, li) = self.dim(w);
        let (rows, cols) = self.dim(x);
        let blocks = check_blocks(rows, li, "seq_project")?;
        let wv = self.value(w);
        let xv = self.value(x);
        let mut v = Tensor::zeros((blocks * lo, cols));
        for b in 0..blocks {
            let out = wv.dot(&xv.slice(s![b * li..(b + 1) * li, ..]));
            v.slice_mut(s![b * lo..(b + 1) * lo, ..]).assign(&out);
        }
        Ok(self.push(v, Op::SeqProject { w, x }))
    }

    /// Multi-head scaled dot-product attention applied independently to
    /// each block: queries come in `lq`-row blocks, keys and values in
    /// `lk`-row blocks, and each head uses a contiguous column slice.
    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId, lq: usize, lk: usize, heads: usize) -> Result<NodeId> {
        let (qr, d) = self.dim(q);
        let (kr, dk) = self.dim(k);
        if self.dim(v) != (kr, dk) || dk != d || heads == 0 || d % heads != 0 {
            return Err(PolicyError::Shape(format!(
                "attention q {:?} k {:?} v {:?} heads {heads}",
                self.dim(q),
                self.dim(k),
                self.dim(v)
            )));
        }
        let blocks = check_blocks(qr, lq, "attention queries")?;
        if check_blocks(kr, lk, "attention keys")? != blocks {
            return Err(PolicyError::Shape("attention query and key batch sizes differ".into()));
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let mut out = Tensor::zeros((qr, d));
        let mut probs = Vec::with_capacity(blocks * heads);
        for b in 0..blocks {
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                let qb = qv.slice(s![b * lq..(b + 1) * lq, cols.clone()]);
                let kb = kv.slice(s![b * lk..(b + 1) * lk, cols.clone()]);
                let vb = vv.slice(s![b * lk..(b + 1) * lk, cols.clone()]);
                let a = softmax_rows(&(qb.dot(&kb.t()) * scale));
                out.slice_mut(s![b * lq..(b + 1) * lq, cols]).assign(&a.dot(&vb));
                probs.push(a);
            }
        }
        Ok(self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                lq,
                lk,
                heads,
                probs,
            },
        ))
    }

    /// Attention weights recorded by an attention node, one `[lq x lk]`
    /// matrix per (block, head).
    pub fn attention_probs(&self, id: NodeId) -> Option<&[Tensor]> {
        match &self.nodes[id.0].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Stacks each `la`-row block of `a` on top of the matching `lb`-row
    /// block of `b`.
    pub fn concat_blocks(&mut self, a: NodeId, la: usize, b: NodeId, lb: usize) -> Result<NodeId> {
        let (ar, ac) = self.dim(a);
        let (br, bc) = self.dim(b);
        let blocks = check_blocks(ar, la, "concat_blocks")?;
        if ac != bc || check_blocks(br, lb, "concat_blocks")? != blocks {
            return Err(PolicyError::Shape(format!("concat_blocks {:?} / {:?}", (ar, ac), (br, bc))));
        }
        let l = la + lb;
        let mut v = Tensor::zeros((blocks * l, ac));
        for i in 0..blocks {
            v.slice_mut(s![i * l..i * l + la, ..])
                .assign(&self.value(a).slice(s![i * la..(i + 1) * la, ..]));
            v.slice_mut(s![i * l + la..(i + 1) * l, ..])
                .assign(&self.value(b).slice(s![i * lb..(i + 1) * lb, ..]));
        }
        Ok(self.push(v, Op::ConcatBlocks { a, la, b, lb }))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.dim(a).0 != self.dim(b).0 {
            return Err(PolicyError::Shape(format!("concat_cols {:?} | {:?}", self.dim(a), self.dim(b))));
        }
        let v = ndarray::concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("row counts checked");
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    /// Mean of each `block`-row block: `[B*block x n] -> [B x n]`.
    pub fn mean_blocks(&mut self, x: NodeId, block: usize) -> Result<NodeId> {
        let (rows, cols) = self.dim(x);
        let blocks = check_blocks(rows, block, "mean_blocks")?;
        let xv = self.value(x);
        let mut v = Tensor::zeros((blocks, cols));
        for b in 0..blocks {
            let m = xv
                .slice(s![b * block..(b + 1) * block, ..])
                .mean_axis(Axis(0))
                .expect("non-empty block");
            v.row_mut(b).assign(&m);
        }
        Ok(self.push(v, Op::MeanBlocks { x, block }))
    }

    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let v = softmax_rows(self.value(x));
        self.push(v, Op::Softmax(x))
    }

    pub fn log_softmax(&mut self, x: NodeId) -> NodeId {
        let mut v = self.value(x).clone();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &z| m.max(z));
            let lse = max + row.fold(0.0, |a, &z| a + (z - max).exp()).ln();
            row.mapv_inplace(|z| z - lse);
        }
        self.push(v, Op::LogSoftmax(x))
    }

    /// Scalar `sum_r weights[r] * x[r, idx[r]]`.
    pub fn pick(&mut self, x: NodeId, idx: Vec<usize>, weights: Vec<f64>) -> Result<NodeId> {
        let (rows, cols) = self.dim(x);
        if idx.len() != rows || weights.len() != rows || idx.iter().any(|&i| i >= cols) {
            return Err(PolicyError::Shape(format!("pick from {:?}", (rows, cols))));
        }
        let xv = self.value(x);
        let total: f64 = idx.iter().zip(&weights).enumerate().map(|(r, (&i, &w))| w * xv[[r, i]]).sum();
        Ok(self.push(Tensor::from_elem((1, 1), total), Op::Pick { x, idx, weights }))
    }

    /// Sum of all entries as a `[1 x 1]` scalar.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v = Tensor::from_elem((1, 1), self.value(x).sum());
        self.push(v, Op::Sum(x))
    }

    /// Value of a `[1 x 1]` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id)[[0, 0]]
    }

    /// Reverse pass from a scalar root.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if self.nodes.is_empty() || root.0 >= self.nodes.len() {
            return Err(PolicyError::State("backward called without a recorded forward pass".into()));
        }
        if self.dim(root) != (1, 1) {
            return Err(PolicyError::Shape(format!("backward root must be a scalar, got {:?}", self.dim(root))));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::ones((1, 1)));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf | Op::Param) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = |id: NodeId| &self.nodes[id.0].value;
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.dot(&val(*b).t()));
                accumulate(grads, *b, val(*a).t().dot(g));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddRow(x, bias) => {
                accumulate(grads, *x, g.clone());
                accumulate(grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::AddTiled(x, p) => {
                let l = val(*p).nrows();
                let mut gp = Tensor::zeros(val(*p).dim());
                for blk in g.axis_chunks_iter(Axis(0), l) {
                    gp += &blk;
                }
                accumulate(grads, *x, g.clone());
                accumulate(grads, *p, gp);
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g * val(*b));
                accumulate(grads, *b, g * val(*a));
            }
            Op::Scale(x, c) => accumulate(grads, *x, g * *c),
            Op::RowMask(x, mask) => {
                let mut gx = g.clone();
                for (mut row, &m) in gx.rows_mut().into_iter().zip(mask) {
                    row *= m;
                }
                accumulate(grads, *x, gx);
            }
            Op::Gelu(x) => {
                let mut gx = g.clone();
                Zip::from(&mut gx).and(val(*x)).for_each(|d, &z| {
                    let t = (GELU_C * (z + 0.044715 * z * z * z)).tanh();
                    let dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * z * z);
                    *d *= 0.5 * (1.0 + t) + 0.5 * z * dt;
                });
                accumulate(grads, *x, gx);
            }
            Op::Exp(x) => accumulate(grads, *x, g * &node.value),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                accumulate(grads, *gamma, (g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                accumulate(grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                let dxhat = g * val(*gamma);
                let n = xhat.ncols() as f64;
                let mut gx = Tensor::zeros(xhat.dim());
                for (r, mut row) in gx.rows_mut().into_iter().enumerate() {
                    let dh = dxhat.row(r);
                    let xh = xhat.row(r);
                    let s1 = dh.sum();
                    let s2 = dh.dot(&xh);
                    let inv = inv_std[r];
                    Zip::from(&mut row).and(&dh).and(&xh).for_each(|o, &d, &h| {
                        *o = inv / n * (n * d - s1 - h * s2);
                    });
                }
                accumulate(grads, *x, gx);
            }
            Op::Gather { table, ids } => {
                let mut gt = Tensor::zeros(val(*table).dim());
                for (row, &i) in g.rows().into_iter().zip(ids) {
                    let mut dst = gt.row_mut(i);
                    dst += &row;
                }
                accumulate(grads, *table, gt);
            }
            Op::SeqProject { w, x } => {
                let wv = val(*w);
                let xv = val(*x);
                let (lo, li) = wv.dim();
                let mut gw = Tensor::zeros(wv.dim());
                let mut gx = Tensor::zeros(xv.dim());
                for b in 0..xv.nrows() / li {
                    let gb = g.slice(s![b * lo..(b + 1) * lo, ..]);
                    let xb = xv.slice(s![b * li..(b + 1) * li, ..]);
                    gw += &gb.dot(&xb.t());
                    gx.slice_mut(s![b * li..(b + 1) * li, ..]).assign(&wv.t().dot(&gb));
                }
                accumulate(grads, *w, gw);
                accumulate(grads, *x, gx);
            }
            Op::Attention {
                q,
                k,
                v,
                lq,
                lk,
                heads,
                probs,
            } => {
                let (qv, kv, vv) = (val(*q), val(*k), val(*v));
                let d = qv.ncols();
                let dh = d / heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let mut gq = Tensor::zeros(qv.dim());
                let mut gk = Tensor::zeros(kv.dim());
                let mut gv = Tensor::zeros(vv.dim());
                let blocks = qv.nrows() / lq;
                for b in 0..blocks {
                    let qr = b * lq..(b + 1) * lq;
                    let kr = b * lk..(b + 1) * lk;
                    for h in 0..*heads {
                        let cols = h * dh..(h + 1) * dh;
                        let a = &probs[b * heads + h];
                        let go = g.slice(s![qr.clone(), cols.clone()]);
                        let vb = vv.slice(s![kr.clone(), cols.clone()]);
                        gv.slice_mut(s![kr.clone(), cols.clone()]).assign(&a.t().dot(&go));
                        let da = go.dot(&vb.t());
                        let ds = softmax_backward(a, &da) * scale;
                        let kb = kv.slice(s![kr.clone(), cols.clone()]);
                        let qb = qv.slice(s![qr.clone(), cols.clone()]);
                        gq.slice_mut(s![qr.clone(), cols.clone()]).assign(&ds.dot(&kb));
                        gk.slice_mut(s![kr.clone(), cols]).assign(&ds.t().dot(&qb));
                    }
                }
                accumulate(grads, *q, gq);
                accumulate(grads, *k, gk);
                accumulate(grads, *v, gv);
            }
            Op::ConcatBlocks { a, la, b, lb } => {
                let l = la + lb;
                let blocks = g.nrows() / l;
                let cols = g.ncols();
                let mut ga = Tensor::zeros((blocks * la, cols));
                let mut gb = Tensor::zeros((blocks * lb, cols));
                for i in 0..blocks {
                    ga.slice_mut(s![i * la..(i + 1) * la, ..])
                        .assign(&g.slice(s![i * l..i * l + la, ..]));
                    gb.slice_mut(s![i * lb..(i + 1) * lb, ..])
                        .assign(&g.slice(s![i * l + la..(i + 1) * l, ..]));
                }
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::ConcatCols(a, b) => {
                let na = val(*a).ncols();
                accumulate(grads, *a, g.slice(s![.., ..na]).to_owned());
                accumulate(grads, *b, g.slice(s![.., na..]).to_owned());
            }
            Op::MeanBlocks { x, block } => {
                let mut gx = Tensor::zeros(val(*x).dim());
                let inv = 1.0 / *block as f64;
                for (b, row) in g.rows().into_iter().enumerate() {
                    for r in b * block..(b + 1) * block {
                        gx.row_mut(r).assign(&(&row * inv));
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::Softmax(x) => accumulate(grads, *x, softmax_backward(&node.value, g)),
            Op::LogSoftmax(x) => {
                let mut gx = g.clone();
                for (mut row, lp) in gx.rows_mut().into_iter().zip(node.value.rows()) {
                    let total = row.sum();
                    Zip::from(&mut row).and(&lp).for_each(|d, &l| *d -= l.exp() * total);
                }
                accumulate(grads, *x, gx);
            }
            Op::Pick { x, idx, weights } => {
                let g0 = g[[0, 0]];
                let mut gx = Tensor::zeros(val(*x).dim());
                for (r, (&i, &w)) in idx.iter().zip(weights).enumerate() {
                    gx[[r, i]] += w * g0;
                }
                accumulate(grads, *x, gx);
            }
            Op::Sum(x) => accumulate(grads, *x, Tensor::from_elem(val(*x).dim(), g[[0, 0]])),
        }
    }
}

fn softmax_backward(a: &Tensor, da: &Tensor) -> Tensor {
    let mut ds = a * da;
    for (mut row, arow) in ds.rows_mut().into_iter().zip(a.rows()) {
        let total = row.sum();
        Zip::from(&mut row).and(&arow).for_each(|d, &p| *d -= p * total);
    }
    ds
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => *existing += &g,
        slot => *slot = Some(g),
    }
}

/// Result of a reverse pass: gradients of the root with respect to the
/// leaves and parameters of the graph.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a leaf or parameter node; `None` when the root does
    /// not depend on it.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Dense gradients aligned with the store, zero for parameters the
    /// graph never used.
    pub fn for_params(&self, graph: &Graph, store: &ParamStore) -> Vec<Tensor> {
        store
            .ids()
            .map(|id| match graph.params.get(&id).and_then(|&n| self.get(n)) {
                Some(g) => g.clone(),
                None => Tensor::zeros(store.get(id).dim()),
            })
            .collect()
    }
}
