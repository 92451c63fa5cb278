//! Reverse-mode automatic differentiation over 2-D matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Time-distributed
//! tensors are stored time-major: row `t * batch + b` holds sample `b` at
//! step `t`, so per-step slices are contiguous row blocks.

use ndarray::{s, Array2, Axis, Zip};

use super::params::{ParamId, ParamStore};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Static description of a batched attention call.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AttentionShape {
    pub batch: usize,
    pub n_enc: usize,
    pub n_dec: usize,
    pub heads: usize,
    pub head_dim: usize,
}

impl AttentionShape {
    fn n_keys(&self) -> usize {
        self.n_enc + self.n_dec
    }

    /// Offset of probability `(b, h, i, j)` in the flat buffer.
    fn idx(&self, b: usize, h: usize, i: usize, j: usize) -> usize {
        ((b * self.heads + h) * self.n_dec + i) * self.n_keys() + j
    }
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Elu(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<f64>,
        inv_std: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize, usize),
    TileRows(Var, usize),
    Gather(Var, Vec<usize>),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        shape: AttentionShape,
        probs: Vec<f64>,
    },
    QuantileLoss {
        pred: Var,
        target: Vec<f64>,
        levels: Vec<f64>,
    },
}

/// Forward-pass recorder.
pub struct Tape<'p> {
    params: &'p ParamStore,
    values: Vec<Array2<f64>>,
    ops: Vec<Op>,
    param_vars: Vec<Option<Var>>,
}

/// Gradients of one backward pass, aligned with the parameter store.
pub struct Gradients {
    /// One gradient per parameter (zeros when unused).
    pub params: Vec<Array2<f64>>,
}

impl Gradients {
    /// Gradient of one parameter.
    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.params[id.0]
    }

    /// Global L2 norm.
    pub fn norm(&self) -> f64 {
        self.params.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Rescale so the global norm is at most `max_norm`.
    pub fn clip(&mut self, max_norm: f64) -> f64 {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            let s = max_norm / n;
            self.params.iter_mut().for_each(|g| g.mapv_inplace(|x| x * s));
        }
        n
    }

    /// Elementwise sum with another gradient set.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            *a += b;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Tape<'p> {
    /// Empty tape reading parameters from `params`.
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            values: Vec::with_capacity(4096),
            ops: Vec::with_capacity(4096),
            param_vars: vec![None; params.len()],
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    /// Value of a node.
    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.values[v.0]
    }

    /// Shape `(rows, cols)` of a node.
    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.values[v.0].dim()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True before any node is recorded.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Constant input.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Parameter node (recorded once per tape).
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(self.params.value(id).clone(), Op::Param(id));
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Matrix product.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.values[a.0].dot(&self.values[b.0]);
        self.push(out, Op::MatMul(a, b))
    }

    /// Elementwise sum of equal shapes.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = &self.values[a.0] + &self.values[b.0];
        self.push(out, Op::Add(a, b))
    }

    /// Add a `1 x m` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let out = &self.values[a.0] + &self.values[row.0];
        self.push(out, Op::AddRow(a, row))
    }

    /// Elementwise product of equal shapes.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = &self.values[a.0] * &self.values[b.0];
        self.push(out, Op::Mul(a, b))
    }

    /// Scale each row of `a` by the matching entry of the `n x 1` column `c`.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Var {
        let out = &self.values[a.0] * &self.values[c.0];
        self.push(out, Op::MulCol(a, c))
    }

    /// Multiply by a constant.
    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = &self.values[a.0] * k;
        self.push(out, Op::Scale(a, k))
    }

    /// Logistic sigmoid.
    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.values[a.0].mapv(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    /// Hyperbolic tangent.
    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.values[a.0].mapv(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    /// ELU with unit scale.
    pub fn elu(&mut self, a: Var) -> Var {
        let out = self.values[a.0].mapv(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.push(out, Op::Elu(a))
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.values[a.0].clone();
        for mut row in out.rows_mut() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - m).exp());
            let z = row.sum();
            row.mapv_inplace(|x| x / z);
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Row-wise layer normalization with `1 x m` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        const EPS: f64 = 1e-5;
        let xv = &self.values[x.0];
        let m = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mu = row.sum() / m;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m;
            let is = 1.0 / (var + EPS).sqrt();
            row.mapv_inplace(|v| (v - mu) * is);
            inv_std.push(is);
        }
        let out = &(&xhat * &self.values[gamma.0]) + &self.values[beta.0];
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, inv_std })
    }

    /// Concatenate along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|v| self.values[v.0].view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("row counts agree");
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.values[a.0].slice(s![.., start..start + len]).to_owned();
        self.push(out, Op::SliceCols(a, start, len))
    }

    /// Stack along rows.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|v| self.values[v.0].view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).expect("column counts agree");
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.values[a.0].slice(s![start..start + len, ..]).to_owned();
        self.push(out, Op::SliceRows(a, start, len))
    }

    /// Repeat a `B x m` block `times` times along rows (time-major broadcast).
    pub fn tile_rows(&mut self, a: Var, times: usize) -> Var {
        let v = self.values[a.0].view();
        let views = vec![v; times];
        let out = ndarray::concatenate(Axis(0), &views).expect("same shape");
        self.push(out, Op::TileRows(a, times))
    }

    /// Select rows of `table` (embedding lookup).
    pub fn gather(&mut self, table: Var, idx: Vec<usize>) -> Var {
        let out = self.values[table.0].select(Axis(0), &idx);
        self.push(out, Op::Gather(table, idx))
    }

    /// Batched interpretable multi-head attention.
    ///
    /// `q` is `(n_dec * B) x (heads * head_dim)` for the decoder positions,
    /// `k` is `(n_keys * B) x (heads * head_dim)` and `v` is
    /// `(n_keys * B) x d_v`, all time-major. Decoder query `i` sits at
    /// absolute position `n_enc + i` and sees keys `0..=n_enc + i`. Every
    /// head attends over the same shared values and the head outputs are
    /// averaged, which equals applying the head-averaged attention to the
    /// values. Returns `(n_dec * B) x d_v`.
    pub(crate) fn attention(&mut self, q: Var, k: Var, v: Var, shape: AttentionShape) -> Var {
        let AttentionShape { batch, n_enc, n_dec, heads, head_dim } = shape;
        let n_keys = shape.n_keys();
        let (qv, kv, vv) = (
            self.values[q.0].as_standard_layout(),
            self.values[k.0].as_standard_layout(),
            self.values[v.0].as_standard_layout(),
        );
        assert_eq!(qv.dim(), (n_dec * batch, heads * head_dim), "attention query shape");
        assert_eq!(kv.dim(), (n_keys * batch, heads * head_dim), "attention key shape");
        assert_eq!(vv.nrows(), n_keys * batch, "attention value rows");
        let d_v = vv.ncols();
        let width = heads * head_dim;
        let (qs, ks, vs) = (qv.as_slice().unwrap(), kv.as_slice().unwrap(), vv.as_slice().unwrap());
        let scale = 1.0 / (head_dim as f64).sqrt();
        let mut probs = vec![0.0; batch * heads * n_dec * n_keys];
        let mut out = vec![0.0; n_dec * batch * d_v];
        let mut logits = vec![0.0; n_keys];
        let mut mean_attn = vec![0.0; n_keys];
        for b in 0..batch {
            for i in 0..n_dec {
                let visible = n_enc + i + 1;
                let qrow = &qs[(i * batch + b) * width..(i * batch + b + 1) * width];
                mean_attn[..visible].iter_mut().for_each(|x| *x = 0.0);
                for h in 0..heads {
                    let qh = &qrow[h * head_dim..(h + 1) * head_dim];
                    let mut mx = f64::NEG_INFINITY;
                    for (j, l) in logits.iter_mut().enumerate().take(visible) {
                        let off = (j * batch + b) * width + h * head_dim;
                        let kh = &ks[off..off + head_dim];
                        *l = qh.iter().zip(kh).map(|(a, b)| a * b).sum::<f64>() * scale;
                        mx = mx.max(*l);
                    }
                    let mut z = 0.0;
                    for l in logits.iter_mut().take(visible) {
                        *l = (*l - mx).exp();
                        z += *l;
                    }
                    let base = shape.idx(b, h, i, 0);
                    for j in 0..visible {
                        let p = logits[j] / z;
                        probs[base + j] = p;
                        mean_attn[j] += p / heads as f64;
                    }
                }
                let orow = &mut out[(i * batch + b) * d_v..(i * batch + b + 1) * d_v];
                for (j, m) in mean_attn.iter().enumerate().take(visible) {
                    let vrow = &vs[(j * batch + b) * d_v..(j * batch + b + 1) * d_v];
                    orow.iter_mut().zip(vrow).for_each(|(o, v)| *o += m * v);
                }
            }
        }
        let out = Array2::from_shape_vec((n_dec * batch, d_v), out).expect("attention output shape");
        self.push(out, Op::Attention { q, k, v, shape, probs })
    }

    /// Head-averaged attention of an attention node as `[b][i][j]`, with
    /// exact zeros at masked positions.
    pub fn attention_weights(&self, node: Var) -> Option<Vec<Vec<Vec<f64>>>> {
        let Op::Attention { shape, probs, .. } = &self.ops[node.0] else {
            return None;
        };
        let mut out = vec![vec![vec![0.0; shape.n_keys()]; shape.n_dec]; shape.batch];
        for (b, per_b) in out.iter_mut().enumerate() {
            for (i, row) in per_b.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate().take(shape.n_enc + i + 1) {
                    *cell = (0..shape.heads).map(|h| probs[shape.idx(b, h, i, j)]).sum::<f64>() / shape.heads as f64;
                }
            }
        }
        Some(out)
    }

    /// Mean pinball loss over every entry of `pred` (`n x Q`) against the
    /// `n` targets, one column per quantile level.
    pub fn quantile_loss(&mut self, pred: Var, target: Vec<f64>, levels: Vec<f64>) -> Var {
        let p = &self.values[pred.0];
        assert_eq!(p.dim(), (target.len(), levels.len()), "quantile loss shape");
        let mut total = 0.0;
        for (row, y) in p.rows().into_iter().zip(&target) {
            for (yhat, q) in row.iter().zip(&levels) {
                let e = y - yhat;
                total += (q * e).max((q - 1.0) * e);
            }
        }
        let loss = total / (target.len() * levels.len()) as f64;
        self.push(Array2::from_elem((1, 1), loss), Op::QuantileLoss { pred, target, levels })
    }

    /// Backpropagate from a `1 x 1` node and collect parameter gradients.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.shape(root), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.values.len()).map(|_| None).collect();
        grads[root.0] = Some(Array2::ones((1, 1)));
        let mut params: Vec<Array2<f64>> = (0..self.params.len())
            .map(|i| Array2::zeros(self.params.value(ParamId(i)).dim()))
            .collect();

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(x) => *x += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for n in (0..=root.0).rev() {
            let Some(g) = grads[n].take() else { continue };
            let val = &self.values[n];
            match &self.ops[n] {
                Op::Leaf => {}
                Op::Param(id) => params[id.0] += &g,
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.values[b.0].t());
                    let gb = self.values[a.0].t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, r) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *r, gr);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * &self.values[b.0];
                    let gb = &g * &self.values[a.0];
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MulCol(a, c) => {
                    let ga = &g * &self.values[c.0];
                    let gc = (&g * &self.values[a.0]).sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *c, gc);
                }
                Op::Scale(a, k) => acc(&mut grads, *a, g * *k),
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(val).for_each(|g, y| *g *= y * (1.0 - y));
                    acc(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(val).for_each(|g, y| *g *= 1.0 - y * y);
                    acc(&mut grads, *a, ga);
                }
                Op::Elu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&self.values[a.0])
                        .and(val)
                        .for_each(|g, x, y| *g *= if *x > 0.0 { 1.0 } else { y + 1.0 });
                    acc(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let mut ga = &g * val;
                    for (mut row, y) in ga.rows_mut().into_iter().zip(val.rows()) {
                        let dot = row.sum();
                        Zip::from(&mut row).and(&y).for_each(|r, y| *r -= y * dot);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let gamma_v = &self.values[gamma.0];
                    let ggamma = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let gbeta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let mut dxhat = &g * gamma_v;
                    let m = dxhat.ncols() as f64;
                    for ((mut row, xh), is) in dxhat.rows_mut().into_iter().zip(xhat.rows()).zip(inv_std) {
                        let s1 = row.sum();
                        let s2 = row.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>();
                        Zip::from(&mut row).and(&xh).for_each(|d, xh| *d = is / m * (m * *d - s1 - xh * s2));
                    }
                    acc(&mut grads, *gamma, ggamma);
                    acc(&mut grads, *beta, gbeta);
                    acc(&mut grads, *x, dxhat);
                }
                Op::ConcatCols(parts) => {
                    let mut c = 0;
                    for p in parts {
                        let w = self.values[p.0].ncols();
                        acc(&mut grads, *p, g.slice(s![.., c..c + w]).to_owned());
                        c += w;
                    }
                }
                Op::SliceCols(a, start, len) => {
                    let mut ga = Array2::zeros(self.values[a.0].dim());
                    ga.slice_mut(s![.., *start..*start + *len]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatRows(parts) => {
                    let mut r = 0;
                    for p in parts {
                        let h = self.values[p.0].nrows();
                        acc(&mut grads, *p, g.slice(s![r..r + h, ..]).to_owned());
                        r += h;
                    }
                }
                Op::SliceRows(a, start, len) => {
                    let mut ga = Array2::zeros(self.values[a.0].dim());
                    ga.slice_mut(s![*start..*start + *len, ..]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::TileRows(a, times) => {
                    let rows = self.values[a.0].nrows();
                    let mut ga = Array2::zeros(self.values[a.0].dim());
                    for t in 0..*times {
                        ga += &g.slice(s![t * rows..(t + 1) * rows, ..]);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Gather(table, idx) => {
                    let mut gt = Array2::zeros(self.values[table.0].dim());
                    for (r, &i) in idx.iter().enumerate() {
                        let mut row = gt.row_mut(i);
                        row += &g.row(r);
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::Attention { q, k, v, shape, probs } => {
                    let (gq, gk, gv) = self.attention_backward(&g, *q, *k, *v, shape, probs);
                    acc(&mut grads, *q, gq);
                    acc(&mut grads, *k, gk);
                    acc(&mut grads, *v, gv);
                }
                Op::QuantileLoss { pred, target, levels } => {
                    let scale = g[[0, 0]] / (target.len() * levels.len()) as f64;
                    let p = &self.values[pred.0];
                    let mut gp = Array2::zeros(p.dim());
                    for ((mut grow, prow), y) in gp.rows_mut().into_iter().zip(p.rows()).zip(target) {
                        for ((gv, yhat), q) in grow.iter_mut().zip(prow.iter()).zip(levels) {
                            *gv = if y - yhat >= 0.0 { -q } else { 1.0 - q } * scale;
                        }
                    }
                    acc(&mut grads, *pred, gp);
                }
            }
        }
        Gradients { params }
    }

    fn attention_backward(
        &self,
        g: &Array2<f64>,
        q: Var,
        k: Var,
        v: Var,
        shape: &AttentionShape,
        probs: &[f64],
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let AttentionShape { batch, n_enc, n_dec, heads, head_dim } = *shape;
        let (qv, kv, vv) = (
            self.values[q.0].as_standard_layout(),
            self.values[k.0].as_standard_layout(),
            self.values[v.0].as_standard_layout(),
        );
        let g = g.as_standard_layout();
        let (qs, ks, vs, gs) = (qv.as_slice().unwrap(), kv.as_slice().unwrap(), vv.as_slice().unwrap(), g.as_slice().unwrap());
        let width = heads * head_dim;
        let d_v = vv.ncols();
        let scale = 1.0 / (head_dim as f64).sqrt();
        let mut gq = vec![0.0; qs.len()];
        let mut gk = vec![0.0; ks.len()];
        let mut gv = vec![0.0; vs.len()];
        let mut dmean = vec![0.0; shape.n_keys()];
        for b in 0..batch {
            for i in 0..n_dec {
                let visible = n_enc + i + 1;
                let r_i = i * batch + b;
                let grow = &gs[r_i * d_v..(r_i + 1) * d_v];
                // output row = sum_j mean_j * v_j
                for j in 0..visible {
                    let r_j = j * batch + b;
                    let vrow = &vs[r_j * d_v..(r_j + 1) * d_v];
                    dmean[j] = grow.iter().zip(vrow).map(|(a, b)| a * b).sum::<f64>() / heads as f64;
                    let mean_j = (0..heads).map(|h| probs[shape.idx(b, h, i, j)]).sum::<f64>() / heads as f64;
                    gv[r_j * d_v..(r_j + 1) * d_v].iter_mut().zip(grow).for_each(|(o, g)| *o += mean_j * g);
                }
                for h in 0..heads {
                    let base = shape.idx(b, h, i, 0);
                    let p = &probs[base..base + visible];
                    let dot: f64 = p.iter().zip(&dmean).map(|(p, d)| p * d).sum();
                    let qoff = r_i * width + h * head_dim;
                    for j in 0..visible {
                        let dlogit = p[j] * (dmean[j] - dot) * scale;
                        if dlogit == 0.0 {
                            continue;
                        }
                        let koff = (j * batch + b) * width + h * head_dim;
                        for d in 0..head_dim {
                            gq[qoff + d] += dlogit * ks[koff + d];
                            gk[koff + d] += dlogit * qs[qoff + d];
                        }
                    }
                }
            }
        }
        (
            Array2::from_shape_vec(qv.dim(), gq).expect("shape"),
            Array2::from_shape_vec(kv.dim(), gk).expect("shape"),
            Array2::from_shape_vec(vv.dim(), gv).expect("shape"),
        )
    }
}
