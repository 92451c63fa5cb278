//! Building blocks of the Temporal Fusion Transformer.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Init, ParamId};
use super::tape::{AttentionShape, Tape, Var};

/// Train/eval switch plus the dropout random stream.
pub struct Mode<'r> {
    /// Dropout probability applied in training.
    pub dropout: f64,
    /// `Some` in training mode.
    pub rng: Option<&'r mut ChaCha8Rng>,
}

impl Mode<'_> {
    /// Deterministic inference mode.
    pub fn eval() -> Mode<'static> {
        Mode { dropout: 0.0, rng: None }
    }

    /// Inverted dropout; identity in eval mode.
    pub fn dropout(&mut self, tape: &mut Tape, x: Var) -> Var {
        let p = self.dropout;
        let Some(rng) = self.rng.as_deref_mut() else { return x };
        if p <= 0.0 {
            return x;
        }
        let keep = 1.0 / (1.0 - p);
        let (r, c) = tape.shape(x);
        let mask = Array2::from_shape_fn((r, c), |_| if rng.random::<f64>() < p { 0.0 } else { keep });
        let m = tape.constant(mask);
        tape.mul(x, m)
    }
}

/// Affine map `x W + b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Linear {
    pub(crate) w: ParamId,
    pub(crate) b: Option<ParamId>,
}

impl Linear {
    pub(crate) fn new(init: &mut Init, name: &str, input: usize, output: usize, bias: bool) -> Self {
        Linear {
            w: init.weight(format!("{name}.w"), input, output),
            b: bias.then(|| init.constant(format!("{name}.b"), 1, output, 0.0)),
        }
    }

    pub(crate) fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let w = tape.param(self.w);
        let y = tape.matmul(x, w);
        match self.b {
            Some(b) => {
                let b = tape.param(b);
                tape.add_row(y, b)
            }
            None => y,
        }
    }
}

/// Gated linear unit `(x W1 + b1) * sigmoid(x W2 + b2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Glu {
    pub(crate) value: Linear,
    pub(crate) gate: Linear,
}

impl Glu {
    pub(crate) fn new(init: &mut Init, name: &str, input: usize, output: usize) -> Self {
        Glu {
            value: Linear::new(init, &format!("{name}.value"), input, output, true),
            gate: Linear::new(init, &format!("{name}.gate"), input, output, true),
        }
    }

    pub(crate) fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let v = self.value.forward(tape, x);
        let g = self.gate.forward(tape, x);
        let g = tape.sigmoid(g);
        tape.mul(v, g)
    }
}

/// Row-wise layer norm parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerNorm {
    pub(crate) gamma: ParamId,
    pub(crate) beta: ParamId,
}

impl LayerNorm {
    pub(crate) fn new(init: &mut Init, name: &str, size: usize) -> Self {
        LayerNorm {
            gamma: init.constant(format!("{name}.gamma"), 1, size, 1.0),
            beta: init.constant(format!("{name}.beta"), 1, size, 0.0),
        }
    }

    pub(crate) fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let g = tape.param(self.gamma);
        let b = tape.param(self.beta);
        tape.layer_norm(x, g, b)
    }
}

/// `LayerNorm(skip + GLU(dropout(x)))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateAddNorm {
    pub(crate) glu: Glu,
    pub(crate) norm: LayerNorm,
}

impl GateAddNorm {
    pub(crate) fn new(init: &mut Init, name: &str, input: usize, output: usize) -> Self {
        GateAddNorm {
            glu: Glu::new(init, &format!("{name}.glu"), input, output),
            norm: LayerNorm::new(init, &format!("{name}.norm"), output),
        }
    }

    pub(crate) fn forward(&self, tape: &mut Tape, x: Var, skip: Var, mode: &mut Mode) -> Var {
        let x = mode.dropout(tape, x);
        let gated = self.glu.forward(tape, x);
        let sum = tape.add(gated, skip);
        self.norm.forward(tape, sum)
    }
}

/// Gated residual network.
///
/// `eta2 = ELU(a W2 + c W3 + b2)`, `eta1 = eta2 W1 + b1`,
/// `out = LayerNorm(skip(a) + GLU(eta1))`, where `skip` is a linear
/// projection when the input and output widths differ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grn {
    pub(crate) fc1: Linear,
    pub(crate) context: Option<Linear>,
    pub(crate) fc2: Linear,
    pub(crate) skip: Option<Linear>,
    pub(crate) gate: GateAddNorm,
}

impl Grn {
    pub(crate) fn new(init: &mut Init, name: &str, input: usize, hidden: usize, output: usize, context: Option<usize>) -> Self {
        Grn {
            fc1: Linear::new(init, &format!("{name}.fc1"), input, hidden, true),
            context: context.map(|c| Linear::new(init, &format!("{name}.context"), c, hidden, false)),
            fc2: Linear::new(init, &format!("{name}.fc2"), hidden, output, true),
            skip: (input != output).then(|| Linear::new(init, &format!("{name}.skip"), input, output, true)),
            gate: GateAddNorm::new(init, &format!("{name}.gate"), output, output),
        }
    }

    pub(crate) fn forward(&self, tape: &mut Tape, a: Var, context: Option<Var>, mode: &mut Mode) -> Var {
        let skip = match &self.skip {
            Some(l) => l.forward(tape, a),
            None => a,
        };
        let mut h = self.fc1.forward(tape, a);
        if let (Some(l), Some(c)) = (&self.context, context) {
            let c = l.forward(tape, c);
            h = tape.add(h, c);
        }
        let h = tape.elu(h);
        let h = self.fc2.forward(tape, h);
        self.gate.forward(tape, h, skip, mode)
    }
}

/// Variable selection network over `m` transformed inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableSelection {
    pub(crate) weights: Grn,
    pub(crate) per_variable: Vec<Grn>,
}

impl VariableSelection {
    pub(crate) fn new(init: &mut Init, name: &str, input_widths: &[usize], hidden: usize, context: Option<usize>) -> Self {
        let m = input_widths.len();
        let total: usize = input_widths.iter().sum();
        VariableSelection {
            weights: Grn::new(init, &format!("{name}.flat"), total, hidden.min(m.max(1)).max(1), m, context),
            per_variable: input_widths
                .iter()
                .enumerate()
                .map(|(j, w)| Grn::new(init, &format!("{name}.var{j}"), *w, hidden, hidden, None))
                .collect(),
        }
    }

    /// Returns the weighted combination and the `n x m` selection weights.
    pub(crate) fn forward(&self, tape: &mut Tape, inputs: &[Var], context: Option<Var>, mode: &mut Mode) -> (Var, Var) {
        assert_eq!(inputs.len(), self.per_variable.len(), "variable count");
        let flat = tape.concat_cols(inputs);
        let logits = self.weights.forward(tape, flat, context, mode);
        let weights = tape.softmax_rows(logits);
        let mut combined = None;
        for (j, (grn, x)) in self.per_variable.iter().zip(inputs).enumerate() {
            let xi = grn.forward(tape, *x, None, mode);
            let wj = tape.slice_cols(weights, j, 1);
            let term = tape.mul_col(xi, wj);
            combined = Some(match combined {
                None => term,
                Some(c) => tape.add(c, term),
            });
        }
        (combined.expect("at least one variable"), weights)
    }
}

/// Single-layer LSTM with gate order (input, forget, cell, output).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lstm {
    pub(crate) input: Linear,
    pub(crate) recurrent: Linear,
    pub(crate) hidden: usize,
}

impl Lstm {
    pub(crate) fn new(init: &mut Init, name: &str, input: usize, hidden: usize) -> Self {
        let lin = Linear::new(init, &format!("{name}.input"), input, 4 * hidden, true);
        // forget-gate bias starts at 1
        if let Some(b) = lin.b {
            init.store.value_mut(b).slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
        }
        Lstm {
            input: lin,
            recurrent: Linear::new(init, &format!("{name}.recurrent"), hidden, 4 * hidden, false),
            hidden,
        }
    }

    /// Run over `steps` time-major steps of `x` (`steps * batch` rows).
    /// Returns all hidden states (time-major) and the final `(h, c)`.
    pub(crate) fn forward(&self, tape: &mut Tape, x: Var, batch: usize, steps: usize, h0: Var, c0: Var) -> (Var, Var, Var) {
        let hd = self.hidden;
        let xw = self.input.forward(tape, x);
        let (mut h, mut c) = (h0, c0);
        let mut outs = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt = tape.slice_rows(xw, t * batch, batch);
            let hw = self.recurrent.forward(tape, h);
            let z = tape.add(xt, hw);
            let i = tape.slice_cols(z, 0, hd);
            let f = tape.slice_cols(z, hd, hd);
            let g = tape.slice_cols(z, 2 * hd, hd);
            let o = tape.slice_cols(z, 3 * hd, hd);
            let i = tape.sigmoid(i);
            let f = tape.sigmoid(f);
            let g = tape.tanh(g);
            let o = tape.sigmoid(o);
            let fc = tape.mul(f, c);
            let ig = tape.mul(i, g);
            c = tape.add(fc, ig);
            let tc = tape.tanh(c);
            h = tape.mul(o, tc);
            outs.push(h);
        }
        let all = tape.concat_rows(&outs);
        (all, h, c)
    }
}

/// Interpretable multi-head attention with a value projection shared by
/// all heads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpretableAttention {
    pub(crate) query: Linear,
    pub(crate) key: Linear,
    pub(crate) value: Linear,
    pub(crate) output: Linear,
    pub(crate) heads: usize,
    pub(crate) head_dim: usize,
}

impl InterpretableAttention {
    /// Per-head query/key width is `floor(hidden / heads)` (at least 1);
    /// the shared value projection keeps the full hidden width.
    pub(crate) fn new(init: &mut Init, name: &str, hidden: usize, heads: usize) -> Self {
        let head_dim = (hidden / heads).max(1);
        InterpretableAttention {
            query: Linear::new(init, &format!("{name}.query"), hidden, heads * head_dim, true),
            key: Linear::new(init, &format!("{name}.key"), hidden, heads * head_dim, true),
            value: Linear::new(init, &format!("{name}.value"), hidden, hidden, true),
            output: Linear::new(init, &format!("{name}.output"), hidden, hidden, true),
            heads,
            head_dim,
        }
    }

    /// `x` is `(n_enc + n_dec) * batch` time-major rows. Returns the
    /// projected decoder outputs and the raw attention node (for the
    /// head-averaged weights).
    pub(crate) fn forward(&self, tape: &mut Tape, x: Var, batch: usize, n_enc: usize, n_dec: usize, mode: &mut Mode) -> (Var, Var) {
        let dec = tape.slice_rows(x, n_enc * batch, n_dec * batch);
        let q = self.query.forward(tape, dec);
        let k = self.key.forward(tape, x);
        let v = self.value.forward(tape, x);
        let shape = AttentionShape {
            batch,
            n_enc,
            n_dec,
            heads: self.heads,
            head_dim: self.head_dim,
        };
        let attn = tape.attention(q, k, v, shape);
        let out = mode.dropout(tape, attn);
        (self.output.forward(tape, out), attn)
    }
}
