//! Stand-alone TFT building blocks with their own parameters, for
//! inspection and testing outside the full network.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Grn, InterpretableAttention, Mode, VariableSelection};
use super::params::{Init, ParamStore};
use super::tape::{Gradients, Tape, Var};
use crate::{Error, Result};

fn row(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row vector")
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what}: expected length {want}, got {got}")));
    }
    Ok(())
}

/// A gated residual network with its own parameter store.
#[derive(Debug, Clone)]
pub struct GrnBlock {
    params: ParamStore,
    grn: Grn,
    input: usize,
    output: usize,
    context: Option<usize>,
}

impl GrnBlock {
    /// Seeded random initialization.
    pub fn new(input: usize, hidden: usize, output: usize, context: Option<usize>, seed: u64) -> Self {
        let mut params = ParamStore::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grn = Grn::new(&mut Init { store: &mut params, rng: &mut rng }, "grn", input, hidden, output, context);
        GrnBlock { params, grn, input, output, context }
    }

    /// Parameters (names are prefixed `grn.`).
    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Mutable parameters.
    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Output width.
    pub fn output_size(&self) -> usize {
        self.output
    }

    fn check(&self, input: &[f64], context: Option<&[f64]>) -> Result<()> {
        check_len("GRN input", input.len(), self.input)?;
        match (self.context, context) {
            (Some(c), Some(x)) => check_len("GRN context", x.len(), c),
            (None, Some(_)) => Err(Error::Shape("GRN was built without a context input".into())),
            _ => Ok(()),
        }
    }

    fn record(&self, tape: &mut Tape, a: Var, context: Option<&[f64]>) -> Var {
        let c = context.map(|c| tape.constant(row(c)));
        self.grn.forward(tape, a, c, &mut Mode::eval())
    }

    /// Eval-mode output for one input vector.
    pub fn forward(&self, input: &[f64], context: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check(input, context)?;
        let mut tape = Tape::new(&self.params);
        let a = tape.constant(row(input));
        let out = self.record(&mut tape, a, context);
        Ok(tape.value(out).row(0).to_vec())
    }

    /// Output plus the gradient of `sum(weights * output)` with respect to
    /// the input vector.
    pub fn forward_with_input_gradient(
        &self,
        input: &[f64],
        context: Option<&[f64]>,
        weights: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(input, context)?;
        check_len("output weights", weights.len(), self.output)?;
        let mut store = self.params.clone();
        let id = store.add("grn.__input".into(), row(input));
        let mut tape = Tape::new(&store);
        let a = tape.param(id);
        let out = self.record(&mut tape, a, context);
        let w = tape.constant(row(weights));
        let prod = tape.mul(out, w);
        let ones = tape.constant(Array2::ones((self.output, 1)));
        let total = tape.matmul(prod, ones);
        let value = tape.value(out).row(0).to_vec();
        let grads = tape.backward(total);
        Ok((value, grads.params[id.0].row(0).to_vec()))
    }
}

/// A variable selection network with its own parameter store.
#[derive(Debug, Clone)]
pub struct VariableSelectionBlock {
    params: ParamStore,
    vsn: VariableSelection,
    widths: Vec<usize>,
    context: Option<usize>,
}

impl VariableSelectionBlock {
    /// One input per entry of `widths`; errors when `widths` is empty.
    pub fn new(widths: &[usize], hidden: usize, context: Option<usize>, seed: u64) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Shape("variable selection needs at least one variable".into()));
        }
        let mut params = ParamStore::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vsn = VariableSelection::new(&mut Init { store: &mut params, rng: &mut rng }, "vsn", widths, hidden, context);
        Ok(VariableSelectionBlock { params, vsn, widths: widths.to_vec(), context })
    }

    /// Parameters (names are prefixed `vsn.`).
    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Mutable parameters.
    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Eval-mode `(combined, weights)`; the weights lie on the simplex.
    pub fn forward(&self, embeddings: &[Vec<f64>], context: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("variable count", embeddings.len(), self.widths.len())?;
        for (e, w) in embeddings.iter().zip(&self.widths) {
            check_len("variable embedding", e.len(), *w)?;
        }
        if let (Some(c), Some(x)) = (self.context, context) {
            check_len("selection context", x.len(), c)?;
        }
        let mut tape = Tape::new(&self.params);
        let inputs: Vec<Var> = embeddings.iter().map(|e| tape.constant(row(e))).collect();
        let ctx = context.map(|c| tape.constant(row(c)));
        let (combined, weights) = self.vsn.forward(&mut tape, &inputs, ctx, &mut Mode::eval());
        Ok((tape.value(combined).row(0).to_vec(), tape.value(weights).row(0).to_vec()))
    }

    /// `sum(out_weights * combined)` and its gradient with respect to every
    /// parameter.
    pub fn weighted_output_gradients(
        &self,
        embeddings: &[Vec<f64>],
        context: Option<&[f64]>,
        out_weights: &[f64],
    ) -> Result<(f64, Gradients)> {
        let (combined, _) = self.forward(embeddings, context)?;
        check_len("output weights", out_weights.len(), combined.len())?;
        let mut tape = Tape::new(&self.params);
        let inputs: Vec<Var> = embeddings.iter().map(|e| tape.constant(row(e))).collect();
        let ctx = context.map(|c| tape.constant(row(c)));
        let (combined, _) = self.vsn.forward(&mut tape, &inputs, ctx, &mut Mode::eval());
        let w = tape.constant(row(out_weights));
        let prod = tape.mul(combined, w);
        let ones = tape.constant(Array2::ones((out_weights.len(), 1)));
        let total = tape.matmul(prod, ones);
        Ok((tape.value(total)[[0, 0]], tape.backward(total)))
    }
}

/// Interpretable multi-head attention with its own parameter store.
#[derive(Debug, Clone)]
pub struct AttentionBlock {
    params: ParamStore,
    attn: InterpretableAttention,
    hidden: usize,
}

impl AttentionBlock {
    /// Seeded random initialization.
    pub fn new(hidden: usize, heads: usize, seed: u64) -> Self {
        let mut params = ParamStore::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let attn = InterpretableAttention::new(&mut Init { store: &mut params, rng: &mut rng }, "attention", hidden, heads);
        AttentionBlock { params, attn, hidden }
    }

    /// Parameters (names are prefixed `attention.`).
    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Mutable parameters.
    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// `sequence` holds one row per position. Positions from `n_enc` on
    /// are queries; query `i` sees positions `0..=n_enc + i`. Returns the
    /// projected outputs (one row per query) and the head-averaged
    /// attention (`queries x positions`).
    pub fn forward(&self, sequence: &Array2<f64>, n_enc: usize) -> Result<(Array2<f64>, Vec<Vec<f64>>)> {
        let (n, h) = sequence.dim();
        check_len("attention input width", h, self.hidden)?;
        if n_enc >= n {
            return Err(Error::Shape(format!("{n} positions leave no queries after {n_enc} encoder steps")));
        }
        let mut tape = Tape::new(&self.params);
        let x = tape.constant(sequence.clone());
        let (out, attn) = self.attn.forward(&mut tape, x, 1, n_enc, n - n_enc, &mut Mode::eval());
        let weights = tape.attention_weights(attn).expect("attention node").swap_remove(0);
        Ok((tape.value(out).clone(), weights))
    }
}
