//! Temporal Fusion Transformer network, batching and inference outputs.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{GateAddNorm, Grn, Linear, Lstm, Mode, VariableSelection, InterpretableAttention};
use super::params::{Init, ParamId, ParamStore};
use super::tape::{Gradients, Tape, Var};
use crate::panel::{PanelDataset, SampleWindow, SeriesStats};
use crate::{Error, Result};

/// Checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Tuned TFT hyperparameters plus training-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TftHyperParams {
    /// Lookback window (days).
    pub encoder_length: usize,
    /// Windows per optimization step.
    pub batch_size: usize,
    /// Forecast horizon (days).
    pub prediction_length: usize,
    /// Global gradient-norm clip.
    pub gradient_clip_norm: f64,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Model width.
    pub hidden_size: usize,
    /// Attention heads.
    pub attention_heads: usize,
    /// Dropout probability in training.
    pub dropout: f64,
    /// Width of the per-variable input transforms.
    pub hidden_continuous_size: usize,
    /// Predicted quantile levels, strictly increasing and containing 0.5.
    pub quantiles: Vec<f64>,
    /// Epoch budget.
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    /// Seed of the single generator behind init, shuffling and dropout.
    pub seed: u64,
}

impl Default for TftHyperParams {
    fn default() -> Self {
        TftHyperParams {
            encoder_length: 42,
            batch_size: 40,
            prediction_length: 28,
            gradient_clip_norm: 0.022730,
            learning_rate: 0.0011149,
            hidden_size: 33,
            attention_heads: 8,
            dropout: 0.19230,
            hidden_continuous_size: 19,
            quantiles: vec![0.02, 0.1, 0.25, 0.5, 0.75, 0.9, 0.98],
            max_epochs: 30,
            patience: 5,
            seed: 0,
        }
    }
}

impl TftHyperParams {
    /// Check ranges and the quantile list.
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("encoder_length", self.encoder_length),
            ("batch_size", self.batch_size),
            ("prediction_length", self.prediction_length),
            ("hidden_size", self.hidden_size),
            ("attention_heads", self.attention_heads),
            ("hidden_continuous_size", self.hidden_continuous_size),
            ("max_epochs", self.max_epochs),
        ];
        for (n, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{n} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.gradient_clip_norm > 0.0) {
            return Err(Error::Config("learning rate and gradient clip must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        let q = &self.quantiles;
        if q.is_empty() || q.iter().any(|x| !(*x > 0.0 && *x < 1.0)) || q.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("quantiles must be strictly increasing within (0, 1)".into()));
        }
        if self.median_index().is_none() {
            return Err(Error::Config("quantiles must contain 0.5".into()));
        }
        Ok(())
    }

    /// Position of the 0.5 level.
    pub fn median_index(&self) -> Option<usize> {
        self.quantiles.iter().position(|q| (*q - 0.5).abs() < 1e-12)
    }
}

/// Real-valued or categorical model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    /// Continuous input.
    Real,
    /// Integer codes with the given cardinality.
    Categorical(usize),
}

/// A named model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    /// Name (dataset covariate name, `target` or `group`).
    pub name: String,
    /// Kind.
    pub kind: VarKind,
}

/// Which dataset columns feed which selection network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSchema {
    /// Groups known to the group-identity embedding.
    pub group_ids: Vec<String>,
    /// Static inputs: the group identity first, then dataset statics.
    pub statics: Vec<VariableSpec>,
    /// Encoder inputs: the target, past covariates, future covariates.
    pub encoder: Vec<VariableSpec>,
    /// Decoder inputs: future covariates.
    pub decoder: Vec<VariableSpec>,
    /// Cross-group scaling of each real static (None for categoricals).
    pub static_scaling: Vec<Option<SeriesStats>>,
}

fn kind_of(categories: Option<usize>) -> VarKind {
    categories.map_or(VarKind::Real, VarKind::Categorical)
}

impl InputSchema {
    /// Derive the inputs from a (normalized) dataset.
    pub fn from_dataset(ds: &PanelDataset) -> Result<Self> {
        let g0 = ds
            .groups()
            .first()
            .ok_or_else(|| Error::InsufficientData("TFT input schema needs at least one group".into()))?;
        let group_ids: Vec<String> = ds.groups().iter().map(|g| g.group_id.clone()).collect();
        let mut statics = vec![VariableSpec {
            name: "group".into(),
            kind: VarKind::Categorical(group_ids.len()),
        }];
        let mut static_scaling = vec![None];
        for (j, s) in g0.statics.iter().enumerate() {
            statics.push(VariableSpec { name: s.name.clone(), kind: kind_of(s.categories) });
            static_scaling.push(if s.categories.is_some() {
                None
            } else {
                let vals: Vec<f64> = ds.groups().iter().map(|g| g.statics[j].value).collect();
                Some(SeriesStats::of(&vals, "static").unwrap_or(SeriesStats { mean: vals[0], std: 1.0 }))
            });
        }
        let mut encoder = vec![VariableSpec { name: "target".into(), kind: VarKind::Real }];
        encoder.extend(g0.past.iter().map(|c| VariableSpec { name: c.name.clone(), kind: kind_of(c.categories) }));
        let decoder: Vec<VariableSpec> = g0
            .future
            .iter()
            .map(|c| VariableSpec { name: c.name.clone(), kind: kind_of(c.categories) })
            .collect();
        encoder.extend(decoder.iter().cloned());
        if decoder.is_empty() {
            return Err(Error::InvalidData("TFT needs at least one future-known covariate".into()));
        }
        Ok(InputSchema { group_ids, statics, encoder, decoder, static_scaling })
    }

    fn names(vars: &[VariableSpec]) -> Vec<String> {
        vars.iter().map(|v| v.name.clone()).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Transform {
    Real(Linear),
    Embedding(ParamId),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Network {
    transforms: Vec<(String, Transform)>,
    static_vsn: VariableSelection,
    encoder_vsn: VariableSelection,
    decoder_vsn: VariableSelection,
    ctx_selection: Grn,
    ctx_enrichment: Grn,
    ctx_hidden: Grn,
    ctx_cell: Grn,
    encoder_lstm: Lstm,
    decoder_lstm: Lstm,
    post_lstm: GateAddNorm,
    enrichment: Grn,
    attention: InterpretableAttention,
    post_attention: GateAddNorm,
    positionwise: Grn,
    pre_output: GateAddNorm,
    output: Linear,
}

/// Network inputs of one batch, time-major.
pub(crate) enum Input {
    Real(Array2<f64>),
    Categorical(Vec<usize>),
}

/// One assembled batch.
pub struct Batch {
    pub(crate) size: usize,
    pub(crate) statics: Vec<Input>,
    pub(crate) encoder: Vec<Input>,
    pub(crate) decoder: Vec<Input>,
    /// Decoder targets, time-major, when every window has them.
    pub(crate) targets: Option<Vec<f64>>,
}

/// Quantile forecasts of a batch: `values[sample][step][quantile]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    /// Quantile levels.
    pub levels: Vec<f64>,
    /// Values per sample, horizon step and level.
    pub values: Vec<Vec<Vec<f64>>>,
}

/// Per-sample interpretability outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretationTrace {
    /// Static variable names.
    pub static_names: Vec<String>,
    /// Encoder (past-set) variable names.
    pub encoder_names: Vec<String>,
    /// Decoder (future-set) variable names.
    pub decoder_names: Vec<String>,
    /// Static selection weights.
    pub static_weights: Vec<f64>,
    /// `[encoder step][variable]` selection weights.
    pub encoder_weights: Vec<Vec<f64>>,
    /// `[decoder step][variable]` selection weights.
    pub decoder_weights: Vec<Vec<f64>>,
    /// `[decoder query][position]` head-averaged attention over all
    /// encoder then decoder positions.
    pub attention: Vec<Vec<f64>>,
}

/// Nodes produced by one forward pass.
pub struct ForwardNodes {
    /// `(horizon * B) x Q` quantile predictions, time-major.
    pub quantiles: Var,
    pub(crate) static_weights: Var,
    pub(crate) encoder_weights: Var,
    pub(crate) decoder_weights: Var,
    pub(crate) attention: Var,
    /// The static context vectors (selection, enrichment, hidden, cell).
    pub contexts: [Var; 4],
}

/// Trained (or freshly initialized) TFT.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TftModel {
    version: u32,
    hp: TftHyperParams,
    schema: InputSchema,
    params: ParamStore,
    net: Network,
}

fn width(kind: VarKind, hcs: usize) -> usize {
    match kind {
        VarKind::Real | VarKind::Categorical(_) => hcs,
    }
}

impl TftModel {
    /// Randomly initialized model.
    pub fn new(schema: InputSchema, hp: TftHyperParams) -> Result<Self> {
        hp.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        Ok(Self::init(schema, hp, &mut rng))
    }

    pub(crate) fn init(schema: InputSchema, hp: TftHyperParams, rng: &mut ChaCha8Rng) -> Self {
        let mut store = ParamStore::default();
        let mut init = Init { store: &mut store, rng };
        let h = hp.hidden_size;
        let hcs = hp.hidden_continuous_size;
        let mut transforms: Vec<(String, Transform)> = Vec::new();
        for v in schema.statics.iter().chain(&schema.encoder).chain(&schema.decoder) {
            if transforms.iter().any(|(n, _)| *n == v.name) {
                continue;
            }
            let t = match v.kind {
                VarKind::Real => Transform::Real(Linear::new(&mut init, &format!("prescale.{}", v.name), 1, hcs, true)),
                VarKind::Categorical(k) => Transform::Embedding(init.embedding(format!("embed.{}", v.name), k, hcs)),
            };
            transforms.push((v.name.clone(), t));
        }
        let widths = |vars: &[VariableSpec]| vars.iter().map(|v| width(v.kind, hcs)).collect::<Vec<_>>();
        let n_q = hp.quantiles.len();
        let net = Network {
            static_vsn: VariableSelection::new(&mut init, "static_vsn", &widths(&schema.statics), h, None),
            encoder_vsn: VariableSelection::new(&mut init, "encoder_vsn", &widths(&schema.encoder), h, Some(h)),
            decoder_vsn: VariableSelection::new(&mut init, "decoder_vsn", &widths(&schema.decoder), h, Some(h)),
            ctx_selection: Grn::new(&mut init, "ctx_selection", h, h, h, None),
            ctx_enrichment: Grn::new(&mut init, "ctx_enrichment", h, h, h, None),
            ctx_hidden: Grn::new(&mut init, "ctx_hidden", h, h, h, None),
            ctx_cell: Grn::new(&mut init, "ctx_cell", h, h, h, None),
            encoder_lstm: Lstm::new(&mut init, "encoder_lstm", h, h),
            decoder_lstm: Lstm::new(&mut init, "decoder_lstm", h, h),
            post_lstm: GateAddNorm::new(&mut init, "post_lstm", h, h),
            enrichment: Grn::new(&mut init, "enrichment", h, h, h, Some(h)),
            attention: InterpretableAttention::new(&mut init, "attention", h, hp.attention_heads),
            post_attention: GateAddNorm::new(&mut init, "post_attention", h, h),
            positionwise: Grn::new(&mut init, "positionwise", h, h, h, None),
            pre_output: GateAddNorm::new(&mut init, "pre_output", h, h),
            output: Linear::new(&mut init, "output", h, n_q, true),
            transforms,
        };
        TftModel { version: CHECKPOINT_VERSION, hp, schema, params: store, net }
    }

    /// Hyperparameters.
    pub fn hyperparams(&self) -> &TftHyperParams {
        &self.hp
    }

    /// Input schema.
    pub fn schema(&self) -> &InputSchema {
        &self.schema
    }

    /// Parameters.
    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Mutable parameters (finite-difference checks, loading).
    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub(crate) fn set_params(&mut self, p: ParamStore) {
        self.params = p;
    }

    /// Assemble a batch from windows. Every window must match the encoder
    /// and prediction lengths and the schema's variable counts.
    pub fn batch(&self, windows: &[&SampleWindow]) -> Result<Batch> {
        let (e, d) = (self.hp.encoder_length, self.hp.prediction_length);
        let n_past = self.schema.encoder.len() - 1 - self.schema.decoder.len();
        for w in windows {
            if w.encoder_len() != e || w.decoder_future.iter().any(|c| c.len() != d) {
                return Err(Error::Shape(format!(
                    "window lengths {}+{} do not match encoder {e} + horizon {d}",
                    w.encoder_len(),
                    w.horizon()
                )));
            }
            if w.encoder_past.len() != n_past
                || w.encoder_future.len() != self.schema.decoder.len()
                || w.decoder_future.len() != self.schema.decoder.len()
                || w.statics.len() + 1 != self.schema.statics.len()
            {
                return Err(Error::Shape("window covariates do not match the model's input schema".into()));
            }
        }
        let b = windows.len();
        let to_input = |kind: VarKind, values: Vec<f64>| match kind {
            VarKind::Real => Input::Real(Array2::from_shape_vec((values.len(), 1), values).expect("column")),
            VarKind::Categorical(k) => Input::Categorical(values.iter().map(|v| (*v as usize).min(k - 1)).collect()),
        };
        // time-major: row t * b + sample
        let series = |steps: usize, get: &dyn Fn(&SampleWindow, usize) -> f64| -> Vec<f64> {
            (0..steps).flat_map(|t| windows.iter().map(move |w| get(w, t))).collect()
        };
        let mut statics = Vec::new();
        let mut group_idx = Vec::with_capacity(b);
        for w in windows {
            let gi = self.schema.group_ids.iter().position(|g| *g == w.group_id).ok_or_else(|| {
                Error::InvalidData(format!("group '{}' unknown to the model", w.group_id))
            })?;
            group_idx.push(gi);
        }
        statics.push(Input::Categorical(group_idx));
        for (j, spec) in self.schema.statics.iter().enumerate().skip(1) {
            let vals: Vec<f64> = windows
                .iter()
                .map(|w| {
                    let v = w.statics[j - 1];
                    self.schema.static_scaling[j].map_or(v, |s| s.forward(v))
                })
                .collect();
            statics.push(to_input(spec.kind, vals));
        }
        let mut encoder = vec![to_input(VarKind::Real, series(e, &|w, t| w.encoder_target[t]))];
        for (j, spec) in self.schema.encoder[1..1 + n_past].iter().enumerate() {
            encoder.push(to_input(spec.kind, series(e, &|w, t| w.encoder_past[j][t])));
        }
        for (j, spec) in self.schema.decoder.iter().enumerate() {
            encoder.push(to_input(spec.kind, series(e, &|w, t| w.encoder_future[j][t])));
        }
        let decoder = self
            .schema
            .decoder
            .iter()
            .enumerate()
            .map(|(j, spec)| to_input(spec.kind, series(d, &|w, t| w.decoder_future[j][t])))
            .collect();
        let targets = windows
            .iter()
            .all(|w| w.decoder_target.is_some())
            .then(|| series(d, &|w, t| w.decoder_target.as_ref().expect("checked")[t]));
        Ok(Batch { size: b, statics, encoder, decoder, targets })
    }

    fn transform(&self, tape: &mut Tape, name: &str, input: &Input) -> Var {
        let (_, t) = self.net.transforms.iter().find(|(n, _)| n == name).expect("transform registered");
        match (t, input) {
            (Transform::Real(lin), Input::Real(x)) => {
                let x = tape.constant(x.clone());
                lin.forward(tape, x)
            }
            (Transform::Embedding(table), Input::Categorical(idx)) => {
                let table = tape.param(*table);
                tape.gather(table, idx.clone())
            }
            _ => unreachable!("input kind matches schema"),
        }
    }

    /// Record the full forward pass of `batch` on `tape`.
    pub fn forward(&self, tape: &mut Tape, batch: &Batch, mode: &mut Mode) -> ForwardNodes {
        let net = &self.net;
        let (b, e, d) = (batch.size, self.hp.encoder_length, self.hp.prediction_length);

        let static_in: Vec<Var> = self
            .schema
            .statics
            .iter()
            .zip(&batch.statics)
            .map(|(s, x)| self.transform(tape, &s.name, x))
            .collect();
        let (static_emb, static_weights) = net.static_vsn.forward(tape, &static_in, None, mode);
        let c_sel = net.ctx_selection.forward(tape, static_emb, None, mode);
        let c_enr = net.ctx_enrichment.forward(tape, static_emb, None, mode);
        let c_h = net.ctx_hidden.forward(tape, static_emb, None, mode);
        let c_c = net.ctx_cell.forward(tape, static_emb, None, mode);

        let enc_in: Vec<Var> = self
            .schema
            .encoder
            .iter()
            .zip(&batch.encoder)
            .map(|(s, x)| self.transform(tape, &s.name, x))
            .collect();
        let dec_in: Vec<Var> = self
            .schema
            .decoder
            .iter()
            .zip(&batch.decoder)
            .map(|(s, x)| self.transform(tape, &s.name, x))
            .collect();
        let ctx_enc = tape.tile_rows(c_sel, e);
        let ctx_dec = tape.tile_rows(c_sel, d);
        let (enc_x, encoder_weights) = net.encoder_vsn.forward(tape, &enc_in, Some(ctx_enc), mode);
        let (dec_x, decoder_weights) = net.decoder_vsn.forward(tape, &dec_in, Some(ctx_dec), mode);

        let (enc_h, h_last, c_last) = net.encoder_lstm.forward(tape, enc_x, b, e, c_h, c_c);
        let (dec_h, _, _) = net.decoder_lstm.forward(tape, dec_x, b, d, h_last, c_last);
        let lstm_out = tape.concat_rows(&[enc_h, dec_h]);
        let lstm_in = tape.concat_rows(&[enc_x, dec_x]);
        let temporal = net.post_lstm.forward(tape, lstm_out, lstm_in, mode);

        let ctx_all = tape.tile_rows(c_enr, e + d);
        let enriched = net.enrichment.forward(tape, temporal, Some(ctx_all), mode);
        let (attn_out, attention) = net.attention.forward(tape, enriched, b, e, d, mode);
        let enriched_dec = tape.slice_rows(enriched, e * b, d * b);
        let attended = net.post_attention.forward(tape, attn_out, enriched_dec, mode);
        let ff = net.positionwise.forward(tape, attended, None, mode);
        let temporal_dec = tape.slice_rows(temporal, e * b, d * b);
        let pre = net.pre_output.forward(tape, ff, temporal_dec, mode);
        let quantiles = net.output.forward(tape, pre);

        ForwardNodes {
            quantiles,
            static_weights,
            encoder_weights,
            decoder_weights,
            attention,
            contexts: [c_sel, c_enr, c_h, c_c],
        }
    }

    /// The four static context vectors (selection, enrichment, initial
    /// hidden state, initial cell state) of one window, eval mode.
    pub fn static_contexts(&self, window: &SampleWindow) -> Result<[Vec<f64>; 4]> {
        let batch = self.batch(&[window])?;
        let mut tape = Tape::new(&self.params);
        let out = self.forward(&mut tape, &batch, &mut Mode::eval());
        Ok(out.contexts.map(|c| tape.value(c).row(0).to_vec()))
    }

    /// Mean quantile loss of a batch (with targets) and its gradients.
    pub fn loss_and_gradients(&self, batch: &Batch, mode: &mut Mode) -> Result<(f64, Gradients)> {
        let targets = batch
            .targets
            .clone()
            .ok_or_else(|| Error::InvalidData("loss needs decoder targets".into()))?;
        let mut tape = Tape::new(&self.params);
        let out = self.forward(&mut tape, batch, mode);
        let loss = tape.quantile_loss(out.quantiles, targets, self.hp.quantiles.clone());
        let value = tape.value(loss)[[0, 0]];
        if !value.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss {value}; {}", first_non_finite(&tape, &out))));
        }
        Ok((value, tape.backward(loss)))
    }

    /// Mean quantile loss of a batch in eval mode.
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        let targets = batch
            .targets
            .clone()
            .ok_or_else(|| Error::InvalidData("loss needs decoder targets".into()))?;
        let mut tape = Tape::new(&self.params);
        let out = self.forward(&mut tape, batch, &mut Mode::eval());
        let loss = tape.quantile_loss(out.quantiles, targets, self.hp.quantiles.clone());
        Ok(tape.value(loss)[[0, 0]])
    }

    /// Eval-mode forecasts and interpretation traces.
    pub fn predict(&self, windows: &[&SampleWindow]) -> Result<(QuantileForecast, Vec<InterpretationTrace>)> {
        let mut values = Vec::with_capacity(windows.len());
        let mut traces = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(self.hp.batch_size.max(1)) {
            let batch = self.batch(chunk)?;
            let mut tape = Tape::new(&self.params);
            let out = self.forward(&mut tape, &batch, &mut Mode::eval());
            let q = tape.value(out.quantiles);
            if q.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged(first_non_finite(&tape, &out)));
            }
            let b = batch.size;
            let d = self.hp.prediction_length;
            for s in 0..b {
                values.push((0..d).map(|t| q.row(t * b + s).to_vec()).collect());
            }
            traces.extend(self.traces(&tape, &out, b));
        }
        Ok((QuantileForecast { levels: self.hp.quantiles.clone(), values }, traces))
    }

    fn traces(&self, tape: &Tape, out: &ForwardNodes, b: usize) -> Vec<InterpretationTrace> {
        let (e, d) = (self.hp.encoder_length, self.hp.prediction_length);
        let sw = tape.value(out.static_weights);
        let ew = tape.value(out.encoder_weights);
        let dw = tape.value(out.decoder_weights);
        let attn = tape.attention_weights(out.attention).expect("attention node");
        (0..b)
            .map(|s| InterpretationTrace {
                static_names: InputSchema::names(&self.schema.statics),
                encoder_names: InputSchema::names(&self.schema.encoder),
                decoder_names: InputSchema::names(&self.schema.decoder),
                static_weights: sw.row(s).to_vec(),
                encoder_weights: (0..e).map(|t| ew.row(t * b + s).to_vec()).collect(),
                decoder_weights: (0..d).map(|t| dw.row(t * b + s).to_vec()).collect(),
                attention: attn[s].clone(),
            })
            .collect()
    }

    /// Serialize to a JSON checkpoint (hyperparameters embedded).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Load a JSON checkpoint.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: TftModel = serde_json::from_str(text)?;
        if m.version != CHECKPOINT_VERSION {
            return Err(Error::Serde(format!("unsupported checkpoint version {}", m.version)));
        }
        Ok(m)
    }
}

fn first_non_finite(tape: &Tape, out: &ForwardNodes) -> String {
    let named = [
        ("static_encoder", out.contexts[0]),
        ("encoder_variable_selection", out.encoder_weights),
        ("decoder_variable_selection", out.decoder_weights),
        ("attention", out.attention),
        ("output", out.quantiles),
    ];
    for (name, v) in named {
        if tape.value(v).iter().any(|x| !x.is_finite()) {
            return format!("non-finite activation in layer '{name}'");
        }
    }
    "non-finite value outside the monitored layers".into()
}

/// Sort each step's quantile values so they are nondecreasing in the level.
pub fn enforce_quantile_monotonicity(raw: &[f64]) -> Vec<f64> {
    let mut v = raw.to_vec();
    v.sort_by(f64::total_cmp);
    v
}
