//! Global explainability summaries aggregated from per-sample traces.
//!
//! Selection weights say how much a variable is used, not the direction
//! of its effect: it is not possible to ascertain from them whether the
//! impact of a variable on the forecast is positive or negative.

use serde::{Deserialize, Serialize};

use crate::tft::InterpretationTrace;
use crate::{Error, Result};

/// Mean attention weight per position relative to the forecast origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionProfile {
    /// `-encoder_len..=-1` then `1..=horizon`.
    pub positions: Vec<i64>,
    /// Mean weight at each position.
    pub weights: Vec<f64>,
}

impl AttentionProfile {
    /// Mean weight at a relative position.
    pub fn at(&self, position: i64) -> Option<f64> {
        self.positions.iter().position(|p| *p == position).map(|i| self.weights[i])
    }

    /// CSV with header `position,weight`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("position,weight\n");
        for (p, w) in self.positions.iter().zip(&self.weights) {
            s.push_str(&format!("{p},{w}\n"));
        }
        s
    }
}

/// One entry of an importance ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableImportance {
    /// Variable name.
    pub variable: String,
    /// Mean selection weight.
    pub weight: f64,
}

/// Importance rankings of the three variable sets, each sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    /// Static variables.
    pub static_vars: Vec<VariableImportance>,
    /// Encoder-side variables, averaged over encoder steps.
    pub past: Vec<VariableImportance>,
    /// Decoder-side (known future) variables, averaged over decoder steps.
    pub future: Vec<VariableImportance>,
}

/// Renders a ranking as CSV with header `variable,weight`.
pub fn importance_csv(list: &[VariableImportance]) -> String {
    let mut s = String::from("variable,weight\n");
    for v in list {
        s.push_str(&format!("{},{}\n", v.variable, v.weight));
    }
    s
}

/// Attention profile, per-query attention and importance rankings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretationSummary {
    /// Number of traces aggregated.
    pub n_samples: usize,
    /// Mean attention per relative position.
    pub attention: AttentionProfile,
    /// `[decoder query][position]` attention averaged over samples.
    pub attention_by_query: Vec<Vec<f64>>,
    /// Variable importances.
    pub importance: ImportanceSummary,
}

// Sorting first makes the sum independent of trace order.
fn order_free_mean(mut v: Vec<f64>) -> f64 {
    let n = v.len() as f64;
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / n
}

fn check_shapes(traces: &[InterpretationTrace]) -> Result<&InterpretationTrace> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InsufficientData("no interpretation traces".into()))?;
    let shape = |t: &InterpretationTrace| {
        (
            t.static_weights.len(),
            t.encoder_weights.len(),
            t.encoder_weights.first().map_or(0, Vec::len),
            t.decoder_weights.len(),
            t.decoder_weights.first().map_or(0, Vec::len),
            t.attention.len(),
            t.attention.first().map_or(0, Vec::len),
        )
    };
    let s0 = shape(first);
    if s0.5 != s0.3 || s0.6 != s0.1 + s0.3 {
        return Err(Error::Shape("attention does not match the encoder and decoder lengths".into()));
    }
    for t in traces {
        let ragged = t.encoder_weights.iter().any(|w| w.len() != s0.2)
            || t.decoder_weights.iter().any(|w| w.len() != s0.4)
            || t.attention.iter().any(|r| r.len() != s0.6);
        if shape(t) != s0 || ragged || t.encoder_names != first.encoder_names || t.decoder_names != first.decoder_names
        {
            return Err(Error::Shape("interpretation traces differ in shape".into()));
        }
    }
    Ok(first)
}

/// Mean over samples of the head-averaged attention, one row per query.
pub fn attention_by_query(traces: &[InterpretationTrace]) -> Result<Vec<Vec<f64>>> {
    let first = check_shapes(traces)?;
    let (nq, np) = (first.attention.len(), first.attention[0].len());
    Ok((0..nq)
        .map(|i| (0..np).map(|j| order_free_mean(traces.iter().map(|t| t.attention[i][j]).collect())).collect())
        .collect())
}

/// Mean attention over samples and decoder queries, by relative position.
pub fn mean_attention_profile(traces: &[InterpretationTrace]) -> Result<AttentionProfile> {
    let first = check_shapes(traces)?;
    let n_enc = first.encoder_weights.len();
    let n_pos = first.attention[0].len();
    let positions = (0..n_pos)
        .map(|j| if j < n_enc { j as i64 - n_enc as i64 } else { (j - n_enc + 1) as i64 })
        .collect();
    let weights = (0..n_pos)
        .map(|j| order_free_mean(traces.iter().flat_map(|t| t.attention.iter().map(move |r| r[j])).collect()))
        .collect();
    Ok(AttentionProfile { positions, weights })
}

fn rank(names: &[String], rows: impl Fn(usize) -> Vec<f64>) -> Vec<VariableImportance> {
    let mut out: Vec<VariableImportance> = names
        .iter()
        .enumerate()
        .map(|(k, n)| VariableImportance { variable: n.clone(), weight: order_free_mean(rows(k)) })
        .collect();
    out.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.variable.cmp(&b.variable)));
    out
}

/// Mean selection weight per variable and set, ranked descending.
pub fn variable_importance_summary(traces: &[InterpretationTrace]) -> Result<ImportanceSummary> {
    let first = check_shapes(traces)?;
    Ok(ImportanceSummary {
        static_vars: rank(&first.static_names, |k| traces.iter().map(|t| t.static_weights[k]).collect()),
        past: rank(&first.encoder_names, |k| {
            traces.iter().flat_map(|t| t.encoder_weights.iter().map(move |w| w[k])).collect()
        }),
        future: rank(&first.decoder_names, |k| {
            traces.iter().flat_map(|t| t.decoder_weights.iter().map(move |w| w[k])).collect()
        }),
    })
}

/// Everything the report needs from a set of traces.
pub fn summarize(traces: &[InterpretationTrace]) -> Result<InterpretationSummary> {
    Ok(InterpretationSummary {
        n_samples: traces.len(),
        attention: mean_attention_profile(traces)?,
        attention_by_query: attention_by_query(traces)?,
        importance: variable_importance_summary(traces)?,
    })
}
