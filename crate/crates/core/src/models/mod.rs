//! Forward and backward computation for the whole recurrent family.
//!
//! The simple s-RNN and the full RNTN are not separate code paths: both are
//! r-RNTN configurations (`K = 1` and `K = V` with the identity mapping).
//! Gated networks keep their gate weights shared and, when `K > 1`, take the
//! candidate-state recurrence matrix and bias from the slice tensor.

mod cells;
mod chunk;
mod params;

use std::fmt;
use std::str::FromStr;

pub use cells::{
    gru_step, lstm_step, mrnn_step, output_distribution, rrntn_step, step, CellCache, StepMasks,
};
pub use chunk::{
    backward_chunk, backward_chunk_into, forward_chunk, ChunkOutput, ForwardCache, Mode, State,
    StateGrad, StepCache,
};
pub use params::{init_params, Gradients, Init, ParameterSet, RowGrad};

use crate::error::{Error, Result};
use crate::mapping::{MappingPolicy, PolicyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Rrntn,
    Mrnn,
    Gru,
    Lstm,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Rrntn => "rrntn",
            Family::Mrnn => "mrnn",
            Family::Gru => "gru",
            Family::Lstm => "lstm",
        }
    }

    pub fn is_gated(self) -> bool {
        matches!(self, Family::Gru | Family::Lstm)
    }

    /// Gates whose input projection lives in the stacked block, candidate included.
    pub(crate) fn gate_rows(self) -> usize {
        match self {
            Family::Gru => 3,
            Family::Lstm => 4,
            _ => 0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rrntn" => Ok(Family::Rrntn),
            "mrnn" => Ok(Family::Mrnn),
            "gru" => Ok(Family::Gru),
            "lstm" => Ok(Family::Lstm),
            other => Err(Error::InvalidSpec(format!(
                "unknown family {other:?} (expected rrntn, mrnn, gru or lstm)"
            ))),
        }
    }
}

/// Architecture and sizes of one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub family: Family,
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    /// Slice count lives in `policy.k`; it is 1 for plain gated networks and
    /// ignored by the m-RNN.
    pub policy: MappingPolicy,
    /// m-RNN factor size.
    pub factor: usize,
}

pub const DEFAULT_FACTOR: usize = 100;

impl ModelSpec {
    pub fn rrntn(vocab: usize, hidden: usize, policy: MappingPolicy) -> Self {
        ModelSpec {
            family: Family::Rrntn,
            vocab,
            embed: hidden,
            hidden,
            policy,
            factor: DEFAULT_FACTOR,
        }
    }

    pub fn srnn(vocab: usize, hidden: usize) -> Self {
        ModelSpec::rrntn(vocab, hidden, MappingPolicy::single())
    }

    pub fn rntn(vocab: usize, hidden: usize) -> Self {
        ModelSpec::rrntn(vocab, hidden, MappingPolicy::identity(vocab))
    }

    pub fn mrnn(vocab: usize, hidden: usize, factor: usize) -> Self {
        ModelSpec {
            family: Family::Mrnn,
            vocab,
            embed: hidden,
            hidden,
            policy: MappingPolicy::single(),
            factor,
        }
    }

    pub fn gru(vocab: usize, embed: usize, hidden: usize, policy: MappingPolicy) -> Self {
        ModelSpec {
            family: Family::Gru,
            vocab,
            embed,
            hidden,
            policy,
            factor: DEFAULT_FACTOR,
        }
    }

    pub fn lstm(vocab: usize, embed: usize, hidden: usize, policy: MappingPolicy) -> Self {
        ModelSpec {
            family: Family::Lstm,
            ..ModelSpec::gru(vocab, embed, hidden, policy)
        }
    }

    pub fn k(&self) -> usize {
        self.policy.k
    }

    /// Slice count actually stored (none for the m-RNN).
    pub fn slice_count(&self) -> usize {
        match self.family {
            Family::Mrnn => 0,
            _ => self.policy.k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.vocab == 0 {
            problems.push("vocabulary size must be positive".to_string());
        }
        if self.hidden == 0 {
            problems.push("hidden size must be positive".to_string());
        }
        if self.embed == 0 {
            problems.push("embedding size must be positive".to_string());
        }
        if !self.family.is_gated() && self.embed != self.hidden {
            problems.push(format!(
                "{} adds the embedding to the hidden pre-activation, so embedding ({}) must equal hidden ({})",
                self.family, self.embed, self.hidden
            ));
        }
        if self.family == Family::Mrnn && self.factor == 0 {
            problems.push("m-RNN factor size must be positive".to_string());
        }
        if self.family != Family::Mrnn {
            if let Err(e) = self.policy.validate(self.vocab) {
                problems.push(e.to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems.join("; ")))
        }
    }

    /// Conventional name: s-RNN, r-RNTN, RNTN, m-RNN, GRU, r-GRU, LSTM, r-LSTM.
    pub fn display_name(&self) -> String {
        let sliced = self.policy.k > 1;
        match self.family {
            Family::Rrntn
                if self.policy.kind == PolicyKind::Identity
                    || (sliced && self.policy.k == self.vocab) =>
            {
                "RNTN".into()
            }
            Family::Rrntn if sliced => format!("r-RNTN {}", self.policy.kind),
            Family::Rrntn => "s-RNN".into(),
            Family::Mrnn => "m-RNN".into(),
            Family::Gru if sliced => format!("r-GRU {}", self.policy.kind),
            Family::Gru => "GRU".into(),
            Family::Lstm if sliced => format!("r-LSTM {}", self.policy.kind),
            Family::Lstm => "LSTM".into(),
        }
    }
}

/// Closed-form count of trainable scalars, per-slice biases and output biases included.
pub fn param_count(spec: &ModelSpec) -> u64 {
    let v = spec.vocab as u64;
    let e = spec.embed as u64;
    let h = spec.hidden as u64;
    let k = spec.policy.k as u64;
    let f = spec.factor as u64;
    let output = v * h + v;
    match spec.family {
        Family::Rrntn => v * e + k * (h * h + h) + output,
        Family::Mrnn => v * e + h * f + f * h + f * v + h + output,
        Family::Gru => v * e + 3 * h * e + 2 * (h * h + h) + k * (h * h + h) + output,
        Family::Lstm => v * e + 4 * h * e + 3 * (h * h + h) + k * (h * h + h) + output,
    }
}

/// Human-readable formula behind [`param_count`].
pub fn param_formula(spec: &ModelSpec) -> &'static str {
    match spec.family {
        Family::Rrntn => "V*E + K*(H^2 + H) + V*H + V   (E = H)",
        Family::Mrnn => "V*E + H*F + F*H + F*V + H + V*H + V   (E = H)",
        Family::Gru => "V*E + 3*H*E + 2*(H^2 + H) + K*(H^2 + H) + V*H + V",
        Family::Lstm => "V*E + 4*H*E + 3*(H^2 + H) + K*(H^2 + H) + V*H + V",
    }
}
