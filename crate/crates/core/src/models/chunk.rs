//! Chunk-level forward pass with per-step caching and truncated BPTT.

use super::cells::{self, CellCache, CellInputs};
use super::params::Gradients;
use super::{Family, ModelSpec, ParameterSet};
use crate::corpus::SequenceChunk;
use crate::error::{Error, Result};
use crate::linalg::{dropout_mask, Rng};

/// Recurrent state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub h: Vec<f64>,
    /// LSTM cell state.
    pub c: Option<Vec<f64>>,
}

impl State {
    pub fn zeros(spec: &ModelSpec) -> Self {
        State {
            h: vec![0.0; spec.hidden],
            c: (spec.family == Family::Lstm).then(|| vec![0.0; spec.hidden]),
        }
    }
}

/// Gradient flowing into a state from later timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrad {
    pub h: Vec<f64>,
    pub c: Option<Vec<f64>>,
}

impl StateGrad {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let s = State::zeros(spec);
        StateGrad { h: s.h, c: s.c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Dropout active with the given drop probability; the cache is kept.
    Train { p_drop: f64 },
    /// No dropout, no cache.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub input: u32,
    pub target: u32,
    pub slice: usize,
    pub prev: State,
    pub next: State,
    pub cell: CellCache,
    pub embed_mask: Option<Vec<f64>>,
    pub out_mask: Option<Vec<f64>>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardCache {
    pub steps: Vec<StepCache>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sum of `-ln p(target)` recomputed from the cached distributions.
    pub fn replay_loss(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| -s.probs[s.target as usize].ln())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkOutput {
    pub loss_sum: f64,
    pub token_losses: Vec<f64>,
    pub tokens: usize,
    pub cache: ForwardCache,
    pub state_out: State,
}

/// Run one chunk. Step `t` consumes `inputs[t]` and is scored on
/// `targets[t]`. The state is zeroed first when the chunk says so. In train
/// mode each step draws its masks from `rng` (embedding mask first for gated
/// families, then the output mask).
pub fn forward_chunk(
    params: &ParameterSet,
    spec: &ModelSpec,
    chunk: &SequenceChunk,
    state_in: &State,
    mode: Mode,
    rng: &mut Rng,
) -> Result<ChunkOutput> {
    if chunk.inputs.len() != chunk.targets.len() {
        return Err(Error::shape("chunk inputs and targets differ in length"));
    }
    let (p_drop, keep) = match mode {
        Mode::Train { p_drop } => {
            if !(0.0..1.0).contains(&p_drop) {
                return Err(Error::InvalidDropout(p_drop));
            }
            (p_drop, true)
        }
        Mode::Eval => (0.0, false),
    };
    let mut state = if chunk.reset_before {
        State::zeros(spec)
    } else {
        state_in.clone()
    };
    let mut token_losses = Vec::with_capacity(chunk.len());
    let mut steps = Vec::with_capacity(if keep { chunk.len() } else { 0 });

    for (t, (&x, &y)) in chunk.inputs.iter().zip(&chunk.targets).enumerate() {
        if x as usize >= spec.vocab || y as usize >= spec.vocab {
            return Err(Error::shape(format!("token id out of range at step {t}")));
        }
        let embed_mask = if p_drop > 0.0 && spec.family.is_gated() {
            Some(dropout_mask(rng, spec.embed, p_drop)?)
        } else {
            None
        };
        let out_mask = if p_drop > 0.0 {
            Some(dropout_mask(rng, spec.hidden, p_drop)?)
        } else {
            None
        };
        let (next, cell) = cells::step(params, spec, x, &state, embed_mask.as_deref());
        let probs = cells::output_distribution(params, &next.h, out_mask.as_deref());
        let loss = -probs[y as usize].ln();
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("timestep {t} (loss {loss})")));
        }
        token_losses.push(loss);
        if keep {
            steps.push(StepCache {
                input: x,
                target: y,
                slice: spec.policy.slice_of_id(x),
                prev: std::mem::replace(&mut state, next.clone()),
                next,
                cell,
                embed_mask,
                out_mask,
                probs,
            });
        } else {
            state = next;
        }
    }

    let loss_sum = token_losses.iter().sum();
    Ok(ChunkOutput {
        loss_sum,
        tokens: token_losses.len(),
        token_losses,
        cache: ForwardCache { steps },
        state_out: state,
    })
}

/// Exact gradients of the chunk loss, truncated at the chunk start.
/// `state_grad_in` is the gradient arriving at the final state from beyond
/// the chunk (zero in truncated training). Returns the parameter gradients
/// and the gradient with respect to the chunk's initial state.
pub fn backward_chunk(
    params: &ParameterSet,
    spec: &ModelSpec,
    cache: &ForwardCache,
    state_grad_in: &StateGrad,
) -> (Gradients, StateGrad) {
    let mut grads = Gradients::zeros(params);
    let out = backward_chunk_into(params, spec, cache, state_grad_in, &mut grads);
    (grads, out)
}

/// As [`backward_chunk`], accumulating into existing gradients.
pub fn backward_chunk_into(
    params: &ParameterSet,
    spec: &ModelSpec,
    cache: &ForwardCache,
    state_grad_in: &StateGrad,
    grads: &mut Gradients,
) -> StateGrad {
    let mut dh_next = state_grad_in.h.clone();
    let mut dc_next = state_grad_in.c.clone();
    for s in cache.steps.iter().rev() {
        let out_input = cells::masked(&s.next.h, s.out_mask.as_deref());
        let mut dh = cells::output_backward(
            params,
            &out_input,
            s.out_mask.as_deref(),
            &s.probs,
            s.target,
            grads,
        );
        for (a, b) in dh.iter_mut().zip(&dh_next) {
            *a += b;
        }
        let inputs = CellInputs {
            x: s.input,
            h_prev: &s.prev.h,
            c_prev: s.prev.c.as_deref(),
            h: &s.next.h,
            embed_mask: s.embed_mask.as_deref(),
            cache: &s.cell,
        };
        let (dh_prev, dc_prev) =
            cells::cell_backward(params, spec, inputs, &dh, dc_next.as_deref(), grads);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    StateGrad {
        h: dh_next,
        c: dc_next,
    }
}
