//! SGD with truncated BPTT in two regimes.
//!
//! `Simple` walks each sentence in chunks of `t_bptt` predictions with one
//! update per chunk, a state reset at every sentence start and no gradient
//! clipping. `Gated` cuts the corpus into `batch` parallel lanes, carries the
//! state across chunks, averages the gradient over lanes and clips it.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::corpus::{chunk_sentences, chunk_stream, EncodedCorpus, SequenceChunk, Split};
use crate::error::{Error, Result};
use crate::eval::perplexity;
use crate::linalg::{clip_by_global_norm, Rng};
use crate::models::{
    backward_chunk, backward_chunk_into, forward_chunk, init_params, Family, Gradients, Init, Mode,
    ModelSpec, ParameterSet, State, StateGrad,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Simple,
    Gated,
}

impl Regime {
    pub fn for_family(family: Family) -> Regime {
        if family.is_gated() {
            Regime::Gated
        } else {
            Regime::Simple
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Simple => "simple",
            Regime::Gated => "gated",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Regime::Simple),
            "gated" => Ok(Regime::Gated),
            other => Err(Error::Config(vec![format!(
                "unknown regime {other:?} (expected simple or gated)"
            )])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub regime: Regime,
    pub t_bptt: usize,
    pub batch: usize,
    pub lr0: f64,
    /// prev/cur validation perplexity below this halves the learning rate.
    pub halving_ratio: f64,
    /// Consecutive sub-threshold epochs before stopping.
    pub patience: usize,
    pub p_drop: f64,
    pub clip_norm: Option<f64>,
    pub init: Init,
    pub zero_bias: bool,
    pub seed: u64,
    pub max_epochs: usize,
}

impl TrainConfig {
    pub fn simple() -> Self {
        TrainConfig {
            regime: Regime::Simple,
            t_bptt: 20,
            batch: 1,
            lr0: 0.1,
            halving_ratio: 1.003,
            patience: 5,
            p_drop: 0.5,
            clip_norm: None,
            init: Init::Gaussian { stddev: 0.001 },
            zero_bias: false,
            seed: 1,
            max_epochs: 100,
        }
    }

    pub fn gated() -> Self {
        TrainConfig {
            regime: Regime::Gated,
            t_bptt: 35,
            batch: 20,
            lr0: 1.0,
            clip_norm: Some(5.0),
            init: Init::Uniform {
                lo: -0.05,
                hi: 0.05,
            },
            ..TrainConfig::simple()
        }
    }

    /// Desk-scale settings for the synthetic capacity comparison. The simple
    /// regime's tiny init and heavy dropout leave every model at the bigram
    /// plateau of a 100k-token corpus within a dozen epochs, so this uses a
    /// wider init, no dropout and halves only when validation gets worse.
    pub fn desk_scale(seed: u64) -> Self {
        TrainConfig {
            lr0: 0.15,
            halving_ratio: 1.000_000_1,
            patience: 100,
            p_drop: 0.0,
            init: Init::Gaussian { stddev: 0.1 },
            seed,
            max_epochs: 12,
            ..TrainConfig::simple()
        }
    }

    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Simple => TrainConfig::simple(),
            Regime::Gated => TrainConfig::gated(),
        }
    }

    /// Every violated constraint, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            out.push(format!(
                "lr must be finite and non-negative, got {}",
                self.lr0
            ));
        }
        if self.patience < 1 {
            out.push("patience must be at least 1".into());
        }
        if self.halving_ratio.is_nan() || self.halving_ratio <= 1.0 {
            out.push(format!(
                "halving_ratio must exceed 1, got {}",
                self.halving_ratio
            ));
        }
        if self.t_bptt < 1 {
            out.push("t_bptt must be at least 1".into());
        }
        if self.batch < 1 {
            out.push("batch must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            out.push(format!("dropout must lie in [0, 1), got {}", self.p_drop));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                out.push(format!("clip_norm must be positive, got {c}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_ppl: f64,
    pub valid_ppl: f64,
    pub seconds: f64,
}

pub const METRICS_HEADER: &str = "epoch,lr,train_ppl,valid_ppl,seconds";

impl EpochMetrics {
    /// One metrics CSV line, newline included. Floats use the shortest
    /// round-trip form; `timing = false` writes 0 seconds so runs compare
    /// byte for byte.
    pub fn csv_row(&self, timing: bool) -> String {
        let seconds = if timing {
            format!("{:.3}", self.seconds)
        } else {
            "0".into()
        };
        format!(
            "{},{},{},{},{}\n",
            self.epoch, self.lr, self.train_ppl, self.valid_ppl, seconds
        )
    }
}

/// `p <- p - lr * g`. Fails without touching `params` if the gradient is
/// not finite.
pub fn sgd_apply(params: &mut ParameterSet, grads: &mut Gradients, lr: f64) -> Result<()> {
    let norm = grads.norm();
    if !norm.is_finite() {
        return Err(Error::Divergence(format!("update (gradient norm {norm})")));
    }
    if lr != 0.0 {
        grads.apply_to(params, lr);
    }
    Ok(())
}

/// Rescale to at most `max_norm`; returns the factor used.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64) -> f64 {
    clip_by_global_norm(&mut grads.arrays_mut(), max_norm)
}

/// Learning-rate schedule after one epoch: halve and count a plateau when
/// `prev / cur` falls below the threshold, otherwise reset the count. The
/// first epoch has no predecessor and never halves.
pub fn schedule_step(
    prev_valid_ppl: Option<f64>,
    cur_valid_ppl: f64,
    lr: f64,
    plateau_count: usize,
    cfg: &TrainConfig,
) -> (f64, usize, bool) {
    let Some(prev) = prev_valid_ppl else {
        return (lr, plateau_count, false);
    };
    let (lr, count) = if prev / cur_valid_ppl < cfg.halving_ratio {
        (lr / 2.0, plateau_count + 1)
    } else {
        (lr, 0)
    };
    (lr, count, count >= cfg.patience)
}

/// Hidden state reset at sentence starts for evaluation in this regime.
pub fn eval_resets(cfg: &TrainConfig) -> bool {
    cfg.regime == Regime::Simple
}

fn with_position(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::Divergence(msg) => Error::Divergence(format!("epoch {epoch}, step {step}, {msg}")),
        other => other,
    }
}

/// One pass over `train` followed by a dropout-free validation pass.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    params: &mut ParameterSet,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    train: &Split,
    valid: &Split,
    lr: f64,
    epoch: usize,
    rng: &mut Rng,
) -> Result<EpochMetrics> {
    let started = Instant::now();
    let mode = Mode::Train { p_drop: cfg.p_drop };
    let mut loss = 0.0;
    let mut tokens = 0usize;
    match cfg.regime {
        Regime::Simple => {
            let chunks: Box<dyn Iterator<Item = SequenceChunk>> = if train.has_sentences() {
                Box::new(chunk_sentences(train, cfg.t_bptt)?)
            } else {
                Box::new(chunk_stream(train, cfg.t_bptt, 1)?.flatten())
            };
            let mut state = State::zeros(spec);
            let zero_grad = StateGrad::zeros(spec);
            for (step, chunk) in chunks.enumerate() {
                let out = forward_chunk(params, spec, &chunk, &state, mode, rng)
                    .map_err(|e| with_position(e, epoch, step))?;
                loss += out.loss_sum;
                tokens += out.tokens;
                let (mut grads, _) = backward_chunk(params, spec, &out.cache, &zero_grad);
                if let Some(c) = cfg.clip_norm {
                    clip_gradients(&mut grads, c);
                }
                sgd_apply(params, &mut grads, lr).map_err(|e| with_position(e, epoch, step))?;
                state = out.state_out;
            }
        }
        Regime::Gated => {
            let batches = chunk_stream(train, cfg.t_bptt, cfg.batch)?;
            let mut states = vec![State::zeros(spec); cfg.batch];
            let zero_grad = StateGrad::zeros(spec);
            for (step, lanes) in batches.enumerate() {
                let mut grads = Gradients::zeros(params);
                for (lane, chunk) in lanes.iter().enumerate() {
                    let out = forward_chunk(params, spec, chunk, &states[lane], mode, rng)
                        .map_err(|e| with_position(e, epoch, step))?;
                    loss += out.loss_sum;
                    tokens += out.tokens;
                    backward_chunk_into(params, spec, &out.cache, &zero_grad, &mut grads);
                    states[lane] = out.state_out;
                }
                grads.scale(1.0 / cfg.batch as f64);
                if let Some(c) = cfg.clip_norm {
                    clip_gradients(&mut grads, c);
                }
                sgd_apply(params, &mut grads, lr).map_err(|e| with_position(e, epoch, step))?;
            }
        }
    }
    if tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    let train_ppl = (loss / tokens as f64).exp();
    if !train_ppl.is_finite() {
        return Err(Error::Divergence(format!(
            "epoch {epoch}, training perplexity {train_ppl}"
        )));
    }
    let valid_ppl = perplexity(params, spec, valid, eval_resets(cfg), cfg.t_bptt)
        .map_err(|e| with_position(e, epoch, 0))?;
    Ok(EpochMetrics {
        epoch,
        lr,
        train_ppl,
        valid_ppl,
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters after the epoch with the lowest validation perplexity
    /// (the initial parameters when no epoch ran).
    pub params: ParameterSet,
    pub history: Vec<EpochMetrics>,
    /// 1-based index into `history`; 0 when no epoch ran.
    pub best_epoch: usize,
}

/// Initialise from `cfg.seed` and train. Initialisation and dropout draw
/// from independent streams derived from the seed.
pub fn fit(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    corpus: &EncodedCorpus,
    on_epoch: impl FnMut(&EpochMetrics) -> Result<()>,
) -> Result<FitResult> {
    cfg.validate()?;
    let root = Rng::new(cfg.seed);
    let params = init_params(spec, cfg.init, cfg.zero_bias, &mut root.split(0))?;
    fit_from(params, spec, cfg, corpus, on_epoch)
}

/// Train starting from `params`. `on_epoch` sees every epoch as it finishes.
pub fn fit_from(
    mut params: ParameterSet,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    corpus: &EncodedCorpus,
    mut on_epoch: impl FnMut(&EpochMetrics) -> Result<()>,
) -> Result<FitResult> {
    cfg.validate()?;
    spec.validate()?;
    for (name, split) in [("train", &corpus.train), ("valid", &corpus.valid)] {
        if let Some(id) = split.max_id() {
            if id as usize >= spec.vocab {
                return Err(Error::Shape(format!(
                    "{name} split has token id {id} but the model vocabulary is {}",
                    spec.vocab
                )));
            }
        }
    }
    let mut rng = Rng::new(cfg.seed).split(1);
    let mut best = params.clone();
    let mut best_ppl = f64::INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut lr = cfg.lr0;
    let mut plateau = 0;
    let mut prev = None;
    for epoch in 1..=cfg.max_epochs {
        let m = train_epoch(
            &mut params,
            spec,
            cfg,
            &corpus.train,
            &corpus.valid,
            lr,
            epoch,
            &mut rng,
        )?;
        on_epoch(&m)?;
        history.push(m);
        if m.valid_ppl < best_ppl {
            best_ppl = m.valid_ppl;
            best_epoch = epoch;
            best = params.clone();
        }
        let (next_lr, count, stop) = schedule_step(prev, m.valid_ppl, lr, plateau, cfg);
        lr = next_lr;
        plateau = count;
        prev = Some(m.valid_ppl);
        if stop {
            break;
        }
    }
    Ok(FitResult {
        params: if best_epoch == 0 { params } else { best },
        history,
        best_epoch,
    })
}

/// Worst finite-difference disagreement within one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCheck {
    pub name: &'static str,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub spec: ModelSpec,
    pub steps: usize,
    pub blocks: Vec<BlockCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error() < tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub steps: usize,
    pub p_drop: f64,
    /// Central-difference step.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            steps: 5,
            p_drop: 0.0,
            epsilon: 1e-5,
            seed: 1,
        }
    }
}

/// `|a - n| / max(|a|, |n|, 1e-5)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Compare the analytic chunk gradient with central differences for every
/// scalar of every tensor. Parameters are drawn from U(-0.5, 0.5), the input
/// sequence and a non-zero initial state at random, and the dropout masks
/// are replayed identically for every evaluation.
pub fn grad_check(spec: &ModelSpec, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    spec.validate()?;
    if opts.steps == 0 {
        return Err(Error::Config(vec![
            "gradient check needs at least one step".into(),
        ]));
    }
    let mut rng = Rng::new(opts.seed);
    let mut params = init_params(spec, Init::Uniform { lo: -0.5, hi: 0.5 }, false, &mut rng)?;
    let ids: Vec<u32> = (0..=opts.steps)
        .map(|_| rng.below(spec.vocab) as u32)
        .collect();
    let chunk = SequenceChunk {
        inputs: ids[..opts.steps].to_vec(),
        targets: ids[1..].to_vec(),
        reset_before: false,
    };
    let mut state = State::zeros(spec);
    state.h.iter_mut().for_each(|v| *v = rng.uniform());
    if let Some(c) = &mut state.c {
        c.iter_mut().for_each(|v| *v = rng.uniform() - 0.5);
    }
    let mask_seed = rng.next_u64();
    let mode = Mode::Train {
        p_drop: opts.p_drop,
    };

    let loss = |p: &ParameterSet| -> Result<f64> {
        Ok(forward_chunk(p, spec, &chunk, &state, mode, &mut Rng::new(mask_seed))?.loss_sum)
    };
    let out = forward_chunk(
        &params,
        spec,
        &chunk,
        &state,
        mode,
        &mut Rng::new(mask_seed),
    )?;
    let (grads, _) = backward_chunk(&params, spec, &out.cache, &StateGrad::zeros(spec));

    let names: Vec<(&'static str, usize)> = params
        .tensors()
        .iter()
        .map(|(n, m)| (*n, m.len()))
        .collect();
    let mut blocks = Vec::with_capacity(names.len());
    for (t, (name, len)) in names.into_iter().enumerate() {
        let mut block = BlockCheck {
            name,
            checked: len,
            max_rel_error: 0.0,
            worst: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..len {
            let orig = params.tensors()[t].1.data()[i];
            params.tensors_mut()[t].1.data_mut()[i] = orig + opts.epsilon;
            let up = loss(&params)?;
            params.tensors_mut()[t].1.data_mut()[i] = orig - opts.epsilon;
            let down = loss(&params)?;
            params.tensors_mut()[t].1.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * opts.epsilon);
            let analytic = grads.get(name, i).unwrap_or(0.0);
            let rel = relative_error(analytic, numeric);
            if rel > block.max_rel_error || i == 0 {
                block.max_rel_error = rel;
                block.worst = i;
                block.analytic = analytic;
                block.numeric = numeric;
            }
        }
        blocks.push(block);
    }
    Ok(GradCheckReport {
        spec: *spec,
        steps: opts.steps,
        blocks,
    })
}
