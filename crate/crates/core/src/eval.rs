//! Perplexity, K sweeps and parameter-count reports.

use std::fmt::Write as _;

use crate::corpus::{eval_chunks, EncodedCorpus, Split};
use crate::error::{Error, Result};
use crate::linalg::Rng;
use crate::mapping::{MappingPolicy, PolicyKind};
use crate::models::{
    forward_chunk, param_count, param_formula, Mode, ModelSpec, ParameterSet, State,
};
use crate::training::{eval_resets, fit, TrainConfig};

/// Total negative log-likelihood and prediction count over a split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub nll: f64,
    pub tokens: usize,
}

impl Evaluation {
    pub fn perplexity(&self) -> f64 {
        (self.nll / self.tokens as f64).exp()
    }
}

/// Walk every prediction of `split` without dropout. Per-token losses are
/// added to one running sum in stream order, so the result does not depend
/// on `t_bptt`.
pub fn evaluate(
    params: &ParameterSet,
    spec: &ModelSpec,
    split: &Split,
    sentence_resets: bool,
    t_bptt: usize,
) -> Result<Evaluation> {
    if let Some(id) = split.max_id() {
        if id as usize >= spec.vocab {
            return Err(Error::Shape(format!(
                "token id {id} outside the model vocabulary of {}",
                spec.vocab
            )));
        }
    }
    let mut rng = Rng::new(0);
    let mut state = State::zeros(spec);
    let mut nll = 0.0;
    let mut tokens = 0;
    for chunk in eval_chunks(split, t_bptt, sentence_resets)? {
        let out = forward_chunk(params, spec, &chunk, &state, Mode::Eval, &mut rng)?;
        for l in &out.token_losses {
            nll += l;
        }
        tokens += out.tokens;
        state = out.state_out;
    }
    if tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(Evaluation { nll, tokens })
}

pub fn perplexity(
    params: &ParameterSet,
    spec: &ModelSpec,
    split: &Split,
    sentence_resets: bool,
    t_bptt: usize,
) -> Result<f64> {
    let ppl = evaluate(params, spec, split, sentence_resets, t_bptt)?.perplexity();
    if !ppl.is_finite() {
        return Err(Error::Divergence(format!("evaluation (perplexity {ppl})")));
    }
    Ok(ppl)
}

/// One trained cell of a sweep. A failed cell keeps its error and no perplexities.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub policy: PolicyKind,
    pub k: usize,
    pub hidden: usize,
    pub params: u64,
    pub test_ppl: Option<f64>,
    pub valid_ppl: Option<f64>,
    pub seed: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Policy-major, K ascending within each policy.
    pub cells: Vec<SweepCell>,
}

pub const SWEEP_HEADER: &str = "policy,K,H,params,test_ppl,valid_ppl,seed";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_HEADER}\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.policy,
                c.k,
                c.hidden,
                c.params,
                fmt_opt(c.test_ppl),
                fmt_opt(c.valid_ppl),
                c.seed
            );
        }
        out
    }

    pub fn cell(&self, policy: PolicyKind, k: usize) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.policy == policy && c.k == k)
    }
}

/// Train one model per (policy, K) from the same seed and record test and
/// validation perplexity. `K = 1` is the s-RNN (or plain gated net) and
/// `K = V` the full tensor model. A cell that fails is recorded with its
/// error and the sweep moves on.
pub fn run_k_sweep(
    base: &ModelSpec,
    ks: &[usize],
    policies: &[PolicyKind],
    cfg: &TrainConfig,
    corpus: &EncodedCorpus,
) -> Result<SweepResult> {
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(vec![format!(
            "K values must be non-empty and strictly increasing, got {ks:?}"
        )]));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > base.vocab) {
        return Err(Error::Config(vec![format!(
            "K = {k} outside 1..={}",
            base.vocab
        )]));
    }
    let mut cells = Vec::with_capacity(ks.len() * policies.len());
    for &policy in policies {
        for &k in ks {
            let spec = ModelSpec {
                policy: MappingPolicy::new(policy, k),
                ..*base
            };
            let mut cell = SweepCell {
                policy,
                k,
                hidden: spec.hidden,
                params: param_count(&spec),
                test_ppl: None,
                valid_ppl: None,
                seed: cfg.seed,
                error: None,
            };
            match train_and_score(&spec, cfg, corpus) {
                Ok((valid, test)) => {
                    cell.valid_ppl = Some(valid);
                    cell.test_ppl = Some(test);
                }
                Err(e) => cell.error = Some(e.to_string()),
            }
            cells.push(cell);
        }
    }
    Ok(SweepResult { cells })
}

/// Fit and return (best validation, test) perplexity of the best epoch.
pub fn train_and_score(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    corpus: &EncodedCorpus,
) -> Result<(f64, f64)> {
    let fitted = fit(spec, cfg, corpus, |_| Ok(()))?;
    let resets = eval_resets(cfg);
    let valid = perplexity(&fitted.params, spec, &corpus.valid, resets, cfg.t_bptt)?;
    let test = perplexity(&fitted.params, spec, &corpus.test, resets, cfg.t_bptt)?;
    Ok((valid, test))
}

/// Millions with one decimal below 20M and whole millions from 20M up,
/// rounding half up and dropping a trailing `.0`.
pub fn format_param_label(count: u64) -> String {
    if count >= 20_000_000 {
        let m = (count + 500_000) / 1_000_000;
        return format!("{m}M");
    }
    let tenths = (count + 50_000) / 100_000;
    if tenths.is_multiple_of(10) {
        format!("{}M", tenths / 10)
    } else {
        format!("{}.{}M", tenths / 10, tenths % 10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub name: String,
    pub spec: ModelSpec,
    pub count: u64,
    pub label: String,
    pub formula: &'static str,
}

pub fn capacity_report(specs: &[ModelSpec]) -> Result<Vec<CapacityRow>> {
    specs
        .iter()
        .map(|spec| {
            spec.validate()?;
            let count = param_count(spec);
            Ok(CapacityRow {
                name: describe(spec),
                spec: *spec,
                count,
                label: format_param_label(count),
                formula: param_formula(spec),
            })
        })
        .collect()
}

/// Display name with the sizes that distinguish it, e.g. `r-RNTN f H=100 K=100`.
pub fn describe(spec: &ModelSpec) -> String {
    let mut s = format!("{} V={} H={}", spec.display_name(), spec.vocab, spec.hidden);
    if spec.family.is_gated() {
        let _ = write!(s, " E={}", spec.embed);
    }
    if spec.family == crate::models::Family::Mrnn {
        let _ = write!(s, " F={}", spec.factor);
    } else if spec.k() > 1 {
        let _ = write!(s, " K={}", spec.k());
    }
    s
}

pub const PTB_VOCAB: usize = 10_000;
pub const TEXT8_VOCAB: usize = 37_751;

/// A reference configuration and the parameter label published for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfig {
    pub corpus: &'static str,
    pub spec: ModelSpec,
    pub expected_label: &'static str,
}

/// The PTB and text8 model configurations with their published size labels.
pub fn reference_configs() -> Vec<ReferenceConfig> {
    let ptb = PTB_VOCAB;
    let t8 = TEXT8_VOCAB;
    let f = MappingPolicy::rank_min;
    let one = MappingPolicy::single;
    let row = |corpus, spec, expected_label| ReferenceConfig {
        corpus,
        spec,
        expected_label,
    };
    vec![
        row("ptb", ModelSpec::srnn(ptb, 100), "2M"),
        row("ptb", ModelSpec::rrntn(ptb, 100, f(100)), "3M"),
        row("ptb", ModelSpec::rntn(ptb, 100), "103M"),
        row("ptb", ModelSpec::mrnn(ptb, 100, 100), "3M"),
        row("ptb", ModelSpec::srnn(ptb, 150), "3M"),
        row("ptb", ModelSpec::rrntn(ptb, 150, f(100)), "5.3M"),
        row("ptb", ModelSpec::gru(ptb, 650, 244, one()), "9.6M"),
        row("ptb", ModelSpec::gru(ptb, 650, 650, one()), "15.5M"),
        row("ptb", ModelSpec::gru(ptb, 650, 244, f(100)), "15.5M"),
        row("ptb", ModelSpec::lstm(ptb, 650, 254, one()), "10M"),
        row("ptb", ModelSpec::lstm(ptb, 650, 650, one()), "16.4M"),
        row("ptb", ModelSpec::lstm(ptb, 650, 254, f(100)), "16.4M"),
        row("text8", ModelSpec::srnn(t8, 100), "7.6M"),
        row("text8", ModelSpec::rrntn(t8, 100, f(376)), "11.4M"),
        row("text8", ModelSpec::mrnn(t8, 100, 100), "11.4M"),
        row("text8", ModelSpec::srnn(t8, 150), "11.4M"),
        row("text8", ModelSpec::rrntn(t8, 150, f(376)), "19.8M"),
    ]
}
