//! Desk-scale capacity comparison on the synthetic V = 500 corpus:
//! s-RNN against r-RNTN with f and fmod mappings at K = 20, H = 32.
//!
//! `cargo run --release --example capacity -- [seeds]`

use std::time::Instant;

use rrntn::corpus::synthetic::{corpus_texts, SourceSpec};
use rrntn::corpus::{CorpusFormat, EncodedCorpus};
use rrntn::eval::perplexity;
use rrntn::mapping::MappingPolicy;
use rrntn::models::ModelSpec;
use rrntn::training::{eval_resets, fit, TrainConfig};

fn main() -> rrntn::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .map_or(Ok(3), |s| s.parse())
        .expect("seed count");
    for seed in 1..=seeds {
        let [tr, va, te] = corpus_texts(SourceSpec::v500(), seed, 100_000, 10_000, 10_000);
        let (vocab, corpus) = EncodedCorpus::prepare(&tr, &va, &te, CorpusFormat::Ptb, 1, None)?;
        let cfg = TrainConfig::desk_scale(seed);
        for policy in [
            MappingPolicy::single(),
            MappingPolicy::rank_min(20),
            MappingPolicy::rank_mod(20),
        ] {
            let spec = ModelSpec::rrntn(vocab.len(), 32, policy);
            let start = Instant::now();
            let fitted = fit(&spec, &cfg, &corpus, |m| {
                eprintln!(
                    "  {} epoch {} valid {:.2}",
                    spec.display_name(),
                    m.epoch,
                    m.valid_ppl
                );
                Ok(())
            })?;
            let test = perplexity(
                &fitted.params,
                &spec,
                &corpus.test,
                eval_resets(&cfg),
                cfg.t_bptt,
            )?;
            println!(
                "seed {seed} {:<10} K={:<3} test PPL {test:.3} ({:.0}s)",
                spec.display_name(),
                spec.k(),
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
