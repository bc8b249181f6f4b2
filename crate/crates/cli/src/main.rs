use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rrntn::checkpoint::Checkpoint;
use rrntn::config::{parse_k_list, RunConfig};
use rrntn::corpus::synthetic::{corpus_texts, SourceSpec};
use rrntn::corpus::{read_text, split_text8, CorpusFormat, EncodedCorpus, Vocabulary};
use rrntn::eval::{
    capacity_report, describe, evaluate, format_param_label, perplexity, reference_configs,
    run_k_sweep,
};
use rrntn::mapping::{MappingPolicy, PolicyKind};
use rrntn::models::{param_count, param_formula, Family, ModelSpec, DEFAULT_FACTOR};
use rrntn::training::{eval_resets, fit, grad_check, GradCheckOptions, METRICS_HEADER};
use rrntn::Error;

const VOCAB_FILE: &str = "vocab.tsv";

#[derive(Parser)]
#[command(
    name = "rrntn",
    version,
    about = "Restricted recurrent neural tensor network language models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vocabulary and encode train/valid/test splits.
    Prep(PrepArgs),
    /// Train from a run config; writes the best checkpoint and a metrics CSV.
    Train { config: PathBuf },
    /// Perplexity of a checkpoint on one split.
    Eval(EvalArgs),
    /// Exact parameter count and rounded label.
    CountParams(CountArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradArgs),
    /// Train one model per K and policy; writes a CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Ptb,
    Text8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Synthetic {
    V50,
    V500,
}

#[derive(Args)]
struct PrepArgs {
    /// PTB directory (ptb.train.txt, ptb.valid.txt, ptb.test.txt) or the text8 file.
    #[arg(required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ptb")]
    format: Format,
    /// Words seen fewer times become <unk> (default 1 for ptb, 10 for text8).
    #[arg(long)]
    min_count: Option<u64>,
    /// Cap on the vocabulary size, <unk> included.
    #[arg(long)]
    max_vocab: Option<usize>,
    /// Generate a synthetic line-per-sentence corpus instead of reading one.
    #[arg(long, value_enum, conflicts_with = "input")]
    synthetic: Option<Synthetic>,
    /// Approximate training tokens for --synthetic (valid and test get a tenth each).
    #[arg(long, default_value_t = 100_000)]
    tokens: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    checkpoint: PathBuf,
    /// Directory written by `prep`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    vocab: usize,
    #[arg(long)]
    hidden: usize,
    /// Embedding size (gated families; defaults to hidden).
    #[arg(long)]
    embed: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "f")]
    policy: PolicyKind,
    #[arg(long, default_value_t = DEFAULT_FACTOR)]
    factor: usize,
}

impl ModelArgs {
    fn spec(&self) -> rrntn::Result<ModelSpec> {
        let policy = match self.policy {
            PolicyKind::Identity => MappingPolicy::identity(self.vocab),
            kind => MappingPolicy::new(kind, self.k),
        };
        let spec = ModelSpec {
            family: self.family,
            vocab: self.vocab,
            embed: self.embed.unwrap_or(self.hidden),
            hidden: self.hidden,
            policy,
            factor: self.factor,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct CountArgs {
    /// Print every reference configuration next to its published label.
    #[arg(long, conflicts_with_all = ["family", "vocab", "hidden"])]
    table: bool,
    #[arg(long, required_unless_present = "table")]
    family: Option<Family>,
    #[arg(long, required_unless_present = "table")]
    vocab: Option<usize>,
    #[arg(long, required_unless_present = "table")]
    hidden: Option<usize>,
    #[arg(long)]
    embed: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "f")]
    policy: PolicyKind,
    #[arg(long, default_value_t = DEFAULT_FACTOR)]
    factor: usize,
}

#[derive(Args)]
struct GradArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 20)]
    vocab: usize,
    #[arg(long, default_value_t = 8)]
    hidden: usize,
    #[arg(long)]
    embed: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "f")]
    policy: PolicyKind,
    #[arg(long, default_value_t = DEFAULT_FACTOR)]
    factor: usize,
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// Comma-separated K values (overrides k_list).
    #[arg(long)]
    k: Option<String>,
    /// Comma-separated policies (overrides policies).
    #[arg(long)]
    policies: Option<String>,
    /// Output CSV (overrides sweep_out).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the process exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Divergence(_) => 2,
            Error::Io(_) | Error::Checkpoint(_) | Error::Format(_) | Error::EmptyCorpus => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Prep(a) => prep(&a),
        Command::Train { config } => train(&config),
        Command::Eval(a) => eval(&a),
        Command::CountParams(a) => count_params(&a),
        Command::Gradcheck(a) => gradcheck(&a),
        Command::Sweep(a) => sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn prep(a: &PrepArgs) -> CmdResult {
    let (texts, format) = match (a.synthetic, &a.input) {
        (Some(which), _) => {
            let spec = match which {
                Synthetic::V50 => SourceSpec::v50(),
                Synthetic::V500 => SourceSpec::v500(),
            };
            let [tr, va, te] = corpus_texts(spec, a.seed, a.tokens, a.tokens / 10, a.tokens / 10);
            ([tr, va, te], Format::Ptb)
        }
        (None, Some(input)) => match a.format {
            Format::Ptb => {
                let read = |split: &str| -> rrntn::Result<String> {
                    let p = input.join(format!("ptb.{split}.txt"));
                    if p.exists() {
                        read_text(&p)
                    } else {
                        read_text(&input.join(format!("{split}.txt")))
                    }
                };
                ([read("train")?, read("valid")?, read("test")?], Format::Ptb)
            }
            Format::Text8 => {
                let text = read_text(input)?;
                let (tr, va, te) = split_text8(&text);
                (
                    [tr.to_string(), va.to_string(), te.to_string()],
                    Format::Text8,
                )
            }
        },
        (None, None) => unreachable!("clap requires input or --synthetic"),
    };
    let (corpus_format, default_min) = match format {
        Format::Ptb => (CorpusFormat::Ptb, 1),
        Format::Text8 => (CorpusFormat::Text8, 10),
    };
    let min_count = a.min_count.unwrap_or(default_min);
    let [tr, va, te] = &texts;
    let (vocab, corpus) =
        EncodedCorpus::prepare(tr, va, te, corpus_format, min_count, a.max_vocab)?;
    fs::create_dir_all(&a.out)?;
    vocab.save(&a.out.join(VOCAB_FILE))?;
    corpus.save(&a.out)?;
    if a.synthetic.is_some() {
        for (name, text) in ["train", "valid", "test"].iter().zip(&texts) {
            fs::write(a.out.join(format!("{name}.txt")), text)?;
        }
    }
    println!("V={}", vocab.len());
    for (name, split) in [
        ("train", &corpus.train),
        ("valid", &corpus.valid),
        ("test", &corpus.test),
    ] {
        println!(
            "{name}: {} tokens, {} sentences",
            split.tokens.len(),
            split.boundaries.len()
        );
    }
    println!("vocab hash {}", vocab.hash());
    Ok(())
}

fn load_data(dir: &Path) -> rrntn::Result<(Vocabulary, EncodedCorpus)> {
    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
    let corpus = EncodedCorpus::load(dir)?;
    Ok((vocab, corpus))
}

fn train(path: &Path) -> CmdResult {
    let cfg = RunConfig::load(path)?;
    let (vocab, corpus) = load_data(&cfg.data_dir)?;
    let spec = cfg.model.build(vocab.len())?;
    eprintln!(
        "{}: {} parameters ({}), {} regime",
        describe(&spec),
        param_count(&spec),
        format_param_label(param_count(&spec)),
        cfg.train.regime
    );
    let mut metrics = BufWriter::new(File::create(&cfg.metrics)?);
    writeln!(metrics, "{METRICS_HEADER}")?;
    let fitted = fit(&spec, &cfg.train, &corpus, |m| {
        eprintln!(
            "epoch {:>3}  lr {:<10} train {:>10.3}  valid {:>10.3}  {:.1}s",
            m.epoch, m.lr, m.train_ppl, m.valid_ppl, m.seconds
        );
        metrics.write_all(m.csv_row(cfg.timing).as_bytes())?;
        metrics.flush()?;
        Ok(())
    })?;
    let ckpt = Checkpoint {
        spec,
        params: fitted.params,
        vocab_hash: vocab.hash(),
        train: cfg.train,
        epoch: fitted.best_epoch,
        run_config: cfg.text.clone(),
    };
    ckpt.save(&cfg.checkpoint, cfg.precision)?;
    let resets = eval_resets(&cfg.train);
    let valid = perplexity(&ckpt.params, &spec, &corpus.valid, resets, cfg.train.t_bptt)?;
    let test = perplexity(&ckpt.params, &spec, &corpus.test, resets, cfg.train.t_bptt)?;
    println!("best epoch {}", fitted.best_epoch);
    println!("valid PPL {valid:.3}");
    println!("test PPL {test:.3}");
    Ok(())
}

fn eval(a: &EvalArgs) -> CmdResult {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let (vocab, corpus) = load_data(&a.data)?;
    ckpt.check_vocab(&vocab)?;
    let split = corpus.split(&a.split).ok_or_else(|| Failure {
        code: 1,
        message: format!(
            "unknown split {:?} (expected train, valid or test)",
            a.split
        ),
    })?;
    let resets = eval_resets(&ckpt.train) && split.has_sentences();
    let result = evaluate(&ckpt.params, &ckpt.spec, split, resets, ckpt.train.t_bptt)?;
    let ppl = result.perplexity();
    if !ppl.is_finite() {
        return Err(Error::Divergence(format!("evaluation (perplexity {ppl})")).into());
    }
    println!("{} on {}: PPL {ppl:.6}", describe(&ckpt.spec), a.split);
    println!("predicted tokens {}", result.tokens);
    println!("conventions: next-word prediction (input w_t scores w_t+1)");
    if split.has_sentences() {
        println!("conventions: eos appended to every line, counted in V and predicted");
    }
    println!(
        "conventions: hidden state reset at sentence starts: {}",
        if resets { "yes" } else { "no" }
    );
    println!("conventions: dropout off");
    Ok(())
}

fn print_spec_count(spec: &ModelSpec) {
    let n = param_count(spec);
    println!("{}", describe(spec));
    println!("  params  {n}");
    println!("  label   {}", format_param_label(n));
    println!("  formula {}", param_formula(spec));
}

fn count_params(a: &CountArgs) -> CmdResult {
    if a.table {
        let refs = reference_configs();
        let specs: Vec<ModelSpec> = refs.iter().map(|r| r.spec).collect();
        let rows = capacity_report(&specs)?;
        println!(
            "{:<6} {:<34} {:>12} {:>7} {:>10}",
            "corpus", "model", "params", "label", "published"
        );
        for (r, row) in refs.iter().zip(&rows) {
            let mark = if row.label == r.expected_label {
                ""
            } else {
                "  (differs)"
            };
            println!(
                "{:<6} {:<34} {:>12} {:>7} {:>10}{mark}",
                r.corpus, row.name, row.count, row.label, r.expected_label
            );
        }
        println!();
        let mut seen = Vec::new();
        for row in &rows {
            if !seen.contains(&row.spec.family) {
                seen.push(row.spec.family);
                println!("{}: {}", row.spec.family, row.formula);
            }
        }
        return Ok(());
    }
    let args = ModelArgs {
        family: a.family.expect("required"),
        vocab: a.vocab.expect("required"),
        hidden: a.hidden.expect("required"),
        embed: a.embed,
        k: a.k,
        policy: a.policy,
        factor: a.factor,
    };
    print_spec_count(&args.spec()?);
    Ok(())
}

fn gradcheck(a: &GradArgs) -> CmdResult {
    let spec = ModelArgs {
        family: a.family,
        vocab: a.vocab,
        hidden: a.hidden,
        embed: a.embed,
        k: a.k,
        policy: a.policy,
        factor: a.factor,
    }
    .spec()?;
    let opts = GradCheckOptions {
        steps: a.steps,
        p_drop: a.dropout,
        seed: a.seed,
        ..GradCheckOptions::default()
    };
    let report = grad_check(&spec, &opts)?;
    println!("{} T={}", describe(&spec), a.steps);
    for b in &report.blocks {
        println!(
            "  {:<15} {:>6} entries  max rel error {:.3e}  (at {}: analytic {:.6e}, numeric {:.6e})",
            b.name, b.checked, b.max_rel_error, b.worst, b.analytic, b.numeric
        );
    }
    let worst = report.max_rel_error();
    if report.passed(a.tol) {
        println!("PASS max relative error {worst:.3e} < {:e}", a.tol);
        Ok(())
    } else {
        println!("FAIL max relative error {worst:.3e} >= {:e}", a.tol);
        Err(Failure {
            code: 2,
            message: "gradient check failed".into(),
        })
    }
}

fn sweep(a: &SweepArgs) -> CmdResult {
    let cfg = RunConfig::load(&a.config)?;
    let ks = match &a.k {
        Some(s) => parse_k_list(s)?,
        None => cfg.k_list.clone(),
    };
    if ks.is_empty() {
        return Err(Error::Config(vec!["no K values: pass --k or set k_list".into()]).into());
    }
    let policies = match &a.policies {
        Some(s) => s
            .split(',')
            .map(|p| p.trim().parse::<PolicyKind>())
            .collect::<rrntn::Result<Vec<_>>>()?,
        None => cfg.policies.clone(),
    };
    let out = a.out.clone().unwrap_or_else(|| cfg.sweep_out.clone());
    let (vocab, corpus) = load_data(&cfg.data_dir)?;
    let base = cfg.model.build(vocab.len())?;
    let result = run_k_sweep(&base, &ks, &policies, &cfg.train, &corpus)?;
    fs::write(&out, result.to_csv())?;
    for c in &result.cells {
        match (&c.test_ppl, &c.error) {
            (Some(t), _) => println!(
                "{:<5} K={:<6} params {:>10}  test PPL {t:.3}",
                c.policy, c.k, c.params
            ),
            (None, Some(e)) => eprintln!("{:<5} K={:<6} failed: {e}", c.policy, c.k),
            (None, None) => {}
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}
