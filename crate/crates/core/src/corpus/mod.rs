//! Corpus ingestion: frequency-ranked vocabularies, token encoding and the
//! two chunking policies (per-sentence and batched stream).
//!
//! Token ids are assigned in rank order, so `rank = id + 1` for every word.
//!
//! Prediction convention: the model consumes token `w_t` and predicts `w_{t+1}`.
//! A sentence corpus is read as the stream `[eos] ++ tokens`, which makes every
//! stored token (each sentence's closing eos included) a prediction target
//! exactly once. A stream corpus has no leading symbol, so its first token is
//! context only.

pub mod synthetic;

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";

/// Input layout of a raw corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One sentence per line; an eos token is appended to every line.
    Ptb,
    /// A single whitespace-separated token stream.
    Text8,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ptb" => Ok(CorpusFormat::Ptb),
            "text8" => Ok(CorpusFormat::Text8),
            other => Err(Error::Config(vec![format!(
                "unknown corpus format {other:?} (expected ptb or text8)"
            )])),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    unk_id: u32,
    eos_id: Option<u32>,
}

impl Vocabulary {
    fn from_ranked(ranked: Vec<(String, u64)>) -> Result<Self> {
        let mut words = Vec::with_capacity(ranked.len());
        let mut counts = Vec::with_capacity(ranked.len());
        let mut index = HashMap::with_capacity(ranked.len());
        for (i, (w, c)) in ranked.into_iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary entry {w:?}")));
            }
            words.push(w);
            counts.push(c);
        }
        let unk_id = *index
            .get(UNK)
            .ok_or_else(|| Error::Format(format!("vocabulary lacks {UNK}")))?;
        let eos_id = index.get(EOS).copied();
        Ok(Vocabulary {
            words,
            counts,
            index,
            unk_id,
            eos_id,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn id_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn freq_of(&self, word: &str) -> Option<u64> {
        self.id_of(word).map(|id| self.count(id))
    }

    /// 1-based frequency rank.
    pub fn rank_of(&self, word: &str) -> Option<usize> {
        self.id_of(word).map(|id| id as usize + 1)
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn eos_id(&self) -> Option<u32> {
        self.eos_id
    }

    /// Id of `word`, falling back to the unknown-word id.
    pub fn encode_token(&self, word: &str) -> u32 {
        self.id_of(word).unwrap_or(self.unk_id)
    }

    /// `word<TAB>count` lines in rank order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (w, c) in self.words.iter().zip(&self.counts) {
            out.push_str(w);
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut ranked = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let (w, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("vocabulary line {}: missing tab", n + 1)))?;
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("vocabulary line {}: bad count", n + 1)))?;
            ranked.push((w.to_string(), c));
        }
        if ranked.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Vocabulary::from_ranked(ranked)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Vocabulary::from_tsv(&fs::read_to_string(path)?)
    }

    /// Short content hash of the rank-ordered table (first 16 hex digits of SHA-256).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_tsv().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Build a rank-ordered vocabulary. Words seen fewer than `min_count` times,
/// or falling past `max_size` entries, are folded into `<unk>`, whose rank
/// comes from its accumulated count. Ties break lexicographically.
pub fn build_vocab<'a, I>(tokens: I, min_count: u64, max_size: Option<usize>) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    if min_count == 0 {
        return Err(Error::Config(vec!["min_count must be at least 1".into()]));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    let mut total = 0u64;
    for t in tokens {
        *freq.entry(t).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }

    let mut unk_count = freq.remove(UNK).unwrap_or(0);
    let mut kept: Vec<(&str, u64)> = Vec::with_capacity(freq.len());
    for (w, c) in freq {
        if c >= min_count {
            kept.push((w, c));
        } else {
            unk_count += c;
        }
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(max) = max_size {
        let room = max.saturating_sub(1);
        if kept.len() > room {
            unk_count += kept[room..].iter().map(|(_, c)| c).sum::<u64>();
            kept.truncate(room);
        }
    }

    let mut ranked: Vec<(String, u64)> =
        kept.into_iter().map(|(w, c)| (w.to_string(), c)).collect();
    ranked.push((UNK.to_string(), unk_count));
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_ranked(ranked)
}

/// Tokens of a line-per-sentence text with an eos token after every line.
pub fn ptb_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .flat_map(|line| line.split_whitespace().chain(std::iter::once(EOS)))
}

pub fn stream_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

pub fn encode_tokens<'a>(
    vocab: &Vocabulary,
    tokens: impl IntoIterator<Item = &'a str>,
) -> Vec<u32> {
    tokens.into_iter().map(|t| vocab.encode_token(t)).collect()
}

/// One encoded split of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub tokens: Vec<u32>,
    /// Sentence start offsets into `tokens`; empty for stream corpora.
    pub boundaries: Vec<usize>,
    /// Symbol read before the first token (eos for sentence corpora).
    pub start_token: Option<u32>,
}

impl Split {
    pub fn stream(tokens: Vec<u32>) -> Self {
        Split {
            tokens,
            boundaries: Vec::new(),
            start_token: None,
        }
    }

    pub fn has_sentences(&self) -> bool {
        !self.boundaries.is_empty()
    }

    /// Token sequence the model walks: `start_token` (if any) then `tokens`.
    pub fn prediction_stream(&self) -> Vec<u32> {
        let mut s = Vec::with_capacity(self.tokens.len() + 1);
        s.extend(self.start_token);
        s.extend_from_slice(&self.tokens);
        s
    }

    /// Number of predicted tokens.
    pub fn prediction_count(&self) -> usize {
        (self.tokens.len() + self.start_token.is_some() as usize).saturating_sub(1)
    }

    pub fn max_id(&self) -> Option<u32> {
        self.tokens
            .iter()
            .chain(self.start_token.iter())
            .copied()
            .max()
    }
}

pub fn encode_lines(vocab: &Vocabulary, text: &str) -> Split {
    let eos = vocab.eos_id().unwrap_or(vocab.unk_id());
    let mut tokens = Vec::new();
    let mut boundaries = Vec::new();
    for line in text.lines() {
        boundaries.push(tokens.len());
        tokens.extend(line.split_whitespace().map(|w| vocab.encode_token(w)));
        tokens.push(eos);
    }
    Split {
        tokens,
        boundaries,
        start_token: Some(eos),
    }
}

pub fn encode_stream(vocab: &Vocabulary, text: &str) -> Split {
    Split::stream(encode_tokens(vocab, stream_tokens(text)))
}

pub fn encode(vocab: &Vocabulary, text: &str, format: CorpusFormat) -> Split {
    match format {
        CorpusFormat::Ptb => encode_lines(vocab, text),
        CorpusFormat::Text8 => encode_stream(vocab, text),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedCorpus {
    pub train: Split,
    pub valid: Split,
    pub test: Split,
}

impl EncodedCorpus {
    /// Build the vocabulary on the training text and encode all three splits.
    pub fn prepare(
        train: &str,
        valid: &str,
        test: &str,
        format: CorpusFormat,
        min_count: u64,
        max_size: Option<usize>,
    ) -> Result<(Vocabulary, EncodedCorpus)> {
        let vocab = match format {
            CorpusFormat::Ptb => build_vocab(ptb_tokens(train), min_count, max_size)?,
            CorpusFormat::Text8 => build_vocab(stream_tokens(train), min_count, max_size)?,
        };
        let corpus = EncodedCorpus {
            train: encode(&vocab, train, format),
            valid: encode(&vocab, valid, format),
            test: encode(&vocab, test, format),
        };
        Ok((vocab, corpus))
    }

    pub fn split(&self, name: &str) -> Option<&Split> {
        match name {
            "train" => Some(&self.train),
            "valid" => Some(&self.valid),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_split(&dir.join("train.ids"), &self.train)?;
        write_split(&dir.join("valid.ids"), &self.valid)?;
        write_split(&dir.join("test.ids"), &self.test)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(EncodedCorpus {
            train: read_split(&dir.join("train.ids"))?,
            valid: read_split(&dir.join("valid.ids"))?,
            test: read_split(&dir.join("test.ids"))?,
        })
    }
}

/// Cut a single-stream corpus 90% / 5% / 5% by bytes, moving each cut
/// forward to the next whitespace so no token is split. On the 100,000,000
/// byte text8 file this is the 90MB-5MB-5MB split.
pub fn split_text8(text: &str) -> (&str, &str, &str) {
    let n = text.len();
    let snap = |mut i: usize| {
        let bytes = text.as_bytes();
        while i < n && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        i
    };
    let a = snap(n / 100 * 90 + (n % 100) * 90 / 100);
    let b = snap((n / 100 * 95 + (n % 100) * 95 / 100).max(a));
    (&text[..a], &text[a..b], &text[b..])
}

const SPLIT_MAGIC: &[u8; 8] = b"RRNTNIDS";
const SPLIT_VERSION: u32 = 1;

/// Binary split file: magic, version, start token flag/value, token count,
/// u32 tokens, boundary count, u64 boundaries; all little-endian.
pub fn write_split(path: &Path, split: &Split) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(SPLIT_MAGIC)?;
    w.write_all(&SPLIT_VERSION.to_le_bytes())?;
    w.write_all(&[split.start_token.is_some() as u8])?;
    w.write_all(&split.start_token.unwrap_or(0).to_le_bytes())?;
    w.write_all(&(split.tokens.len() as u64).to_le_bytes())?;
    for t in &split.tokens {
        w.write_all(&t.to_le_bytes())?;
    }
    w.write_all(&(split.boundaries.len() as u64).to_le_bytes())?;
    for b in &split.boundaries {
        w.write_all(&(*b as u64).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_split(path: &Path) -> Result<Split> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SPLIT_MAGIC {
        return Err(Error::Format(format!("{}: not an id file", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != SPLIT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let start = read_u32(&mut r)?;
    let n = read_u64(&mut r)? as usize;
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        tokens.push(read_u32(&mut r)?);
    }
    let nb = read_u64(&mut r)? as usize;
    let mut boundaries = Vec::with_capacity(nb);
    for _ in 0..nb {
        boundaries.push(read_u64(&mut r)? as usize);
    }
    if !r.fill_buf()?.is_empty() {
        return Err(Error::Format(format!("{}: trailing bytes", path.display())));
    }
    Ok(Split {
        tokens,
        boundaries,
        start_token: (flag[0] != 0).then_some(start),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// A run of consecutive predictions for one lane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceChunk {
    pub inputs: Vec<u32>,
    pub targets: Vec<u32>,
    /// Zero the hidden state before the first input.
    pub reset_before: bool,
}

impl SequenceChunk {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Per-sentence chunks of at most `t_bptt` predictions; the hidden state is
/// reset only before the first chunk of each sentence.
pub fn chunk_sentences(split: &Split, t_bptt: usize) -> Result<SentenceChunks> {
    if !split.has_sentences() {
        return Err(Error::UnsupportedPolicy);
    }
    if t_bptt == 0 {
        return Err(Error::Config(vec!["t_bptt must be at least 1".into()]));
    }
    let offset = split.start_token.is_some() as usize;
    let mut ranges = Vec::with_capacity(split.boundaries.len());
    for (i, &s) in split.boundaries.iter().enumerate() {
        let e = split
            .boundaries
            .get(i + 1)
            .copied()
            .unwrap_or(split.tokens.len());
        // ranges index the prediction stream; position 0 has no predecessor
        ranges.push(((s + offset).max(1), e + offset));
    }
    Ok(SentenceChunks {
        stream: split.prediction_stream(),
        ranges,
        sentence: 0,
        pos: None,
        t_bptt,
    })
}

#[derive(Debug, Clone)]
pub struct SentenceChunks {
    stream: Vec<u32>,
    ranges: Vec<(usize, usize)>,
    sentence: usize,
    pos: Option<usize>,
    t_bptt: usize,
}

impl Iterator for SentenceChunks {
    type Item = SequenceChunk;

    fn next(&mut self) -> Option<SequenceChunk> {
        loop {
            let &(start, end) = self.ranges.get(self.sentence)?;
            let pos = self.pos.unwrap_or(start);
            if pos >= end {
                self.sentence += 1;
                self.pos = None;
                continue;
            }
            let stop = (pos + self.t_bptt).min(end);
            self.pos = Some(stop);
            return Some(SequenceChunk {
                inputs: self.stream[pos - 1..stop - 1].to_vec(),
                targets: self.stream[pos..stop].to_vec(),
                reset_before: pos == start,
            });
        }
    }
}

/// Batched contiguous-lane chunks for stream training.
///
/// The prediction stream of `N` tokens is cut into `batch` lanes of
/// `L = (N - 1) / batch` predictions each (lanes share their boundary token);
/// each step yields one chunk of `t_bptt` predictions per lane and any
/// trailing remainder shorter than `t_bptt` is dropped.
pub fn chunk_stream(split: &Split, t_bptt: usize, batch: usize) -> Result<StreamBatches> {
    if batch == 0 || t_bptt == 0 {
        return Err(Error::Config(vec![
            "batch and t_bptt must be at least 1".into()
        ]));
    }
    let stream = split.prediction_stream();
    let needed = batch * (t_bptt + 1);
    if stream.len() < needed {
        return Err(Error::CorpusTooSmall {
            needed,
            got: stream.len(),
        });
    }
    let lane_len = (stream.len() - 1) / batch;
    Ok(StreamBatches {
        stream,
        lane_len,
        steps: lane_len / t_bptt,
        step: 0,
        t_bptt,
        batch,
    })
}

#[derive(Debug, Clone)]
pub struct StreamBatches {
    stream: Vec<u32>,
    lane_len: usize,
    steps: usize,
    step: usize,
    t_bptt: usize,
    batch: usize,
}

impl StreamBatches {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn lane_len(&self) -> usize {
        self.lane_len
    }
}

impl Iterator for StreamBatches {
    type Item = Vec<SequenceChunk>;

    fn next(&mut self) -> Option<Vec<SequenceChunk>> {
        if self.step >= self.steps {
            return None;
        }
        let s = self.step;
        self.step += 1;
        Some(
            (0..self.batch)
                .map(|b| {
                    let start = b * self.lane_len + s * self.t_bptt;
                    SequenceChunk {
                        inputs: self.stream[start..start + self.t_bptt].to_vec(),
                        targets: self.stream[start + 1..start + self.t_bptt + 1].to_vec(),
                        reset_before: s == 0,
                    }
                })
                .collect(),
        )
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.steps - self.step;
        (left, Some(left))
    }
}

/// Every prediction of a split in chunks of at most `t_bptt`, single lane,
/// nothing dropped. Resets follow sentences when `sentence_resets` is set and
/// the split has them; otherwise only the first chunk resets.
pub fn eval_chunks(
    split: &Split,
    t_bptt: usize,
    sentence_resets: bool,
) -> Result<Vec<SequenceChunk>> {
    if sentence_resets && split.has_sentences() {
        return Ok(chunk_sentences(split, t_bptt)?.collect());
    }
    if t_bptt == 0 {
        return Err(Error::Config(vec!["t_bptt must be at least 1".into()]));
    }
    let stream = split.prediction_stream();
    let mut out = Vec::new();
    let mut pos = 1;
    while pos < stream.len() {
        let stop = (pos + t_bptt).min(stream.len());
        out.push(SequenceChunk {
            inputs: stream[pos - 1..stop - 1].to_vec(),
            targets: stream[pos..stop].to_vec(),
            reset_before: pos == 1,
        });
        pos = stop;
    }
    Ok(out)
}

/// Read an entire text file, mapping a missing file to an I/O error that
/// names the path.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}
