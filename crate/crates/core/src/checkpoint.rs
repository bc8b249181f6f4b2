//! Model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"RRNTNCKP"  u32 version  u8 bytes-per-scalar (8 or 4)
//! u64 header length, header (UTF-8 `key = value` lines, then the run config)
//! per tensor in declared order: u64 rows, u64 cols, rows*cols scalars
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::Precision;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::mapping::{MappingPolicy, PolicyKind};
use crate::models::{Family, ModelSpec, ParameterSet};
use crate::training::TrainConfig;

const MAGIC: &[u8; 8] = b"RRNTNCKP";
const VERSION: u32 = 1;
const RUN_CONFIG_MARKER: &str = "--- run config ---\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub params: ParameterSet,
    pub vocab_hash: String,
    pub train: TrainConfig,
    /// Epoch the parameters come from (0 = untrained).
    pub epoch: usize,
    /// Verbatim run config the model was trained with.
    pub run_config: String,
}

impl Checkpoint {
    pub fn header(&self) -> String {
        let s = &self.spec;
        let t = &self.train;
        let mut h = String::new();
        let _ = writeln!(h, "family = {}", s.family);
        let _ = writeln!(h, "vocab = {}", s.vocab);
        let _ = writeln!(h, "embed = {}", s.embed);
        let _ = writeln!(h, "hidden = {}", s.hidden);
        let _ = writeln!(h, "policy = {}", s.policy.kind);
        let _ = writeln!(h, "k = {}", s.policy.k);
        let _ = writeln!(h, "factor = {}", s.factor);
        let _ = writeln!(h, "vocab_hash = {}", self.vocab_hash);
        let _ = writeln!(h, "epoch = {}", self.epoch);
        let _ = writeln!(h, "regime = {}", t.regime);
        let _ = writeln!(h, "t_bptt = {}", t.t_bptt);
        let _ = writeln!(h, "batch = {}", t.batch);
        let _ = writeln!(h, "lr = {}", t.lr0);
        let _ = writeln!(h, "halving_ratio = {}", t.halving_ratio);
        let _ = writeln!(h, "patience = {}", t.patience);
        let _ = writeln!(h, "dropout = {}", t.p_drop);
        match t.clip_norm {
            Some(c) => writeln!(h, "clip_norm = {c}"),
            None => writeln!(h, "clip_norm = none"),
        }
        .ok();
        let _ = writeln!(h, "init = {}", t.init);
        let _ = writeln!(h, "zero_bias = {}", t.zero_bias);
        let _ = writeln!(h, "seed = {}", t.seed);
        let _ = writeln!(h, "max_epochs = {}", t.max_epochs);
        h.push_str(RUN_CONFIG_MARKER);
        h.push_str(&self.run_config);
        h
    }

    pub fn to_bytes(&self, precision: Precision) -> Vec<u8> {
        let header = self.header();
        let mut out = Vec::with_capacity(self.params.scalar_count() * 8 + header.len() + 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match precision {
            Precision::F64 => 8,
            Precision::F32 => 4,
        });
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for (_, m) in self.params.tensors() {
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for &v in m.data() {
                match precision {
                    Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
                    Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                }
            }
        }
        out
    }

    pub fn save(&self, path: &Path, precision: Precision) -> Result<()> {
        fs::write(path, self.to_bytes(precision)).map_err(|e| io_at(path, e))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let width = r.take(1)?[0];
        if width != 8 && width != 4 {
            return Err(bad(format!("unsupported scalar width {width}")));
        }
        let header_len = r.u64()? as usize;
        let header =
            std::str::from_utf8(r.take(header_len)?).map_err(|_| bad("header is not UTF-8"))?;
        let (fields, run_config) = header
            .split_once(RUN_CONFIG_MARKER)
            .ok_or_else(|| bad("header lacks the run config section"))?;
        let get = |key: &str| -> Result<&str> {
            fields
                .lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim())
                .ok_or_else(|| bad(format!("header lacks {key}")))
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| bad(format!("bad {key} value {v:?}")))
        }

        let family: Family = get("family")?.parse()?;
        let kind: PolicyKind = get("policy")?.parse()?;
        let spec = ModelSpec {
            family,
            vocab: num("vocab", get("vocab")?)?,
            embed: num("embed", get("embed")?)?,
            hidden: num("hidden", get("hidden")?)?,
            policy: MappingPolicy::new(kind, num("k", get("k")?)?),
            factor: num("factor", get("factor")?)?,
        };
        let train = TrainConfig {
            regime: get("regime")?.parse()?,
            t_bptt: num("t_bptt", get("t_bptt")?)?,
            batch: num("batch", get("batch")?)?,
            lr0: num("lr", get("lr")?)?,
            halving_ratio: num("halving_ratio", get("halving_ratio")?)?,
            patience: num("patience", get("patience")?)?,
            p_drop: num("dropout", get("dropout")?)?,
            clip_norm: match get("clip_norm")? {
                "none" => None,
                v => Some(num("clip_norm", v)?),
            },
            init: get("init")?.parse()?,
            zero_bias: num("zero_bias", get("zero_bias")?)?,
            seed: num("seed", get("seed")?)?,
            max_epochs: num("max_epochs", get("max_epochs")?)?,
        };
        let mut params = ParameterSet::zeros(&spec)?;
        for (name, m) in params.tensors_mut() {
            let (rows, cols) = (r.u64()? as usize, r.u64()? as usize);
            if (rows, cols) != (m.rows(), m.cols()) {
                return Err(bad(format!(
                    "{name} is {rows}x{cols}, expected {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            for v in m.data_mut() {
                *v = if width == 8 {
                    f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"))
                } else {
                    f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as f64
                };
            }
        }
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint {
            spec,
            params,
            vocab_hash: get("vocab_hash")?.to_string(),
            train,
            epoch: num("epoch", get("epoch")?)?,
            run_config: run_config.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_bytes(&fs::read(path).map_err(|e| io_at(path, e))?)
    }

    /// Fail unless the checkpoint was trained on `vocab`.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        let found = vocab.hash();
        if found != self.vocab_hash {
            return Err(Error::VocabMismatch {
                expected: self.vocab_hash.clone(),
                found,
            });
        }
        Ok(())
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("truncated file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
