//! Word-to-slice mapping policies for the recurrence tensor.
//!
//! Slice indices are 0-based throughout. The rank-threshold policy gives the
//! `K - 1` most frequent words their own slice and sends every other word to
//! the last one; the modulus policy scatters ranks pseudo-randomly.

use std::fmt;
use std::str::FromStr;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// `min(rank, K) - 1`, named "f".
    RankMin,
    /// `rank mod K`, named "fmod".
    RankMod,
    /// `rank - 1` with `K = V`.
    Identity,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::RankMin => "f",
            PolicyKind::RankMod => "fmod",
            PolicyKind::Identity => "identity",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" => Ok(PolicyKind::RankMin),
            "fmod" => Ok(PolicyKind::RankMod),
            "identity" => Ok(PolicyKind::Identity),
            other => Err(Error::InvalidSpec(format!(
                "unknown mapping policy {other:?} (expected f, fmod or identity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MappingPolicy {
    pub kind: PolicyKind,
    pub k: usize,
}

impl MappingPolicy {
    pub fn new(kind: PolicyKind, k: usize) -> Self {
        MappingPolicy { kind, k }
    }

    pub fn rank_min(k: usize) -> Self {
        MappingPolicy::new(PolicyKind::RankMin, k)
    }

    pub fn rank_mod(k: usize) -> Self {
        MappingPolicy::new(PolicyKind::RankMod, k)
    }

    pub fn identity(vocab_size: usize) -> Self {
        MappingPolicy::new(PolicyKind::Identity, vocab_size)
    }

    /// A single shared slice: the plain recurrent case.
    pub fn single() -> Self {
        MappingPolicy::rank_min(1)
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidSpec("K must be at least 1".into()));
        }
        if self.k > vocab_size {
            return Err(Error::InvalidSpec(format!(
                "K = {} exceeds vocabulary size {}",
                self.k, vocab_size
            )));
        }
        if self.kind == PolicyKind::Identity && self.k != vocab_size {
            return Err(Error::InvalidSpec(format!(
                "identity mapping needs K = V = {}, got K = {}",
                vocab_size, self.k
            )));
        }
        Ok(())
    }

    /// Slice for a 1-based frequency rank.
    pub fn slice_of_rank(&self, rank: usize) -> Result<usize> {
        match self.kind {
            PolicyKind::RankMin => map_rank_min(rank, self.k),
            PolicyKind::RankMod => map_rank_mod(rank, self.k),
            PolicyKind::Identity => {
                if rank == 0 {
                    return Err(Error::InvalidRank(rank));
                }
                Ok(rank - 1)
            }
        }
    }

    /// Slice for a token id. Ids are assigned in rank order, so rank = id + 1.
    #[inline]
    pub fn slice_of_id(&self, id: u32) -> usize {
        let rank = id as usize + 1;
        match self.kind {
            PolicyKind::RankMin => rank.min(self.k) - 1,
            PolicyKind::RankMod => rank % self.k,
            PolicyKind::Identity => rank - 1,
        }
    }
}

impl fmt::Display for MappingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(K={})", self.kind, self.k)
    }
}

pub fn map_rank_min(rank: usize, k: usize) -> Result<usize> {
    check(rank, k)?;
    Ok(rank.min(k) - 1)
}

pub fn map_rank_mod(rank: usize, k: usize) -> Result<usize> {
    check(rank, k)?;
    Ok(rank % k)
}

fn check(rank: usize, k: usize) -> Result<()> {
    if rank == 0 {
        return Err(Error::InvalidRank(rank));
    }
    if k == 0 {
        return Err(Error::InvalidSpec("K must be at least 1".into()));
    }
    Ok(())
}

/// Number of vocabulary words assigned to each slice.
pub fn slice_histogram(vocab: &Vocabulary, policy: &MappingPolicy) -> Vec<usize> {
    histogram_for_size(vocab.len(), policy)
}

pub(crate) fn histogram_for_size(vocab_size: usize, policy: &MappingPolicy) -> Vec<usize> {
    let mut counts = vec![0usize; policy.k];
    for id in 0..vocab_size {
        counts[policy.slice_of_id(id as u32)] += 1;
    }
    counts
}
