//! Reservoir-sampled replay memory. Labels enter the system only here, via
//! an [`Oracle`] charged once per insertion.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

pub type SourceId = u64;

/// One stream element. Stream samples never carry labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: SourceId,
    pub features: Arc<[f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub sample: Sample,
    pub label: usize,
}

/// Ground-truth labeler keyed by source id.
pub trait Oracle {
    fn label(&self, id: SourceId) -> usize;
}

/// Oracle backed by a label table indexed by source id.
#[derive(Debug, Clone)]
pub struct TableOracle {
    labels: Arc<Vec<usize>>,
}

impl TableOracle {
    pub fn new(labels: Arc<Vec<usize>>) -> Self {
        Self { labels }
    }
}

impl Oracle for TableOracle {
    fn label(&self, id: SourceId) -> usize {
        self.labels[id as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBuffer {
    capacity: usize,
    items: Vec<LabeledSample>,
    seen: u64,
    oracle_calls: u64,
}

impl MemoryBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("memory size must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            seen: 0,
            oracle_calls: 0,
        })
    }

    /// Rebuild a buffer from its parts (used when loading snapshots).
    pub fn from_parts(capacity: usize, items: Vec<LabeledSample>, seen: u64, oracle_calls: u64) -> Result<Self> {
        let expected = (seen as usize).min(capacity);
        if capacity == 0 || items.len() != expected || oracle_calls < items.len() as u64 {
            return Err(Error::Config(format!(
                "inconsistent memory snapshot: capacity {capacity}, {} items, seen {seen}, oracle calls {oracle_calls}",
                items.len()
            )));
        }
        Ok(Self {
            capacity,
            items,
            seen,
            oracle_calls,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn items(&self) -> &[LabeledSample] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Number of stream samples offered so far.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }

    /// Algorithm R. The `n`-th offer (0-based) fills a free slot, or else
    /// replaces slot `j ~ U[0, n]` when `j < M`. Each insertion costs one
    /// oracle call. Returns whether the sample was stored.
    pub fn reservoir_update<O, R>(&mut self, sample: Sample, oracle: &O, rng: &mut R) -> bool
    where
        O: Oracle + ?Sized,
        R: Rng + ?Sized,
    {
        let n = self.seen;
        self.seen += 1;
        if self.items.len() < self.capacity {
            let label = self.ask(oracle, sample.id);
            self.items.push(LabeledSample { sample, label });
            return true;
        }
        let j = rng.random_range(0..=n);
        if (j as usize) < self.capacity {
            let label = self.ask(oracle, sample.id);
            self.items[j as usize] = LabeledSample { sample, label };
            true
        } else {
            false
        }
    }

    fn ask<O: Oracle + ?Sized>(&mut self, oracle: &O, id: SourceId) -> usize {
        self.oracle_calls += 1;
        oracle.label(id)
    }

    /// Uniform sample without replacement of `min(k, len)` stored items.
    pub fn retrieve<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<LabeledSample> {
        let k = k.min(self.items.len());
        if k == 0 {
            return Vec::new();
        }
        index::sample(rng, self.items.len(), k)
            .into_iter()
            .map(|i| self.items[i].clone())
            .collect()
    }

    /// `p = oracle_calls / N`.
    pub fn label_fraction(&self, stream_len: u64) -> Result<f64> {
        if stream_len == 0 {
            return Err(Error::Config("label fraction needs a non-empty stream".into()));
        }
        Ok(self.oracle_calls as f64 / stream_len as f64)
    }

    /// Sorted, deduplicated labels currently stored.
    pub fn classes(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.items.iter().map(|i| i.label).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// `M (1 + Σ_{n=M+1..N} 1/n)`: expected oracle calls for Algorithm R.
pub fn expected_oracle_calls(capacity: usize, stream_len: usize) -> f64 {
    if stream_len <= capacity {
        return stream_len as f64;
    }
    let tail: f64 = (capacity + 1..=stream_len).map(|n| 1.0 / n as f64).sum();
    capacity as f64 * (1.0 + tail)
}
