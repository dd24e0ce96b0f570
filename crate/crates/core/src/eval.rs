//! Nearest-class-mean evaluation over encoder latents, and the accuracy matrix.
//!
//! Latents are L2-normalized before averaging and class means are normalized
//! again, so Euclidean distance ranks classes exactly as cosine similarity would.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::cross_entropy;
use crate::memory::MemoryBuffer;
use crate::models::{ClassifierHead, Encoder, Module};
use crate::numeric::{sgd_step, SgdConfig, Tape, Tensor};
use crate::rng::{rng_for, Concern};
use crate::stream::TestSet;

const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMeans {
    classes: Vec<usize>,
    means: Vec<Vec<f64>>,
}

impl ClassMeans {
    /// Means of normalized latents, one per distinct label, classes ascending.
    pub fn from_latents(latents: &Tensor, labels: &[usize]) -> Result<Self> {
        if latents.rows() != labels.len() {
            return Err(Error::Config(format!(
                "{} latents but {} labels",
                latents.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::EmptyMemory);
        }
        let normed = latents.l2_normalize_rows();
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let d = normed.cols();
        let means = classes
            .iter()
            .map(|&c| {
                let mut acc = vec![0.0; d];
                let mut n = 0usize;
                for (i, &y) in labels.iter().enumerate() {
                    if y == c {
                        acc.iter_mut().zip(normed.row(i)).for_each(|(a, v)| *a += v);
                        n += 1;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= n as f64);
                normalize(&mut acc);
                acc
            })
            .collect();
        Ok(Self { classes, means })
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn mean(&self, class: usize) -> Option<&[f64]> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .map(|k| self.means[k].as_slice())
    }

    /// Nearest mean to the normalized latent; ties go to the lowest class id.
    pub fn classify_latent(&self, latent: &[f64]) -> usize {
        let mut h = latent.to_vec();
        normalize(&mut h);
        let mut best = (self.classes[0], f64::INFINITY);
        for (&c, mu) in self.classes.iter().zip(&self.means) {
            let d: f64 = h.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    }

    pub fn classify_latents(&self, latents: &Tensor) -> Vec<usize> {
        (0..latents.rows()).map(|i| self.classify_latent(latents.row(i))).collect()
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Encode rows in chunks to bound tape size.
pub fn encode_rows<'a>(enc: &Encoder, rows: impl ExactSizeIterator<Item = &'a [f64]>) -> Result<Tensor> {
    let dim = enc.input_len();
    let total = rows.len();
    if total == 0 {
        return Err(Error::Config("nothing to encode".into()));
    }
    let mut out = Vec::with_capacity(total * enc.latent());
    let mut buf = Vec::with_capacity(EVAL_CHUNK * dim);
    let mut n = 0;
    let flush = |buf: &mut Vec<f64>, n: &mut usize, out: &mut Vec<f64>| -> Result<()> {
        if *n > 0 {
            let h = enc.encode(&Tensor::matrix(*n, dim, std::mem::take(buf))?)?;
            out.extend_from_slice(h.data());
            *n = 0;
        }
        Ok(())
    };
    for r in rows {
        buf.extend_from_slice(r);
        n += 1;
        if n == EVAL_CHUNK {
            flush(&mut buf, &mut n, &mut out)?;
        }
    }
    flush(&mut buf, &mut n, &mut out)?;
    Tensor::matrix(total, enc.latent(), out)
}

/// Class means of `Enc(x)` over the memory contents.
pub fn fit_ncm(enc: &Encoder, memory: &MemoryBuffer) -> Result<ClassMeans> {
    if memory.is_empty() {
        return Err(Error::EmptyMemory);
    }
    let latents = encode_rows(enc, memory.items().iter().map(|it| it.sample.features.as_ref()))?;
    let labels: Vec<usize> = memory.items().iter().map(|it| it.label).collect();
    ClassMeans::from_latents(&latents, &labels)
}

pub fn ncm_classify(means: &ClassMeans, enc: &Encoder, x: &[f64]) -> Result<usize> {
    let h = enc.encode(&Tensor::matrix(1, x.len(), x.to_vec())?)?;
    Ok(means.classify_latent(h.row(0)))
}

/// Accuracy on each task's test set after one training segment.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub accuracies: Vec<f64>,
    /// Test classes with no representative in memory (always predicted wrong).
    pub missing_classes: Vec<usize>,
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

fn missing(test_sets: &[TestSet], present: &[usize]) -> Vec<usize> {
    let mut m: Vec<usize> = test_sets
        .iter()
        .flat_map(|t| t.labels.iter().copied())
        .filter(|y| !present.contains(y))
        .collect();
    m.sort_unstable();
    m.dedup();
    m
}

/// NCM accuracy on every task, fitting the means on memory once.
pub fn evaluate(enc: &Encoder, memory: &MemoryBuffer, test_sets: &[TestSet]) -> Result<EvalRow> {
    let means = fit_ncm(enc, memory)?;
    let accuracies = test_sets
        .iter()
        .map(|t| {
            let h = encode_rows(enc, t.features.iter().map(|f| f.as_ref()))?;
            Ok(accuracy(&means.classify_latents(&h), &t.labels))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalRow {
        accuracies,
        missing_classes: missing(test_sets, means.classes()),
    })
}

/// Accuracy of a softmax head on every task.
pub fn evaluate_head(enc: &Encoder, head: &ClassifierHead, test_sets: &[TestSet]) -> Result<Vec<f64>> {
    test_sets
        .iter()
        .map(|t| {
            let h = encode_rows(enc, t.features.iter().map(|f| f.as_ref()))?;
            Ok(accuracy(&head.predict(&h)?, &t.labels))
        })
        .collect()
}

/// `rows[k][j]`: accuracy on task `j` measured after training segment `k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.rows.last().map(Vec::as_slice)
    }

    /// Mean of the last row.
    pub fn final_avg(&self) -> f64 {
        match self.last() {
            Some(r) if !r.is_empty() => r.iter().sum::<f64>() / r.len() as f64,
            _ => 0.0,
        }
    }
}

/// Softmax probe trained on normalized memory latents. Not used by the
/// default evaluation path.
pub fn fit_linear_probe(
    enc: &Encoder,
    memory: &MemoryBuffer,
    classes: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<ClassifierHead> {
    if memory.is_empty() {
        return Err(Error::EmptyMemory);
    }
    let latents = encode_rows(enc, memory.items().iter().map(|it| it.sample.features.as_ref()))?.l2_normalize_rows();
    let labels: Vec<usize> = memory.items().iter().map(|it| it.label).collect();
    let mut rng = rng_for(seed, Concern::Probe);
    let mut head = ClassifierHead::init(latents.cols(), classes, &mut rng);
    let cfg = SgdConfig::new(lr)?;
    for _ in 0..epochs {
        let tape = Tape::new();
        let params = head.bind(&tape);
        let logits = head.forward(&params, tape.leaf(latents.clone()))?;
        let loss = cross_entropy(logits, &labels)?;
        let grads = tape.backward(loss)?;
        let g: Vec<Tensor> = params.iter().map(|&p| grads.wrt(p)).collect();
        sgd_step(&mut head.params_mut(), &g, &cfg)?;
    }
    Ok(head)
}

/// Probe accuracy per task; queries are normalized like the training latents.
pub fn evaluate_probe(enc: &Encoder, probe: &ClassifierHead, test_sets: &[TestSet]) -> Result<Vec<f64>> {
    test_sets
        .iter()
        .map(|t| {
            let h = encode_rows(enc, t.features.iter().map(|f| f.as_ref()))?.l2_normalize_rows();
            Ok(accuracy(&probe.predict(&h)?, &t.labels))
        })
        .collect()
}
