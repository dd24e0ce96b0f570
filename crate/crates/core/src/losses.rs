//! Contrastive objectives over a multiview batch, and cross-entropy.
//!
//! A batch of `b` sources yields `2b` views laid out as `[first views; second
//! views]`, so view `i` is paired with `(i + b) mod 2b`. Anchors are split into
//! the labeled set `I_l` (memory samples) and the unlabeled set `I_u` (stream
//! samples). All softmax denominators run over every other view in the batch,
//! labeled or not.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Tape, Tensor, Var};

/// View bookkeeping for a multiview batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewIndex {
    labeled: Vec<bool>,
    labels: Vec<Option<usize>>,
}

impl MultiviewIndex {
    /// One entry per source: `Some(class)` for labeled sources, `None` for unlabeled.
    pub fn from_sources(sources: &[Option<usize>]) -> Self {
        let labels: Vec<Option<usize>> = sources.iter().chain(sources).copied().collect();
        Self {
            labeled: labels.iter().map(Option::is_some).collect(),
            labels,
        }
    }

    /// Explicit per-view flags and labels. Checks pairing consistency but
    /// leaves missing labels on labeled views to [`build_masks`].
    pub fn from_parts(labeled: Vec<bool>, labels: Vec<Option<usize>>) -> Result<Self> {
        if labeled.len() != labels.len() || !labeled.len().is_multiple_of(2) {
            return Err(Error::InvalidIndex(format!(
                "need an even number of views with one label slot each, got {} flags and {} labels",
                labeled.len(),
                labels.len()
            )));
        }
        let idx = Self { labeled, labels };
        for i in 0..idx.views() {
            let j = idx.pair(i);
            if idx.labeled[i] != idx.labeled[j] || idx.labels[i] != idx.labels[j] {
                return Err(Error::InvalidIndex(format!(
                    "views {i} and {j} come from one source but disagree on label"
                )));
            }
            if !idx.labeled[i] && idx.labels[i].is_some() {
                return Err(Error::InvalidIndex(format!("unlabeled view {i} carries a label")));
            }
        }
        Ok(idx)
    }

    pub fn views(&self) -> usize {
        self.labeled.len()
    }

    pub fn sources(&self) -> usize {
        self.views() / 2
    }

    /// `j(i)`: the other view of the same source.
    pub fn pair(&self, i: usize) -> usize {
        let b = self.sources();
        (i + b) % (2 * b)
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.labeled[i]
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    /// `I_l`
    pub fn labeled_views(&self) -> Vec<usize> {
        (0..self.views()).filter(|&i| self.labeled[i]).collect()
    }

    /// `I_u`
    pub fn unlabeled_views(&self) -> Vec<usize> {
        (0..self.views()).filter(|&i| !self.labeled[i]).collect()
    }

    pub fn labeled_sources(&self) -> usize {
        self.labeled_views().len() / 2
    }

    pub fn unlabeled_sources(&self) -> usize {
        self.unlabeled_views().len() / 2
    }

    /// Same index with every view marked unlabeled.
    pub fn without_labels(&self) -> Self {
        Self {
            labeled: vec![false; self.views()],
            labels: vec![None; self.views()],
        }
    }
}

/// `P(i)` for every anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveMask {
    positives: Vec<Vec<usize>>,
}

impl PositiveMask {
    pub fn positives(&self, anchor: usize) -> &[usize] {
        &self.positives[anchor]
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }
}

/// Labeled anchors take every other view of the same class; unlabeled anchors
/// take only their paired view.
pub fn build_masks(idx: &MultiviewIndex) -> Result<PositiveMask> {
    let n = idx.views();
    if let Some(view) = (0..n).find(|&i| idx.labeled[i] && idx.labels[i].is_none()) {
        return Err(Error::MissingLabel { view });
    }
    let positives = (0..n)
        .map(|i| match idx.labels[i] {
            Some(y) if idx.labeled[i] => (0..n)
                .filter(|&j| j != i && idx.labeled[j] && idx.labels[j] == Some(y))
                .collect(),
            _ => vec![idx.pair(i)],
        })
        .collect();
    Ok(PositiveMask { positives })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlphaTarget {
    /// `α` weights the unlabeled anchors: `L_m + α L_u`.
    #[default]
    Unlabeled,
    /// `α` weights the labeled anchors: `α L_m + L_u`.
    Labeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Sum over anchors.
    #[default]
    Sum,
    /// Sum divided by the number of views.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub tau: f64,
    pub alpha: f64,
    #[serde(default)]
    pub galpha_on: AlphaTarget,
    #[serde(default)]
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 0.07,
            alpha: 1.0,
            galpha_on: AlphaTarget::Unlabeled,
            reduction: Reduction::Sum,
        }
    }
}

impl LossConfig {
    pub fn new(tau: f64, alpha: f64) -> Result<Self> {
        let cfg = Self {
            tau,
            alpha,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.tau)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be in [0, inf), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Per-anchor weights `(labeled, unlabeled)`.
    fn anchor_weights(&self) -> (f64, f64) {
        match self.galpha_on {
            AlphaTarget::Unlabeled => (1.0, self.alpha),
            AlphaTarget::Labeled => (self.alpha, 1.0),
        }
    }
}

/// Logits `z_i · z_a / τ` and the row-wise log-denominators over `a ≠ i`.
struct Similarities<'t> {
    logits: Var<'t>,
    log_denom: Var<'t>,
}

impl<'t> Similarities<'t> {
    fn new(z: Var<'t>, idx: &MultiviewIndex, tau: f64) -> Result<Self> {
        let n = idx.views();
        let shape = z.shape();
        if shape.len() != 2 || shape[0] != n {
            return Err(crate::error::shape_err("contrastive loss", &[&shape, &[n]]));
        }
        let logits = z.gram()?.scale(1.0 / tau)?;
        let mut off_diag = Tensor::ones(&[n, n]);
        for i in 0..n {
            off_diag.data_mut()[i * n + i] = 0.0;
        }
        let log_denom = logits.masked_logsumexp_rows(&off_diag)?;
        Ok(Self { logits, log_denom })
    }

    /// `-Σ_{i∈anchors} (1/|P(i)|) Σ_{p∈P(i)} (logit_ip - log_denom_i)`
    fn anchor_sum(&self, anchors: &[usize], mask: &PositiveMask) -> Result<Var<'t>> {
        let tape = self.logits.tape();
        let n = mask.len();
        let mut row_w = vec![0.0; n];
        let mut pos_w = vec![0.0; n * n];
        for &i in anchors {
            let ps = mask.positives(i);
            row_w[i] = 1.0;
            let w = 1.0 / ps.len() as f64;
            for &p in ps {
                pos_w[i * n + p] = w;
            }
        }
        let denom = self.log_denom.mul(tape.leaf(Tensor::matrix(n, 1, row_w)?))?.sum()?;
        let numer = self.logits.mul(tape.leaf(Tensor::matrix(n, n, pos_w)?))?.sum()?;
        denom.sub(numer)
    }
}

fn reduce<'t>(loss: Var<'t>, views: usize, reduction: Reduction) -> Result<Var<'t>> {
    match reduction {
        Reduction::Sum => Ok(loss),
        Reduction::Mean => loss.scale(1.0 / views as f64),
    }
}

fn check_mask(idx: &MultiviewIndex, mask: &PositiveMask) -> Result<()> {
    if mask.len() != idx.views() {
        return Err(Error::InvalidIndex(format!(
            "mask covers {} anchors but batch has {} views",
            mask.len(),
            idx.views()
        )));
    }
    Ok(())
}

/// Supervised term over labeled anchors; unlabeled views act only as negatives.
pub fn loss_mem<'t>(z: Var<'t>, idx: &MultiviewIndex, mask: &PositiveMask, cfg: &LossConfig) -> Result<Var<'t>> {
    cfg.validate()?;
    check_mask(idx, mask)?;
    let anchors = idx.labeled_views();
    if anchors.is_empty() {
        return Ok(z.tape().leaf(Tensor::scalar(0.0)));
    }
    let sims = Similarities::new(z, idx, cfg.tau)?;
    reduce(sims.anchor_sum(&anchors, mask)?, idx.views(), cfg.reduction)
}

/// Self-supervised term over unlabeled anchors; each anchor's only positive is its pair.
pub fn loss_unlab<'t>(z: Var<'t>, idx: &MultiviewIndex, cfg: &LossConfig) -> Result<Var<'t>> {
    cfg.validate()?;
    let anchors = idx.unlabeled_views();
    if anchors.is_empty() {
        return Ok(z.tape().leaf(Tensor::scalar(0.0)));
    }
    // Unlabeled rows of the mask never depend on labels.
    let mask = PositiveMask {
        positives: (0..idx.views()).map(|i| vec![idx.pair(i)]).collect(),
    };
    let sims = Similarities::new(z, idx, cfg.tau)?;
    reduce(sims.anchor_sum(&anchors, &mask)?, idx.views(), cfg.reduction)
}

/// SemiCon: `g_l · L_m + g_u · L_u`, with `α` on the side picked by `cfg.galpha_on`.
pub fn semicon<'t>(z: Var<'t>, idx: &MultiviewIndex, mask: &PositiveMask, cfg: &LossConfig) -> Result<Var<'t>> {
    let (w_lab, w_unlab) = cfg.anchor_weights();
    let lm = loss_mem(z, idx, mask, cfg)?;
    let lu = loss_unlab(z, idx, cfg)?;
    lm.scale(w_lab)?.add(lu.scale(w_unlab)?)
}

/// SupCon over a fully labeled multiview batch.
pub fn supcon<'t>(z: Var<'t>, view_labels: &[usize], cfg: &LossConfig) -> Result<Var<'t>> {
    let labels: Vec<Option<usize>> = view_labels.iter().map(|&y| Some(y)).collect();
    let idx = MultiviewIndex::from_parts(vec![true; labels.len()], labels)?;
    let mask = build_masks(&idx)?;
    loss_mem(z, &idx, &mask, cfg)
}

/// Pair-positive (NT-Xent style) contrastive loss with every view as an anchor.
pub fn pair_contrastive<'t>(z: Var<'t>, cfg: &LossConfig) -> Result<Var<'t>> {
    let n = z.shape()[0];
    let idx = MultiviewIndex::from_parts(vec![false; n], vec![None; n])?;
    loss_unlab(z, &idx, cfg)
}

/// Mean over rows of `-log softmax(logits)[label]`.
pub fn cross_entropy<'t>(logits: Var<'t>, labels: &[usize]) -> Result<Var<'t>> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(crate::error::shape_err("cross_entropy", &[&shape, &[labels.len()]]));
    }
    let classes = shape[1];
    if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let n = labels.len();
    let lse = logits.masked_logsumexp_rows(&Tensor::ones(&[n, classes]))?;
    let picked = logits.gather(
        labels.iter().enumerate().map(|(i, &y)| i * classes + y).collect(),
        vec![n, 1],
    )?;
    lse.sub(picked)?.mean()
}

/// Evaluate SemiCon on plain projections.
pub fn semicon_value(z: &Tensor, idx: &MultiviewIndex, cfg: &LossConfig) -> Result<f64> {
    let tape = Tape::new();
    let mask = build_masks(idx)?;
    Ok(semicon(tape.leaf(z.clone()), idx, &mask, cfg)?.value().item())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval<F>(z: &Tensor, f: F) -> f64
    where
        F: for<'t> Fn(Var<'t>) -> Result<Var<'t>>,
    {
        let tape = Tape::new();
        f(tape.leaf(z.clone())).unwrap().value().item()
    }

    #[test]
    fn single_labeled_source_pairs_only() {
        let idx = MultiviewIndex::from_sources(&[Some(0)]);
        let mask = build_masks(&idx).unwrap();
        assert_eq!(mask.positives(0), &[1]);
        assert_eq!(mask.positives(1), &[0]);
    }

    #[test]
    fn same_class_sources_have_three_positives() {
        let idx = MultiviewIndex::from_sources(&[Some(2), Some(2)]);
        let mask = build_masks(&idx).unwrap();
        for i in 0..4 {
            assert_eq!(mask.positives(i).len(), 3);
            assert!(!mask.positives(i).contains(&i));
        }
    }

    #[test]
    fn mixed_mask_by_hand() {
        // sources: [labeled class 0, unlabeled] -> views 0,2 labeled; 1,3 unlabeled
        let idx = MultiviewIndex::from_sources(&[Some(0), None]);
        let mask = build_masks(&idx).unwrap();
        assert_eq!(mask.positives(0), &[2]);
        assert_eq!(mask.positives(2), &[0]);
        assert_eq!(mask.positives(1), &[3]);
        assert_eq!(mask.positives(3), &[1]);
        assert_eq!(idx.labeled_views(), vec![0, 2]);
        assert_eq!(idx.unlabeled_views(), vec![1, 3]);
    }

    #[test]
    fn labeled_view_without_label_errors() {
        let idx = MultiviewIndex::from_parts(vec![true, true], vec![None, None]).unwrap();
        assert!(matches!(build_masks(&idx), Err(Error::MissingLabel { view: 0 })));
    }

    #[test]
    fn inconsistent_pairs_rejected() {
        assert!(MultiviewIndex::from_parts(vec![true, false], vec![Some(1), None]).is_err());
        assert!(MultiviewIndex::from_parts(vec![true, true], vec![Some(1), Some(2)]).is_err());
        assert!(MultiviewIndex::from_parts(vec![true], vec![Some(1)]).is_err());
    }

    #[test]
    fn pair_map_layout() {
        let idx = MultiviewIndex::from_sources(&[None, None, None]);
        let j: Vec<usize> = (0..6).map(|i| idx.pair(i)).collect();
        assert_eq!(j, vec![3, 4, 5, 0, 1, 2]);
    }

    #[test]
    fn single_source_losses_vanish() {
        let z = Tensor::from_rows(&[vec![0.6, 0.8], vec![1.0, 0.0]]).unwrap();
        let cfg = LossConfig::default();
        let lab = MultiviewIndex::from_sources(&[Some(0)]);
        let mask = build_masks(&lab).unwrap();
        assert!(eval(&z, |v| loss_mem(v, &lab, &mask, &cfg)).abs() < 1e-12);
        let unl = MultiviewIndex::from_sources(&[None]);
        assert!(eval(&z, |v| loss_unlab(v, &unl, &cfg)).abs() < 1e-12);
    }

    #[test]
    fn identical_projections_uniform_softmax() {
        let cfg = LossConfig::default();
        for b in 1..5usize {
            let z = Tensor::matrix(2 * b, 2, [0.6, 0.8].repeat(2 * b)).unwrap();
            let lab = MultiviewIndex::from_sources(&vec![Some(1); b]);
            let mask = build_masks(&lab).unwrap();
            let expect = 2.0 * b as f64 * (2.0 * b as f64 - 1.0).ln();
            assert!((eval(&z, |v| loss_mem(v, &lab, &mask, &cfg)) - expect).abs() < 1e-10);
            let unl = MultiviewIndex::from_sources(&vec![None; b]);
            assert!((eval(&z, |v| loss_unlab(v, &unl, &cfg)) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_anchor_sets_return_zero() {
        let z = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let cfg = LossConfig::default();
        let unl = MultiviewIndex::from_sources(&[None]);
        let mask = build_masks(&unl).unwrap();
        assert_eq!(eval(&z, |v| loss_mem(v, &unl, &mask, &cfg)), 0.0);
        let lab = MultiviewIndex::from_sources(&[Some(0)]);
        assert_eq!(eval(&z, |v| loss_unlab(v, &lab, &cfg)), 0.0);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = Tensor::zeros(&[3, 10]);
        let v = eval(&logits, |l| cross_entropy(l, &[0, 4, 9]));
        assert!((v - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_confident() {
        let mut logits = Tensor::zeros(&[2, 3]);
        logits.data_mut()[1] = 1000.0;
        logits.data_mut()[5] = 1000.0;
        assert!(eval(&logits, |l| cross_entropy(l, &[1, 2])).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_label_range() {
        let tape = Tape::new();
        let l = tape.leaf(Tensor::zeros(&[1, 3]));
        assert!(matches!(
            cross_entropy(l, &[3]),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::new(0.0, 1.0).is_err());
        assert!(LossConfig::new(0.07, -1.0).is_err());
        assert!(LossConfig::new(0.07, 0.0).is_ok());
    }
}
