//! The replay training loop and its baseline variants.
//!
//! Every online method runs the same loop: one SGD step per stream batch,
//! then a reservoir update with that batch. Methods differ only in which
//! samples enter the step, whether stream labels are visible, and the loss.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, evaluate_head, AccuracyMatrix};
use crate::losses::{build_masks, cross_entropy, semicon, AlphaTarget, LossConfig, Reduction};
use crate::memory::{MemoryBuffer, Oracle, Sample};
use crate::models::{ArchSpec, ClassifierHead, Encoder, EncoderSpec, Module, ProjectionHead};
use crate::numeric::{sgd_step, SgdConfig, Tape, Tensor, Var};
use crate::report::{EvalMetric, RunReport};
use crate::rng::{rng_for, Concern};
use crate::stream::{make_multiview, make_single_view, Augmentation, Benchmark, InputShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ours,
    Scr,
    ScrMo,
    Er,
    ErMo,
    Finetune,
    Offline,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ours,
        Method::Scr,
        Method::ScrMo,
        Method::Er,
        Method::ErMo,
        Method::Finetune,
        Method::Offline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Scr => "scr",
            Method::ScrMo => "scr-mo",
            Method::Er => "er",
            Method::ErMo => "er-mo",
            Method::Finetune => "finetune",
            Method::Offline => "offline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }

    /// Supervised reference methods read stream labels directly.
    pub fn is_supervised(self) -> bool {
        matches!(self, Method::Scr | Method::Er | Method::Finetune | Method::Offline)
    }

    pub fn uses_memory(self) -> bool {
        !matches!(self, Method::Finetune | Method::Offline)
    }

    pub fn is_contrastive(self) -> bool {
        matches!(self, Method::Ours | Method::Scr | Method::ScrMo)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Latent size; 64 for vectors and 160 for images when unset.
    #[serde(default)]
    pub latent: Option<usize>,
    /// Projection hidden width; the latent size when unset.
    #[serde(default)]
    pub proj_hidden: Option<usize>,
    #[serde(default = "default_proj_out")]
    pub proj_out: usize,
    #[serde(default = "default_conv_channels")]
    pub conv_channels: [usize; 2],
}

fn default_hidden() -> Vec<usize> {
    vec![64]
}

fn default_proj_out() -> usize {
    128
}

fn default_conv_channels() -> [usize; 2] {
    [16, 32]
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            latent: None,
            proj_hidden: None,
            proj_out: default_proj_out(),
            conv_channels: default_conv_channels(),
        }
    }
}

impl ModelConfig {
    pub fn arch(&self, shape: InputShape) -> ArchSpec {
        let encoder = match shape {
            InputShape::Vector(d) => EncoderSpec::Mlp {
                input: d,
                hidden: self.hidden.clone(),
                latent: self.latent.unwrap_or(64),
            },
            InputShape::Image {
                channels,
                height,
                width,
            } => EncoderSpec::Conv {
                height,
                width,
                channels,
                conv_channels: self.conv_channels,
                latent: self.latent.unwrap_or(160),
            },
        };
        let latent = encoder.latent();
        ArchSpec {
            encoder,
            proj_hidden: self.proj_hidden.unwrap_or(latent),
            proj_out: self.proj_out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    /// Only meaningful for `ours`.
    pub alpha: Option<f64>,
    pub tau: f64,
    pub stream_batch: usize,
    pub mem_batch: usize,
    pub mem_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Only meaningful for `offline`.
    pub epochs: Option<usize>,
    pub galpha_on: AlphaTarget,
    pub reduction: Reduction,
    pub model: ModelConfig,
    pub augmentation: Option<Augmentation>,
    pub trace_loss: bool,
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha: (method == Method::Ours).then_some(1.0),
            tau: 0.07,
            stream_batch: 10,
            mem_batch: 100,
            mem_size: 200,
            lr: 0.1,
            seed: 0,
            epochs: (method == Method::Offline).then_some(50),
            galpha_on: AlphaTarget::Unlabeled,
            reduction: Reduction::Sum,
            model: ModelConfig::default(),
            augmentation: None,
            trace_loss: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.method;
        match (m, self.alpha) {
            (Method::Ours, None) => return Err(Error::Config("method `ours` needs alpha".into())),
            (Method::Ours, Some(a)) if !(a >= 0.0 && a.is_finite()) => {
                return Err(Error::Config(format!("alpha must be in [0, inf), got {a}")))
            }
            (Method::Ours, _) => {}
            (_, Some(_)) => return Err(Error::Config(format!("alpha only applies to `ours`, not `{m}`"))),
            _ => {}
        }
        match (m, self.epochs) {
            (Method::Offline, None | Some(0)) => {
                return Err(Error::Config("method `offline` needs epochs >= 1".into()))
            }
            (Method::Offline, _) => {}
            (_, Some(_)) => return Err(Error::Config(format!("epochs only apply to `offline`, not `{m}`"))),
            _ => {}
        }
        if m != Method::Ours && self.galpha_on != AlphaTarget::Unlabeled {
            return Err(Error::Config(format!("galpha_on only applies to `ours`, not `{m}`")));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        SgdConfig::new(self.lr)?;
        if self.stream_batch == 0 {
            return Err(Error::Config("stream_batch must be positive".into()));
        }
        if m.uses_memory() && (self.mem_size == 0 || self.mem_batch == 0) {
            return Err(Error::Config("mem_size and mem_batch must be positive".into()));
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            tau: self.tau,
            alpha: self.alpha.unwrap_or(1.0),
            galpha_on: self.galpha_on,
            reduction: self.reduction,
        }
    }
}

/// Encoder, projection head for contrastive methods, classifier head for
/// cross-entropy methods.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: Encoder,
    pub projection: ProjectionHead,
    pub classifier: ClassifierHead,
}

/// Deterministic in `cfg.seed`; the encoder and projection head match
/// [`crate::models::init_params`] for the same seed.
pub fn init_model(cfg: &TrainConfig, shape: InputShape, classes: usize) -> Result<Model> {
    let arch = cfg.model.arch(shape);
    let mut rng = rng_for(cfg.seed, Concern::Init);
    let encoder = Encoder::init(&arch.encoder, &mut rng)?;
    if arch.proj_hidden == 0 || arch.proj_out == 0 {
        return Err(Error::Config("projection sizes must be positive".into()));
    }
    let projection = ProjectionHead::init(encoder.latent(), arch.proj_hidden, arch.proj_out, &mut rng);
    let classifier = ClassifierHead::init(encoder.latent(), classes, &mut rng);
    Ok(Model {
        encoder,
        projection,
        classifier,
    })
}

/// How stream batches enter a training step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamUse {
    /// Stream samples enter without labels.
    Unlabeled,
    /// Stream samples enter with ground-truth labels (supervised baselines).
    Labeled,
    /// Stream samples only feed the memory.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Contrastive,
    CrossEntropy,
}

/// The knobs that distinguish methods inside the shared online loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnlineRecipe {
    pub stream: StreamUse,
    pub replay: bool,
    pub objective: Objective,
}

impl OnlineRecipe {
    pub fn for_method(m: Method) -> Option<Self> {
        let (stream, replay, objective) = match m {
            Method::Ours => (StreamUse::Unlabeled, true, Objective::Contrastive),
            Method::Scr => (StreamUse::Labeled, true, Objective::Contrastive),
            Method::ScrMo => (StreamUse::Ignored, true, Objective::Contrastive),
            Method::Er => (StreamUse::Labeled, true, Objective::CrossEntropy),
            Method::ErMo => (StreamUse::Ignored, true, Objective::CrossEntropy),
            Method::Finetune => (StreamUse::Labeled, false, Objective::CrossEntropy),
            Method::Offline => return None,
        };
        Some(Self {
            stream,
            replay,
            objective,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: Model,
    pub memory: Option<MemoryBuffer>,
    pub report: RunReport,
    pub elapsed: Duration,
    /// Sources entering each SGD step, stream and replay combined.
    pub batch_sizes: Vec<usize>,
}

/// Run `cfg.method` on `bench` from a fresh model and memory.
pub fn train(cfg: &TrainConfig, bench: &Benchmark) -> Result<RunOutcome> {
    cfg.validate()?;
    let model = init_model(cfg, bench.stream.shape(), bench.stream.classes())?;
    match cfg.method {
        Method::Offline => train_offline(cfg, bench, model),
        m => {
            let memory = m.uses_memory().then(|| MemoryBuffer::new(cfg.mem_size)).transpose()?;
            let recipe = OnlineRecipe::for_method(m).expect("online method");
            run_online(cfg, bench, memory, model, recipe)
        }
    }
}

fn require(cfg: &TrainConfig, m: Method) -> Result<()> {
    if cfg.method != m {
        return Err(Error::Config(format!("expected method `{m}`, config says `{}`", cfg.method)));
    }
    cfg.validate()
}

/// Unlabeled stream plus labeled replay under SemiCon.
pub fn train_ours(cfg: &TrainConfig, bench: &Benchmark, memory: MemoryBuffer, model: Model) -> Result<RunOutcome> {
    require(cfg, Method::Ours)?;
    run_online(cfg, bench, Some(memory), model, OnlineRecipe::for_method(Method::Ours).unwrap())
}

/// Supervised contrastive replay with stream labels visible.
pub fn train_scr(cfg: &TrainConfig, bench: &Benchmark, memory: MemoryBuffer, model: Model) -> Result<RunOutcome> {
    require(cfg, Method::Scr)?;
    run_online(cfg, bench, Some(memory), model, OnlineRecipe::for_method(Method::Scr).unwrap())
}

/// Supervised contrastive loss on memory batches only.
pub fn train_scr_mo(cfg: &TrainConfig, bench: &Benchmark, memory: MemoryBuffer, model: Model) -> Result<RunOutcome> {
    require(cfg, Method::ScrMo)?;
    run_online(cfg, bench, Some(memory), model, OnlineRecipe::for_method(Method::ScrMo).unwrap())
}

/// Cross-entropy experience replay with stream labels visible.
pub fn train_er(cfg: &TrainConfig, bench: &Benchmark, memory: MemoryBuffer, model: Model) -> Result<RunOutcome> {
    require(cfg, Method::Er)?;
    run_online(cfg, bench, Some(memory), model, OnlineRecipe::for_method(Method::Er).unwrap())
}

/// Cross-entropy on memory batches only.
pub fn train_er_mo(cfg: &TrainConfig, bench: &Benchmark, memory: MemoryBuffer, model: Model) -> Result<RunOutcome> {
    require(cfg, Method::ErMo)?;
    run_online(cfg, bench, Some(memory), model, OnlineRecipe::for_method(Method::ErMo).unwrap())
}

/// Cross-entropy on the labeled stream, no memory.
pub fn train_finetune(cfg: &TrainConfig, bench: &Benchmark, model: Model) -> Result<RunOutcome> {
    require(cfg, Method::Finetune)?;
    run_online(cfg, bench, None, model, OnlineRecipe::for_method(Method::Finetune).unwrap())
}

fn augmentation(cfg: &TrainConfig, shape: InputShape) -> Augmentation {
    cfg.augmentation.unwrap_or_else(|| Augmentation::default_for(shape))
}

fn collect_grads(params: &[Var<'_>], grads: &crate::numeric::Gradients) -> Vec<Tensor> {
    params.iter().map(|&p| grads.wrt(p)).collect()
}

fn check_finite(loss: f64, step: u64) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss} at step {step}")));
    }
    Ok(())
}

/// One SGD step on views' SemiCon loss over encoder and projection head.
pub fn contrastive_step(
    model: &mut Model,
    views: &Tensor,
    idx: &crate::losses::MultiviewIndex,
    loss_cfg: &LossConfig,
    sgd: &SgdConfig,
) -> Result<f64> {
    let mask = build_masks(idx)?;
    let tape = Tape::new();
    let enc_p = model.encoder.bind(&tape);
    let proj_p = model.projection.bind(&tape);
    let h = model.encoder.forward(&enc_p, tape.leaf(views.clone()))?;
    let z = model.projection.forward(&proj_p, h)?;
    let loss = semicon(z, idx, &mask, loss_cfg)?;
    let value = loss.value().item();
    let grads = tape.backward(loss)?;
    let g_enc = collect_grads(&enc_p, &grads);
    let g_proj = collect_grads(&proj_p, &grads);
    sgd_step(&mut model.encoder.params_mut(), &g_enc, sgd)?;
    sgd_step(&mut model.projection.params_mut(), &g_proj, sgd)?;
    Ok(value)
}

/// One SGD step on cross-entropy over encoder and classifier head.
pub fn cross_entropy_step(model: &mut Model, inputs: &Tensor, labels: &[usize], sgd: &SgdConfig) -> Result<f64> {
    let tape = Tape::new();
    let enc_p = model.encoder.bind(&tape);
    let cls_p = model.classifier.bind(&tape);
    let h = model.encoder.forward(&enc_p, tape.leaf(inputs.clone()))?;
    let logits = model.classifier.forward(&cls_p, h)?;
    let loss = cross_entropy(logits, labels)?;
    let value = loss.value().item();
    let grads = tape.backward(loss)?;
    let g_enc = collect_grads(&enc_p, &grads);
    let g_cls = collect_grads(&cls_p, &grads);
    sgd_step(&mut model.encoder.params_mut(), &g_enc, sgd)?;
    sgd_step(&mut model.classifier.params_mut(), &g_cls, sgd)?;
    Ok(value)
}

/// The shared online loop. Per stream batch: retrieve from memory, build the
/// step batch per `recipe`, take one SGD step, then offer the stream batch to
/// the reservoir. Accuracy is measured at each task boundary.
pub fn run_online(
    cfg: &TrainConfig,
    bench: &Benchmark,
    mut memory: Option<MemoryBuffer>,
    mut model: Model,
    recipe: OnlineRecipe,
) -> Result<RunOutcome> {
    cfg.validate()?;
    if recipe.replay && memory.is_none() {
        return Err(Error::Config("replay recipe needs a memory buffer".into()));
    }
    let start = Instant::now();
    let shape = bench.stream.shape();
    let aug = augmentation(cfg, shape);
    let loss_cfg = cfg.loss_config();
    let sgd = SgdConfig::new(cfg.lr)?;
    let mut rng_aug = rng_for(cfg.seed, Concern::Augment);
    let mut rng_res = rng_for(cfg.seed, Concern::Reservoir);
    let mut rng_ret = rng_for(cfg.seed, Concern::Retrieval);
    let labels = &bench.train.labels;

    let mut stream = bench.stream.clone();
    stream.rewind();
    let mut ncm = AccuracyMatrix::default();
    let mut head = AccuracyMatrix::default();
    let mut missing = Vec::new();
    let mut trace = Vec::new();
    let mut steps = 0u64;
    let mut batch_sizes = Vec::new();
    let mut current_task = None;

    let measure = |model: &Model, memory: &Option<MemoryBuffer>, ncm: &mut AccuracyMatrix, head: &mut AccuracyMatrix, missing: &mut Vec<usize>| -> Result<()> {
        if let Some(mem) = memory {
            if mem.is_empty() {
                ncm.push(vec![0.0; bench.test_sets.len()]);
            } else {
                let row = evaluate(&model.encoder, mem, &bench.test_sets)?;
                *missing = row.missing_classes;
                ncm.push(row.accuracies);
            }
        }
        if recipe.objective == Objective::CrossEntropy {
            head.push(evaluate_head(&model.encoder, &model.classifier, &bench.test_sets)?);
        }
        Ok(())
    };

    while let Some(batch) = stream.next_batch() {
        if current_task.is_some_and(|t| t != batch.task) {
            measure(&model, &memory, &mut ncm, &mut head, &mut missing)?;
        }
        current_task = Some(batch.task);

        let replay = match (&memory, recipe.replay) {
            (Some(mem), true) => mem.retrieve(cfg.mem_batch, &mut rng_ret),
            _ => Vec::new(),
        };
        let stream_part: Vec<(Sample, Option<usize>)> = match recipe.stream {
            StreamUse::Unlabeled => batch.samples.iter().map(|s| (s.clone(), None)).collect(),
            StreamUse::Labeled => batch
                .samples
                .iter()
                .map(|s| (s.clone(), Some(labels[s.id as usize])))
                .collect(),
            StreamUse::Ignored => Vec::new(),
        };
        let mut sources = stream_part;
        sources.extend(replay.into_iter().map(|it| (it.sample, Some(it.label))));
        batch_sizes.push(sources.len());

        let loss = if sources.is_empty() {
            0.0
        } else {
            match recipe.objective {
                Objective::Contrastive => {
                    let (views, idx) = make_multiview(&sources, shape, &aug, &mut rng_aug)?;
                    contrastive_step(&mut model, &views, &idx, &loss_cfg, &sgd)?
                }
                Objective::CrossEntropy => {
                    let labeled: Vec<(Sample, usize)> = sources
                        .into_iter()
                        .map(|(s, y)| (s, y.expect("cross-entropy sources are labeled")))
                        .collect();
                    let (inputs, ys) = make_single_view(&labeled, shape, &aug, &mut rng_aug)?;
                    cross_entropy_step(&mut model, &inputs, &ys, &sgd)?
                }
            }
        };
        check_finite(loss, steps)?;
        steps += 1;
        if cfg.trace_loss {
            trace.push(loss);
        }

        if let Some(mem) = memory.as_mut() {
            for s in batch.samples {
                mem.reservoir_update(s, &bench.oracle as &dyn Oracle, &mut rng_res);
            }
        }
    }
    measure(&model, &memory, &mut ncm, &mut head, &mut missing)?;

    let stream_len = stream.len() as u64;
    let oracle_calls = memory.as_ref().map_or(0, MemoryBuffer::oracle_calls);
    let label_fraction = if cfg.method.is_supervised() {
        1.0
    } else {
        memory.as_ref().map_or(Ok(1.0), |m| m.label_fraction(stream_len))?
    };
    let (accuracy, head_accuracy, metric) = if memory.is_some() {
        let head = (recipe.objective == Objective::CrossEntropy).then_some(head);
        (ncm, head, EvalMetric::Ncm)
    } else {
        (head, None, EvalMetric::Head)
    };
    let report = RunReport::new(
        cfg.clone(),
        metric,
        accuracy,
        head_accuracy,
        oracle_calls,
        stream_len,
        label_fraction,
        steps,
        missing,
        trace,
    );
    Ok(RunOutcome {
        model,
        memory,
        report,
        elapsed: start.elapsed(),
        batch_sizes,
    })
}

/// Multi-epoch cross-entropy over the whole training set, reshuffled each epoch.
pub fn train_offline(cfg: &TrainConfig, bench: &Benchmark, mut model: Model) -> Result<RunOutcome> {
    require(cfg, Method::Offline)?;
    let start = Instant::now();
    let shape = bench.stream.shape();
    let aug = augmentation(cfg, shape);
    let sgd = SgdConfig::new(cfg.lr)?;
    let mut rng_aug = rng_for(cfg.seed, Concern::Augment);
    let mut rng_epoch = rng_for(cfg.seed, Concern::Epochs);
    let data = &bench.train;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let epochs = cfg.epochs.expect("validated");
    let mut steps = 0u64;
    let mut trace = Vec::new();
    let mut batch_sizes = Vec::new();
    for _ in 0..epochs {
        order.shuffle(&mut rng_epoch);
        for chunk in order.chunks(cfg.stream_batch) {
            let batch: Vec<(Sample, usize)> = chunk
                .iter()
                .map(|&i| {
                    (
                        Sample {
                            id: i as u64,
                            features: data.features[i].clone(),
                        },
                        data.labels[i],
                    )
                })
                .collect();
            batch_sizes.push(batch.len());
            let (inputs, ys) = make_single_view(&batch, shape, &aug, &mut rng_aug)?;
            let loss = cross_entropy_step(&mut model, &inputs, &ys, &sgd)?;
            check_finite(loss, steps)?;
            steps += 1;
            if cfg.trace_loss {
                trace.push(loss);
            }
        }
    }
    let mut accuracy = AccuracyMatrix::default();
    accuracy.push(evaluate_head(&model.encoder, &model.classifier, &bench.test_sets)?);
    let report = RunReport::new(
        cfg.clone(),
        EvalMetric::Head,
        accuracy,
        None,
        0,
        data.len() as u64,
        1.0,
        steps,
        Vec::new(),
        trace,
    );
    Ok(RunOutcome {
        model,
        memory: None,
        report,
        elapsed: start.elapsed(),
        batch_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{make_synthetic, SyntheticSpec};

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            classes: 4,
            dims: 8,
            separation: 3.0,
            train_per_class: 25,
            test_per_class: 10,
            tasks: 2,
        }
    }

    fn cfg(m: Method) -> TrainConfig {
        TrainConfig {
            mem_size: 20,
            mem_batch: 10,
            model: ModelConfig {
                hidden: vec![16],
                latent: Some(8),
                proj_hidden: None,
                proj_out: 8,
                ..ModelConfig::default()
            },
            reduction: Reduction::Mean,
            epochs: (m == Method::Offline).then_some(2),
            ..TrainConfig::new(m)
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert!(Method::parse("sgd").is_err());
    }

    #[test]
    fn validation_rules() {
        let mut c = TrainConfig::new(Method::Scr);
        assert!(c.validate().is_ok());
        c.alpha = Some(1.0);
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(Method::Ours);
        c.alpha = None;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(Method::Er);
        c.epochs = Some(3);
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(Method::Offline);
        c.epochs = Some(0);
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(Method::Ours);
        c.lr = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn every_online_method_takes_one_step_per_batch() {
        let bench = make_synthetic(&small_spec(), 10, 0).unwrap();
        for m in Method::ALL.into_iter().filter(|&m| m != Method::Offline) {
            let out = train(&cfg(m), &bench).unwrap();
            assert_eq!(out.report.steps, bench.stream.num_batches() as u64, "{m}");
            assert_eq!(out.report.accuracy.rows.len(), 2, "{m}");
        }
    }

    #[test]
    fn offline_epoch_step_count() {
        let bench = make_synthetic(&small_spec(), 10, 0).unwrap();
        let mut c = cfg(Method::Offline);
        c.epochs = Some(1);
        let out = train(&c, &bench).unwrap();
        assert_eq!(out.report.steps, 10);
        assert_eq!(out.report.label_fraction, 1.0);
    }

    #[test]
    fn large_memory_means_full_labels() {
        let bench = make_synthetic(&small_spec(), 10, 0).unwrap();
        let mut c = cfg(Method::Ours);
        c.mem_size = 1000;
        let out = train(&c, &bench).unwrap();
        assert_eq!(out.report.label_fraction, 1.0);
        assert_eq!(out.report.oracle_calls, 100);
    }

    #[test]
    fn typed_entry_points_check_method() {
        let bench = make_synthetic(&small_spec(), 10, 0).unwrap();
        let c = cfg(Method::Scr);
        let model = init_model(&c, bench.stream.shape(), 4).unwrap();
        let mem = MemoryBuffer::new(c.mem_size).unwrap();
        assert!(train_ours(&c, &bench, mem.clone(), model.clone()).is_err());
        assert!(train_scr(&c, &bench, mem, model).is_ok());
    }
}
