//! Executes expanded runs and writes reports plus the aggregate table.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use ossgcl::report::RunReport;
use ossgcl::stream::{load_cifar_dir, make_synthetic, standardize, Benchmark, CifarVariant, LabeledDataset};
use ossgcl::trainers::{train, Method, TrainConfig};
use ossgcl::{Error, Result};

use crate::config::{DatasetConfig, DatasetName, RunConfig, RunSpec};
use crate::stats::{mean, sample_std};

/// Loaded once; benchmarks for each seed are cut from it.
pub enum DataSource {
    Synthetic(ossgcl::stream::SyntheticSpec),
    Cifar {
        train: Arc<LabeledDataset>,
        test: Arc<LabeledDataset>,
    },
}

impl DataSource {
    pub fn load(cfg: &DatasetConfig) -> Result<Self> {
        let variant = match cfg.name {
            DatasetName::Synthetic => {
                let mut spec = cfg.synthetic.clone();
                spec.tasks = cfg.tasks();
                return Ok(Self::Synthetic(spec));
            }
            DatasetName::Cifar10 => CifarVariant::Cifar10,
            DatasetName::Cifar100 => CifarVariant::Cifar100,
        };
        let dir = cfg
            .path
            .as_deref()
            .ok_or_else(|| Error::Config("CIFAR datasets need a path".into()))?;
        if !dir.is_dir() {
            return Err(Error::Io {
                path: dir.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
            });
        }
        let (mut train, mut test) = load_cifar_dir(dir, variant)?;
        standardize(&mut [&mut train, &mut test], 0);
        Ok(Self::Cifar {
            train: Arc::new(train),
            test: Arc::new(test),
        })
    }

    pub fn benchmark(&self, cfg: &DatasetConfig, stream_batch: usize, seed: u64) -> Result<Benchmark> {
        match self {
            Self::Synthetic(spec) => make_synthetic(spec, stream_batch, seed),
            Self::Cifar { train, test } => Benchmark::from_split(
                (**train).clone(),
                test,
                cfg.tasks(),
                stream_batch,
                seed,
                cfg.class_order,
            ),
        }
    }
}

/// File stem identifying a run within one output directory.
pub fn run_name(c: &TrainConfig) -> String {
    let mut s = c.method.name().to_string();
    if let Some(a) = c.alpha {
        s.push_str(&format!("_a{a}"));
    }
    if c.method.uses_memory() {
        s.push_str(&format!("_bm{}_m{}", c.mem_batch, c.mem_size));
    }
    if let Some(e) = c.epochs {
        s.push_str(&format!("_e{e}"));
    }
    s.push_str(&format!("_seed{}", c.seed));
    s
}

pub struct Finished {
    pub path: PathBuf,
    pub report: RunReport,
    pub seconds: f64,
}

pub fn execute(cfg: &RunConfig, runs: &[RunSpec], out: &Path, verbose: bool) -> Result<Vec<Finished>> {
    let source = DataSource::load(&cfg.dataset)?;
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let describe = cfg.dataset.describe();
    let one = |spec: &RunSpec| -> Result<Finished> {
        let bench = source.benchmark(&cfg.dataset, spec.train.stream_batch, spec.train.seed)?;
        let outcome = train(&spec.train, &bench)?;
        let mut report = outcome.report;
        report.dataset = Some(describe.clone());
        let path = out.join(format!("{}.jsonl", run_name(&spec.train)));
        report.write(&path)?;
        let seconds = outcome.elapsed.as_secs_f64();
        if verbose {
            eprintln!(
                "{}: final_avg {:.4}, p {:.4}, {} steps, {:.2}s",
                path.display(),
                report.final_avg(),
                report.label_fraction,
                report.steps,
                seconds
            );
        }
        Ok(Finished { path, report, seconds })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let done: Vec<Finished> = pool.install(|| runs.par_iter().map(one).collect::<Result<_>>())?;

    let mut timing = csv::Writer::from_path(out.join("timings.csv")).map_err(|e| csv_err(out, e))?;
    timing.write_record(["report", "seconds"]).map_err(|e| csv_err(out, e))?;
    for f in &done {
        let name = f.path.file_name().unwrap().to_string_lossy().into_owned();
        timing
            .write_record([name, format!("{:.6}", f.seconds)])
            .map_err(|e| csv_err(out, e))?;
    }
    timing.flush().map_err(|e| Error::Io {
        path: out.join("timings.csv"),
        source: e,
    })?;
    Ok(done)
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: Method,
    pub alpha: Option<f64>,
    pub mem_batch: Option<usize>,
    pub mem_size: Option<usize>,
    pub final_avg: Vec<f64>,
    pub label_fraction: Vec<f64>,
}

/// Group reports by every config field except the seed.
pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a RunReport>) -> Vec<AggregateRow> {
    let mut groups: Vec<(TrainConfig, AggregateRow)> = Vec::new();
    for r in reports {
        let mut key = r.config.clone();
        key.seed = 0;
        let pos = groups.iter().position(|(k, _)| *k == key);
        let row = match pos {
            Some(i) => &mut groups[i].1,
            None => {
                let m = r.config.method;
                groups.push((
                    key,
                    AggregateRow {
                        method: m,
                        alpha: r.config.alpha,
                        mem_batch: m.uses_memory().then_some(r.config.mem_batch),
                        mem_size: m.uses_memory().then_some(r.config.mem_size),
                        final_avg: Vec::new(),
                        label_fraction: Vec::new(),
                    },
                ));
                &mut groups.last_mut().unwrap().1
            }
        };
        row.final_avg.push(r.final_avg());
        row.label_fraction.push(r.label_fraction);
    }
    let mut rows: Vec<AggregateRow> = groups.into_iter().map(|(_, r)| r).collect();
    rows.sort_by(|a, b| {
        (a.method, a.mem_size, a.mem_batch)
            .cmp(&(b.method, b.mem_size, b.mem_batch))
            .then(a.alpha.partial_cmp(&b.alpha).unwrap_or(std::cmp::Ordering::Equal))
    });
    rows
}

pub(crate) fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6}")
    }
}

/// Columns: method, alpha, mem_batch, mem_size, reps, then mean and sample
/// standard deviation of final average accuracy and label fraction. The
/// standard deviation is blank for a single repetition.
pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "method",
        "alpha",
        "mem_batch",
        "mem_size",
        "reps",
        "final_avg_mean",
        "final_avg_std",
        "label_fraction_mean",
        "label_fraction_std",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            opt(r.alpha),
            opt(r.mem_batch),
            opt(r.mem_size),
            r.final_avg.len().to_string(),
            num(mean(&r.final_avg)),
            num(sample_std(&r.final_avg)),
            num(mean(&r.label_fraction)),
            num(sample_std(&r.label_fraction)),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
