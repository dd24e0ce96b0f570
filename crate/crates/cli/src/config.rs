//! Run configuration files and their expansion into individual runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ossgcl::losses::{AlphaTarget, Reduction};
use ossgcl::stream::{Augmentation, ClassOrder, SyntheticSpec};
use ossgcl::trainers::{Method, ModelConfig, TrainConfig};
use ossgcl::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    #[default]
    Synthetic,
    Cifar10,
    Cifar100,
}

impl DatasetName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Self::Synthetic),
            "cifar10" => Ok(Self::Cifar10),
            "cifar100" => Ok(Self::Cifar100),
            _ => Err(Error::Config(format!(
                "unknown dataset `{s}` (expected synthetic, cifar10 or cifar100)"
            ))),
        }
    }

    pub fn default_tasks(self) -> usize {
        match self {
            Self::Synthetic => SyntheticSpec::default().tasks,
            Self::Cifar10 => 5,
            Self::Cifar100 => 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub name: DatasetName,
    /// Directory with the CIFAR binary files.
    pub path: Option<PathBuf>,
    pub tasks: Option<usize>,
    #[serde(default)]
    pub class_order: ClassOrder,
    #[serde(default)]
    pub synthetic: SyntheticSpec,
}

impl DatasetConfig {
    pub fn tasks(&self) -> usize {
        match (self.name, self.tasks) {
            (_, Some(k)) => k,
            (DatasetName::Synthetic, None) => self.synthetic.tasks,
            (n, None) => n.default_tasks(),
        }
    }

    /// Short label stored in each report.
    pub fn describe(&self) -> String {
        match self.name {
            DatasetName::Synthetic => {
                let s = &self.synthetic;
                format!(
                    "synthetic(classes={},dims={},separation={},train={},test={},tasks={})",
                    s.classes,
                    s.dims,
                    s.separation,
                    s.train_per_class,
                    s.test_per_class,
                    self.tasks()
                )
            }
            DatasetName::Cifar10 => format!("cifar10(tasks={})", self.tasks()),
            DatasetName::Cifar100 => format!("cifar100(tasks={})", self.tasks()),
        }
    }
}

/// Sweep axes. Empty lists leave the axis at its single configured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    /// `[start, stop, step]` in log10 units, inclusive of both ends.
    pub alpha_log10: Option<[f64; 3]>,
    #[serde(default)]
    pub mem_batch: Vec<usize>,
    #[serde(default)]
    pub mem_size: Vec<usize>,
}

/// The log-spaced alpha grid from 10^-1.5 to 10^0.75 in quarter decades.
pub const FIGURE_ALPHA_GRID: [f64; 3] = [-1.5, 0.75, 0.25];

pub fn log_grid([start, stop, step]: [f64; 3]) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(Error::Config(format!(
            "alpha_log10 needs finite start <= stop and step > 0, got [{start}, {stop}, {step}]"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| 10f64.powf(start + i as f64 * step)).collect())
}

impl SweepConfig {
    pub fn alphas(&self) -> Result<Vec<f64>> {
        let mut out = self.alpha.clone();
        if let Some(g) = self.alpha_log10 {
            out.extend(log_grid(g)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub stream_batch: Option<usize>,
    pub mem_batch: Option<usize>,
    pub mem_size: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub galpha_on: Option<AlphaTarget>,
    pub reduction: Option<Reduction>,
    #[serde(default)]
    pub trace_loss: bool,
    #[serde(default = "one")]
    pub reps: usize,
    pub out: Option<PathBuf>,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub augmentation: Option<Augmentation>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_method() -> Method {
    Method::Ours
}

fn one() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

/// One fully specified run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub train: TrainConfig,
    pub rep: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }

    fn train_config(&self, method: Method, alpha: Option<f64>, mem_batch: Option<usize>, mem_size: Option<usize>, seed: u64) -> TrainConfig {
        let sweeping_methods = !self.sweep.methods.is_empty();
        let mut c = TrainConfig::new(method);
        // With a method sweep, method-specific keys only reach the methods they apply to.
        let keep = |applies: bool| !sweeping_methods || applies;
        if let Some(a) = alpha.filter(|_| keep(method == Method::Ours)) {
            c.alpha = Some(a);
        }
        if let Some(e) = self.epochs.filter(|_| keep(method == Method::Offline)) {
            c.epochs = Some(e);
        }
        if let Some(g) = self.galpha_on.filter(|_| keep(method == Method::Ours)) {
            c.galpha_on = g;
        }
        if let Some(t) = self.tau {
            c.tau = t;
        }
        if let Some(b) = self.stream_batch {
            c.stream_batch = b;
        }
        if let Some(b) = mem_batch {
            c.mem_batch = b;
        }
        if let Some(m) = mem_size {
            c.mem_size = m;
        }
        if let Some(lr) = self.lr {
            c.lr = lr;
        }
        if let Some(r) = self.reduction {
            c.reduction = r;
        }
        c.seed = seed;
        c.model = self.model.clone();
        c.augmentation = self.augmentation;
        c.trace_loss = self.trace_loss;
        c
    }

    /// Every run the config describes, validated before any compute.
    /// Repetition `r` uses seed `seed + r`.
    pub fn expand(&self) -> Result<Vec<RunSpec>> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.dataset.tasks() == 0 {
            return Err(Error::Config("dataset.tasks must be at least 1".into()));
        }
        if self.dataset.name == DatasetName::Synthetic {
            let mut s = self.dataset.synthetic.clone();
            s.tasks = self.dataset.tasks();
            s.validate()?;
        } else if self.dataset.path.is_none() {
            return Err(Error::Config(format!(
                "dataset `{}` needs dataset.path (or --data-dir)",
                serde_json::to_value(self.dataset.name).unwrap().as_str().unwrap()
            )));
        }
        let methods = if self.sweep.methods.is_empty() {
            vec![self.method]
        } else {
            self.sweep.methods.clone()
        };
        let alphas = self.sweep.alphas()?;
        let alphas: Vec<Option<f64>> = if alphas.is_empty() {
            vec![self.alpha]
        } else {
            alphas.into_iter().map(Some).collect()
        };
        let axis = |values: &[usize], single: Option<usize>| -> Vec<Option<usize>> {
            if values.is_empty() {
                vec![single]
            } else {
                values.iter().copied().map(Some).collect()
            }
        };
        let mem_batches = axis(&self.sweep.mem_batch, self.mem_batch);
        let mem_sizes = axis(&self.sweep.mem_size, self.mem_size);
        let base_seed = self.seed.unwrap_or(0);

        let mut runs = Vec::new();
        for &method in &methods {
            // Axes that do not apply to a method collapse to one value.
            let m_alphas: &[Option<f64>] = if method == Method::Ours || !self.sweep.alpha_is_axis() {
                &alphas
            } else {
                &alphas[..1]
            };
            let (m_batches, m_sizes): (&[Option<usize>], &[Option<usize>]) = if method.uses_memory() {
                (&mem_batches, &mem_sizes)
            } else {
                (&mem_batches[..1], &mem_sizes[..1])
            };
            for &alpha in m_alphas {
                for &mb in m_batches {
                    for &ms in m_sizes {
                        for rep in 0..self.reps {
                            let seed = base_seed.checked_add(rep as u64).ok_or_else(|| Error::Config("seed overflow".into()))?;
                            let train = self.train_config(method, alpha, mb, ms, seed);
                            train
                                .validate()
                                .map_err(|e| Error::Config(format!("run `{method}`: {e}")))?;
                            runs.push(RunSpec { train, rep });
                        }
                    }
                }
            }
        }
        Ok(runs)
    }
}

impl SweepConfig {
    fn alpha_is_axis(&self) -> bool {
        !self.alpha.is_empty() || self.alpha_log10.is_some()
    }
}
