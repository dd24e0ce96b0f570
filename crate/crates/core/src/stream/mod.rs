//! Task sequences and their single-pass, label-free stream.

mod augment;
mod cifar;
mod dataset;
mod synthetic;

use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use augment::{make_multiview, make_single_view, Augmentation, ImageAugment, VectorAugment};
pub use cifar::{load_cifar_binary, load_cifar_dir, parse_cifar, standardize, CifarVariant, PIXELS};
pub use dataset::{InputShape, LabeledDataset, TestSet};
pub use synthetic::SyntheticSpec;

use crate::error::{Error, Result};
use crate::memory::{Sample, TableOracle};
use crate::rng::{rng_for, Concern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClassOrder {
    #[default]
    Ascending,
    Shuffled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub classes: Vec<usize>,
    /// Row indices into the training dataset, in emission order.
    pub order: Vec<usize>,
}

/// Emitted stream batch. `task` identifies the segment for measurement only.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamBatch {
    pub task: usize,
    pub samples: Vec<Sample>,
}

/// Disjoint-class tasks streamed once, in order, in batches of `batch_size`.
#[derive(Debug, Clone)]
pub struct TaskStream {
    data: Arc<LabeledDataset>,
    tasks: Vec<Task>,
    batch_size: usize,
    task_cursor: usize,
    pos: usize,
}

/// Partition classes into `k` equal groups and route samples to their task.
/// Within-task order is shuffled from `seed`.
pub fn split_dataset(
    data: Arc<LabeledDataset>,
    k: usize,
    batch_size: usize,
    seed: u64,
    class_order: ClassOrder,
) -> Result<TaskStream> {
    if k == 0 || !data.classes.is_multiple_of(k) {
        return Err(Error::Config(format!(
            "{} classes cannot be split evenly into {k} tasks",
            data.classes
        )));
    }
    if batch_size == 0 {
        return Err(Error::Config("stream batch size must be positive".into()));
    }
    let mut rng = rng_for(seed, Concern::StreamOrder);
    let mut classes: Vec<usize> = (0..data.classes).collect();
    if class_order == ClassOrder::Shuffled {
        classes.shuffle(&mut rng);
    }
    let per = data.classes / k;
    let mut task_of = vec![0; data.classes];
    let mut tasks: Vec<Task> = classes
        .chunks(per)
        .enumerate()
        .map(|(t, cs)| {
            cs.iter().for_each(|&c| task_of[c] = t);
            let mut sorted = cs.to_vec();
            sorted.sort_unstable();
            Task {
                classes: sorted,
                order: Vec::new(),
            }
        })
        .collect();
    for (i, &y) in data.labels.iter().enumerate() {
        tasks[task_of[y]].order.push(i);
    }
    for t in &mut tasks {
        t.order.shuffle(&mut rng);
    }
    Ok(TaskStream {
        data,
        tasks,
        batch_size,
        task_cursor: 0,
        pos: 0,
    })
}

impl TaskStream {
    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn shape(&self) -> InputShape {
        self.data.shape
    }

    pub fn classes(&self) -> usize {
        self.data.classes
    }

    /// Total number of samples over all tasks.
    pub fn len(&self) -> usize {
        self.tasks.iter().map(|t| t.order.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Batches in one pass; a task's last batch may be short.
    pub fn num_batches(&self) -> usize {
        self.tasks
            .iter()
            .map(|t| t.order.len().div_ceil(self.batch_size))
            .sum()
    }

    pub fn rewind(&mut self) {
        self.task_cursor = 0;
        self.pos = 0;
    }

    /// Next unlabeled batch, or `None` at end of stream. Batches never span tasks.
    pub fn next_batch(&mut self) -> Option<StreamBatch> {
        while let Some(task) = self.tasks.get(self.task_cursor) {
            if self.pos < task.order.len() {
                let end = (self.pos + self.batch_size).min(task.order.len());
                let samples = task.order[self.pos..end]
                    .iter()
                    .map(|&i| Sample {
                        id: i as u64,
                        features: Arc::clone(&self.data.features[i]),
                    })
                    .collect();
                self.pos = end;
                return Some(StreamBatch {
                    task: self.task_cursor,
                    samples,
                });
            }
            self.task_cursor += 1;
            self.pos = 0;
        }
        None
    }

    /// Held-out examples grouped by this stream's class partition.
    pub fn task_test_sets(&self, test: &LabeledDataset) -> Vec<TestSet> {
        self.tasks.iter().map(|t| test.filter_classes(&t.classes)).collect()
    }
}

impl Iterator for TaskStream {
    type Item = StreamBatch;

    fn next(&mut self) -> Option<StreamBatch> {
        self.next_batch()
    }
}

/// Everything a training run consumes: the stream, the oracle over its
/// labels, per-task test sets and the full labeled training set (only the
/// supervised baselines read the latter directly).
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub stream: TaskStream,
    pub oracle: TableOracle,
    pub test_sets: Vec<TestSet>,
    pub train: Arc<LabeledDataset>,
}

impl Benchmark {
    pub fn from_split(
        train: LabeledDataset,
        test: &LabeledDataset,
        tasks: usize,
        batch_size: usize,
        seed: u64,
        class_order: ClassOrder,
    ) -> Result<Self> {
        if train.shape != test.shape || train.classes != test.classes {
            return Err(Error::Config("train and test splits disagree on shape or classes".into()));
        }
        let train = Arc::new(train);
        let stream = split_dataset(Arc::clone(&train), tasks, batch_size, seed, class_order)?;
        let test_sets = stream.task_test_sets(test);
        Ok(Self {
            oracle: TableOracle::new(Arc::new(train.labels.clone())),
            stream,
            test_sets,
            train,
        })
    }
}

/// Synthetic benchmark; data generation and stream order both follow `seed`.
pub fn make_synthetic(spec: &SyntheticSpec, batch_size: usize, seed: u64) -> Result<Benchmark> {
    let (train, test) = spec.generate(seed)?;
    Benchmark::from_split(train, &test, spec.tasks, batch_size, seed, ClassOrder::Ascending)
}
