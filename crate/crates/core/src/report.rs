//! Run reports and their JSON-lines encoding.
//!
//! A report file is one JSON object per line, each tagged with `kind`:
//! a `header` first, then `accuracy` rows, optional `head_accuracy` rows,
//! optional `loss` records, and a closing `summary`. Wall-clock time is kept
//! out of the report so identical runs serialize identically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::AccuracyMatrix;
use crate::trainers::TrainConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMetric {
    /// Nearest class mean over memory latents.
    Ncm,
    /// The method's own softmax head.
    Head,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub dataset: Option<String>,
    pub config: TrainConfig,
    pub metric: EvalMetric,
    pub accuracy: AccuracyMatrix,
    pub head_accuracy: Option<AccuracyMatrix>,
    pub oracle_calls: u64,
    pub stream_len: u64,
    pub label_fraction: f64,
    pub steps: u64,
    /// Classes with no memory exemplar at the final evaluation.
    pub missing_classes: Vec<usize>,
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Header {
        schema_version: u32,
        dataset: Option<String>,
        metric: EvalMetric,
        config: TrainConfig,
    },
    Accuracy {
        after_task: usize,
        row: Vec<f64>,
    },
    HeadAccuracy {
        after_task: usize,
        row: Vec<f64>,
    },
    Loss {
        step: usize,
        value: f64,
    },
    Summary {
        final_avg: f64,
        oracle_calls: u64,
        stream_len: u64,
        label_fraction: f64,
        steps: u64,
        missing_classes: Vec<usize>,
    },
}

impl RunReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: TrainConfig,
        metric: EvalMetric,
        accuracy: AccuracyMatrix,
        head_accuracy: Option<AccuracyMatrix>,
        oracle_calls: u64,
        stream_len: u64,
        label_fraction: f64,
        steps: u64,
        missing_classes: Vec<usize>,
        loss_trace: Vec<f64>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset: None,
            config,
            metric,
            accuracy,
            head_accuracy,
            oracle_calls,
            stream_len,
            label_fraction,
            steps,
            missing_classes,
            loss_trace,
        }
    }

    pub fn final_avg(&self) -> f64 {
        self.accuracy.final_avg()
    }

    fn records(&self) -> Vec<Record> {
        let mut out = vec![Record::Header {
            schema_version: self.schema_version,
            dataset: self.dataset.clone(),
            metric: self.metric,
            config: self.config.clone(),
        }];
        out.extend(self.accuracy.rows.iter().enumerate().map(|(k, r)| Record::Accuracy {
            after_task: k,
            row: r.clone(),
        }));
        if let Some(h) = &self.head_accuracy {
            out.extend(h.rows.iter().enumerate().map(|(k, r)| Record::HeadAccuracy {
                after_task: k,
                row: r.clone(),
            }));
        }
        out.extend(self.loss_trace.iter().enumerate().map(|(step, &value)| Record::Loss { step, value }));
        out.push(Record::Summary {
            final_avg: self.final_avg(),
            oracle_calls: self.oracle_calls,
            stream_len: self.stream_len,
            label_fraction: self.label_fraction,
            steps: self.steps,
            missing_classes: self.missing_classes.clone(),
        });
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in self.records() {
            s.push_str(&serde_json::to_string(&r).expect("report records serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::Report { line, reason };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let mut parse = |expect_more: bool| -> Result<Option<(usize, Record)>> {
            match lines.next() {
                Some((n, l)) => serde_json::from_str(l).map(|r| Some((n, r))).map_err(|e| bad(n, e.to_string())),
                None if expect_more => Err(bad(0, "unexpected end of report".into())),
                None => Ok(None),
            }
        };

        let (n, header) = parse(true)?.expect("checked");
        let Record::Header {
            schema_version,
            dataset,
            metric,
            config,
        } = header
        else {
            return Err(bad(n, "first record must be a header".into()));
        };
        if schema_version != SCHEMA_VERSION {
            return Err(bad(n, format!("unsupported schema version {schema_version}")));
        }

        let mut accuracy = AccuracyMatrix::default();
        let mut head: Option<AccuracyMatrix> = None;
        let mut trace = Vec::new();
        let mut summary = None;
        while let Some((n, rec)) = parse(false)? {
            if summary.is_some() {
                return Err(bad(n, "record after summary".into()));
            }
            match rec {
                Record::Header { .. } => return Err(bad(n, "duplicate header".into())),
                Record::Accuracy { after_task, row } => {
                    if after_task != accuracy.rows.len() {
                        return Err(bad(n, format!("accuracy row {after_task} out of order")));
                    }
                    accuracy.push(row);
                }
                Record::HeadAccuracy { after_task, row } => {
                    let h = head.get_or_insert_with(AccuracyMatrix::default);
                    if after_task != h.rows.len() {
                        return Err(bad(n, format!("head accuracy row {after_task} out of order")));
                    }
                    h.push(row);
                }
                Record::Loss { step, value } => {
                    if step != trace.len() {
                        return Err(bad(n, format!("loss step {step} out of order")));
                    }
                    trace.push(value);
                }
                s @ Record::Summary { .. } => summary = Some((n, s)),
            }
        }
        let Some((
            n,
            Record::Summary {
                final_avg,
                oracle_calls,
                stream_len,
                label_fraction,
                steps,
                missing_classes,
            },
        )) = summary
        else {
            return Err(bad(0, "report has no summary".into()));
        };
        let report = RunReport {
            schema_version,
            dataset,
            config,
            metric,
            accuracy,
            head_accuracy: head,
            oracle_calls,
            stream_len,
            label_fraction,
            steps,
            missing_classes,
            loss_trace: trace,
        };
        if report.final_avg() != final_avg {
            return Err(bad(n, format!("summary final_avg {final_avg} disagrees with accuracy rows")));
        }
        Ok(report)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_jsonl(&text)
    }
}
