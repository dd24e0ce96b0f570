//! Plot-ready tables from a directory of run reports.
//!
//! * `runs.csv`: one row per report.
//! * `alpha.csv`: accuracy of `ours` against alpha.
//! * `mem_batch.csv`: accuracy against memory batch size, per method.
//! * `label_fraction.csv`: `ours` and `scr-mo` accuracy relative to `scr`
//!   at the same memory size; `relative_accuracy = final_avg_mean / scr_final_avg_mean`.
//!
//! The figure tables are written only when their axis is present. Reports
//! feeding one table must agree on every config key other than the seed and
//! the table's row keys.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde_json::Value;

use ossgcl::report::RunReport;
use ossgcl::trainers::Method;
use ossgcl::{Error, Result};

use crate::runner::{csv_err, num, opt};
use crate::stats::{mean, sample_std};

/// Config keys that only some methods carry.
const METHOD_SPECIFIC: [&str; 4] = ["method", "alpha", "galpha_on", "epochs"];

/// All `*.jsonl` reports in `dir`, sorted by file name.
pub fn load_reports(dir: &Path) -> Result<Vec<(PathBuf, RunReport)>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e
            .map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if p.extension().is_some_and(|x| x == "jsonl") {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no .jsonl reports in directory"),
        });
    }
    paths
        .into_iter()
        .map(|p| {
            let r = RunReport::read(&p).map_err(|e| match e {
                Error::Report { line, reason } => Error::Data {
                    path: p.clone(),
                    offset: line as u64,
                    reason: format!("line {line}: {reason}"),
                },
                other => other,
            })?;
            Ok((p, r))
        })
        .collect()
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

fn config_keys(r: &RunReport) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    flatten("", &serde_json::to_value(&r.config).expect("config serializes"), &mut out);
    out.insert("dataset".into(), serde_json::to_string(&r.dataset).unwrap());
    out
}

fn check_consistent(table: &str, reports: &[&RunReport], ignore: &[&str]) -> Result<()> {
    let mut values: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in reports {
        let keys = config_keys(r);
        for (k, v) in keys {
            values.entry(k).or_default().insert(v);
        }
    }
    let divergent: Vec<String> = values
        .into_iter()
        .filter(|(k, vs)| vs.len() > 1 && !ignore.contains(&k.as_str()))
        .map(|(k, vs)| format!("{k} = {}", vs.into_iter().collect::<Vec<_>>().join(" | ")))
        .collect();
    if divergent.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "inconsistent configs for {table}: divergent keys: {}",
            divergent.join("; ")
        )))
    }
}

/// Per-method consistency ignoring `row_keys`, then across methods also
/// ignoring method-specific keys.
fn check_table(table: &str, reports: &[&RunReport], row_keys: &[&str]) -> Result<()> {
    let mut ignore: Vec<&str> = vec!["seed"];
    ignore.extend_from_slice(row_keys);
    for m in Method::ALL {
        let group: Vec<&RunReport> = reports.iter().copied().filter(|r| r.config.method == m).collect();
        check_consistent(table, &group, &ignore)?;
    }
    ignore.extend_from_slice(&METHOD_SPECIFIC);
    check_consistent(table, reports, &ignore)
}

#[derive(Debug, Clone, PartialEq, PartialOrd)]
struct Key {
    method: Method,
    alpha: Option<f64>,
    axis: Option<usize>,
}

struct Cell {
    key: Key,
    final_avg: Vec<f64>,
    label_fraction: Vec<f64>,
}

fn cells(reports: &[&RunReport], axis: impl Fn(&RunReport) -> Option<usize>) -> Vec<Cell> {
    let mut out: Vec<Cell> = Vec::new();
    for r in reports {
        let key = Key {
            method: r.config.method,
            alpha: r.config.alpha,
            axis: axis(r),
        };
        let cell = match out.iter().position(|c| c.key == key) {
            Some(i) => &mut out[i],
            None => {
                out.push(Cell {
                    key,
                    final_avg: Vec::new(),
                    label_fraction: Vec::new(),
                });
                out.last_mut().unwrap()
            }
        };
        cell.final_avg.push(r.final_avg());
        cell.label_fraction.push(r.label_fraction);
    }
    out.sort_by(|a, b| a.key.partial_cmp(&b.key).unwrap_or(std::cmp::Ordering::Equal));
    out
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write the tables for the reports in `dir` into `out`; returns the paths written.
pub fn emit_plot_data(dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let loaded = load_reports(dir)?;
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let all: Vec<&RunReport> = loaded.iter().map(|(_, r)| r).collect();
    let mut written = Vec::new();

    let runs_path = out.join("runs.csv");
    write_csv(
        &runs_path,
        &[
            "report",
            "method",
            "alpha",
            "mem_batch",
            "mem_size",
            "seed",
            "final_avg",
            "label_fraction",
            "oracle_calls",
            "steps",
        ],
        loaded
            .iter()
            .map(|(p, r)| {
                let c = &r.config;
                let mem = c.method.uses_memory();
                vec![
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    c.method.name().into(),
                    opt(c.alpha),
                    opt(mem.then_some(c.mem_batch)),
                    opt(mem.then_some(c.mem_size)),
                    c.seed.to_string(),
                    num(r.final_avg()),
                    num(r.label_fraction),
                    r.oracle_calls.to_string(),
                    r.steps.to_string(),
                ]
            })
            .collect(),
    )?;
    written.push(runs_path);

    let ours: Vec<&RunReport> = all.iter().copied().filter(|r| r.config.method == Method::Ours).collect();
    let distinct = |rs: &[&RunReport], f: &dyn Fn(&RunReport) -> String| rs.iter().map(|r| f(r)).collect::<BTreeSet<_>>().len();

    if distinct(&ours, &|r| opt(r.config.alpha)) > 1 {
        check_table("alpha table", &ours, &["alpha"])?;
        let rows = cells(&ours, |_| None)
            .into_iter()
            .map(|c| {
                vec![
                    opt(c.key.alpha),
                    c.final_avg.len().to_string(),
                    num(mean(&c.final_avg)),
                    num(sample_std(&c.final_avg)),
                    num(mean(&c.label_fraction)),
                ]
            })
            .collect();
        let p = out.join("alpha.csv");
        write_csv(
            &p,
            &["alpha", "reps", "final_avg_mean", "final_avg_std", "label_fraction_mean"],
            rows,
        )?;
        written.push(p);
    }

    let with_mem: Vec<&RunReport> = all.iter().copied().filter(|r| r.config.method.uses_memory()).collect();
    if distinct(&with_mem, &|r| r.config.mem_batch.to_string()) > 1 {
        check_table("mem_batch table", &with_mem, &["alpha", "mem_batch"])?;
        let rows = cells(&with_mem, |r| Some(r.config.mem_batch))
            .into_iter()
            .map(|c| {
                vec![
                    c.key.method.name().into(),
                    opt(c.key.alpha),
                    opt(c.key.axis),
                    c.final_avg.len().to_string(),
                    num(mean(&c.final_avg)),
                    num(sample_std(&c.final_avg)),
                ]
            })
            .collect();
        let p = out.join("mem_batch.csv");
        write_csv(
            &p,
            &["method", "alpha", "mem_batch", "reps", "final_avg_mean", "final_avg_std"],
            rows,
        )?;
        written.push(p);
    }

    let fig3: Vec<&RunReport> = all
        .iter()
        .copied()
        .filter(|r| matches!(r.config.method, Method::Ours | Method::ScrMo | Method::Scr))
        .collect();
    let has = |m: Method| fig3.iter().any(|r| r.config.method == m);
    if has(Method::Scr) && (has(Method::Ours) || has(Method::ScrMo)) {
        check_table("label_fraction table", &fig3, &["alpha", "mem_size"])?;
        let cs = cells(&fig3, |r| Some(r.config.mem_size));
        let mut rows = Vec::new();
        for c in cs.iter().filter(|c| c.key.method != Method::Scr) {
            let scr = cs
                .iter()
                .find(|s| s.key.method == Method::Scr && s.key.axis == c.key.axis)
                .ok_or_else(|| {
                    Error::Config(format!("label_fraction table: no scr reports with mem_size {}", opt(c.key.axis)))
                })?;
            let m = mean(&c.final_avg);
            let s = mean(&scr.final_avg);
            rows.push(vec![
                c.key.method.name().into(),
                opt(c.key.alpha),
                opt(c.key.axis),
                c.final_avg.len().to_string(),
                num(mean(&c.label_fraction)),
                num(m),
                num(s),
                num(m / s),
            ]);
        }
        let p = out.join("label_fraction.csv");
        write_csv(
            &p,
            &[
                "method",
                "alpha",
                "mem_size",
                "reps",
                "label_fraction_mean",
                "final_avg_mean",
                "scr_final_avg_mean",
                "relative_accuracy",
            ],
            rows,
        )?;
        written.push(p);
    }
    Ok(written)
}
