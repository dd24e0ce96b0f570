//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

mod common;

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::*;
use ossgcl::losses::{semicon_value, supcon, LossConfig};
use ossgcl::memory::{MemoryBuffer, Oracle, Sample, SourceId};
use ossgcl::numeric::{Tape, Tensor};
use ossgcl::stream::{make_synthetic, parse_cifar, CifarVariant, SyntheticSpec, PIXELS};
use ossgcl::trainers::{train, Method, TrainConfig};
use ossgcl::Error;

const LOSS_TOL: f64 = 1e-10;
const GRAD_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(limit: Duration, t: Duration) -> bool {
    t < limit
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let batches = 200;
    for i in 0..batches {
        use rand::Rng;
        let b = 1 + i % 8;
        let dz = rng.random_range(2..=16);
        let (z, idx) = random_batch(&mut rng, b, dz, 3, 0.5);
        let c = LossConfig::new(rng.random_range(0.05..1.0), rng.random_range(0.0..3.0)).unwrap();
        worst = worst.max(rel_err(semicon_value(&z, &idx, &c).unwrap(), scalar_semicon(&z, &idx, &c)));
    }
    let t = start.elapsed();
    check(
        worst < LOSS_TOL && within(Duration::from_secs(10), t),
        format!("{batches} mixed batches, max rel err {worst:.2e}, {:.2} s", t.as_secs_f64()),
    )
}

fn reductions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut sup, mut pair) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let b = 1 + i % 8;
        let dz = 2 + i % 15;
        let (z, idx) = random_batch(&mut rng, b, dz, 3, 1.0);
        let labels: Vec<usize> = (0..idx.views()).map(|v| idx.label(v).unwrap()).collect();
        let want = scalar_supcon(&z, &labels, 0.1);
        for alpha in [0.0, 0.18, 1.0, 1.78] {
            sup = sup.max(rel_err(semicon_value(&z, &idx, &LossConfig::new(0.1, alpha).unwrap()).unwrap(), want));
        }
        let (z, idx) = random_batch(&mut rng, b, dz, 3, 0.0);
        let got = semicon_value(&z, &idx, &LossConfig::new(0.1, 1.0).unwrap()).unwrap();
        pair = pair.max(rel_err(got, scalar_pair_contrastive(&z, 0.1)));
    }
    check(
        sup < LOSS_TOL && pair < LOSS_TOL,
        format!("100 batches each, supcon max rel err {sup:.2e}, pair-contrastive {pair:.2e}"),
    )
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let configs = 24u64;
    let worst = (0..configs).map(|s| semicon_model_check(s, FD_STEP)).fold(0.0f64, f64::max);
    let t = start.elapsed();
    check(
        worst < GRAD_TOL && within(Duration::from_secs(60), t),
        format!("{configs} configurations wrt inputs, encoder and projection, max rel err {worst:.2e}, {:.2} s", t.as_secs_f64()),
    )
}

struct AnyLabel;
impl Oracle for AnyLabel {
    fn label(&self, _: SourceId) -> usize {
        0
    }
}

fn oracle_fraction(m: usize, n: u64, trials: u64) -> f64 {
    let shared: Arc<[f64]> = Arc::from(vec![0.0]);
    let total: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xb0d9e7 ^ ((m as u64) << 32) ^ t);
            let mut mem = MemoryBuffer::new(m).unwrap();
            for id in 0..n {
                let s = Sample {
                    id,
                    features: Arc::clone(&shared),
                };
                mem.reservoir_update(s, &AnyLabel, &mut rng);
            }
            mem.oracle_calls()
        })
        .sum();
    total as f64 / (trials * n) as f64
}

fn label_budget() -> Outcome {
    let start = Instant::now();
    let targets = [(200, 2.6), (500, 5.6), (2000, 16.9), (5000, 33.0)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, pct) in targets {
        let got = 100.0 * oracle_fraction(m, 50_000, 1000);
        ok &= (got - pct).abs() <= 0.2;
        parts.push(format!("M={m}: {got:.2}% (target {pct}%)"));
    }
    let t = start.elapsed();
    check(
        ok && within(Duration::from_secs(60), t),
        format!("N=50000, 1000 trials; {}; {:.1} s", parts.join(", "), t.as_secs_f64()),
    )
}

fn uniformity() -> Outcome {
    let (m, n, trials) = (10usize, 100u64, 10_000u64);
    let shared: Arc<[f64]> = Arc::from(vec![0.0]);
    let mut counts = vec![0u64; n as usize];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..trials {
        let mut mem = MemoryBuffer::new(m).unwrap();
        for id in 0..n {
            let s = Sample {
                id,
                features: Arc::clone(&shared),
            };
            mem.reservoir_update(s, &AnyLabel, &mut rng);
        }
        for it in mem.items() {
            counts[it.sample.id as usize] += 1;
        }
    }
    let expected = trials as f64 * m as f64 / n as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((n - 1) as f64).unwrap().inverse_cdf(0.99);
    check(
        stat < critical,
        format!("chi-square {stat:.1} vs critical {critical:.1} (df {}, alpha 0.01)", n - 1),
    )
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let reps = 10u64;
    let spec = SyntheticSpec::default();
    let run = |method: Method, seed: u64| {
        let bench = make_synthetic(&spec, 10, seed).unwrap();
        let cfg = TrainConfig {
            seed,
            mem_size: 50,
            mem_batch: 20,
            stream_batch: 10,
            ..TrainConfig::new(method)
        };
        train(&cfg, &bench).unwrap().report
    };
    let rows: Vec<[ossgcl::report::RunReport; 3]> = (0..reps)
        .into_par_iter()
        .map(|s| [run(Method::Ours, s), run(Method::Finetune, s), run(Method::ScrMo, s)])
        .collect();
    let mean = |f: &dyn Fn(&[ossgcl::report::RunReport; 3]) -> f64| rows.iter().map(f).sum::<f64>() / reps as f64;
    let ours = mean(&|r| r[0].final_avg());
    let ft = mean(&|r| r[1].final_avg());
    let mo = mean(&|r| r[2].final_avg());
    let last = |r: &ossgcl::report::RunReport| r.accuracy.last().unwrap().to_vec();
    let ft_cur = mean(&|r| *last(&r[1]).last().unwrap());
    let ft_old = mean(&|r| {
        let a = last(&r[1]);
        a[..a.len() - 1].iter().sum::<f64>() / (a.len() - 1) as f64
    });
    let t = start.elapsed();
    check(
        ours > ft && ours >= mo - 0.02 && ft_cur > ft_old && within(Duration::from_secs(300), t),
        format!(
            "{reps} seed-paired reps: ours {ours:.3}, finetune {ft:.3}, scr-mo {mo:.3}; \
             finetune last task {ft_cur:.3} vs earlier {ft_old:.3}; {:.1} s",
            t.as_secs_f64()
        ),
    )
}

fn alpha_zero_vs_scr_mo() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut smallest = f64::INFINITY;
    let cases = 20;
    let mut usable = 0;
    while usable < cases {
        let (z, idx) = random_batch(&mut rng, 8, 8, 2, 0.5);
        if idx.labeled_sources() == 0 || idx.unlabeled_sources() == 0 {
            continue;
        }
        usable += 1;
        let c = LossConfig::new(0.1, 0.0).unwrap();
        let ours = semicon_value(&z, &idx, &c).unwrap();
        // Memory-only batch: the same labeled views without the stream views.
        let b = idx.sources();
        let keep: Vec<usize> = (0..b).filter(|&s| idx.is_labeled(s)).collect();
        let rows: Vec<Vec<f64>> = [0, 1]
            .iter()
            .flat_map(|h| keep.iter().map(move |&s| h * b + s))
            .map(|v| z.row(v).to_vec())
            .collect();
        let labels: Vec<usize> = [0, 1].iter().flat_map(|_| keep.iter().map(|&s| idx.label(s).unwrap())).collect();
        let tape = Tape::new();
        let mo = supcon(tape.leaf(Tensor::from_rows(&rows).unwrap()), &labels, &c).unwrap().value().item();
        smallest = smallest.min((ours - mo).abs());
    }
    check(
        smallest > 1e-6,
        format!("{cases} fixed mixed batches, smallest |semicon(alpha=0) - scr-mo| = {smallest:.3e}"),
    )
}

fn determinism() -> Outcome {
    let bench = make_synthetic(&SyntheticSpec::default(), 10, 3).unwrap();
    let mut identical = 0;
    for m in Method::ALL {
        let mut cfg = TrainConfig {
            seed: 3,
            mem_size: 50,
            mem_batch: 20,
            trace_loss: true,
            ..TrainConfig::new(m)
        };
        if m == Method::Offline {
            cfg.epochs = Some(2);
        }
        let a = train(&cfg, &bench).unwrap().report.to_jsonl();
        let b = train(&cfg, &bench).unwrap().report.to_jsonl();
        identical += (a == b) as usize;
    }
    check(
        identical == Method::ALL.len(),
        format!("{identical}/{} methods byte-identical across two runs", Method::ALL.len()),
    )
}

fn cifar_ingestion() -> Outcome {
    let labels = [3u8, 0, 9];
    let mut bytes = Vec::new();
    for (r, &y) in labels.iter().enumerate() {
        bytes.push(y);
        bytes.extend((0..PIXELS).map(|k| ((r * 13 + k) % 256) as u8));
    }
    let path = Path::new("fixture.bin");
    let exact = match parse_cifar(&bytes, CifarVariant::Cifar10, path) {
        Ok(ds) => {
            ds.labels == [3, 0, 9]
                && (0..3).all(|r| {
                    ds.features[r].len() == PIXELS
                        && (0..PIXELS).all(|k| ds.features[r][k] == ((r * 13 + k) % 256) as f64 / 255.0)
                })
        }
        Err(_) => false,
    };
    let offset = match parse_cifar(&bytes[..bytes.len() - 1], CifarVariant::Cifar10, path) {
        Err(Error::Data { offset, .. }) => Some(offset),
        _ => None,
    };
    check(
        exact && offset == Some(2 * 3073),
        format!("3-record fixture exact: {exact}; truncated fixture error offset {offset:?} (expected 6146)"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("loss-oracle equivalence", oracle_equivalence),
        ("reductions", reductions),
        ("gradient checks", gradients),
        ("label budget", label_budget),
        ("reservoir uniformity", uniformity),
        ("end-to-end ordering", end_to_end),
        ("alpha=0 differs from scr-mo", alpha_zero_vs_scr_mo),
        ("determinism", determinism),
        ("cifar ingestion", cifar_ingestion),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        failed += !o.pass as usize;
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
