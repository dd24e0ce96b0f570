use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ossgcl::eval::{evaluate, fit_ncm, ClassMeans};
use ossgcl::memory::{MemoryBuffer, Oracle, Sample, SourceId};
use ossgcl::models::{Encoder, Linear, Mlp};
use ossgcl::numeric::Tensor;
use ossgcl::stream::TestSet;

fn identity(d: usize) -> Encoder {
    let mut w = Tensor::zeros(&[d, d]);
    for i in 0..d {
        w.data_mut()[i * d + i] = 1.0;
    }
    Encoder::Mlp(Mlp {
        layers: vec![Linear {
            weight: w,
            bias: Tensor::zeros(&[1, d]),
        }],
    })
}

/// A random orthogonal matrix via Gram-Schmidt on Gaussian columns.
fn rotation(d: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for c in &cols {
            let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut data = vec![0.0; d * d];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            data[i * d + j] = c[i];
        }
    }
    Tensor::matrix(d, d, data).unwrap()
}

fn clusters(rng: &mut ChaCha8Rng, per: usize, classes: usize, d: usize, noise: f64) -> (Tensor, Vec<usize>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        for _ in 0..per {
            let mut r: Vec<f64> = (0..d).map(|_| noise * rng.sample::<f64, _>(StandardNormal)).collect();
            r[c % d] += 3.0;
            rows.push(r);
            labels.push(c);
        }
    }
    (Tensor::from_rows(&rows).unwrap(), labels)
}

#[test]
fn ncm_is_rotation_and_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let d = rng.random_range(2..8);
        let (train, ty) = clusters(&mut rng, 15, d.min(3), d, 1.5);
        let (test, _) = clusters(&mut rng, 20, d.min(3), d, 1.5);
        let q = rotation(d, &mut rng);
        let base = ClassMeans::from_latents(&train, &ty).unwrap().classify_latents(&test);
        let rot = ClassMeans::from_latents(&train.matmul(&q).unwrap(), &ty)
            .unwrap()
            .classify_latents(&test.matmul(&q).unwrap());
        assert_eq!(base, rot);
        let scaled = test.map(|x| 7.5 * x);
        assert_eq!(ClassMeans::from_latents(&train, &ty).unwrap().classify_latents(&scaled), base);
    }
}

#[test]
fn ties_resolve_to_lowest_class() {
    let latents = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let means = ClassMeans::from_latents(&latents, &[4, 2]).unwrap();
    assert_eq!(means.classes(), &[2, 4]);
    assert_eq!(means.classify_latent(&[1.0, 1.0]), 2);
}

struct Table(Vec<usize>);
impl Oracle for Table {
    fn label(&self, id: SourceId) -> usize {
        self.0[id as usize]
    }
}

#[test]
fn evaluate_reports_accuracy_and_missing_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (train, ty) = clusters(&mut rng, 10, 3, 4, 0.3);
    let oracle = Table(ty.clone());
    let mut mem = MemoryBuffer::new(100).unwrap();
    // Only classes 0 and 1 reach memory.
    for i in 0..20 {
        let s = Sample {
            id: i as u64,
            features: Arc::from(train.row(i).to_vec()),
        };
        mem.reservoir_update(s, &oracle, &mut rng);
    }
    let enc = identity(4);
    assert_eq!(fit_ncm(&enc, &mem).unwrap().classes(), &[0, 1]);
    let (test, y) = clusters(&mut rng, 10, 3, 4, 0.3);
    let set = |c: std::ops::Range<usize>| TestSet {
        features: c.clone().map(|i| Arc::from(test.row(i).to_vec())).collect(),
        labels: c.map(|i| y[i]).collect(),
        dim: 4,
    };
    let row = evaluate(&enc, &mem, &[set(0..20), set(20..30)]).unwrap();
    assert_eq!(row.accuracies, vec![1.0, 0.0]);
    assert_eq!(row.missing_classes, vec![2]);
    assert!(fit_ncm(&enc, &MemoryBuffer::new(3).unwrap()).is_err());
}
