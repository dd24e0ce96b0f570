#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ossgcl::losses::{build_masks, semicon, AlphaTarget, LossConfig, MultiviewIndex, Reduction};
use ossgcl::models::{ArchSpec, EncoderSpec, Module};
use ossgcl::numeric::{finite_diff_check, Tensor};

/// A random multiview batch: `b` sources, unit-norm rows of width `dz`.
/// Each source is labeled with probability `p_labeled`.
pub fn random_batch(rng: &mut ChaCha8Rng, b: usize, dz: usize, classes: usize, p_labeled: f64) -> (Tensor, MultiviewIndex) {
    let sources: Vec<Option<usize>> = (0..b)
        .map(|_| rng.random_bool(p_labeled).then(|| rng.random_range(0..classes)))
        .collect();
    let data: Vec<f64> = (0..2 * b * dz).map(|_| rng.sample(StandardNormal)).collect();
    let z = Tensor::matrix(2 * b, dz, data).unwrap().l2_normalize_rows();
    (z, MultiviewIndex::from_sources(&sources))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log Σ_{a≠i} exp(z_i·z_a/τ)` by direct summation with a max shift.
fn log_denom(z: &Tensor, i: usize, tau: f64) -> f64 {
    let n = z.rows();
    let s: Vec<f64> = (0..n).filter(|&a| a != i).map(|a| dot(z.row(i), z.row(a)) / tau).collect();
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + s.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Supervised term written as nested loops over anchors and positives.
pub fn scalar_loss_mem(z: &Tensor, idx: &MultiviewIndex, tau: f64) -> f64 {
    let n = z.rows();
    let mut total = 0.0;
    for i in 0..n {
        let Some(yi) = idx.label(i) else { continue };
        let pos: Vec<usize> = (0..n).filter(|&p| p != i && idx.label(p) == Some(yi)).collect();
        let ld = log_denom(z, i, tau);
        let mut acc = 0.0;
        for &p in &pos {
            acc += dot(z.row(i), z.row(p)) / tau - ld;
        }
        total += -acc / pos.len() as f64;
    }
    total
}

pub fn scalar_loss_unlab(z: &Tensor, idx: &MultiviewIndex, tau: f64) -> f64 {
    let n = z.rows();
    let b = n / 2;
    let mut total = 0.0;
    for i in 0..n {
        if idx.is_labeled(i) {
            continue;
        }
        let j = (i + b) % n;
        total += -(dot(z.row(i), z.row(j)) / tau - log_denom(z, i, tau));
    }
    total
}

pub fn scalar_semicon(z: &Tensor, idx: &MultiviewIndex, cfg: &LossConfig) -> f64 {
    let lm = scalar_loss_mem(z, idx, cfg.tau);
    let lu = scalar_loss_unlab(z, idx, cfg.tau);
    let total = match cfg.galpha_on {
        AlphaTarget::Unlabeled => lm + cfg.alpha * lu,
        AlphaTarget::Labeled => cfg.alpha * lm + lu,
    };
    match cfg.reduction {
        Reduction::Sum => total,
        Reduction::Mean => total / z.rows() as f64,
    }
}

/// Independent SupCon on a fully labeled batch.
pub fn scalar_supcon(z: &Tensor, labels: &[usize], tau: f64) -> f64 {
    let n = z.rows();
    let mut total = 0.0;
    for i in 0..n {
        let pos: Vec<usize> = (0..n).filter(|&p| p != i && labels[p] == labels[i]).collect();
        let ld = log_denom(z, i, tau);
        let mean_log_prob: f64 = pos.iter().map(|&p| dot(z.row(i), z.row(p)) / tau - ld).sum::<f64>() / pos.len() as f64;
        total -= mean_log_prob;
    }
    total
}

/// NT-Xent style: every view's only positive is its pair.
pub fn scalar_pair_contrastive(z: &Tensor, tau: f64) -> f64 {
    let n = z.rows();
    (0..n)
        .map(|i| -(dot(z.row(i), z.row((i + n / 2) % n)) / tau - log_denom(z, i, tau)))
        .sum()
}

/// `|a - b| / max(1, |b|)`: relative above 1, absolute below.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Mean cross-entropy over rows, by direct loops.
pub fn scalar_cross_entropy(logits: &Tensor, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let r = logits.row(i);
        let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + r.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        total += lse - r[y];
    }
    total / labels.len() as f64
}

/// SemiCon through a projection head and a 2-layer encoder, differentiated
/// with respect to inputs, encoder and projection parameters together.
pub fn semicon_model_check(seed: u64, step: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = rng.random_range(2..5);
    let d = rng.random_range(3..7);
    let spec = ArchSpec {
        encoder: EncoderSpec::Mlp {
            input: d,
            hidden: vec![rng.random_range(3..7)],
            latent: rng.random_range(3..6),
        },
        proj_hidden: 5,
        proj_out: 4,
    };
    let (enc, proj) = ossgcl::models::init_params(seed, &spec).unwrap();
    let sources: Vec<Option<usize>> = (0..b).map(|_| rng.random_bool(0.5).then(|| rng.random_range(0..2))).collect();
    let idx = MultiviewIndex::from_sources(&sources);
    let mask = build_masks(&idx).unwrap();
    let x = Tensor::matrix(2 * b, d, (0..2 * b * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let cfg = LossConfig::new(0.5, rng.random_range(0.0..2.0)).unwrap();

    // Zero-initialized biases can leave a sample with no active hidden unit,
    // whose projection is then the zero vector where normalization has a
    // kink. Random biases keep the check away from that set.
    let (mut enc, mut proj) = (enc, proj);
    for t in enc.params_mut().into_iter().chain(proj.params_mut()) {
        if t.rows() == 1 {
            for v in t.data_mut() {
                *v = rng.random_range(0.05..0.3);
            }
        }
    }
    let n_enc = enc.params().len();
    let mut params = vec![x];
    params.extend(enc.params().into_iter().cloned());
    params.extend(proj.params().into_iter().cloned());
    let (enc_ref, proj_ref) = (&enc, &proj);
    finite_diff_check(
        move |_tape: &ossgcl::numeric::Tape, p| {
            let h = enc_ref.forward(&p[1..1 + n_enc], p[0])?;
            let z = proj_ref.forward(&p[1 + n_enc..], h)?;
            semicon(z, &idx, &mask, &cfg)
        },
        &params,
        step,
    )
    .unwrap()
}
