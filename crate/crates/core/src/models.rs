//! Encoder, projection head and classifier head.
//!
//! Modules hold plain [`Tensor`] parameters. A forward pass binds them onto a
//! [`Tape`] with [`Module::bind`] and then threads the resulting [`Var`]s
//! through `forward`, in the same order `params()` lists them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numeric::{ConvGeometry, PoolGeometry, Tape, Tensor, Var};
use crate::rng::{rng_for, Concern};

pub trait Module {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;
    fn param_names(&self) -> Vec<String>;

    /// Record every parameter as a leaf on `tape`.
    fn bind<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.params().into_iter().map(|p| tape.leaf(p.clone())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `[in, out]`
    pub weight: Tensor,
    /// `[1, out]`
    pub bias: Tensor,
}

impl Linear {
    /// Weights uniform in `±1/√fan_in`, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            weight: Tensor::new(vec![fan_in, fan_out], data).expect("fan sizes are positive"),
            bias: Tensor::zeros(&[1, fan_out]),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_in, fan_out]),
            bias: Tensor::zeros(&[1, fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[1]
    }

    fn apply<'t>(weight: Var<'t>, bias: Var<'t>, x: Var<'t>) -> Result<Var<'t>> {
        x.matmul(weight)?.add(bias)
    }
}

fn check_cols(op: &'static str, x: &Var<'_>, expected: usize) -> Result<()> {
    let shape = x.shape();
    if shape.len() != 2 || shape[1] != expected {
        return Err(shape_err(op, &[&shape, &[shape.first().copied().unwrap_or(0), expected]]));
    }
    Ok(())
}

/// Input layout an encoder expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncoderSpec {
    Mlp {
        input: usize,
        hidden: Vec<usize>,
        latent: usize,
    },
    /// Two 3×3 conv + ReLU + 2×2 average-pool stages and a dense layer.
    /// Inputs are channel-planar rows (`c, y, x`), as CIFAR stores them.
    Conv {
        height: usize,
        width: usize,
        channels: usize,
        conv_channels: [usize; 2],
        latent: usize,
    },
}

impl EncoderSpec {
    pub fn mlp(input: usize) -> Self {
        EncoderSpec::Mlp {
            input,
            hidden: vec![64],
            latent: 64,
        }
    }

    pub fn cifar() -> Self {
        EncoderSpec::Conv {
            height: 32,
            width: 32,
            channels: 3,
            conv_channels: [16, 32],
            latent: 160,
        }
    }

    pub fn latent(&self) -> usize {
        match self {
            EncoderSpec::Mlp { latent, .. } | EncoderSpec::Conv { latent, .. } => *latent,
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            EncoderSpec::Mlp { input, .. } => *input,
            EncoderSpec::Conv {
                height,
                width,
                channels,
                ..
            } => height * width * channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub encoder: EncoderSpec,
    pub proj_hidden: usize,
    pub proj_out: usize,
}

impl ArchSpec {
    pub fn new(encoder: EncoderSpec) -> Self {
        let latent = encoder.latent();
        Self {
            encoder,
            proj_hidden: latent,
            proj_out: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvNet {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub conv1: Linear,
    pub conv2: Linear,
    pub dense: Linear,
}

impl ConvNet {
    fn geometries(&self) -> (ConvGeometry, PoolGeometry, ConvGeometry, PoolGeometry) {
        let c1 = self.conv1.fan_out();
        let c2 = self.conv2.fan_out();
        let g1 = ConvGeometry {
            height: self.height,
            width: self.width,
            channels: self.channels,
            kernel: 3,
            pad: 1,
        };
        let p1 = PoolGeometry {
            height: self.height,
            width: self.width,
            channels: c1,
        };
        let g2 = ConvGeometry {
            height: self.height / 2,
            width: self.width / 2,
            channels: c1,
            kernel: 3,
            pad: 1,
        };
        let p2 = PoolGeometry {
            height: self.height / 2,
            width: self.width / 2,
            channels: c2,
        };
        (g1, p1, g2, p2)
    }

    /// Gather indices turning a planar `(c, y, x)` row into interleaved `(y, x, c)`.
    fn planar_to_interleaved(&self, n: usize) -> Vec<usize> {
        let (h, w, c) = (self.height, self.width, self.channels);
        let per = h * w * c;
        let mut idx = Vec::with_capacity(n * per);
        for s in 0..n {
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..c {
                        idx.push(s * per + (ch * h + y) * w + x);
                    }
                }
            }
        }
        idx
    }
}

/// `Enc_θ`: maps inputs to latent representations `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Encoder {
    Mlp(Mlp),
    Conv(ConvNet),
}

impl Encoder {
    pub fn init(spec: &EncoderSpec, rng: &mut impl Rng) -> Result<Self> {
        match spec {
            EncoderSpec::Mlp {
                input,
                hidden,
                latent,
            } => {
                let mut dims = vec![*input];
                dims.extend(hidden);
                dims.push(*latent);
                if dims.contains(&0) {
                    return Err(Error::Config(format!("encoder sizes must be positive: {dims:?}")));
                }
                let layers = dims.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect();
                Ok(Encoder::Mlp(Mlp { layers }))
            }
            EncoderSpec::Conv {
                height,
                width,
                channels,
                conv_channels: [c1, c2],
                latent,
            } => {
                if height % 4 != 0 || width % 4 != 0 {
                    return Err(Error::Config(format!(
                        "conv encoder needs sides divisible by 4, got {height}x{width}"
                    )));
                }
                let flat = (height / 4) * (width / 4) * c2;
                Ok(Encoder::Conv(ConvNet {
                    height: *height,
                    width: *width,
                    channels: *channels,
                    conv1: Linear::init(9 * channels, *c1, rng),
                    conv2: Linear::init(9 * c1, *c2, rng),
                    dense: Linear::init(flat, *latent, rng),
                }))
            }
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            Encoder::Mlp(m) => m.layers[0].fan_in(),
            Encoder::Conv(c) => c.height * c.width * c.channels,
        }
    }

    pub fn latent(&self) -> usize {
        match self {
            Encoder::Mlp(m) => m.layers.last().map_or(0, Linear::fan_out),
            Encoder::Conv(c) => c.dense.fan_out(),
        }
    }

    /// `h = Enc(x)` for a batch `[n, input_len]`.
    pub fn forward<'t>(&self, params: &[Var<'t>], x: Var<'t>) -> Result<Var<'t>> {
        check_cols("encode", &x, self.input_len())?;
        match self {
            Encoder::Mlp(m) => {
                let mut h = x;
                let last = m.layers.len() - 1;
                for (i, pair) in params.chunks(2).enumerate() {
                    h = Linear::apply(pair[0], pair[1], h)?;
                    if i < last {
                        h = h.relu()?;
                    }
                }
                Ok(h)
            }
            Encoder::Conv(c) => {
                let n = x.shape()[0];
                let (g1, p1, g2, p2) = c.geometries();
                let hwc = x.gather(c.planar_to_interleaved(n), vec![n, g1.input_len()])?;
                let a1 = Linear::apply(params[0], params[1], hwc.im2col(g1)?)?.relu()?;
                let a1 = a1.avg_pool2(p1)?.reshape(vec![n, g2.input_len()])?;
                let a2 = Linear::apply(params[2], params[3], a1.im2col(g2)?)?.relu()?;
                let flat = (p2.height / 2) * (p2.width / 2) * p2.channels;
                let a2 = a2.avg_pool2(p2)?.reshape(vec![n, flat])?;
                Linear::apply(params[4], params[5], a2)
            }
        }
    }

    /// Forward pass on plain tensors, for evaluation.
    pub fn encode(&self, batch: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let params = self.bind(&tape);
        let x = tape.leaf(batch.clone());
        Ok(self.forward(&params, x)?.value().as_ref().clone())
    }
}

fn linear_params<'a>(layers: &[&'a Linear]) -> Vec<&'a Tensor> {
    layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
}

fn linear_params_mut<'a>(layers: impl IntoIterator<Item = &'a mut Linear>) -> Vec<&'a mut Tensor> {
    layers
        .into_iter()
        .flat_map(|l| [&mut l.weight, &mut l.bias])
        .collect()
}

fn linear_names(prefix: &str, labels: &[String]) -> Vec<String> {
    labels
        .iter()
        .flat_map(|l| [format!("{prefix}.{l}.weight"), format!("{prefix}.{l}.bias")])
        .collect()
}

impl Module for Encoder {
    fn params(&self) -> Vec<&Tensor> {
        match self {
            Encoder::Mlp(m) => linear_params(&m.layers.iter().collect::<Vec<_>>()),
            Encoder::Conv(c) => linear_params(&[&c.conv1, &c.conv2, &c.dense]),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Encoder::Mlp(m) => linear_params_mut(m.layers.iter_mut()),
            Encoder::Conv(c) => linear_params_mut([&mut c.conv1, &mut c.conv2, &mut c.dense]),
        }
    }

    fn param_names(&self) -> Vec<String> {
        match self {
            Encoder::Mlp(m) => linear_names(
                "encoder",
                &(0..m.layers.len()).map(|i| i.to_string()).collect::<Vec<_>>(),
            ),
            Encoder::Conv(_) => linear_names("encoder", &["conv1".into(), "conv2".into(), "dense".into()]),
        }
    }
}

/// `Proj_φ`: one hidden layer with ReLU, then row-wise L2 normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    pub hidden: Linear,
    pub out: Linear,
}

impl ProjectionHead {
    pub fn init(latent: usize, hidden: usize, out: usize, rng: &mut impl Rng) -> Self {
        Self {
            hidden: Linear::init(latent, hidden, rng),
            out: Linear::init(hidden, out, rng),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out.fan_out()
    }

    /// `z = normalize(Proj(h))`.
    pub fn forward<'t>(&self, params: &[Var<'t>], h: Var<'t>) -> Result<Var<'t>> {
        check_cols("project", &h, self.hidden.fan_in())?;
        let a = Linear::apply(params[0], params[1], h)?.relu()?;
        Linear::apply(params[2], params[3], a)?.l2_normalize_rows()
    }

    pub fn project(&self, h: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let params = self.bind(&tape);
        let x = tape.leaf(h.clone());
        Ok(self.forward(&params, x)?.value().as_ref().clone())
    }
}

impl Module for ProjectionHead {
    fn params(&self) -> Vec<&Tensor> {
        linear_params(&[&self.hidden, &self.out])
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        linear_params_mut([&mut self.hidden, &mut self.out])
    }

    fn param_names(&self) -> Vec<String> {
        linear_names("projection", &["hidden".into(), "out".into()])
    }
}

/// Linear softmax head over encoder latents (used by the cross-entropy baselines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    pub linear: Linear,
}

impl ClassifierHead {
    pub fn init(latent: usize, classes: usize, rng: &mut impl Rng) -> Self {
        Self {
            linear: Linear::init(latent, classes, rng),
        }
    }

    pub fn classes(&self) -> usize {
        self.linear.fan_out()
    }

    pub fn forward<'t>(&self, params: &[Var<'t>], h: Var<'t>) -> Result<Var<'t>> {
        check_cols("classify", &h, self.linear.fan_in())?;
        Linear::apply(params[0], params[1], h)
    }

    /// Arg-max class per row, ties to the lowest id.
    pub fn predict(&self, h: &Tensor) -> Result<Vec<usize>> {
        let tape = Tape::new();
        let params = self.bind(&tape);
        let logits = self.forward(&params, tape.leaf(h.clone()))?.value();
        Ok((0..logits.rows())
            .map(|i| {
                logits.row(i).iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (j, &v)| {
                    if v > bv {
                        (j, v)
                    } else {
                        (bi, bv)
                    }
                })
                .0
            })
            .collect())
    }
}

impl Module for ClassifierHead {
    fn params(&self) -> Vec<&Tensor> {
        linear_params(&[&self.linear])
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        linear_params_mut([&mut self.linear])
    }

    fn param_names(&self) -> Vec<String> {
        linear_names("classifier", &["linear".into()])
    }
}

/// Deterministic initialization of encoder and projection head from `seed`.
pub fn init_params(seed: u64, spec: &ArchSpec) -> Result<(Encoder, ProjectionHead)> {
    let mut rng: ChaCha8Rng = rng_for(seed, Concern::Init);
    let encoder = Encoder::init(&spec.encoder, &mut rng)?;
    if spec.proj_hidden == 0 || spec.proj_out == 0 {
        return Err(Error::Config("projection sizes must be positive".into()));
    }
    let head = ProjectionHead::init(encoder.latent(), spec.proj_hidden, spec.proj_out, &mut rng);
    Ok((encoder, head))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn spec() -> ArchSpec {
        ArchSpec::new(EncoderSpec::Mlp {
            input: 5,
            hidden: vec![7],
            latent: 6,
        })
    }

    fn input(n: usize, d: usize) -> Tensor {
        let data = (0..n * d).map(|k| ((k * 37 % 11) as f64 - 5.0) / 3.0).collect();
        Tensor::matrix(n, d, data).unwrap()
    }

    #[test]
    fn same_seed_same_params() {
        assert_eq!(init_params(3, &spec()).unwrap(), init_params(3, &spec()).unwrap());
        assert_ne!(init_params(3, &spec()).unwrap(), init_params(4, &spec()).unwrap());
    }

    #[test]
    fn weights_respect_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = Linear::init(100, 50, &mut rng);
        assert!(l.weight.data().iter().all(|w| w.abs() <= 0.1));
        assert!(l.bias.data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_encoder_gives_zero_latent() {
        let enc = Encoder::Mlp(Mlp {
            layers: vec![Linear::zeros(5, 7), Linear::zeros(7, 6)],
        });
        let h = enc.encode(&input(3, 5)).unwrap();
        assert_eq!(h, Tensor::zeros(&[3, 6]));

        let head = ProjectionHead {
            hidden: Linear::zeros(6, 4),
            out: Linear::zeros(4, 3),
        };
        assert_eq!(head.project(&h).unwrap(), Tensor::zeros(&[3, 3]));
    }

    #[test]
    fn output_shapes() {
        let (enc, head) = init_params(1, &spec()).unwrap();
        let h = enc.encode(&input(4, 5)).unwrap();
        assert_eq!(h.shape(), &[4, 6]);
        let z = head.project(&h).unwrap();
        assert_eq!(z.shape(), &[4, 128]);
        for i in 0..4 {
            let norm: f64 = z.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_forward() {
        let (enc, _) = init_params(9, &spec()).unwrap();
        let x = input(3, 5);
        let a = enc.encode(&x).unwrap();
        let b = enc.encode(&x).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn wrong_input_width() {
        let (enc, head) = init_params(1, &spec()).unwrap();
        assert!(enc.encode(&input(2, 4)).is_err());
        assert!(head.project(&input(2, 5)).is_err());
    }

    #[test]
    fn conv_encoder_shapes() {
        let spec = ArchSpec::new(EncoderSpec::Conv {
            height: 8,
            width: 8,
            channels: 3,
            conv_channels: [4, 5],
            latent: 10,
        });
        let (enc, head) = init_params(2, &spec).unwrap();
        assert_eq!(enc.param_names().len(), enc.params().len());
        let h = enc.encode(&input(2, 192)).unwrap();
        assert_eq!(h.shape(), &[2, 10]);
        assert_eq!(head.project(&h).unwrap().shape(), &[2, 128]);
    }

    #[test]
    fn planar_permutation_is_bijective() {
        let net = ConvNet {
            height: 2,
            width: 3,
            channels: 2,
            conv1: Linear::zeros(18, 1),
            conv2: Linear::zeros(9, 1),
            dense: Linear::zeros(1, 1),
        };
        let mut idx = net.planar_to_interleaved(2);
        assert_eq!(idx[..2], [0, 6]);
        idx.sort_unstable();
        assert_eq!(idx, (0..24).collect::<Vec<_>>());
    }
}
