//! Dense feed-forward networks with exact backpropagation and Adam, plus the
//! autoencoder embedding trained on flattened windows.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingVector;
use crate::error::{shape_mismatch, Error, Result};
use crate::preprocess::Window;
use crate::rng::{stable_hash, Xoshiro256StarStar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Linear,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden: HiddenActivation,
    pub output: OutputActivation,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config("a network needs at least two layer sizes".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Affine map `out = W in + b`, `W` stored as outputs x inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Dense>,
}

/// Per-layer inputs and pre-activations of a batch forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
    /// Gradient with respect to the network input, batch x inputs.
    pub input: Array2<f64>,
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

impl Network {
    /// He-style initialisation: weights `N(0, 2 / fan_in)`, zero biases.
    pub fn init(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = Xoshiro256StarStar::seed_from_u64(spec.seed);
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let std = (2.0 / fan_in as f64).sqrt();
                let mut layer = Dense::zeros(fan_in, fan_out);
                layer.weights.mapv_inplace(|_| std * rng.normal());
                layer
            })
            .collect();
        Ok(Network { spec, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.spec.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.spec.layer_sizes.last().expect("validated spec")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    fn activate_hidden(&self, z: &Array2<f64>) -> Array2<f64> {
        match self.spec.hidden {
            HiddenActivation::Relu => z.mapv(|v| v.max(0.0)),
            HiddenActivation::Tanh => z.mapv(f64::tanh),
        }
    }

    fn hidden_derivative(&self, z: &Array2<f64>) -> Array2<f64> {
        match self.spec.hidden {
            HiddenActivation::Relu => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            HiddenActivation::Tanh => z.mapv(|v| 1.0 - v.tanh().powi(2)),
        }
    }

    /// Forward pass over a batch, rows are samples.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        if x.ncols() != self.input_dim() {
            return Err(shape_mismatch("network input width", self.input_dim(), x.ncols()));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weights.t()) + &layer.bias;
            let next = if l < last {
                self.activate_hidden(&z)
            } else {
                match self.spec.output {
                    OutputActivation::Linear => z.clone(),
                    OutputActivation::Softmax => softmax_rows(&z),
                }
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: a,
        })
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<(Array1<f64>, ForwardCache)> {
        let cache = self.forward_batch(x.insert_axis(Axis(0)))?;
        let out = cache.output.row(0).to_owned();
        Ok((out, cache))
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_batch(x)?.output)
    }

    /// Gradients given `dL/d(output)` for each batch row.
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<f64>) -> Result<Gradients> {
        let expected = (cache.output.nrows(), self.output_dim());
        if output_grad.dim() != expected {
            return Err(Error::Shape(format!(
                "output gradient: expected {expected:?}, got {:?}",
                output_grad.dim()
            )));
        }
        let delta = match self.spec.output {
            OutputActivation::Linear => output_grad.to_owned(),
            OutputActivation::Softmax => {
                // Jacobian of softmax applied row-wise: s * (g - <g, s>)
                let s = &cache.output;
                let dots = (s * &output_grad).sum_axis(Axis(1)).insert_axis(Axis(1));
                s * &(&output_grad - &dots)
            }
        };
        Ok(self.backward_from_logits(cache, delta))
    }

    /// Gradients given `dL/d(last pre-activation)`; for softmax with
    /// cross-entropy this is `(p - onehot) / batch`.
    pub fn backward_from_logits(&self, cache: &ForwardCache, mut delta: Array2<f64>) -> Gradients {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            grads.push(Dense {
                weights: delta.t().dot(&cache.inputs[l]),
                bias: delta.sum_axis(Axis(0)),
            });
            let back = delta.dot(&layer.weights);
            delta = if l > 0 {
                back * self.hidden_derivative(&cache.pre[l - 1])
            } else {
                back
            };
        }
        grads.reverse();
        Gradients {
            layers: grads,
            input: delta,
        }
    }
}

pub const ADAM_STEP: f64 = 1e-3;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Adam {
    pub step_size: f64,
    t: i32,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    pub fn new(net: &Network) -> Self {
        let zeros: Vec<Dense> = net
            .layers
            .iter()
            .map(|l| Dense::zeros(l.weights.ncols(), l.weights.nrows()))
            .collect();
        Adam {
            step_size: ADAM_STEP,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &[Dense]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let lr = self.step_size;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        };
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            ndarray::Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

/// Mean squared error over every element, and its gradient.
pub fn mse(pred: &Array2<f64>, target: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let diff = pred - &target;
    let n = diff.len().max(1) as f64;
    let loss = diff.mapv(|v| v * v).sum() / n;
    (loss, diff * (2.0 / n))
}

pub const AE_HIDDEN: usize = 128;
pub const DEFAULT_AE_EPOCHS: usize = 100;
pub const DEFAULT_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub d: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    DEFAULT_AE_EPOCHS
}

fn default_batch() -> usize {
    DEFAULT_BATCH
}

impl AeConfig {
    pub fn new(d: usize, seed: u64) -> Self {
        AeConfig {
            d,
            epochs: DEFAULT_AE_EPOCHS,
            batch: DEFAULT_BATCH,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub encoder: Network,
    pub decoder: Network,
    pub d: usize,
    /// Full-batch training loss after each epoch.
    pub loss_log: Vec<f64>,
}

impl AutoencoderModel {
    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn reconstruct_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let h = self.encoder.predict_batch(x)?;
        self.decoder.predict_batch(h.view())
    }

    pub fn loss(&self, x: ArrayView2<f64>) -> Result<f64> {
        Ok(mse(&self.reconstruct_batch(x)?, x).0)
    }
}

/// Untrained autoencoder `input -> 128 -> d -> 128 -> input`.
pub fn ae_init(input_dim: usize, cfg: &AeConfig) -> Result<AutoencoderModel> {
    if cfg.d == 0 || cfg.d >= input_dim {
        return Err(Error::Config(format!(
            "autoencoder bottleneck must be in 1..{input_dim}, got {}",
            cfg.d
        )));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let encoder = Network::init(NetworkSpec {
        layer_sizes: vec![input_dim, AE_HIDDEN, cfg.d],
        hidden: HiddenActivation::Relu,
        output: OutputActivation::Linear,
        seed: stable_hash(cfg.seed, &["encoder"]),
    })?;
    let decoder = Network::init(NetworkSpec {
        layer_sizes: vec![cfg.d, AE_HIDDEN, input_dim],
        hidden: HiddenActivation::Relu,
        output: OutputActivation::Linear,
        seed: stable_hash(cfg.seed, &["decoder"]),
    })?;
    Ok(AutoencoderModel {
        encoder,
        decoder,
        d: cfg.d,
        loss_log: Vec::new(),
    })
}

/// Trains on the rows of `x` with mini-batch Adam; the batch order comes from
/// the seeded generator.
pub fn ae_train_matrix(x: ArrayView2<f64>, cfg: &AeConfig) -> Result<AutoencoderModel> {
    if x.nrows() == 0 {
        return Err(Error::Data("autoencoder needs at least one training window".into()));
    }
    let mut model = ae_init(x.ncols(), cfg)?;
    let mut enc_opt = Adam::new(&model.encoder);
    let mut dec_opt = Adam::new(&model.decoder);
    let mut rng = Xoshiro256StarStar::seed_from_u64(stable_hash(cfg.seed, &["batches"]));
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch) {
            let batch = x.select(Axis(0), chunk);
            let enc = model.encoder.forward_batch(batch.view())?;
            let dec = model.decoder.forward_batch(enc.output.view())?;
            let (_, grad) = mse(&dec.output, batch.view());
            let dec_grads = model.decoder.backward(&dec, grad.view())?;
            let enc_grads = model.encoder.backward(&enc, dec_grads.input.view())?;
            dec_opt.step(&mut model.decoder, &dec_grads.layers);
            enc_opt.step(&mut model.encoder, &enc_grads.layers);
        }
        let loss = model.loss(x)?;
        model.loss_log.push(loss);
    }
    Ok(model)
}

pub fn windows_matrix(windows: &[Window]) -> Result<Array2<f64>> {
    let first = windows
        .first()
        .ok_or_else(|| Error::Data("no windows to stack".into()))?;
    let dim = first.tau() * first.n_channels();
    let mut out = Array2::zeros((windows.len(), dim));
    for (mut row, w) in out.rows_mut().into_iter().zip(windows) {
        let flat = w.flatten();
        if flat.len() != dim {
            return Err(shape_mismatch("window size", dim, flat.len()));
        }
        row.assign(&ArrayView1::from(&flat));
    }
    Ok(out)
}

pub fn ae_train(train: &[Window], cfg: &AeConfig) -> Result<AutoencoderModel> {
    ae_train_matrix(windows_matrix(train)?.view(), cfg)
}

/// Encoder output for one window.
pub fn ae_embed(m: &AutoencoderModel, w: &Window) -> Result<EmbeddingVector> {
    let flat = w.flatten();
    Ok(m.encoder.forward(ArrayView1::from(&flat))?.0.to_vec())
}

const CHECKPOINT_FORMAT: &str = "tsembed-autoencoder";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerDump {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDump {
    spec: NetworkSpec,
    layers: Vec<LayerDump>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    d: usize,
    loss_log: Vec<f64>,
    encoder: NetworkDump,
    decoder: NetworkDump,
}

impl From<&Network> for NetworkDump {
    fn from(n: &Network) -> Self {
        NetworkDump {
            spec: n.spec.clone(),
            layers: n
                .layers
                .iter()
                .map(|l| LayerDump {
                    weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl NetworkDump {
    fn into_network(self) -> Result<Network> {
        self.spec.validate()?;
        if self.layers.len() != self.spec.layer_sizes.len() - 1 {
            return Err(shape_mismatch(
                "checkpoint layer count",
                self.spec.layer_sizes.len() - 1,
                self.layers.len(),
            ));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (dump, pair) in self.layers.into_iter().zip(self.spec.layer_sizes.windows(2)) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            if dump.bias.len() != fan_out || dump.weights.len() != fan_out {
                return Err(shape_mismatch("checkpoint layer outputs", fan_out, dump.bias.len()));
            }
            if let Some(bad) = dump.weights.iter().find(|r| r.len() != fan_in) {
                return Err(shape_mismatch("checkpoint layer inputs", fan_in, bad.len()));
            }
            let flat: Vec<f64> = dump.weights.into_iter().flatten().collect();
            layers.push(Dense {
                weights: Array2::from_shape_vec((fan_out, fan_in), flat)
                    .map_err(|e| Error::Shape(e.to_string()))?,
                bias: Array1::from(dump.bias),
            });
        }
        Ok(Network {
            spec: self.spec,
            layers,
        })
    }
}

/// JSON checkpoint with a `format`/`version` header; floats round-trip
/// exactly.
pub fn save_autoencoder(m: &AutoencoderModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        d: m.d,
        loss_log: m.loss_log.clone(),
        encoder: (&m.encoder).into(),
        decoder: (&m.decoder).into(),
    };
    let text = serde_json::to_string(&ck).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_autoencoder(path: impl AsRef<Path>) -> Result<AutoencoderModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        msg: e.to_string(),
    })?;
    if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
        return Err(Error::Schema(format!(
            "unsupported checkpoint {} v{}",
            ck.format, ck.version
        )));
    }
    let encoder = ck.encoder.into_network()?;
    let decoder = ck.decoder.into_network()?;
    if encoder.output_dim() != ck.d || decoder.input_dim() != ck.d {
        return Err(Error::Schema("checkpoint bottleneck does not match its layers".into()));
    }
    Ok(AutoencoderModel {
        encoder,
        decoder,
        d: ck.d,
        loss_log: ck.loss_log,
    })
}
