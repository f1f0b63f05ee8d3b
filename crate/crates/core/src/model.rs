//! The MambaPupil network: a per-frame convolutional encoder, a dual
//! recurrent module (bidirectional GRU followed by a linear-time-varying
//! selective state-space layer with a residual path), and a linear head
//! emitting normalized pupil coordinates per timestep.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use mambapupil_autograd::checkpoint::{self, CheckpointEntry, CheckpointError};
use mambapupil_autograd::ops;
use mambapupil_autograd::ops::RunningStats;
use mambapupil_autograd::{Scalar, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;
pub const RMSNORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub conv_channels: [usize; 3],
    pub conv_kernels: [usize; 3],
    /// GRU hidden size per direction.
    pub gru_hidden: usize,
    pub ssm_state_dim: usize,
    pub dropout: f64,
    /// Input grid extent as (H, W).
    pub resolution: (usize, usize),
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 2,
            conv_channels: [32, 128, 512],
            conv_kernels: [7, 5, 5],
            gru_hidden: 128,
            ssm_state_dim: 16,
            dropout: 0.25,
            resolution: (60, 80),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.in_channels == 0 {
            return Err("model.in_channels must be positive".into());
        }
        for k in self.conv_kernels {
            if k % 2 == 0 || k == 0 {
                return Err(format!("model.conv_kernels must be odd, got {k}"));
            }
        }
        for c in self.conv_channels {
            if c == 0 {
                return Err("model.conv_channels must be positive".into());
            }
        }
        if self.gru_hidden < 1 {
            return Err("model.gru_hidden must be at least 1".into());
        }
        if self.ssm_state_dim < 1 {
            return Err("model.ssm_state_dim must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("model.dropout must lie in [0,1), got {}", self.dropout));
        }
        let (h, w) = self.resolution;
        if h < 8 || w < 8 {
            return Err(format!(
                "model.resolution {h}x{w} too small for three 2x2 poolings"
            ));
        }
        Ok(())
    }
}

/// Ablation variants of the dual recurrent module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Bi-GRU + LTV-SSM (the published architecture).
    Full,
    /// Unidirectional GRU + LTV-SSM.
    UniGru,
    /// Bi-GRU only; the state-space layer is the identity.
    NoSsm,
    /// Unidirectional GRU only.
    UniGruNoSsm,
}

impl Variant {
    pub fn bidirectional(self) -> bool {
        matches!(self, Variant::Full | Variant::NoSsm)
    }

    pub fn has_ssm(self) -> bool {
        matches!(self, Variant::Full | Variant::UniGru)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::UniGru => "uni_gru",
            Variant::NoSsm => "no_ssm",
            Variant::UniGruNoSsm => "uni_gru_no_ssm",
        }
    }

    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::UniGru,
        Variant::NoSsm,
        Variant::UniGruNoSsm,
    ];
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Variant::Full),
            "uni_gru" => Ok(Variant::UniGru),
            "no_ssm" => Ok(Variant::NoSsm),
            "uni_gru_no_ssm" => Ok(Variant::UniGruNoSsm),
            other => Err(format!(
                "unknown variant {other:?} (expected full, uni_gru, no_ssm, or uni_gru_no_ssm)"
            )),
        }
    }
}

/// Conv -> BatchNorm -> ReLU -> 2x2 max-pool.
pub struct ConvBlock<S: Scalar> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub stats: RunningStats<S>,
    pub kernel: usize,
}

/// One GRU direction: update/reset/candidate maps over concatenated [h, x].
pub struct GruDir<S: Scalar> {
    pub wz: Tensor<S>,
    pub wr: Tensor<S>,
    pub wh: Tensor<S>,
    pub bz: Tensor<S>,
    pub br: Tensor<S>,
    pub bh: Tensor<S>,
    pub hidden: usize,
}

/// Selective state-space layer parameters. `a` is the (D, N) table of
/// per-channel diagonal state-matrix entries; `delta_w/b`, `b_w/b`, `c_w/b`
/// construct the input-dependent Δ, B, C; `d` is the skip vector; `gain`
/// the RMSNorm scale. `delta_override` pins Δ to a constant (a test hook
/// for the exp(0)=1 and geometric-decay identities); it is never saved.
pub struct SsmParams<S: Scalar> {
    pub gain: Tensor<S>,
    pub delta_w: Tensor<S>,
    pub delta_b: Tensor<S>,
    pub b_w: Tensor<S>,
    pub b_b: Tensor<S>,
    pub c_w: Tensor<S>,
    pub c_b: Tensor<S>,
    pub a: Tensor<S>,
    pub d: Tensor<S>,
    pub state_dim: usize,
    pub delta_override: Option<f64>,
}

pub struct Model<S: Scalar> {
    pub config: ModelConfig,
    pub variant: Variant,
    pub blocks: Vec<ConvBlock<S>>,
    pub gru_fwd: GruDir<S>,
    pub gru_bwd: Option<GruDir<S>>,
    pub ssm: Option<SsmParams<S>>,
    pub head_w: Tensor<S>,
    pub head_b: Tensor<S>,
}

fn uniform_param<S: Scalar, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| S::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::param(shape, data)
}

fn zeros_param<S: Scalar>(shape: &[usize]) -> Tensor<S> {
    Tensor::param(shape, vec![S::zero(); shape.iter().product()])
}

fn ones_param<S: Scalar>(shape: &[usize]) -> Tensor<S> {
    Tensor::param(shape, vec![S::one(); shape.iter().product()])
}

fn gru_dir<S: Scalar, R: Rng>(rng: &mut R, input: usize, hidden: usize) -> GruDir<S> {
    let cat = hidden + input;
    GruDir {
        wz: uniform_param(rng, &[hidden, cat], cat),
        wr: uniform_param(rng, &[hidden, cat], cat),
        wh: uniform_param(rng, &[hidden, cat], cat),
        bz: zeros_param(&[hidden]),
        br: zeros_param(&[hidden]),
        bh: zeros_param(&[hidden]),
        hidden,
    }
}

impl<S: Scalar> Model<S> {
    /// Builds a freshly initialized model; all randomness comes from `rng`
    /// so equal seeds give bit-identical parameters.
    pub fn new(config: &ModelConfig, variant: Variant, rng: &mut ChaCha8Rng) -> Self {
        config.validate().expect("invalid model config");
        let mut blocks = Vec::with_capacity(3);
        let mut c_in = config.in_channels;
        for i in 0..3 {
            let c_out = config.conv_channels[i];
            let k = config.conv_kernels[i];
            blocks.push(ConvBlock {
                weight: uniform_param(rng, &[c_out, c_in, k, k], c_in * k * k),
                bias: zeros_param(&[c_out]),
                gamma: ones_param(&[c_out]),
                beta: zeros_param(&[c_out]),
                stats: RunningStats::new(c_out),
                kernel: k,
            });
            c_in = c_out;
        }
        let feat = config.conv_channels[2];
        let hidden = config.gru_hidden;
        let gru_fwd = gru_dir(rng, feat, hidden);
        let gru_bwd = variant.bidirectional().then(|| gru_dir(rng, feat, hidden));
        let d = if variant.bidirectional() { 2 * hidden } else { hidden };
        let n = config.ssm_state_dim;
        let ssm = variant.has_ssm().then(|| SsmParams {
            gain: ones_param(&[d]),
            delta_w: uniform_param(rng, &[d, d], d),
            delta_b: zeros_param(&[d]),
            b_w: uniform_param(rng, &[n, d], d),
            b_b: zeros_param(&[n]),
            c_w: uniform_param(rng, &[n, d], d),
            c_b: zeros_param(&[n]),
            // Row d holds -(1..=N): strictly negative, spread timescales.
            a: Tensor::param(
                &[d, n],
                (0..d * n)
                    .map(|i| S::from_f64(-((i % n + 1) as f64)))
                    .collect(),
            ),
            d: ones_param(&[d]),
            state_dim: n,
            delta_override: None,
        });
        let head_w = uniform_param(rng, &[2, d], d);
        let head_b = zeros_param(&[2]);
        Model {
            config: config.clone(),
            variant,
            blocks,
            gru_fwd,
            gru_bwd,
            ssm,
            head_w,
            head_b,
        }
    }

    /// Feature dimension entering the state-space layer and the head.
    pub fn recurrent_dim(&self) -> usize {
        if self.variant.bidirectional() {
            2 * self.config.gru_hidden
        } else {
            self.config.gru_hidden
        }
    }

    /// Per-frame conv encoder over a (B,T,C,H,W) representation batch:
    /// three conv/BN/ReLU/pool blocks, global average pooling, and (train
    /// mode only) channel-wise dropout shared across time. Returns (B,T,F).
    pub fn extract_features(
        &mut self,
        rep: &Tensor<S>,
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Tensor<S> {
        let shape = rep.shape().to_vec();
        assert_eq!(shape.len(), 5, "representation batch must be (B,T,C,H,W)");
        let (b, t, c, h, w) = (shape[0], shape[1], shape[2], shape[3], shape[4]);
        assert_eq!(c, self.config.in_channels, "representation channel count");
        assert_eq!((h, w), self.config.resolution, "representation extent");
        let mut x = ops::reshape(rep, vec![b * t, c, h, w]);
        for block in &mut self.blocks {
            let conv = ops::conv2d(&x, &block.weight, &block.bias, 1, block.kernel / 2);
            let bn = ops::batchnorm2d(
                &conv,
                &block.gamma,
                &block.beta,
                &mut block.stats,
                training,
                BN_MOMENTUM,
                BN_EPS,
            );
            x = ops::maxpool2d(&ops::relu(&bn), 2, 2);
        }
        let pooled = ops::global_avg_pool(&x);
        let feat = ops::reshape(&pooled, vec![b, t, self.config.conv_channels[2]]);
        ops::spatial_dropout(&feat, self.config.dropout, training, rng)
    }

    /// GRU output over (B,T,F): bidirectional concatenation [h_fwd ‖ h_bwd]
    /// when the variant keeps both directions, forward states alone otherwise.
    pub fn gru_forward(&self, features: &Tensor<S>) -> Tensor<S> {
        let t = features.shape()[1];
        let b = features.shape()[0];
        let xs: Vec<Tensor<S>> = (0..t).map(|i| ops::select_time(features, i)).collect();
        let fwd = run_gru_direction(&self.gru_fwd, b, xs.iter());
        match &self.gru_bwd {
            Some(bwd_params) => {
                let mut bwd = run_gru_direction(bwd_params, b, xs.iter().rev());
                bwd.reverse();
                let steps: Vec<Tensor<S>> = fwd
                    .iter()
                    .zip(bwd.iter())
                    .map(|(f, bk)| ops::concat_last(f, bk))
                    .collect();
                ops::stack_time(&steps)
            }
            None => ops::stack_time(&fwd),
        }
    }

    /// Selective scan over (B,T,D) (identity when the variant drops it).
    pub fn ssm_forward(&self, h_seq: &Tensor<S>) -> Tensor<S> {
        match &self.ssm {
            Some(p) => ltv_ssm_forward(h_seq, p),
            None => h_seq.clone(),
        }
    }

    /// Full pass: features -> GRU -> state-space -> linear head, (B,T,2).
    pub fn forward(&mut self, rep: &Tensor<S>, training: bool, rng: &mut ChaCha8Rng) -> Tensor<S> {
        let features = self.extract_features(rep, training, rng);
        let rec = self.ssm_forward(&self.gru_forward(&features));
        let (b, t) = (rec.shape()[0], rec.shape()[1]);
        let flat = ops::reshape(&rec, vec![b * t, self.recurrent_dim()]);
        let out = ops::linear(&flat, &self.head_w, &self.head_b);
        ops::reshape(&out, vec![b, t, 2])
    }

    /// Eval-mode forward with no dropout and frozen batch-norm statistics.
    pub fn predict(&mut self, rep: &Tensor<S>) -> Tensor<S> {
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        self.forward(rep, false, &mut rng)
    }

    /// All trainable parameters in a stable order (optimizer slot keys and
    /// checkpoint layout both rely on it).
    pub fn trainable(&self) -> Vec<Tensor<S>> {
        let mut params = Vec::new();
        for b in &self.blocks {
            params.extend([
                b.weight.clone(),
                b.bias.clone(),
                b.gamma.clone(),
                b.beta.clone(),
            ]);
        }
        let mut push_gru = |g: &GruDir<S>| {
            params.extend([
                g.wz.clone(),
                g.wr.clone(),
                g.wh.clone(),
                g.bz.clone(),
                g.br.clone(),
                g.bh.clone(),
            ]);
        };
        push_gru(&self.gru_fwd);
        if let Some(g) = &self.gru_bwd {
            push_gru(g);
        }
        if let Some(p) = &self.ssm {
            params.extend([
                p.gain.clone(),
                p.delta_w.clone(),
                p.delta_b.clone(),
                p.b_w.clone(),
                p.b_b.clone(),
                p.c_w.clone(),
                p.c_b.clone(),
                p.a.clone(),
                p.d.clone(),
            ]);
        }
        params.extend([self.head_w.clone(), self.head_b.clone()]);
        params
    }

    pub fn num_params(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }

    /// Named tensors for serialization: every trainable parameter plus the
    /// batch-norm running statistics.
    pub fn state_entries(&self) -> Vec<(String, Tensor<S>)> {
        let mut entries = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("encoder.block{i}");
            entries.push((format!("{p}.conv.weight"), b.weight.clone()));
            entries.push((format!("{p}.conv.bias"), b.bias.clone()));
            entries.push((format!("{p}.bn.gamma"), b.gamma.clone()));
            entries.push((format!("{p}.bn.beta"), b.beta.clone()));
            entries.push((format!("{p}.bn.running_mean"), b.stats.mean.clone()));
            entries.push((format!("{p}.bn.running_var"), b.stats.var.clone()));
        }
        let gru_entries = |prefix: &str, g: &GruDir<S>, out: &mut Vec<(String, Tensor<S>)>| {
            out.push((format!("{prefix}.wz"), g.wz.clone()));
            out.push((format!("{prefix}.wr"), g.wr.clone()));
            out.push((format!("{prefix}.wh"), g.wh.clone()));
            out.push((format!("{prefix}.bz"), g.bz.clone()));
            out.push((format!("{prefix}.br"), g.br.clone()));
            out.push((format!("{prefix}.bh"), g.bh.clone()));
        };
        gru_entries("gru.fwd", &self.gru_fwd, &mut entries);
        if let Some(g) = &self.gru_bwd {
            gru_entries("gru.bwd", g, &mut entries);
        }
        if let Some(p) = &self.ssm {
            entries.push(("ssm.norm.gain".into(), p.gain.clone()));
            entries.push(("ssm.delta.weight".into(), p.delta_w.clone()));
            entries.push(("ssm.delta.bias".into(), p.delta_b.clone()));
            entries.push(("ssm.b.weight".into(), p.b_w.clone()));
            entries.push(("ssm.b.bias".into(), p.b_b.clone()));
            entries.push(("ssm.c.weight".into(), p.c_w.clone()));
            entries.push(("ssm.c.bias".into(), p.c_b.clone()));
            entries.push(("ssm.a".into(), p.a.clone()));
            entries.push(("ssm.d".into(), p.d.clone()));
        }
        entries.push(("head.weight".into(), self.head_w.clone()));
        entries.push(("head.bias".into(), self.head_b.clone()));
        entries
    }

    pub fn save_checkpoint<P: AsRef<Path>>(&self, path: P) -> Result<(), CheckpointError> {
        let meta = Tensor::from_vec(
            &[META_LEN],
            meta_vector(&self.config, self.variant, self.bn_initialized()),
        );
        let mut entries = vec![("meta.config".to_string(), meta)];
        entries.extend(self.state_entries());
        checkpoint::save_to_path(path, &entries)
    }

    fn bn_initialized(&self) -> bool {
        self.blocks.iter().all(|b| b.stats.initialized)
    }

    /// Loads a checkpoint, reconstructing the architecture from the embedded
    /// metadata. Every expected tensor must be present with its exact shape.
    pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<Model<S>, CheckpointError> {
        let entries = checkpoint::load_from_path(path)?;
        Self::from_entries(&entries)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Model<S>, CheckpointError> {
        let entries = checkpoint::load_from_bytes(bytes)?;
        Self::from_entries(&entries)
    }

    fn from_entries(entries: &[CheckpointEntry]) -> Result<Model<S>, CheckpointError> {
        let corrupt = |msg: String| CheckpointError::Corrupt(msg);
        let map: BTreeMap<&str, &CheckpointEntry> =
            entries.iter().map(|e| (e.name.as_str(), e)).collect();
        let meta = map
            .get("meta.config")
            .ok_or_else(|| corrupt("missing meta.config entry".into()))?;
        let (config, variant, bn_init) = parse_meta(&meta.data)
            .map_err(|e| corrupt(format!("bad meta.config entry: {e}")))?;
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut model = Model::<S>::new(&config, variant, &mut rng);
        for (name, tensor) in model.state_entries() {
            let entry = map
                .get(name.as_str())
                .ok_or_else(|| corrupt(format!("checkpoint is missing tensor {name:?}")))?;
            if entry.shape != tensor.shape() {
                return Err(corrupt(format!(
                    "tensor {name:?} has shape {:?}, expected {:?}",
                    entry.shape,
                    tensor.shape()
                )));
            }
            let mut dst = tensor.data_mut();
            for (d, &v) in dst.iter_mut().zip(&entry.data) {
                *d = S::from_f64(f64::from(v));
            }
        }
        for b in &mut model.blocks {
            b.stats.initialized = bn_init;
        }
        Ok(model)
    }
}

fn run_gru_direction<'a, S: Scalar>(
    p: &GruDir<S>,
    batch: usize,
    xs: impl Iterator<Item = &'a Tensor<S>>,
) -> Vec<Tensor<S>> {
    let mut h = Tensor::zeros(&[batch, p.hidden]);
    let mut states = Vec::new();
    for x in xs {
        h = gru_cell(p, &h, x);
        states.push(h.clone());
    }
    states
}

/// One GRU step: sigmoid update/reset gates over [h, x], tanh candidate over
/// [r*h, x], new state (1-z)*h + z*candidate.
pub fn gru_cell<S: Scalar>(p: &GruDir<S>, h: &Tensor<S>, x: &Tensor<S>) -> Tensor<S> {
    let hx = ops::concat_last(h, x);
    let z = ops::sigmoid(&ops::linear(&hx, &p.wz, &p.bz));
    let r = ops::sigmoid(&ops::linear(&hx, &p.wr, &p.br));
    let rhx = ops::concat_last(&ops::mul(&r, h), x);
    let cand = ops::tanh(&ops::linear(&rhx, &p.wh, &p.bh));
    let keep = ops::scale_add(&z, S::from_f64(-1.0), S::from_f64(1.0));
    ops::add(&ops::mul(&keep, h), &ops::mul(&z, &cand))
}

/// Linear-time-varying selective scan. Per step t over the normalized input
/// x': Δ = softplus(Lin_Δ(x')), B_t = Lin_B(x'), C_t = Lin_C(x');
/// state s_t = exp(Δ∘A) * s_{t-1} + (Δ*x') ⊗ B_t; output
/// y_t = s_t·C_t + D*x' + x_t (residual on the pre-norm input).
pub fn ltv_ssm_forward<S: Scalar>(h_seq: &Tensor<S>, p: &SsmParams<S>) -> Tensor<S> {
    let shape = h_seq.shape().to_vec();
    assert_eq!(shape.len(), 3, "state-space input must be (B,T,D)");
    let (b, t, d) = (shape[0], shape[1], shape[2]);
    let n = p.state_dim;
    let mut s = Tensor::zeros(&[b, d, n]);
    let mut ys = Vec::with_capacity(t);
    for i in 0..t {
        let x = ops::select_time(h_seq, i);
        let xp = ops::rmsnorm(&x, &p.gain, RMSNORM_EPS);
        let delta = match p.delta_override {
            Some(v) => Tensor::full(&[b, d], S::from_f64(v)),
            None => ops::softplus(&ops::linear(&xp, &p.delta_w, &p.delta_b)),
        };
        let bt = ops::linear(&xp, &p.b_w, &p.b_b);
        let ct = ops::linear(&xp, &p.c_w, &p.c_b);
        let da = ops::exp(&ops::mul_vec_mat(&delta, &p.a));
        let drive = ops::batch_outer(&ops::mul(&delta, &xp), &bt);
        s = ops::add(&ops::mul(&da, &s), &drive);
        let y = ops::add(
            &ops::add(&ops::batch_matvec(&s, &ct), &ops::mul_row(&xp, &p.d)),
            &x,
        );
        ys.push(y);
    }
    ops::stack_time(&ys)
}

// --- checkpoint metadata -----------------------------------------------

const META_LEN: usize = 14;
const VARIANT_IDS: [(Variant, f64); 4] = [
    (Variant::Full, 0.0),
    (Variant::UniGru, 1.0),
    (Variant::NoSsm, 2.0),
    (Variant::UniGruNoSsm, 3.0),
];

fn meta_vector<S: Scalar>(cfg: &ModelConfig, variant: Variant, bn_init: bool) -> Vec<S> {
    let vid = VARIANT_IDS
        .iter()
        .find(|(v, _)| *v == variant)
        .map(|(_, id)| *id)
        .unwrap();
    [
        cfg.in_channels as f64,
        cfg.conv_channels[0] as f64,
        cfg.conv_channels[1] as f64,
        cfg.conv_channels[2] as f64,
        cfg.conv_kernels[0] as f64,
        cfg.conv_kernels[1] as f64,
        cfg.conv_kernels[2] as f64,
        cfg.gru_hidden as f64,
        cfg.ssm_state_dim as f64,
        cfg.dropout,
        cfg.resolution.0 as f64,
        cfg.resolution.1 as f64,
        vid,
        f64::from(bn_init),
    ]
    .into_iter()
    .map(S::from_f64)
    .collect()
}

fn parse_meta(data: &[f32]) -> Result<(ModelConfig, Variant, bool), String> {
    if data.len() != META_LEN {
        return Err(format!("expected {META_LEN} metadata values, got {}", data.len()));
    }
    let d: Vec<f64> = data.iter().map(|&v| f64::from(v)).collect();
    let dim = |v: f64, what: &str| -> Result<usize, String> {
        if v.fract() == 0.0 && (0.0..=1e9).contains(&v) {
            Ok(v as usize)
        } else {
            Err(format!("metadata field {what} has invalid value {v}"))
        }
    };
    let config = ModelConfig {
        in_channels: dim(d[0], "in_channels")?,
        conv_channels: [
            dim(d[1], "conv_channels")?,
            dim(d[2], "conv_channels")?,
            dim(d[3], "conv_channels")?,
        ],
        conv_kernels: [
            dim(d[4], "conv_kernels")?,
            dim(d[5], "conv_kernels")?,
            dim(d[6], "conv_kernels")?,
        ],
        gru_hidden: dim(d[7], "gru_hidden")?,
        ssm_state_dim: dim(d[8], "ssm_state_dim")?,
        dropout: d[9],
        resolution: (dim(d[10], "resolution")?, dim(d[11], "resolution")?),
    };
    config.validate()?;
    let variant = VARIANT_IDS
        .iter()
        .find(|(_, id)| *id == d[12])
        .map(|(v, _)| *v)
        .ok_or_else(|| format!("unknown variant id {}", d[12]))?;
    let bn_init = match d[13] {
        v if v == 0.0 => false,
        v if v == 1.0 => true,
        v => return Err(format!("invalid batch-norm flag {v}")),
    };
    Ok((config, variant, bn_init))
}
