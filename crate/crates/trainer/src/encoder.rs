//! The two-path encoder: an MLP trunk producing the identity-path feature f,
//! and a two-layer transform producing the contrast-path embedding g
//! (optionally unit-normalized).

use gpaco_core::{CoreError, Embedding, EncoderParams};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainerError};
use crate::mlp::{Activation, Mlp, MlpCache, MlpGrads};

fn default_hidden() -> usize {
    32
}

fn default_embed_dim() -> usize {
    16
}

fn default_g_hidden() -> usize {
    16
}

fn default_g_out() -> usize {
    16
}

fn default_pixel_widths() -> [usize; 3] {
    [16, 16, 16]
}

fn default_init_gain() -> f64 {
    1.0
}

/// Encoder architecture. The trunk is input -> hidden -> embed_dim; the
/// contrast transform is embed_dim -> g_hidden -> g_out; the pixel transform
/// used by the segmentation-style auxiliary path is a 3-layer MLP over
/// channel vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "default_g_hidden")]
    pub g_hidden: usize,
    #[serde(default = "default_g_out")]
    pub g_out: usize,
    #[serde(default = "default_pixel_widths")]
    pub pixel_widths: [usize; 3],
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "default_init_gain")]
    pub init_gain: f64,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec {
            hidden: default_hidden(),
            embed_dim: default_embed_dim(),
            g_hidden: default_g_hidden(),
            g_out: default_g_out(),
            pixel_widths: default_pixel_widths(),
            activation: Activation::default(),
            init_gain: default_init_gain(),
        }
    }
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0
            || self.embed_dim == 0
            || self.g_hidden == 0
            || self.g_out == 0
            || self.pixel_widths.contains(&0)
        {
            return Err(TrainerError::InvalidConfig(
                "encoder widths must be positive".into(),
            ));
        }
        if self.init_gain <= 0.0 || self.init_gain.is_nan() {
            return Err(TrainerError::InvalidConfig(
                "init_gain must be positive".into(),
            ));
        }
        Ok(())
    }

    /// The 3-layer transform applied to sampled pixel channel vectors.
    pub fn build_pixel_transform(&self, in_channels: usize, rng: &mut ChaCha8Rng) -> Mlp {
        let [w0, w1, w2] = self.pixel_widths;
        Mlp::new(
            &[in_channels, w0, w1, w2],
            self.activation,
            self.init_gain,
            rng,
        )
    }
}

/// Query or key network: trunk plus contrast transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderNet {
    pub trunk: Mlp,
    pub transform: Mlp,
    pub normalize: bool,
}

/// Cached forward pass of one sample through the encoder.
#[derive(Debug, Clone)]
pub struct EncodeCache {
    trunk: MlpCache,
    transform: MlpCache,
    /// Norm of the raw transform output (1.0 when normalization is off).
    g_norm: f64,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl EncodeCache {
    pub fn is_finite(&self) -> bool {
        self.f.iter().all(|v| v.is_finite()) && self.g.iter().all(|v| v.is_finite())
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn f_embedding(&self) -> Embedding {
        Embedding::new(self.f.clone()).expect("finite trunk output")
    }

    pub fn g_embedding(&self) -> Embedding {
        Embedding::new(self.g.clone()).expect("finite transform output")
    }
}

/// Gradient buffers for one encoder network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderGrads {
    pub trunk: MlpGrads,
    pub transform: MlpGrads,
}

impl EncoderGrads {
    pub fn zeros_like(net: &EncoderNet) -> Self {
        EncoderGrads {
            trunk: MlpGrads::zeros_like(&net.trunk),
            transform: MlpGrads::zeros_like(&net.transform),
        }
    }
}

impl EncoderNet {
    pub fn new(input_dim: usize, spec: &EncoderSpec, normalize: bool, rng: &mut ChaCha8Rng) -> Self {
        let trunk = Mlp::new(
            &[input_dim, spec.hidden, spec.embed_dim],
            spec.activation,
            spec.init_gain,
            rng,
        );
        let transform = Mlp::new(
            &[spec.embed_dim, spec.g_hidden, spec.g_out],
            spec.activation,
            spec.init_gain,
            rng,
        );
        EncoderNet {
            trunk,
            transform,
            normalize,
        }
    }

    /// Forward pass producing (f, g) with cached activations. Fails with a
    /// degenerate-feature error when normalization is requested on a
    /// zero-norm transform output.
    pub fn encode(&self, x: &[f64]) -> Result<EncodeCache> {
        let trunk = self.trunk.forward(x)?;
        let f = trunk.output().to_vec();
        let transform = self.transform.forward(&f)?;
        let raw = transform.output();
        let (g, g_norm) = if self.normalize {
            let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(TrainerError::Core(CoreError::DegenerateFeature));
            }
            (raw.iter().map(|v| v / n).collect(), n)
        } else {
            (raw.to_vec(), 1.0)
        };
        Ok(EncodeCache {
            trunk,
            transform,
            g_norm,
            f,
            g,
        })
    }

    /// Accumulate parameter gradients given d loss / d f and d loss / d g
    /// (g in its normalized form when normalization is on).
    pub fn encode_backward(
        &self,
        cache: &EncodeCache,
        d_f: &[f64],
        d_g: &[f64],
        grads: &mut EncoderGrads,
    ) {
        // Through the normalization: d_raw = (d_g - ghat (d_g . ghat)) / norm.
        let d_raw: Vec<f64> = if self.normalize {
            let proj: f64 = d_g.iter().zip(&cache.g).map(|(d, g)| d * g).sum();
            d_g.iter()
                .zip(&cache.g)
                .map(|(d, g)| (d - g * proj) / cache.g_norm)
                .collect()
        } else {
            d_g.to_vec()
        };
        let d_f_from_g = self
            .transform
            .backward(&cache.transform, &d_raw, &mut grads.transform);
        let total: Vec<f64> = d_f.iter().zip(&d_f_from_g).map(|(a, b)| a + b).collect();
        self.trunk.backward(&cache.trunk, &total, &mut grads.trunk);
    }

    pub fn sgd_step(&mut self, grads: &EncoderGrads, velocity: &mut EncoderGrads, lr: f64, mu: f64) {
        self.trunk.sgd_step(&grads.trunk, &mut velocity.trunk, lr, mu);
        self.transform
            .sgd_step(&grads.transform, &mut velocity.transform, lr, mu);
    }

    pub fn to_params(&self) -> EncoderParams {
        let mut flat = Vec::with_capacity(self.trunk.param_count() + self.transform.param_count());
        self.trunk.append_flat(&mut flat);
        self.transform.append_flat(&mut flat);
        EncoderParams::new(flat).expect("finite encoder parameters")
    }

    pub fn load_params(&mut self, params: &EncoderParams) -> Result<()> {
        let flat = params.as_slice();
        let used = self.trunk.load_flat(flat)?;
        let used2 = self.transform.load_flat(&flat[used..])?;
        if used + used2 != flat.len() {
            return Err(TrainerError::Shape(format!(
                "parameter vector of length {} does not match encoder layout {}",
                flat.len(),
                used + used2
            )));
        }
        Ok(())
    }
}
