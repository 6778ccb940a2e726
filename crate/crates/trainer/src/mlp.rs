//! Small dense MLP with hand-written reverse-mode gradients.

use gpaco_core::linalg::Mat;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainerError};
use crate::rng::uniform_sym;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(&self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }

    fn derivative(&self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Dense layer y = W x + b with W stored out-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Linear {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.w.rows() {
            let row = self.w.row(r);
            let mut acc = self.b[r];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

/// Multi-layer perceptron; the activation follows every layer except the
/// last, which stays linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

/// Forward activations retained for the backward pass: the input to each
/// layer and each layer's pre-activation output.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("cache of a layered mlp")
    }
}

/// Parameter-shaped gradient (or velocity) buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpGrads {
    pub w: Vec<Mat>,
    pub b: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            w: mlp
                .layers
                .iter()
                .map(|l| Mat::zeros(l.w.rows(), l.w.cols()))
                .collect(),
            b: mlp.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, a: f64) {
        for w in &mut self.w {
            w.scale(a);
        }
        for b in &mut self.b {
            b.iter_mut().for_each(|v| *v *= a);
        }
    }
}

impl Mlp {
    /// Fresh network with scaled-uniform fan-in initialization: weights drawn
    /// from U(+-gain * sqrt(6 / fan_in)), biases zero.
    pub fn new(dims: &[usize], activation: Activation, init_gain: f64, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "an mlp needs at least one layer");
        let layers = dims
            .windows(2)
            .map(|io| {
                let (fan_in, fan_out) = (io[0], io[1]);
                let bound = init_gain * (6.0 / fan_in as f64).sqrt();
                let mut w = Mat::zeros(fan_out, fan_in);
                for v in w.data_mut() {
                    *v = uniform_sym(rng, bound);
                }
                Linear {
                    w,
                    b: vec![0.0; fan_out],
                }
            })
            .collect();
        Mlp { layers, activation }
    }

    pub fn from_layers(layers: Vec<Linear>, activation: Activation) -> Self {
        Mlp { layers, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("layers").w.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<MlpCache> {
        if x.len() != self.input_dim() {
            return Err(TrainerError::Shape(format!(
                "mlp input dim {} != expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            inputs.push(cur.clone());
            let mut out = Vec::with_capacity(layer.b.len());
            layer.forward(&cur, &mut out);
            pre.push(out.clone());
            if l + 1 < self.layers.len() {
                for v in &mut out {
                    *v = self.activation.apply(*v);
                }
            }
            cur = out;
        }
        Ok(MlpCache { inputs, pre })
    }

    /// Accumulate parameter gradients for d_out = d loss / d output and
    /// return d loss / d input.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grads: &mut MlpGrads) -> Vec<f64> {
        let mut d_cur = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            // Through the activation (absent on the last layer).
            if l + 1 < self.layers.len() {
                for (d, &p) in d_cur.iter_mut().zip(&cache.pre[l]) {
                    *d *= self.activation.derivative(p);
                }
            }
            let input = &cache.inputs[l];
            let gw = &mut grads.w[l];
            for (r, &dr) in d_cur.iter().enumerate() {
                grads.b[l][r] += dr;
                let row = gw.row_mut(r);
                for (wv, &iv) in row.iter_mut().zip(input) {
                    *wv += dr * iv;
                }
            }
            // d_input = W^T d_cur
            let mut d_in = vec![0.0; layer.w.cols()];
            for (r, &dr) in d_cur.iter().enumerate() {
                for (di, &wv) in d_in.iter_mut().zip(layer.w.row(r)) {
                    *di += wv * dr;
                }
            }
            d_cur = d_in;
        }
        d_cur
    }

    /// SGD with classical momentum: v <- mu v + g; p <- p - lr v.
    pub fn sgd_step(&mut self, grads: &MlpGrads, velocity: &mut MlpGrads, lr: f64, mu: f64) {
        for l in 0..self.layers.len() {
            let (vw, gw) = (&mut velocity.w[l], &grads.w[l]);
            vw.scale(mu);
            vw.scaled_add(1.0, gw);
            for (p, v) in self.layers[l].w.data_mut().iter_mut().zip(vw.data()) {
                *p -= lr * v;
            }
            for ((p, v), g) in self.layers[l]
                .b
                .iter_mut()
                .zip(&mut velocity.b[l])
                .zip(&grads.b[l])
            {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.data().len() + l.b.len())
            .sum()
    }

    pub fn append_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(l.w.data());
            out.extend_from_slice(&l.b);
        }
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<usize> {
        let mut offset = 0;
        for l in &mut self.layers {
            let w_len = l.w.data().len();
            let b_len = l.b.len();
            if offset + w_len + b_len > flat.len() {
                return Err(TrainerError::Shape("flat parameter buffer too short".into()));
            }
            l.w.data_mut().copy_from_slice(&flat[offset..offset + w_len]);
            offset += w_len;
            l.b.copy_from_slice(&flat[offset..offset + b_len]);
            offset += b_len;
        }
        Ok(offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn identity_mlp(d: usize) -> Mlp {
        let eye = |d: usize| {
            let mut m = Mat::zeros(d, d);
            for i in 0..d {
                m.row_mut(i)[i] = 1.0;
            }
            m
        };
        Mlp::from_layers(
            vec![
                Linear {
                    w: eye(d),
                    b: vec![0.0; d],
                },
                Linear {
                    w: eye(d),
                    b: vec![0.0; d],
                },
            ],
            Activation::Relu,
        )
    }

    #[test]
    fn identity_network_passes_nonnegative_input_through() {
        let mlp = identity_mlp(3);
        let cache = mlp.forward(&[1.0, 0.5, 0.0]).unwrap();
        assert_eq!(cache.output(), &[1.0, 0.5, 0.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mlp = Mlp::new(&[4, 6, 3], Activation::Relu, 1.0, &mut rng);
        let x = vec![0.3, -0.7, 0.9, 0.1];
        // Scalar probe: weighted sum of outputs.
        let probe = [0.7, -1.3, 0.4];
        let value = |m: &Mlp, x: &[f64]| -> f64 {
            let c = m.forward(x).unwrap();
            c.output().iter().zip(&probe).map(|(o, p)| o * p).sum()
        };

        let cache = mlp.forward(&x).unwrap();
        let mut grads = MlpGrads::zeros_like(&mlp);
        let d_in = mlp.backward(&cache, &probe, &mut grads);

        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let num = (value(&mlp, &xp) - value(&mlp, &xm)) / (2.0 * h);
            assert!((num - d_in[i]).abs() < 1e-6, "input grad {i}");
        }
        for l in 0..mlp.layers.len() {
            for idx in 0..mlp.layers[l].w.data().len() {
                let mut mp = mlp.clone();
                let mut mm = mlp.clone();
                mp.layers[l].w.data_mut()[idx] += h;
                mm.layers[l].w.data_mut()[idx] -= h;
                let num = (value(&mp, &x) - value(&mm, &x)) / (2.0 * h);
                assert!(
                    (num - grads.w[l].data()[idx]).abs() < 1e-6,
                    "w grad layer {l} idx {idx}"
                );
            }
        }
    }

    #[test]
    fn flat_roundtrip_preserves_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::new(&[3, 5, 2], Activation::Tanh, 1.0, &mut rng);
        let mut flat = Vec::new();
        mlp.append_flat(&mut flat);
        assert_eq!(flat.len(), mlp.param_count());
        let mut other = Mlp::new(&[3, 5, 2], Activation::Tanh, 1.0, &mut rng);
        let used = other.load_flat(&flat).unwrap();
        assert_eq!(used, flat.len());
        assert_eq!(other, mlp);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::new(&[3, 2], Activation::Relu, 1.0, &mut rng);
        assert!(mlp.forward(&[1.0]).is_err());
    }
}
