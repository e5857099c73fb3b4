use rand::Rng;

use crate::linalg::gemm;
use crate::rng;

/// Fully connected ReLU network with one logit output.
///
/// Parameters live in one flat vector, layer by layer: the `out × in` weight
/// matrix (row-major) followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: usize,
    pub b: usize,
}

impl Network {
    /// `sizes` = `[n_inputs, hidden..., 1]`.
    pub fn zeros(sizes: Vec<usize>) -> Self {
        assert!(
            sizes.len() >= 2 && *sizes.last().unwrap() == 1,
            "network must end in one output"
        );
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let n = param_count(&sizes);
        Self {
            sizes,
            params: vec![0.0; n],
        }
    }

    /// Uniform fan-in initialization, `U(−√(6/fan_in), √(6/fan_in))` for
    /// weights and zero biases.
    pub fn init(sizes: Vec<usize>, seed: u64) -> Self {
        let mut net = Self::zeros(sizes);
        let mut rng = rng::stream(seed);
        for layer in net.layers() {
            let bound = (6.0 / layer.n_in as f64).sqrt();
            for p in &mut net.params[layer.w..layer.b] {
                *p = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2
            && *sizes.last().unwrap() == 1
            && sizes.iter().all(|&s| s > 0)
            && params.len() == param_count(&sizes))
        .then_some(Self { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let l = Layer {
                    n_in: w[0],
                    n_out: w[1],
                    w: off,
                    b: off + w[0] * w[1],
                };
                off = l.b + l.n_out;
                l
            })
            .collect()
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let layer = self.layers()[l];
        (
            &self.params[layer.w..layer.b],
            &self.params[layer.b..layer.b + layer.n_out],
        )
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers()
            .iter()
            .flat_map(|l| &self.params[l.w..l.b])
            .map(|w| w * w)
            .sum()
    }

    /// Output logits for `n` row-major input rows.
    pub fn logits(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut acts = Vec::new();
        self.forward_all(x, n, &mut acts);
        acts.pop().unwrap()
    }

    /// Runs the network and keeps every layer's pre-activation. The last
    /// entry holds the output logits.
    fn forward_all(&self, x: &[f64], n: usize, pre: &mut Vec<Vec<f64>>) {
        debug_assert_eq!(x.len(), n * self.n_inputs());
        pre.clear();
        let layers = self.layers();
        let mut act: Vec<f64> = Vec::new();
        for (li, l) in layers.iter().enumerate() {
            let input: &[f64] = if li == 0 { x } else { &act };
            let mut z = vec![0.0; n * l.n_out];
            for row in z.chunks_exact_mut(l.n_out) {
                row.copy_from_slice(&self.params[l.b..l.b + l.n_out]);
            }
            gemm(
                n,
                l.n_in,
                l.n_out,
                1.0,
                input,
                (l.n_in as isize, 1),
                &self.params[l.w..l.b],
                (1, l.n_in as isize),
                1.0,
                &mut z,
            );
            if li + 1 < layers.len() {
                act = z.iter().map(|&v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
    }

    /// Mean binary cross-entropy over the rows plus `l2 · ‖W‖²`; writes the
    /// gradient into `grad`.
    pub fn loss_grad(&self, x: &[f64], y: &[f64], n: usize, l2: f64, grad: &mut [f64]) -> f64 {
        assert_eq!(grad.len(), self.params.len());
        assert_eq!(y.len(), n);
        let mut pre = Vec::new();
        self.forward_all(x, n, &mut pre);
        let logits = pre.last().unwrap();
        let mut loss = 0.0;
        let mut delta: Vec<f64> = Vec::with_capacity(n);
        for (&z, &t) in logits.iter().zip(y) {
            loss += bce_with_logit(z, t);
            delta.push((sigmoid(z) - t) / n as f64);
        }
        loss /= n as f64;

        grad.iter_mut().for_each(|g| *g = 0.0);
        let layers = self.layers();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
        for z in &pre[..pre.len() - 1] {
            acts.push(z.iter().map(|&v| v.max(0.0)).collect());
        }
        for (li, l) in layers.iter().enumerate().rev() {
            let input: &[f64] = if li == 0 { x } else { &acts[li - 1] };
            // dW = deltaᵀ · input
            gemm(
                l.n_out,
                n,
                l.n_in,
                1.0,
                &delta,
                (1, l.n_out as isize),
                input,
                (l.n_in as isize, 1),
                0.0,
                &mut grad[l.w..l.b],
            );
            let gb = &mut grad[l.b..l.b + l.n_out];
            for row in delta.chunks_exact(l.n_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if li > 0 {
                let mut back = vec![0.0; n * l.n_in];
                gemm(
                    n,
                    l.n_out,
                    l.n_in,
                    1.0,
                    &delta,
                    (l.n_out as isize, 1),
                    &self.params[l.w..l.b],
                    (l.n_in as isize, 1),
                    0.0,
                    &mut back,
                );
                for (b, &z) in back.iter_mut().zip(&pre[li - 1]) {
                    if z <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        if l2 > 0.0 {
            for l in &layers {
                for (g, &w) in grad[l.w..l.b].iter_mut().zip(&self.params[l.w..l.b]) {
                    *g += 2.0 * l2 * w;
                }
            }
            loss += l2 * self.weight_norm_sq();
        }
        loss
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `−t·log σ(z) − (1−t)·log(1−σ(z))`, stable for large `|z|`.
pub fn bce_with_logit(z: f64, t: f64) -> f64 {
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}
