//! Feed-forward network with one logistic output unit, trained by Adam on
//! binary cross-entropy plus an L2 weight penalty.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbt::sigmoid;
use super::params::{Activation, MlpParams};
use super::LearnError;

/// Dense layer; `weights` is `n_out x n_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn glorot(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (n_in + n_out) as f64).sqrt();
        let mut draw = |len: usize| (0..len).map(|_| rng.gen_range(-bound..bound)).collect::<Vec<f64>>();
        let weights = draw(n_in * n_out);
        let bias = draw(n_out);
        Self {
            n_in,
            n_out,
            weights,
            bias,
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let w = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            out.push(self.bias[o] + w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>());
        }
    }
}

fn activate(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
    }
}

/// Derivative expressed through the activated value.
fn activate_grad(a: Activation, out: f64) -> f64 {
    match a {
        Activation::Relu => {
            if out > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Tanh => 1.0 - out * out,
    }
}

/// Cross-entropy of one logit, computed without forming the probability.
fn bce_from_logit(z: f64, y: u8) -> f64 {
    z.max(0.0) - f64::from(y) * z + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub n_features: usize,
    /// Mean training loss per completed epoch.
    pub loss_curve: Vec<f64>,
}

impl Mlp {
    fn shapes(n_features: usize, hidden: &[usize]) -> Vec<(usize, usize)> {
        let mut dims = vec![n_features];
        dims.extend_from_slice(hidden);
        dims.push(1);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// All weights and biases zero.
    pub fn zeroed(n_features: usize, hidden: &[usize], activation: Activation) -> Self {
        Self {
            layers: Self::shapes(n_features, hidden).into_iter().map(|(i, o)| Layer::zeros(i, o)).collect(),
            activation,
            n_features,
            loss_curve: Vec::new(),
        }
    }

    /// Weights and biases uniform in `+-sqrt(6 / (fan_in + fan_out))`.
    pub fn initialized(n_features: usize, hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            layers: Self::shapes(n_features, hidden)
                .into_iter()
                .map(|(i, o)| Layer::glorot(i, o, &mut rng))
                .collect(),
            activation,
            n_features,
            loss_curve: Vec::new(),
        }
    }

    /// Activations of every layer for one input; the last entry holds the logit.
    fn forward_all(&self, row: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(row.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.n_out);
            layer.forward(&acts[l], &mut out);
            if l < last {
                out.iter_mut().for_each(|z| *z = activate(self.activation, *z));
            }
            acts.push(out);
        }
        acts
    }

    pub fn logit_row(&self, row: &[f64]) -> f64 {
        self.forward_all(row).last().unwrap()[0]
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.logit_row(row))
    }

    /// Batch loss `mean BCE + alpha/2 * sum W^2 / batch_len` and its gradient
    /// with respect to every weight and bias (same shapes as `layers`).
    pub fn loss_and_gradient(&self, rows: &[&[f64]], labels: &[u8], alpha: f64) -> (f64, Vec<Layer>) {
        let n = rows.len() as f64;
        let mut grads: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.n_in, l.n_out)).collect();
        let mut loss = 0.0;
        for (row, &y) in rows.iter().zip(labels) {
            let acts = self.forward_all(row);
            let z = acts.last().unwrap()[0];
            loss += bce_from_logit(z, y);
            let mut delta = vec![sigmoid(z) - f64::from(y)];
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &acts[l];
                let g = &mut grads[l];
                for o in 0..layer.n_out {
                    g.bias[o] += delta[o];
                    let gw = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    gw.iter_mut().zip(input).for_each(|(w, a)| *w += delta[o] * a);
                }
                if l > 0 {
                    let mut prev = vec![0.0; layer.n_in];
                    for o in 0..layer.n_out {
                        let w = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                        prev.iter_mut().zip(w).for_each(|(p, w)| *p += delta[o] * w);
                    }
                    prev.iter_mut()
                        .zip(input)
                        .for_each(|(p, &a)| *p *= activate_grad(self.activation, a));
                    delta = prev;
                }
            }
        }
        let sq: f64 = self.layers.iter().flat_map(|l| &l.weights).map(|w| w * w).sum();
        loss = loss / n + 0.5 * alpha * sq / n;
        for (g, layer) in grads.iter_mut().zip(&self.layers) {
            g.weights
                .iter_mut()
                .zip(&layer.weights)
                .for_each(|(gw, w)| *gw = *gw / n + alpha * w / n);
            g.bias.iter_mut().for_each(|gb| *gb /= n);
        }
        (loss, grads)
    }

    /// Weights then biases of each layer, in layer order.
    pub fn flatten(layers: &[Layer]) -> Vec<f64> {
        layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    /// Inverse of [`Mlp::flatten`] applied to this network's parameters.
    pub fn assign(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
    }

    pub fn fit(rows: &[Vec<f64>], labels: &[u8], params: &MlpParams, seed: u64) -> Result<Self, LearnError> {
        if rows.is_empty() {
            return Err(LearnError::EmptyTrainingSet);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::initialized(rows[0].len(), &params.hidden_layer_sizes, params.activation, rng.gen());
        let n = rows.len();
        let batch = params.batch_size.clamp(1, n);
        let mut theta = Self::flatten(&net.layers);
        let mut m = vec![0.0; theta.len()];
        let mut v = vec![0.0; theta.len()];
        let mut t = 0i32;
        let mut order: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        for epoch in 1..=params.max_iter {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let xs: Vec<&[f64]> = chunk.iter().map(|&i| rows[i].as_slice()).collect();
                let ys: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
                let (loss, grads) = net.loss_and_gradient(&xs, &ys, params.alpha);
                epoch_loss += loss * chunk.len() as f64;
                t += 1;
                let step = params.learning_rate_init * (1.0 - params.beta2.powi(t)).sqrt() / (1.0 - params.beta1.powi(t));
                for (k, g) in Self::flatten(&grads).into_iter().enumerate() {
                    m[k] = params.beta1 * m[k] + (1.0 - params.beta1) * g;
                    v[k] = params.beta2 * v[k] + (1.0 - params.beta2) * g * g;
                    theta[k] -= step * m[k] / (v[k].sqrt() + params.epsilon);
                }
                net.assign(&theta);
            }
            let epoch_loss = epoch_loss / n as f64;
            if !epoch_loss.is_finite() {
                return Err(LearnError::NonFiniteLoss { epoch });
            }
            net.loss_curve.push(epoch_loss);
            if epoch_loss > best - params.tol {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(epoch_loss);
            if stale >= params.n_iter_no_change {
                break;
            }
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_one_half() {
        let net = Mlp::zeroed(3, &[4], Activation::Relu);
        assert_eq!(net.proba_row(&[0.0, 0.0, 0.0]), 0.5);
    }

    #[test]
    fn learns_a_separable_feature() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0]).collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let params = MlpParams {
            alpha: 0.0,
            hidden_layer_sizes: vec![8],
            learning_rate_init: 0.05,
            n_iter_no_change: 200,
            ..MlpParams::default()
        };
        let net = Mlp::fit(&rows, &labels, &params, 1).unwrap();
        let acc = rows
            .iter()
            .zip(&labels)
            .filter(|(r, &y)| u8::from(net.proba_row(r) >= 0.5) == y)
            .count();
        assert_eq!(acc, 40);
        assert!(net.loss_curve.len() <= 200);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut net = Mlp::initialized(3, &[4, 3], Activation::Tanh, 5);
        let xs = [vec![0.2, -0.4, 0.9], vec![-1.0, 0.3, 0.1], vec![0.5, 0.5, -0.7]];
        let rows: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
        let labels = [1u8, 0, 1];
        let (_, grads) = net.loss_and_gradient(&rows, &labels, 0.3);
        let analytic = Mlp::flatten(&grads);
        let theta = Mlp::flatten(&net.layers);
        for k in 0..theta.len() {
            let mut p = theta.clone();
            p[k] += 1e-5;
            net.assign(&p);
            let up = net.loss_and_gradient(&rows, &labels, 0.3).0;
            p[k] -= 2e-5;
            net.assign(&p);
            let down = net.loss_and_gradient(&rows, &labels, 0.3).0;
            let numeric = (up - down) / 2e-5;
            let scale = analytic[k].abs().max(numeric.abs()).max(1e-6);
            assert!((analytic[k] - numeric).abs() / scale < 1e-4, "param {k}");
        }
    }

    #[test]
    fn same_seed_same_network() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let labels: Vec<u8> = (0..10).map(|i| u8::from(i % 2 == 0)).collect();
        let params = MlpParams {
            max_iter: 5,
            ..MlpParams::default()
        };
        assert_eq!(Mlp::fit(&rows, &labels, &params, 4).unwrap(), Mlp::fit(&rows, &labels, &params, 4).unwrap());
    }
}
