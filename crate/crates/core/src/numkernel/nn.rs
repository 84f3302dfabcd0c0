//! A small fully-connected network with ReLU hidden layers and analytic
//! reverse-mode gradients. The final layer is always linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
}

/// Feed-forward network. `widths` lists the input width, hidden widths, and
/// output width; layer `l` maps `widths[l] -> widths[l + 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

/// Forward-pass record needed by [`Mlp::backward`]: the input and every
/// post-activation layer output.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    input: Vec<f64>,
    pre_activations: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
}

/// Per-layer parameter gradients, same shapes as the network's weights and
/// biases.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.axpy(1.0, b);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for w in &mut self.weights {
            for v in w.data_mut() {
                *v *= c;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= c;
            }
        }
    }
}

impl Mlp {
    /// Fresh network with weights and biases drawn uniformly from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per layer.
    pub fn new<R: Rng>(widths: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "an MLP needs at least input and output widths".into(),
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("zero layer width".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let fan_in = widths[l];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut w = Matrix::zeros(widths[l + 1], fan_in);
            for v in w.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
            let mut b = vec![0.0; widths[l + 1]];
            for v in &mut b {
                *v = rng.random_range(-bound..bound);
            }
            weights.push(w);
            biases.push(b);
        }
        Ok(Self {
            widths: widths.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Vec<f64> {
        &mut self.biases[layer]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "MLP input length {} vs expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Plain forward pass. Deterministic: identical inputs and weights give
    /// bit-identical outputs.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let last = self.weights.len() - 1;
        let mut a = x.to_vec();
        for l in 0..=last {
            let mut z = self.weights[l].matvec(&a);
            for (zi, bi) in z.iter_mut().zip(&self.biases[l]) {
                *zi += bi;
            }
            if l < last {
                for zi in &mut z {
                    *zi = zi.max(0.0);
                }
            }
            a = z;
        }
        Ok(a)
    }

    /// Forward pass that records activations for a later backward pass.
    pub fn forward_traced(&self, x: &[f64]) -> Result<(Vec<f64>, MlpTrace)> {
        self.check_input(x)?;
        let last = self.weights.len() - 1;
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut acts = Vec::with_capacity(self.weights.len());
        let mut a = x.to_vec();
        for l in 0..=last {
            let mut z = self.weights[l].matvec(&a);
            for (zi, bi) in z.iter_mut().zip(&self.biases[l]) {
                *zi += bi;
            }
            pre.push(z.clone());
            if l < last {
                for zi in &mut z {
                    *zi = zi.max(0.0);
                }
            }
            acts.push(z.clone());
            a = z;
        }
        let out = a;
        Ok((
            out,
            MlpTrace {
                input: x.to_vec(),
                pre_activations: pre,
                activations: acts,
            },
        ))
    }

    /// Reverse-mode pass. `out_grad` is the gradient of a scalar loss with
    /// respect to the network output recorded in `trace`; returns parameter
    /// gradients and the gradient with respect to the input.
    pub fn backward(&self, trace: &MlpTrace, out_grad: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        if out_grad.len() != self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "output gradient length {} vs {}",
                out_grad.len(),
                self.output_dim()
            )));
        }
        if trace.activations.len() != self.weights.len() {
            return Err(Error::InvalidArgument(
                "trace does not match network depth".into(),
            ));
        }
        let mut grads = self.zero_grads();
        let mut delta = out_grad.to_vec();
        for l in (0..self.weights.len()).rev() {
            let prev_act: &[f64] = if l == 0 {
                &trace.input
            } else {
                &trace.activations[l - 1]
            };
            // dW = delta prev^T, db = delta.
            let w_grad = &mut grads.weights[l];
            for (i, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (j, &a) in prev_act.iter().enumerate() {
                        w_grad.add_to(i, j, d * a);
                    }
                }
            }
            for (g, &d) in grads.biases[l].iter_mut().zip(&delta) {
                *g += d;
            }
            // Propagate through the previous layer's ReLU.
            let mut prev_delta = self.weights[l].matvec_t(&delta);
            if l > 0 {
                for (d, &z) in prev_delta.iter_mut().zip(&trace.pre_activations[l - 1]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = prev_delta;
        }
        Ok((grads, delta))
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.rows() * w.cols())
            .sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameters flattened layer by layer, weights (row-major) then bias.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "parameter vector length {} vs {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let len = w.rows() * w.cols();
            w.data_mut().copy_from_slice(&flat[offset..offset + len]);
            offset += len;
            let blen = b.len();
            b.copy_from_slice(&flat[offset..offset + blen]);
            offset += blen;
        }
        Ok(())
    }

    pub fn flatten_grads(&self, grads: &MlpGrads) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in grads.weights.iter().zip(&grads.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weight_net_returns_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[2, 3], Activation::Relu, &mut rng).unwrap();
        for v in net.weight_mut(0).data_mut() {
            *v = 0.0;
        }
        *net.bias_mut(0) = vec![1.0, -2.0, 0.5];
        assert_eq!(net.forward(&[5.0, -3.0]).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(&[2, 2], Activation::Relu, &mut rng).unwrap();
        net.weight_mut(0)
            .data_mut()
            .copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        *net.bias_mut(0) = vec![0.5, -0.5];
        let out = net.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![3.5, 6.5]);
    }

    #[test]
    fn two_layer_relu_hand_trace() {
        // x = 1, layer1: w = [[2], [-1]], b = [0, 0]; relu -> (2, 0)
        // layer2: w = [[1, 1]], b = [0.25] -> 2.25
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[1, 2, 1], Activation::Relu, &mut rng).unwrap();
        net.weight_mut(0).data_mut().copy_from_slice(&[2.0, -1.0]);
        *net.bias_mut(0) = vec![0.0, 0.0];
        net.weight_mut(1).data_mut().copy_from_slice(&[1.0, 1.0]);
        *net.bias_mut(1) = vec![0.25];
        assert_eq!(net.forward(&[1.0]).unwrap(), vec![2.25]);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 8, 2], Activation::Relu, &mut rng).unwrap();
        let x = [0.3, -0.7, 1.1];
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_layer_gradient_closed_form() {
        // loss = 0.5 ||W x - y||^2, dL/dW = (W x - y) x^T.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Mlp::new(&[2, 2], Activation::Relu, &mut rng).unwrap();
        net.weight_mut(0)
            .data_mut()
            .copy_from_slice(&[1.0, -1.0, 0.5, 2.0]);
        *net.bias_mut(0) = vec![0.0, 0.0];
        let x = [1.0, 2.0];
        let y = [0.0, 1.0];
        let (out, trace) = net.forward_traced(&x).unwrap();
        let resid: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
        let (grads, _) = net.backward(&trace, &resid).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected = resid[i] * x[j];
                assert!((grads.weights[0].get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn relu_blocks_gradient_at_negative_preactivation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Mlp::new(&[1, 1, 1], Activation::Relu, &mut rng).unwrap();
        net.weight_mut(0).data_mut().copy_from_slice(&[1.0]);
        *net.bias_mut(0) = vec![-2.0]; // pre-activation -1 at x = 1
        net.weight_mut(1).data_mut().copy_from_slice(&[3.0]);
        *net.bias_mut(1) = vec![0.0];
        let (_, trace) = net.forward_traced(&[1.0]).unwrap();
        let (grads, input_grad) = net.backward(&trace, &[1.0]).unwrap();
        assert_eq!(grads.weights[0].get(0, 0), 0.0);
        assert_eq!(input_grad[0], 0.0);
    }

    #[test]
    fn three_layer_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = Mlp::new(&[2, 5, 4, 2], Activation::Relu, &mut rng).unwrap();
        let x = [0.4, -0.9];
        let y = [0.2, 0.1];
        let loss = |n: &Mlp| -> f64 {
            let out = n.forward(&x).unwrap();
            0.5 * out.iter().zip(&y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>()
        };
        let (out, trace) = net.forward_traced(&x).unwrap();
        let resid: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
        let (grads, _) = net.backward(&trace, &resid).unwrap();
        let analytic = net.flatten_grads(&grads);
        let params = net.flatten_params();
        let h = 1e-5;
        for idx in (0..params.len()).step_by(7) {
            let mut plus = params.clone();
            plus[idx] += h;
            let mut minus = params.clone();
            minus[idx] -= h;
            let mut np = net.clone();
            np.set_params(&plus).unwrap();
            let mut nm = net.clone();
            nm.set_params(&minus).unwrap();
            let fd = (loss(&np) - loss(&nm)) / (2.0 * h);
            let denom = fd.abs().max(analytic[idx].abs()).max(1e-6);
            assert!(
                (fd - analytic[idx]).abs() / denom < 1e-4,
                "param {idx}: fd {fd} vs analytic {}",
                analytic[idx]
            );
        }
    }
}
