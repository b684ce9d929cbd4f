//! Small multilayer perceptrons and the Adam optimizer.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{kernels, Gradients, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Relu),
            c => Err(Error::Checkpoint(format!("unknown activation code {c}"))),
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }
}

/// Fully connected network. `sizes` lists input, hidden and output widths.
///
/// Parameters are stored as `[W0, b0, W1, b1, ...]` with `Wi` of shape
/// `sizes[i] × sizes[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<Tensor>,
}

/// Tape handles of an [`Mlp`]'s parameters for one pass.
#[derive(Debug, Clone)]
pub struct BoundMlp {
    vars: Vec<Var>,
}

impl BoundMlp {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn vars_mut(&mut self) -> &mut [Var] {
        &mut self.vars
    }
}

/// Orthogonal `rows × cols` matrix scaled by `gain`.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    // Orthonormalize the `short` vectors of length `long`, then lay them out
    // as rows or columns depending on which side is longer.
    let (long, short) = (rows.max(cols), rows.min(cols));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (s, b) in basis.iter().enumerate() {
        for (l, &x) in b.iter().enumerate() {
            let (r, c) = if rows >= cols { (l, s) } else { (s, l) };
            out[r * cols + c] = gain * x;
        }
    }
    out
}

impl Mlp {
    /// Orthogonal initialization: hidden layers use gain √2, the output
    /// layer uses `output_gain`; biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Contract(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes.len() - 1;
        let mut params = Vec::with_capacity(2 * layers);
        for i in 0..layers {
            let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
            let gain = if i + 1 == layers {
                output_gain
            } else {
                std::f64::consts::SQRT_2
            };
            let w = if gain == 0.0 {
                vec![0.0; fan_in * fan_out]
            } else {
                orthogonal(fan_in, fan_out, gain, rng)
            };
            params.push(Tensor::new(&[fan_in, fan_out], w)?.with_grad());
            params.push(Tensor::zeros(&[fan_out])?.with_grad());
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            params,
        })
    }

    /// Rebuilds a network from stored parameters, validating every shape.
    pub fn from_params(sizes: &[usize], activation: Activation, params: Vec<Tensor>) -> Result<Self> {
        if sizes.len() < 2 || params.len() != 2 * (sizes.len() - 1) {
            return Err(Error::Dimension(format!(
                "{} parameter tensors for layer sizes {sizes:?}",
                params.len()
            )));
        }
        let mut params = params;
        for (i, pair) in params.chunks_mut(2).enumerate() {
            if pair[0].shape() != [sizes[i], sizes[i + 1]] || pair[1].shape() != [sizes[i + 1]] {
                return Err(Error::Dimension(format!("layer {i} shape mismatch")));
            }
            pair.iter_mut().for_each(|p| p.set_requires_grad(true));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        BoundMlp {
            vars: self.params.iter().map(|p| tape.leaf(p)).collect(),
        }
    }

    /// Differentiable forward pass of a `batch × input_dim` value.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundMlp, x: Var) -> Result<Var> {
        let layers = self.sizes.len() - 1;
        let mut h = x;
        for i in 0..layers {
            let z = tape.matmul(h, bound.vars[2 * i])?;
            let z = tape.add(z, bound.vars[2 * i + 1])?;
            h = if i + 1 == layers {
                z
            } else {
                match self.activation {
                    Activation::Tanh => tape.tanh(z),
                    Activation::Relu => tape.relu(z),
                }
            };
        }
        Ok(h)
    }

    /// Tape-free forward pass over `rows` stacked inputs. Produces the same
    /// bits as [`Mlp::forward`].
    pub fn infer(&self, x: &[f64], rows: usize) -> Result<Vec<f64>> {
        if x.len() != rows * self.input_dim() {
            return Err(Error::Contract(format!(
                "input of length {} for {rows} rows of width {}",
                x.len(),
                self.input_dim()
            )));
        }
        let layers = self.sizes.len() - 1;
        let mut h = x.to_vec();
        for i in 0..layers {
            let (fan_in, fan_out) = (self.sizes[i], self.sizes[i + 1]);
            let mut z = kernels::matmul(&h, self.params[2 * i].values(), rows, fan_in, fan_out);
            kernels::add_row_bias(&mut z, self.params[2 * i + 1].values());
            if i + 1 < layers {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            h = z;
        }
        Ok(h)
    }

    pub fn accumulate_grads(&mut self, grads: &Gradients, bound: &BoundMlp) -> Result<()> {
        for (p, &v) in self.params.iter_mut().zip(&bound.vars) {
            grads.accumulate_into(v, p)?;
        }
        Ok(())
    }
}

/// Scales gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(params: &mut [&mut Tensor], max_norm: f64) -> f64 {
    let total: f64 = params
        .iter()
        .filter_map(|p| p.grad())
        .flat_map(|g| g.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if total > max_norm {
        let factor = max_norm / (total + 1e-6);
        for p in params.iter_mut() {
            if let Some(g) = p.grad_mut() {
                g.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }
    total
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            t: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update over `params` in a fixed order. The order must be the same
    /// on every call since moment estimates are tracked positionally.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} tensors, got {}",
                self.first.len(),
                params.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let Some(g) = p.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            for (((x, gi), mi), vi) in p.values_mut().iter_mut().zip(&g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (rows, cols) = (7, 4);
        let w = orthogonal(rows, cols, 1.0, &mut rng);
        for a in 0..cols {
            for b in 0..cols {
                let dot: f64 = (0..rows).map(|r| w[r * cols + a] * w[r * cols + b]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn infer_matches_tape_forward_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mlp = Mlp::new(&[5, 8, 8, 3], Activation::Tanh, 0.5, &mut rng).unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut tape = Tape::new();
        let b = mlp.bind(&mut tape);
        let xv = tape.constant(&[2, 5], x.clone()).unwrap();
        let y = mlp.forward(&mut tape, &b, xv).unwrap();
        assert_eq!(tape.value(y), mlp.infer(&x, 2).unwrap().as_slice());
    }

    #[test]
    fn hand_rolled_forward_oracle() {
        let params = vec![
            Tensor::new(&[2, 2], vec![0.1, -0.2, 0.3, 0.4]).unwrap(),
            Tensor::vector(&[0.05, -0.05]).unwrap(),
            Tensor::new(&[2, 1], vec![0.5, -1.0]).unwrap(),
            Tensor::vector(&[0.2]).unwrap(),
        ];
        let mlp = Mlp::from_params(&[2, 2, 1], Activation::Tanh, params).unwrap();
        let x = [1.0, 2.0];
        let h0 = (1.0 * 0.1 + 2.0 * 0.3 + 0.05_f64).tanh();
        let h1 = (1.0 * -0.2 + 2.0 * 0.4 - 0.05_f64).tanh();
        let expect = 0.5 * h0 - h1 + 0.2;
        assert!((mlp.infer(&x, 1).unwrap()[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut t = Tensor::vector(&[1.0, -2.0]).unwrap().with_grad();
        t.accumulate_grad(&[0.3, 0.7]).unwrap();
        let before = t.clone();
        let mut adam = Adam::new(0.0);
        adam.step(&mut [&mut t]).unwrap();
        assert_eq!(t.values(), before.values());
    }

    #[test]
    fn clip_scales_to_max_norm() {
        let mut t = Tensor::vector(&[0.0, 0.0]).unwrap().with_grad();
        t.accumulate_grad(&[3.0, 4.0]).unwrap();
        let norm = clip_grad_norm(&mut [&mut t], 0.5);
        assert_eq!(norm, 5.0);
        let g = t.grad().unwrap();
        assert!(((g[0] * g[0] + g[1] * g[1]).sqrt() - 0.5).abs() < 1e-6);
    }
}
