//! One-hidden-layer perceptron with a softmax head, and the exact gradient
//! of its log-probabilities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Real;

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

/// `tanh` hidden layer, linear output layer. Weight matrices are row-major
/// with one row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

impl<T: Real> Mlp<T> {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Mlp {
            inputs,
            hidden,
            outputs,
            w1: vec![T::zero(); hidden * inputs],
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); outputs * hidden],
            b2: vec![T::zero(); outputs],
        }
    }

    /// Hidden weights uniform in `[-scale, scale]`; output layer zero, so
    /// the initial policy is uniform.
    pub fn random_hidden<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(inputs, hidden, outputs);
        for w in net.w1.iter_mut().chain(net.b1.iter_mut()) {
            *w = T::from_f64(scale * (2.0 * rng.gen::<f64>() - 1.0));
        }
        net
    }

    /// Every parameter uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(inputs, hidden, outputs);
        net.params_mut().for_each(|w| *w = T::from_f64(scale * (2.0 * rng.gen::<f64>() - 1.0)));
        net
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()).chain(self.b2.iter_mut())
    }

    fn check_shape(&self) -> Result<()> {
        let ok = self.w1.len() == self.hidden * self.inputs
            && self.b1.len() == self.hidden
            && self.w2.len() == self.outputs * self.hidden
            && self.b2.len() == self.outputs;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("parameter buffers do not match the layer sizes".into()))
        }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        self.check_shape()?;
        if x.len() != self.inputs {
            return Err(Error::Dimension(format!("expected {} features, got {}", self.inputs, x.len())));
        }
        Ok(())
    }

    /// Hidden activations and output logits.
    fn activations(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let h: Vec<T> = (0..self.hidden)
            .map(|i| {
                let row = &self.w1[i * self.inputs..(i + 1) * self.inputs];
                row.iter().zip(x).fold(self.b1[i], |acc, (&w, &xi)| acc + w * xi).tanh()
            })
            .collect();
        let z: Vec<T> = (0..self.outputs)
            .map(|j| {
                let row = &self.w2[j * self.hidden..(j + 1) * self.hidden];
                row.iter().zip(&h).fold(self.b2[j], |acc, (&w, &hi)| acc + w * hi)
            })
            .collect();
        (h, z)
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        Ok(self.activations(x).1)
    }

    /// Action probabilities.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Gradient of `advantage · ln softmax(z)[chosen]` with respect to every
    /// parameter, returned in a network of the same shape.
    pub fn gradient(&self, x: &[T], chosen: usize, advantage: T) -> Result<Mlp<T>> {
        self.check_input(x)?;
        if chosen >= self.outputs {
            return Err(Error::Dimension(format!("action {chosen} of {}", self.outputs)));
        }
        let (h, z) = self.activations(x);
        let pi = softmax(&z);
        let mut g = Self::zeros(self.inputs, self.hidden, self.outputs);

        // d/dz_j = advantage · (1[j = chosen] − π_j)
        let dz: Vec<T> = pi
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let onehot = if j == chosen { T::one() } else { T::zero() };
                advantage * (onehot - p)
            })
            .collect();

        let mut dh = vec![T::zero(); self.hidden];
        for j in 0..self.outputs {
            g.b2[j] = dz[j];
            for i in 0..self.hidden {
                g.w2[j * self.hidden + i] = dz[j] * h[i];
                dh[i] = dh[i] + dz[j] * self.w2[j * self.hidden + i];
            }
        }
        for i in 0..self.hidden {
            let dpre = dh[i] * (T::one() - h[i] * h[i]);
            g.b1[i] = dpre;
            for m in 0..self.inputs {
                g.w1[i * self.inputs + m] = dpre * x[m];
            }
        }
        Ok(g)
    }

    /// `self += lr · step`, for gradient ascent.
    pub fn ascend(&mut self, step: &Mlp<T>, lr: T) -> Result<()> {
        if (self.inputs, self.hidden, self.outputs) != (step.inputs, step.hidden, step.outputs) {
            return Err(Error::Dimension("gradient shape differs from network".into()));
        }
        for (w, &d) in self.params_mut().zip(step.params()) {
            *w = *w + lr * d;
        }
        Ok(())
    }
}
