//! Fully connected network with hand-written reverse-mode gradients.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{CoreError, Result};

/// Dense network `x ↦ W_L(…relu(W_1 x + b_1)…) + b_L`.
///
/// Hidden activations are ReLU, the output is linear. Weights are stored
/// `[out_dim, in_dim]`; batches are `[batch, dim]`, so a layer computes
/// `y = x Wᵀ + b`.
#[derive(Clone, Debug)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Activations recorded by [`Mlp::forward_cached`] for the backward pass.
///
/// `inputs[l]` is what flows *into* layer `l` (so `inputs[0]` is the raw
/// input batch); for hidden layers it is post-ReLU, which is all backward
/// needs to gate gradients.
#[derive(Clone, Debug)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl MlpCache {
    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }

    /// The raw input batch this cache was produced from.
    pub fn input(&self) -> &Array2<f64> {
        &self.inputs[0]
    }
}

/// Parameter gradients, shaped exactly like the network's parameters.
#[derive(Clone, Debug)]
pub struct MlpGradients {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
}

impl MlpGradients {
    /// All-zero gradients matching `net`'s shapes.
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            d_weights: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            d_biases: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    /// `self += scale * other`, elementwise.
    pub fn add_scaled(&mut self, other: &MlpGradients, scale: f64) {
        for (d, o) in self.d_weights.iter_mut().zip(&other.d_weights) {
            d.scaled_add(scale, o);
        }
        for (d, o) in self.d_biases.iter_mut().zip(&other.d_biases) {
            d.scaled_add(scale, o);
        }
    }

    /// Flatten in the same layout as [`Mlp::params_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for (w, b) in self.d_weights.iter().zip(&self.d_biases) {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        flat
    }
}

/// Result of a backward pass: parameter gradients plus the gradient with
/// respect to the input batch (needed when a loss reaches a network through
/// another network, e.g. the actor through the critic).
#[derive(Clone, Debug)]
pub struct MlpBackward {
    pub grads: MlpGradients,
    pub grad_input: Array2<f64>,
}

impl Mlp {
    /// Fan-in uniform initialization: every weight and bias of a layer with
    /// `fan_in` inputs is drawn from `U(−1/√fan_in, 1/√fan_in)`.
    pub fn new<R: Rng>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        Self::validate_sizes(layer_sizes)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-bound..bound)
            }));
            biases.push(Array1::from_shape_fn(fan_out, |_| {
                rng.random_range(-bound..bound)
            }));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// All-zero parameters (useful in tests).
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        Self::validate_sizes(layer_sizes)?;
        let weights = layer_sizes
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = layer_sizes.windows(2).map(|p| Array1::zeros(p[1])).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Assemble from explicit parameters (checkpoint loading, tests).
    pub fn from_raw(
        layer_sizes: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        Self::validate_sizes(&layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != layer_sizes.len() - 1 {
            return Err(CoreError::InvalidArgument(
                "parameter count does not match layer sizes".into(),
            ));
        }
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            if weights[l].dim() != (pair[1], pair[0]) {
                return Err(CoreError::InvalidArgument(format!(
                    "weight {l} has shape {:?}, expected ({}, {})",
                    weights[l].dim(),
                    pair[1],
                    pair[0]
                )));
            }
            if biases[l].len() != pair[1] {
                return Err(CoreError::InvalidArgument(format!(
                    "bias {l} has length {}, expected {}",
                    biases[l].len(),
                    pair[1]
                )));
            }
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
        })
    }

    fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 2 {
            return Err(CoreError::InvalidArgument(
                "an MLP needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(CoreError::InvalidArgument(
                "layer sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    /// Mutable access to one layer's parameters (used by near-zero
    /// re-initialization of policy output layers).
    pub fn layer_mut(&mut self, l: usize) -> (&mut Array2<f64>, &mut Array1<f64>) {
        (&mut self.weights[l], &mut self.biases[l])
    }

    pub fn n_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// Flatten all parameters: per layer, row-major weights then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        flat
    }

    /// Overwrite all parameters from the flat layout of [`Self::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(CoreError::DimensionMismatch {
                context: "Mlp::set_params_flat",
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut i = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = flat[i];
                i += 1;
            }
            for v in b.iter_mut() {
                *v = flat[i];
                i += 1;
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(CoreError::DimensionMismatch {
                context: "Mlp::forward: input dim",
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Forward pass on a batch, discarding intermediate activations.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.output)
    }

    /// Forward pass that records the activations needed by [`Self::backward`].
    pub fn forward_cached(&self, x: &Array2<f64>) -> Result<MlpCache> {
        self.check_input(x)?;
        let n_layers = self.n_layers();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut h = x.clone();
        for l in 0..n_layers {
            inputs.push(h.clone());
            let mut z = h.dot(&self.weights[l].t()) + &self.biases[l];
            if l + 1 < n_layers {
                z.mapv_inplace(|v| v.max(0.0));
            }
            h = z;
        }
        Ok(MlpCache { inputs, output: h })
    }

    /// Reverse-mode gradients of the cached forward computation.
    ///
    /// `grad_output` is `∂L/∂output`, shaped like the cached output; the
    /// result contains `∂L/∂θ` for every parameter and `∂L/∂input`.
    pub fn backward(&self, cache: &MlpCache, grad_output: &Array2<f64>) -> Result<MlpBackward> {
        if grad_output.dim() != cache.output.dim() {
            return Err(CoreError::DimensionMismatch {
                context: "Mlp::backward: grad_output rows*cols",
                expected: cache.output.len(),
                got: grad_output.len(),
            });
        }
        if cache.inputs.len() != self.n_layers() {
            return Err(CoreError::InvalidArgument(
                "forward cache does not match network depth".into(),
            ));
        }
        let mut d_weights = Vec::with_capacity(self.n_layers());
        let mut d_biases = Vec::with_capacity(self.n_layers());
        let mut g = grad_output.clone();
        for l in (0..self.n_layers()).rev() {
            let input = &cache.inputs[l];
            d_weights.push(g.t().dot(input));
            d_biases.push(g.sum_axis(Axis(0)));
            g = g.dot(&self.weights[l]);
            if l > 0 {
                // The incoming activation is post-ReLU: gate where it was
                // clamped to zero.
                g.zip_mut_with(input, |gv, &av| {
                    if av <= 0.0 {
                        *gv = 0.0;
                    }
                });
            }
        }
        d_weights.reverse();
        d_biases.reverse();
        Ok(MlpBackward {
            grads: MlpGradients {
                d_weights,
                d_biases,
            },
            grad_input: g,
        })
    }
}
