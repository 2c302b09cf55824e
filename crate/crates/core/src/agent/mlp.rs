//! Fully connected network with tanh hidden layers and a linear output,
//! with exact reverse-mode gradients.

use std::fs;
use std::hash::{Hash, Hasher};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;

use super::AgentError;
use crate::scalar::Scalar;

const CHECKPOINT_MAGIC: &str = "slicesim-mlp";

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn affine(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, &b)| {
            row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi)
        }));
    }
}

/// Parameters of one MLP. Hidden layers use tanh; the last layer is raw.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub layers: Vec<Layer<T>>,
}

/// Layer activations from a forward pass: `activations[0]` is the input and
/// `activations[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub activations: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl<T: Scalar> MlpParams<T> {
    /// All-zero parameters for the layer sizes `[input, hidden..., output]`.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Glorot-uniform weights, zero biases. The output layer's weights are
    /// multiplied by `output_scale`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Self {
        let mut params = Self::zeros(sizes);
        let last = params.layers.len() - 1;
        for (l, layer) in params.layers.iter_mut().enumerate() {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            let scale = if l == last { output_scale } else { 1.0 };
            for w in &mut layer.weights {
                *w = T::lit(rng.random_range(-limit..=limit) * scale);
            }
        }
        params
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Visits every parameter in checkpoint order (per layer: weights, then bias).
    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Parameter `index` in [`MlpParams::params`] order.
    pub fn param_mut(&mut self, mut index: usize) -> &mut T {
        for layer in &mut self.layers {
            if index < layer.weights.len() {
                return &mut layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.bias.len() {
                return &mut layer.bias[index];
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    /// Stable hash of the exact parameter bits.
    pub fn checksum(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.sizes().hash(&mut hasher);
        for p in self.params() {
            p.to_f64_lossy().to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }

    fn check_input(&self, x: &[T]) -> Result<(), AgentError> {
        if x.len() != self.input_dim() {
            return Err(AgentError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, AgentError> {
        self.check_input(x)?;
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut next);
            if l != last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    pub fn forward_cached(&self, x: &[T]) -> Result<ForwardCache<T>, AgentError> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.affine(&activations[l], &mut out);
            if l != last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
        }
        Ok(ForwardCache { activations })
    }

    /// Accumulates `∂L/∂θ` into `grads` given `∂L/∂output`.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: &[T], grads: &mut MlpParams<T>) {
        let mut delta = grad_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.activations[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(gw, &x)| *gw += d * x);
            }
            if l == 0 {
                break;
            }
            // back through the weights, then through tanh of layer l - 1
            let mut upstream = vec![T::zero(); layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                upstream.iter_mut().zip(row).for_each(|(u, &w)| *u += d * w);
            }
            upstream
                .iter_mut()
                .zip(input)
                .for_each(|(u, &a)| *u *= T::one() - a * a);
            delta = upstream;
        }
    }

    /// `θ ← θ − lr · grads`.
    pub fn descend(&mut self, grads: &MlpParams<T>, learning_rate: T) {
        for (p, &g) in self.params_mut().zip(grads.params()) {
            *p -= learning_rate * g;
        }
    }

    /// Writes a checkpoint: one header line `slicesim-mlp <d0> <d1> ...`
    /// followed by every parameter as a little-endian f64.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> io::Result<()> {
        let dims: Vec<String> = self.sizes().iter().map(ToString::to_string).collect();
        writeln!(out, "{CHECKPOINT_MAGIC} {}", dims.join(" "))?;
        for p in self.params() {
            out.write_all(&p.to_f64_lossy().to_le_bytes())?;
        }
        out.flush()
    }

    pub fn read_checkpoint<R: Read>(input: R) -> Result<Self, AgentError> {
        let bad = |msg: &str| AgentError::Checkpoint(msg.to_string());
        let mut reader = BufReader::new(input);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("missing header"));
        }
        let sizes = fields
            .map(|f| f.parse::<usize>().map_err(|_| bad("bad dimension")))
            .collect::<Result<Vec<_>, _>>()?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(bad("need at least two positive dimensions"));
        }
        let mut params = Self::zeros(&sizes);
        let mut buf = [0u8; 8];
        for p in params.params_mut() {
            reader.read_exact(&mut buf).map_err(|_| bad("truncated parameter data"))?;
            *p = T::lit(f64::from_le_bytes(buf));
        }
        if reader.read(&mut buf)? != 0 {
            return Err(bad("trailing data"));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let file = fs::File::create(path)?;
        self.write_checkpoint(io::BufWriter::new(file))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        Self::read_checkpoint(fs::File::open(path)?)
    }
}
