//! Feedforward network `f: ℝ → ℝʳ` (or `ℂʳ`) parametrizing the spectral density.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Complex64, RealMatrix};
use crate::simulate::standard_normals;

/// Fully connected network with tanh hidden layers and a linear output layer.
///
/// Parameters are stored flat, layer by layer, each layer as its row-major
/// weight matrix (`fan_out × fan_in`) followed by its bias. The input
/// frequency is multiplied by `input_scale` before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralNet {
    pub layer_sizes: Vec<usize>,
    pub rank: usize,
    pub complex_output: bool,
    pub input_scale: f64,
    pub params: Vec<f64>,
}

/// Activations retained from a batch forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the scaled input (batch × 1); the last entry is the output.
    activations: Vec<RealMatrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &RealMatrix {
        self.activations
            .last()
            .expect("forward cache always holds the input")
    }
}

impl SpectralNet {
    /// Network `1 → hidden… → r` (or `2r`), all parameters zero.
    pub fn zeros(
        hidden: &[usize],
        rank: usize,
        complex_output: bool,
        input_scale: f64,
    ) -> Result<Self> {
        if rank == 0 {
            return Err(Error::invalid("rank must be at least one"));
        }
        if !(input_scale > 0.0) {
            return Err(Error::invalid("input scale must be positive"));
        }
        let out = if complex_output { 2 * rank } else { rank };
        let mut layer_sizes = vec![1];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(out);
        let count = layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            layer_sizes,
            rank,
            complex_output,
            input_scale,
            params: vec![0.0; count],
        })
    }

    /// Weights and biases drawn from `N(0, 1/fan_in)`.
    ///
    /// Zero biases would make every tanh network odd in `ω`, which forces the
    /// induced kernel to vanish at the origin.
    pub fn init<R: RngCore + ?Sized>(
        hidden: &[usize],
        rank: usize,
        complex_output: bool,
        input_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(hidden, rank, complex_output, input_scale)?;
        let mut offset = 0;
        for w in net.layer_sizes.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = 1.0 / (fan_in as f64).sqrt();
            let draws = standard_normals(rng, fan_in * fan_out + fan_out);
            for (p, d) in net.params[offset..offset + fan_in * fan_out + fan_out]
                .iter_mut()
                .zip(draws)
            {
                *p = std * d;
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn output_dim(&self) -> usize {
        *self
            .layer_sizes
            .last()
            .expect("network has an output layer")
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes[0] != 1 {
            return Err(Error::Parse("network must map a scalar input".into()));
        }
        let expected_out = if self.complex_output {
            2 * self.rank
        } else {
            self.rank
        };
        if self.output_dim() != expected_out {
            return Err(Error::Parse(format!(
                "output layer has {} units, rank {} needs {expected_out}",
                self.output_dim(),
                self.rank
            )));
        }
        let count: usize = self
            .layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        if count != self.params.len() {
            return Err(Error::Parse(format!(
                "expected {count} parameters, found {}",
                self.params.len()
            )));
        }
        Ok(())
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        // (offset, fan_in, fan_out)
        let mut offset = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let item = (offset, w[0], w[1]);
            offset += w[0] * w[1] + w[1];
            item
        })
    }

    /// Raw outputs for a single frequency.
    pub fn forward(&self, omega: f64) -> Vec<f64> {
        let mut act = vec![omega * self.input_scale];
        let last = self.layer_sizes.len() - 2;
        for (idx, (offset, fan_in, fan_out)) in self.layers().enumerate() {
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            act = (0..fan_out)
                .map(|o| {
                    let pre = b[o] + (0..fan_in).map(|i| w[o * fan_in + i] * act[i]).sum::<f64>();
                    if idx == last {
                        pre
                    } else {
                        pre.tanh()
                    }
                })
                .collect();
        }
        act
    }

    /// `f(ω)` as `r` complex components (imaginary parts zero for real output).
    pub fn eval(&self, omega: f64) -> Vec<Complex64> {
        let out = self.forward(omega);
        split_output(&out, self.rank, self.complex_output)
    }

    /// Batch forward pass over `omegas`, keeping activations for backprop.
    pub fn forward_batch(&self, omegas: &[f64]) -> ForwardCache {
        let mut act =
            RealMatrix::from_iterator(omegas.len(), 1, omegas.iter().map(|w| w * self.input_scale));
        let mut activations = Vec::with_capacity(self.layer_sizes.len());
        let last = self.layer_sizes.len() - 2;
        for (idx, (offset, fan_in, fan_out)) in self.layers().enumerate() {
            let w = RealMatrix::from_row_slice(
                fan_out,
                fan_in,
                &self.params[offset..offset + fan_in * fan_out],
            );
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let mut next = &act * w.transpose();
            for mut row in next.row_iter_mut() {
                for (o, v) in row.iter_mut().enumerate() {
                    *v += b[o];
                    if idx != last {
                        *v = v.tanh();
                    }
                }
            }
            activations.push(std::mem::replace(&mut act, next));
        }
        activations.push(act);
        ForwardCache { activations }
    }

    /// Gradient with respect to the flat parameters given `∂ℓ/∂output`
    /// (batch × output_dim).
    pub fn backward(&self, cache: &ForwardCache, grad_output: &RealMatrix) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        let layers: Vec<_> = self.layers().collect();
        let mut delta = grad_output.clone();
        for (idx, &(offset, fan_in, fan_out)) in layers.iter().enumerate().rev() {
            let input = &cache.activations[idx];
            let dw = delta.transpose() * input;
            for o in 0..fan_out {
                for i in 0..fan_in {
                    grads[offset + o * fan_in + i] = dw[(o, i)];
                }
                grads[offset + fan_in * fan_out + o] = delta.column(o).sum();
            }
            if idx == 0 {
                break;
            }
            let w = RealMatrix::from_row_slice(
                fan_out,
                fan_in,
                &self.params[offset..offset + fan_in * fan_out],
            );
            let mut prev = &delta * w;
            // input of this layer is the tanh output of the previous one
            prev.zip_apply(input, |d, h| *d *= 1.0 - h * h);
            delta = prev;
        }
        grads
    }
}

pub(crate) fn split_output(out: &[f64], rank: usize, complex_output: bool) -> Vec<Complex64> {
    (0..rank)
        .map(|j| Complex64::new(out[j], if complex_output { out[rank + j] } else { 0.0 }))
        .collect()
}

pub fn eval_spectral_net(net: &SpectralNet, omega: f64) -> Vec<Complex64> {
    net.eval(omega)
}
