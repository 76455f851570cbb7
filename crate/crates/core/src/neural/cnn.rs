//! Convolutional classifier: stride-1 same-padded convolutions with ReLU,
//! flatten, fully connected layers with ReLU between them, softmax output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::NeuralError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub channels: usize,
    pub kernel: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input_h: usize,
    pub input_w: usize,
    pub conv: Vec<ConvSpec>,
    /// Widths of the fully connected layers; the last one is the softmax output.
    pub dense: Vec<usize>,
}

impl Arch {
    /// Three 3x3 convolutions (8/16/16 channels), dense 64/32/2.
    pub fn reference(rows: usize, window: usize) -> Self {
        Arch {
            input_h: rows,
            input_w: window + 1,
            conv: [8, 16, 16]
                .into_iter()
                .map(|channels| ConvSpec { channels, kernel: 3 })
                .collect(),
            dense: vec![64, 32, 2],
        }
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [1, self.input_h, self.input_w]
    }

    pub fn outputs(&self) -> usize {
        *self.dense.last().unwrap_or(&0)
    }

    fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::InvalidParam(m.to_string()));
        if self.input_h == 0 || self.input_w == 0 {
            return bad("input dimensions must be positive");
        }
        if self.conv.iter().any(|c| c.channels == 0 || c.kernel == 0) {
            return bad("conv channels and kernels must be positive");
        }
        if self.dense.is_empty() || self.dense.contains(&0) {
            return bad("need at least one non-empty fully connected layer");
        }
        if self.outputs() < 2 {
            return bad("softmax output needs at least two classes");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<S> {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    /// `[out_c][in_c][kernel][kernel]`
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    pub n_in: usize,
    pub n_out: usize,
    /// `[n_out][n_in]`
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<S> {
    arch: Arch,
    seed: u64,
    pub convs: Vec<Conv2d<S>>,
    pub dense: Vec<Dense<S>>,
}

/// Activations kept from a forward pass for backpropagation.
struct Activations<S> {
    /// `conv[0]` is the input, `conv[i + 1]` the output of conv layer `i`.
    conv: Vec<Vec<S>>,
    /// `dense[0]` is the flattened conv output; the last entry holds logits.
    dense: Vec<Vec<S>>,
}

impl<S: Scalar> CnnModel<S> {
    /// Uniform He initialization, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn new(arch: &Arch, seed: u64) -> Result<Self, NeuralError> {
        let mut model = Self::zeros(arch)?;
        model.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [S], fan_in: usize| {
            let a = (6.0 / fan_in as f64).sqrt();
            for v in w {
                *v = S::from_f64_lossy(rng.gen_range(-a..a));
            }
        };
        for c in &mut model.convs {
            fill(&mut c.weight, c.in_c * c.kernel * c.kernel);
        }
        for d in &mut model.dense {
            fill(&mut d.weight, d.n_in);
        }
        Ok(model)
    }

    pub fn zeros(arch: &Arch) -> Result<Self, NeuralError> {
        arch.validate()?;
        let mut convs = Vec::with_capacity(arch.conv.len());
        let mut in_c = 1;
        for spec in &arch.conv {
            convs.push(Conv2d {
                in_c,
                out_c: spec.channels,
                kernel: spec.kernel,
                weight: vec![S::zero(); spec.channels * in_c * spec.kernel * spec.kernel],
                bias: vec![S::zero(); spec.channels],
            });
            in_c = spec.channels;
        }
        let mut n_in = in_c * arch.input_h * arch.input_w;
        let dense = arch
            .dense
            .iter()
            .map(|&n_out| {
                let d = Dense {
                    n_in,
                    n_out,
                    weight: vec![S::zero(); n_out * n_in],
                    bias: vec![S::zero(); n_out],
                };
                n_in = n_out;
                d
            })
            .collect();
        Ok(CnnModel {
            arch: arch.clone(),
            seed: 0,
            convs,
            dense,
        })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    /// Parameter slices in a fixed order: each conv (weight, bias), then each dense (weight, bias).
    pub fn params(&self) -> Vec<&[S]> {
        let mut out = Vec::with_capacity(2 * (self.convs.len() + self.dense.len()));
        for c in &self.convs {
            out.push(c.weight.as_slice());
            out.push(c.bias.as_slice());
        }
        for d in &self.dense {
            out.push(d.weight.as_slice());
            out.push(d.bias.as_slice());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [S]> {
        let mut out = Vec::with_capacity(2 * (self.convs.len() + self.dense.len()));
        for c in &mut self.convs {
            out.push(c.weight.as_mut_slice());
            out.push(c.bias.as_mut_slice());
        }
        for d in &mut self.dense {
            out.push(d.weight.as_mut_slice());
            out.push(d.bias.as_mut_slice());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, input: &Tensor<S>) -> Result<(), NeuralError> {
        let want = self.arch.input_shape();
        if input.shape() != want {
            return Err(NeuralError::Shape {
                expected: want.to_vec(),
                got: input.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn run(&self, input: &Tensor<S>) -> Activations<S> {
        let (h, w) = (self.arch.input_h, self.arch.input_w);
        let mut conv = Vec::with_capacity(self.convs.len() + 1);
        conv.push(input.data().to_vec());
        for layer in &self.convs {
            let mut out = vec![S::zero(); layer.out_c * h * w];
            conv_forward(layer, conv.last().unwrap(), h, w, &mut out);
            conv.push(out);
        }
        let mut dense = Vec::with_capacity(self.dense.len() + 1);
        dense.push(conv.last().unwrap().clone());
        let last = self.dense.len() - 1;
        for (i, layer) in self.dense.iter().enumerate() {
            let mut out = vec![S::zero(); layer.n_out];
            dense_forward(layer, dense.last().unwrap(), &mut out, i != last);
            dense.push(out);
        }
        Activations { conv, dense }
    }

    /// Softmax class probabilities.
    pub fn forward(&self, input: &Tensor<S>) -> Result<Vec<S>, NeuralError> {
        self.check_input(input)?;
        let acts = self.run(input);
        Ok(softmax(acts.dense.last().unwrap()))
    }

    /// Cross-entropy loss against `target` (a probability vector) and its
    /// gradient, accumulated into `grad`.
    pub fn loss_and_grad(&self, input: &Tensor<S>, target: &[S], grad: &mut CnnModel<S>) -> Result<S, NeuralError> {
        self.check_input(input)?;
        if target.len() != self.arch.outputs() {
            return Err(NeuralError::Shape {
                expected: vec![self.arch.outputs()],
                got: vec![target.len()],
            });
        }
        let acts = self.run(input);
        let logits = acts.dense.last().unwrap();
        let log_p = log_softmax(logits);
        let loss = -target.iter().zip(&log_p).map(|(&t, &lp)| t * lp).sum::<S>();

        // d(loss)/d(logits) = p - t
        let mut delta: Vec<S> = log_p.iter().zip(target).map(|(&lp, &t)| lp.exp() - t).collect();
        let last = self.dense.len() - 1;
        for i in (0..self.dense.len()).rev() {
            let layer = &self.dense[i];
            if i != last {
                relu_mask(&mut delta, &acts.dense[i + 1]);
            }
            let mut din = vec![S::zero(); layer.n_in];
            dense_backward(layer, &acts.dense[i], &delta, &mut grad.dense[i], &mut din);
            delta = din;
        }
        let (h, w) = (self.arch.input_h, self.arch.input_w);
        for i in (0..self.convs.len()).rev() {
            let layer = &self.convs[i];
            relu_mask(&mut delta, &acts.conv[i + 1]);
            // the input gradient of the first layer is never used
            let mut din = if i > 0 {
                vec![S::zero(); layer.in_c * h * w]
            } else {
                Vec::new()
            };
            conv_backward(layer, &acts.conv[i], h, w, &delta, &mut grad.convs[i], &mut din);
            delta = din;
        }
        Ok(loss)
    }
}

pub fn forward<S: Scalar>(model: &CnnModel<S>, input: &Tensor<S>) -> Result<Vec<S>, NeuralError> {
    model.forward(input)
}

fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<S>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

fn relu_mask<S: Scalar>(delta: &mut [S], post: &[S]) {
    for (d, &a) in delta.iter_mut().zip(post) {
        if a <= S::zero() {
            *d = S::zero();
        }
    }
}

/// Output positions `p` whose input `p + off - pad` lies in `0..len`.
#[inline]
fn valid_outputs(off: usize, pad: usize, len: usize) -> std::ops::Range<usize> {
    pad.saturating_sub(off)..(len + pad).saturating_sub(off).min(len)
}

fn conv_forward<S: Scalar>(layer: &Conv2d<S>, input: &[S], h: usize, w: usize, out: &mut [S]) {
    let k = layer.kernel;
    let pad = (k - 1) / 2;
    let plane = h * w;
    for oc in 0..layer.out_c {
        let dst = &mut out[oc * plane..(oc + 1) * plane];
        dst.iter_mut().for_each(|v| *v = layer.bias[oc]);
        for ic in 0..layer.in_c {
            let src = &input[ic * plane..(ic + 1) * plane];
            for ky in 0..k {
                // output rows y whose input row y + ky - pad exists
                let ys = valid_outputs(ky, pad, h);
                for kx in 0..k {
                    let wv = layer.weight[((oc * layer.in_c + ic) * k + ky) * k + kx];
                    let xs = valid_outputs(kx, pad, w);
                    if xs.is_empty() {
                        continue;
                    }
                    for y in ys.clone() {
                        let iy = y + ky - pad;
                        let o = &mut dst[y * w + xs.start..y * w + xs.end];
                        let i = &src[iy * w + xs.start + kx - pad..iy * w + xs.end + kx - pad];
                        for (ov, &iv) in o.iter_mut().zip(i) {
                            *ov += wv * iv;
                        }
                    }
                }
            }
        }
        dst.iter_mut().for_each(|v| *v = v.max(S::zero()));
    }
}

fn conv_backward<S: Scalar>(
    layer: &Conv2d<S>,
    input: &[S],
    h: usize,
    w: usize,
    dpre: &[S],
    grad: &mut Conv2d<S>,
    din: &mut [S],
) {
    let k = layer.kernel;
    let pad = (k - 1) / 2;
    let plane = h * w;
    let want_din = !din.is_empty();
    for oc in 0..layer.out_c {
        let d = &dpre[oc * plane..(oc + 1) * plane];
        grad.bias[oc] += d.iter().copied().sum::<S>();
        for ic in 0..layer.in_c {
            let src = &input[ic * plane..(ic + 1) * plane];
            for ky in 0..k {
                let ys = valid_outputs(ky, pad, h);
                for kx in 0..k {
                    let wi = ((oc * layer.in_c + ic) * k + ky) * k + kx;
                    let wv = layer.weight[wi];
                    let xs = valid_outputs(kx, pad, w);
                    if xs.is_empty() {
                        continue;
                    }
                    let mut acc = S::zero();
                    for y in ys.clone() {
                        let iy = y + ky - pad;
                        let dr = &d[y * w + xs.start..y * w + xs.end];
                        let lo = iy * w + xs.start + kx - pad;
                        let hi = iy * w + xs.end + kx - pad;
                        for (&dv, &iv) in dr.iter().zip(&src[lo..hi]) {
                            acc += dv * iv;
                        }
                        if want_din {
                            let di = &mut din[ic * plane + lo..ic * plane + hi];
                            for (dst, &dv) in di.iter_mut().zip(dr) {
                                *dst += wv * dv;
                            }
                        }
                    }
                    grad.weight[wi] += acc;
                }
            }
        }
    }
}

fn dense_forward<S: Scalar>(layer: &Dense<S>, input: &[S], out: &mut [S], relu: bool) {
    for (o, slot) in out.iter_mut().enumerate() {
        let row = &layer.weight[o * layer.n_in..(o + 1) * layer.n_in];
        let mut acc = layer.bias[o];
        for (wv, &x) in row.iter().zip(input) {
            acc += *wv * x;
        }
        *slot = if relu { acc.max(S::zero()) } else { acc };
    }
}

fn dense_backward<S: Scalar>(layer: &Dense<S>, input: &[S], dpre: &[S], grad: &mut Dense<S>, din: &mut [S]) {
    for (o, &d) in dpre.iter().enumerate() {
        if d == S::zero() {
            continue;
        }
        grad.bias[o] += d;
        let base = o * layer.n_in;
        let grow = &mut grad.weight[base..base + layer.n_in];
        let wrow = &layer.weight[base..base + layer.n_in];
        for i in 0..layer.n_in {
            grow[i] += d * input[i];
            din[i] += d * wrow[i];
        }
    }
}
