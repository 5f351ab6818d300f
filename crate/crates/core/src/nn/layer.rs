use std::fmt;

use rand::Rng;

use super::ops;
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Elu,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Elu => {
                if v > 0.0 {
                    v
                } else {
                    v.exp_m1()
                }
            }
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => sigmoid(v),
        }
    }

    /// Derivative from the pre-activation `v` and the activation output `y`.
    fn derivative(self, v: f64, y: f64) -> f64 {
        match self {
            Activation::Elu => {
                if v > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Activation::Elu => "elu",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Elementwise activation over a whole tensor.
///
/// Rejects non-finite input, reporting the offending flat index.
pub fn activation(kind: Activation, x: &Tensor) -> Result<Tensor> {
    if let Some((index, value)) = x.first_non_finite() {
        return Err(Error::NonFinite {
            layer: kind.tag().into(),
            index,
            value,
        });
    }
    Ok(x.map(|v| kind.apply(v)))
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Dense { inputs: usize, outputs: usize },
    Conv2d { in_channels: usize, out_channels: usize, stride: usize },
    MaxPool2x2,
    Upsample2x2,
    Activation(Activation),
    Flatten,
    /// Reshape each sample to the given per-sample shape.
    Reshape(Vec<usize>),
}

impl LayerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LayerKind::Dense { .. } => "dense",
            LayerKind::Conv2d { .. } => "conv",
            LayerKind::MaxPool2x2 => "maxpool",
            LayerKind::Upsample2x2 => "upsample",
            LayerKind::Activation(a) => a.tag(),
            LayerKind::Flatten => "flatten",
            LayerKind::Reshape(_) => "reshape",
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let numel: usize = input.iter().product();
        match self {
            LayerKind::Dense { inputs, outputs } => {
                if numel != *inputs {
                    return Err(Error::shape("dense layer input", &[*inputs], input));
                }
                Ok(vec![*outputs])
            }
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                stride,
            } => match *input {
                [c, h, w] if c == *in_channels => {
                    if *stride != 1 && *stride != 2 {
                        return Err(Error::InvalidConfig(format!("conv stride {stride} not in {{1, 2}}")));
                    }
                    Ok(vec![
                        *out_channels,
                        ops::conv_output_size(h, *stride),
                        ops::conv_output_size(w, *stride),
                    ])
                }
                _ => Err(Error::shape("conv layer input", &[*in_channels, 0, 0], input)),
            },
            LayerKind::MaxPool2x2 => match *input {
                [c, h, w] if h % 2 == 0 && w % 2 == 0 => Ok(vec![c, h / 2, w / 2]),
                _ => Err(Error::InvalidConfig(format!(
                    "maxpool2x2 needs (c, even h, even w), got {input:?}"
                ))),
            },
            LayerKind::Upsample2x2 => match *input {
                [c, h, w] => Ok(vec![c, 2 * h, 2 * w]),
                _ => Err(Error::shape("upsample layer input", &[0, 0, 0], input)),
            },
            LayerKind::Activation(_) => Ok(input.to_vec()),
            LayerKind::Flatten => Ok(vec![numel]),
            LayerKind::Reshape(target) => {
                if target.iter().product::<usize>() != numel {
                    return Err(Error::shape("reshape layer", target, input));
                }
                Ok(target.clone())
            }
        }
    }

    fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerKind::Dense { inputs, outputs } => {
                vec![("weight", vec![outputs, inputs]), ("bias", vec![outputs])]
            }
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                ..
            } => vec![
                ("weight", vec![out_channels, in_channels, ops::KERNEL, ops::KERNEL]),
                ("bias", vec![out_channels]),
            ],
            _ => Vec::new(),
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv2d { in_channels, .. } => in_channels * ops::KERNEL * ops::KERNEL,
            _ => 0,
        }
    }
}

/// A named trainable tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

#[derive(Clone, Debug)]
enum Cache {
    Input(Tensor),
    Activation { input: Tensor, output: Tensor },
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Shape(Vec<usize>),
}

#[derive(Clone)]
pub struct Layer {
    kind: LayerKind,
    label: String,
    params: Vec<Param>,
    cache: Option<Cache>,
}

impl fmt::Debug for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Layer")
            .field("label", &self.label)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Layer {
    /// Creates a layer with zeroed parameters.
    pub fn new(kind: LayerKind) -> Self {
        let params = kind
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| Param {
                name: name.to_string(),
                value: Tensor::zeros(&shape),
                grad: Tensor::zeros(&shape),
            })
            .collect();
        Self {
            label: kind.tag().to_string(),
            kind,
            params,
            cache: None,
        }
    }

    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Self::new(LayerKind::Dense { inputs, outputs })
    }

    pub fn conv(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        Self::new(LayerKind::Conv2d {
            in_channels,
            out_channels,
            stride,
        })
    }

    pub fn act(a: Activation) -> Self {
        Self::new(LayerKind::Activation(a))
    }

    pub fn kind(&self) -> &LayerKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub(crate) fn set_label(&mut self, label: String) {
        for p in &mut self.params {
            let leaf = p.name.rsplit('.').next().unwrap_or(&p.name).to_string();
            p.name = format!("{label}.{leaf}");
        }
        self.label = label;
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    /// Replaces the weight and bias of a dense or conv layer.
    pub fn with_params(mut self, weight: Tensor, bias: Tensor) -> Result<Self> {
        let shapes = self.kind.param_shapes();
        if shapes.len() != 2 {
            return Err(Error::InvalidConfig(format!("{} layer has no parameters", self.kind.tag())));
        }
        for ((_, expected), given) in shapes.iter().zip([&weight, &bias]) {
            if given.shape() != expected.as_slice() {
                return Err(Error::shape("layer parameter", expected, given.shape()));
            }
        }
        self.params[0].value = weight;
        self.params[1].value = bias;
        Ok(self)
    }

    /// Fan-in scaled uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let fan_in = self.kind.fan_in();
        if fan_in == 0 {
            return;
        }
        let bound = (3.0 / fan_in as f64).sqrt();
        for p in &mut self.params {
            if p.name.ends_with("weight") {
                for v in p.value.data_mut() {
                    *v = rng.random_range(-bound..bound);
                }
            } else {
                p.value.data_mut().fill(0.0);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    /// Forward pass over a batched tensor; with `train` the inputs needed by
    /// [`Layer::backward`] are retained.
    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        let (out, cache) = self.compute(x, train)?;
        if train {
            self.cache = cache;
        }
        Ok(out)
    }

    /// Inference-only forward pass.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.compute(x, false)?.0)
    }

    fn compute(&self, x: &Tensor, train: bool) -> Result<(Tensor, Option<Cache>)> {
        if let Some((index, value)) = x.first_non_finite() {
            return Err(Error::NonFinite {
                layer: self.label.clone(),
                index,
                value,
            });
        }
        let (out, cache) = match &self.kind {
            LayerKind::Dense { .. } => {
                let y = ops::dense_forward(&self.params[0].value, &self.params[1].value, x)?;
                (y, train.then(|| Cache::Input(x.clone())))
            }
            LayerKind::Conv2d { stride, .. } => {
                let y = ops::conv2d_forward(&self.params[0].value, &self.params[1].value, x, *stride)?;
                (y, train.then(|| Cache::Input(x.clone())))
            }
            LayerKind::MaxPool2x2 => {
                let (y, argmax) = ops::maxpool2x2_forward(x)?;
                let cache = train.then(|| Cache::Pool {
                    input_shape: x.shape().to_vec(),
                    argmax,
                });
                (y, cache)
            }
            LayerKind::Upsample2x2 => (
                ops::upsample2x2_forward(x)?,
                train.then(|| Cache::Shape(x.shape().to_vec())),
            ),
            LayerKind::Activation(a) => {
                let y = x.map(|v| a.apply(v));
                let cache = train.then(|| Cache::Activation {
                    input: x.clone(),
                    output: y.clone(),
                });
                (y, cache)
            }
            LayerKind::Flatten => {
                let n = x.sample_len();
                let y = x.clone().reshape(&[x.batch(), n])?;
                (y, train.then(|| Cache::Shape(x.shape().to_vec())))
            }
            LayerKind::Reshape(target) => {
                let mut shape = vec![x.batch()];
                shape.extend_from_slice(target);
                let y = x.clone().reshape(&shape)?;
                (y, train.then(|| Cache::Shape(x.shape().to_vec())))
            }
        };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the layer input. Consumes the cached forward state.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::BackwardWithoutForward(self.label.clone()))?;
        match (&self.kind, cache) {
            (LayerKind::Dense { .. }, Cache::Input(x)) => {
                let (w, rest) = self.params.split_at_mut(1);
                let (w, b) = (&mut w[0], &mut rest[0]);
                ops::dense_backward(&w.value, &x, grad_out, &mut w.grad, &mut b.grad)
            }
            (LayerKind::Conv2d { stride, .. }, Cache::Input(x)) => {
                let (w, rest) = self.params.split_at_mut(1);
                let (w, b) = (&mut w[0], &mut rest[0]);
                ops::conv2d_backward(&w.value, &x, *stride, grad_out, &mut w.grad, &mut b.grad)
            }
            (LayerKind::MaxPool2x2, Cache::Pool { input_shape, argmax }) => {
                ops::maxpool2x2_backward(&input_shape, &argmax, grad_out)
            }
            (LayerKind::Upsample2x2, Cache::Shape(shape)) => ops::upsample2x2_backward(&shape, grad_out),
            (LayerKind::Activation(a), Cache::Activation { input, output }) => {
                if grad_out.shape() != input.shape() {
                    return Err(Error::shape("activation upstream gradient", input.shape(), grad_out.shape()));
                }
                let mut g = grad_out.clone();
                for ((gv, &v), &y) in g.data_mut().iter_mut().zip(input.data()).zip(output.data()) {
                    *gv *= a.derivative(v, y);
                }
                Ok(g)
            }
            (LayerKind::Flatten | LayerKind::Reshape(_), Cache::Shape(shape)) => {
                if grad_out.len() != shape.iter().product::<usize>() {
                    return Err(Error::shape("reshape upstream gradient", &shape, grad_out.shape()));
                }
                grad_out.clone().reshape(&shape)
            }
            _ => unreachable!("cache variant always matches the layer kind"),
        }
    }
}
