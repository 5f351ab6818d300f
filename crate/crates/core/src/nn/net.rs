use rand::Rng;

use super::{Layer, Param, Tensor};
use crate::error::{Error, Result};

/// An ordered stack of layers with a checked shape chain.
///
/// Parameters are named `{net}.{index}.{kind}.{weight|bias}` so every name is
/// unique and stable across rebuilds of the same architecture.
#[derive(Clone, Debug)]
pub struct Net {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    /// `shapes[i]` is the per-sample input shape of layer `i`; the last entry
    /// is the net's output shape.
    shapes: Vec<Vec<usize>>,
    trained_batch: Option<usize>,
}

impl Net {
    pub fn new(name: impl Into<String>, input_shape: &[usize]) -> Self {
        Self {
            name: name.into(),
            input_shape: input_shape.to_vec(),
            layers: Vec::new(),
            shapes: vec![input_shape.to_vec()],
            trained_batch: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("shapes is never empty")
    }

    /// Per-sample shape entering layer `i`.
    pub fn shape_at(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn push(&mut self, mut layer: Layer) -> Result<()> {
        let out = layer.kind().output_shape(self.output_shape()).map_err(|e| match e {
            Error::ShapeMismatch { expected, actual, .. } => Error::ShapeMismatch {
                context: format!("{} layer {} ({})", self.name, self.layers.len(), layer.kind().tag()),
                expected,
                actual,
            },
            other => other,
        })?;
        layer.set_label(format!("{}.{}.{}", self.name, self.layers.len(), layer.kind().tag()));
        self.layers.push(layer);
        self.shapes.push(out);
        Ok(())
    }

    pub fn with(mut self, layer: Layer) -> Result<Self> {
        self.push(layer)?;
        Ok(self)
    }

    /// Appends the layers of `tail`, which must accept this net's output.
    pub fn append(&mut self, tail: Net) -> Result<()> {
        if tail.input_shape() != self.output_shape() {
            return Err(Error::shape(
                format!("composing {} onto {}", tail.name, self.name),
                self.output_shape(),
                tail.input_shape(),
            ));
        }
        for layer in tail.layers {
            self.push(layer)?;
        }
        Ok(())
    }

    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in &mut self.layers {
            layer.init(rng);
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            let mut expected = vec![x.shape().first().copied().unwrap_or(0)];
            expected.extend_from_slice(&self.input_shape);
            return Err(Error::shape(format!("{} input", self.name), &expected, x.shape()));
        }
        Ok(())
    }

    fn run(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, train)?;
        }
        if let Some((index, value)) = h.first_non_finite() {
            return Err(Error::NonFinite {
                layer: format!("{}.output", self.name),
                index,
                value,
            });
        }
        Ok(h)
    }

    /// Inference pass; leaves no backward state.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        if let Some((index, value)) = h.first_non_finite() {
            return Err(Error::NonFinite {
                layer: format!("{}.output", self.name),
                index,
                value,
            });
        }
        Ok(h)
    }

    /// Inference through the first `layers` layers only.
    pub fn forward_prefix(&self, x: &Tensor, layers: usize) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in self.layers.iter().take(layers) {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    /// Forward pass that caches what [`Net::backward`] needs.
    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        self.trained_batch = None;
        let out = self.run(x, true)?;
        self.trained_batch = Some(x.batch());
        Ok(out)
    }

    /// Back-propagates `grad_out` through the cached pass, accumulating into
    /// every parameter gradient, and returns the gradient for the input.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let batch = self
            .trained_batch
            .take()
            .ok_or_else(|| Error::BackwardWithoutForward(self.name.clone()))?;
        let mut expected = vec![batch];
        expected.extend_from_slice(self.output_shape());
        if grad_out.shape() != expected.as_slice() {
            for layer in &mut self.layers {
                layer.clear_cache();
            }
            return Err(Error::shape(format!("{} upstream gradient", self.name), &expected, grad_out.shape()));
        }
        let mut g = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            layer.zero_grad();
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.layers.iter().flat_map(|l| l.params().iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut().iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|p| p.value.len()).sum()
    }

    /// Copies parameter values from `other`, which must share the architecture.
    pub fn load_params_from(&mut self, other: &Net) -> Result<()> {
        let theirs: Vec<&Param> = other.params().collect();
        let ours: Vec<&mut Param> = self.params_mut().collect();
        if theirs.len() != ours.len() {
            return Err(Error::InvalidConfig(format!(
                "parameter count mismatch: {} vs {}",
                ours.len(),
                theirs.len()
            )));
        }
        for (dst, src) in ours.into_iter().zip(theirs) {
            if dst.value.shape() != src.value.shape() {
                return Err(Error::shape(format!("loading {}", dst.name), dst.value.shape(), src.value.shape()));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_net() -> Net {
        Net::new("t", &[1, 4, 4])
            .with(Layer::conv(1, 2, 1))
            .unwrap()
            .with(Layer::act(Activation::Elu))
            .unwrap()
            .with(Layer::new(LayerKind::MaxPool2x2))
            .unwrap()
            .with(Layer::new(LayerKind::Flatten))
            .unwrap()
            .with(Layer::dense(8, 3))
            .unwrap()
    }

    #[test]
    fn shape_chain_and_names() {
        let net = small_net();
        assert_eq!(net.output_shape(), &[3]);
        let names: Vec<_> = net.params().map(|p| p.name.clone()).collect();
        assert_eq!(names, ["t.0.conv.weight", "t.0.conv.bias", "t.4.dense.weight", "t.4.dense.bias"]);
        assert_eq!(net.param_count(), 2 * 9 + 2 + 8 * 3 + 3);
    }

    #[test]
    fn rejects_broken_chain() {
        let mut net = Net::new("t", &[1, 4, 4]);
        assert!(net.push(Layer::dense(10, 2)).is_err());
        assert!(net.push(Layer::conv(3, 2, 1)).is_err());
    }

    #[test]
    fn zero_linear_net_outputs_zero() {
        let net = Net::new("lin", &[3]).with(Layer::dense(3, 2)).unwrap();
        let x = Tensor::from_fn(&[4, 3], |i| i as f64 - 5.0);
        assert!(net.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_without_forward_and_shape_drift() {
        let mut net = small_net();
        assert!(matches!(net.backward(&Tensor::zeros(&[1, 3])), Err(Error::BackwardWithoutForward(_))));
        net.init(&mut ChaCha8Rng::seed_from_u64(1));
        net.forward_train(&Tensor::zeros(&[2, 1, 4, 4])).unwrap();
        assert!(matches!(net.backward(&Tensor::zeros(&[3, 3])), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut a = small_net();
        a.init(&mut rng);
        let x = Tensor::from_fn(&[2, 1, 4, 4], |i| (i as f64).cos());
        let y1 = a.forward(&x).unwrap();
        let y2 = a.forward_train(&x).unwrap();
        assert_eq!(y1, y2);
    }

    #[test]
    fn rejects_nan_input_with_layer_name() {
        let net = small_net();
        let mut x = Tensor::zeros(&[1, 1, 4, 4]);
        x.data_mut()[5] = f64::NAN;
        match net.forward(&x) {
            Err(Error::NonFinite { layer, index, .. }) => {
                assert_eq!(layer, "t.0.conv");
                assert_eq!(index, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
