use std::fmt;

use crate::error::{Error, Result};

/// Dense row-major array of `f64` with an explicit shape.
///
/// Network tensors carry the batch as their leading dimension; layer shapes
/// (see [`crate::nn::Layer::output_shape`]) describe a single sample.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                context: "tensor construction".into(),
                expected: shape,
                actual: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading dimension.
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Number of elements per batch entry.
    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.sample_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.sample_len();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape("reshape", shape, &self.shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Index and value of the first non-finite element, if any.
    pub fn first_non_finite(&self) -> Option<(usize, f64)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i, self.data[i]))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Tensor, factor: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("add_scaled", &self.shape, &other.shape));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Stacks tensors along the batch dimension.
    pub fn concat_batch(parts: &[&Tensor]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidConfig("concat of zero tensors".into()))?;
        let tail = &first.shape[1..];
        let mut batch = 0;
        let mut data = Vec::new();
        for p in parts {
            if &p.shape[1..] != tail {
                return Err(Error::shape("concat_batch", &first.shape, &p.shape));
            }
            batch += p.batch();
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![batch];
        shape.extend_from_slice(tail);
        Ok(Self { shape, data })
    }

    /// Rows `start..end` of the batch dimension.
    pub fn slice_batch(&self, start: usize, end: usize) -> Self {
        let n = self.sample_len();
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Self {
            shape,
            data: self.data[start * n..end * n].to_vec(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        write!(f, "Tensor{:?} ", self.shape)?;
        let head: Vec<_> = self.data.iter().take(PREVIEW).collect();
        if self.data.len() > PREVIEW {
            write!(f, "{head:?}..")
        } else {
            write!(f, "{head:?}")
        }
    }
}
