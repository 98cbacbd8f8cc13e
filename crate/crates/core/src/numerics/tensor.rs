//! Dense row-major tensors.

use crate::scalar::Scalar;

use super::NumericError;

/// Dense numeric array with an explicit shape.
///
/// Rank 1 (`[n]`) and rank 2 (`[rows, cols]`) cover everything the encoder
/// and objectives need; there is no broadcasting beyond the bias-add op on
/// the tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S: Scalar> {
    shape: Vec<usize>,
    data: Vec<S>,
    /// Whether this tensor should collect gradients when placed on a tape.
    pub requires_grad: bool,
}

impl<S: Scalar> Tensor<S> {
    /// Build a tensor from a shape and a flat row-major buffer.
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self, NumericError> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(NumericError::ShapeMismatch {
                op: "new",
                detail: format!("shape {shape:?} wants {expect} values, got {}", data.len()),
            });
        }
        Ok(Self {
            shape,
            data,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![S::zero(); n],
            requires_grad: false,
        }
    }

    pub fn scalar(v: S) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
            requires_grad: false,
        }
    }

    pub fn vector(values: Vec<S>) -> Self {
        Self {
            shape: vec![values.len()],
            data: values,
            requires_grad: false,
        }
    }

    /// Build a `rows x cols` matrix from a flat row-major buffer.
    pub fn matrix(rows: usize, cols: usize, data: Vec<S>) -> Result<Self, NumericError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of rows when viewed as a matrix; a vector counts as one row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    /// Number of columns when viewed as a matrix; a vector is one row wide.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            1 => self.shape[0],
            _ => self.data.len(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Result<S, NumericError> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(NumericError::NonScalar {
                shape: self.shape.clone(),
            })
        }
    }

    pub fn get2(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols() + c]
    }

    pub fn set2(&mut self, r: usize, c: usize, v: S) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[S] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Convert elementwise to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::from_double(v.to_double())).collect(),
            requires_grad: self.requires_grad,
        }
    }
}
