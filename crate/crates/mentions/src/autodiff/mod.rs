//! Reverse-mode automatic differentiation and the neural building blocks
//! shared by every model in the crate.
//!
//! The design is a define-by-run tape: forward calls on [`Tape`] record an
//! append-only sequence of operations, [`Tape::backward`] replays them in
//! reverse to accumulate gradients. Everything is 64-bit; gradient checks
//! against central finite differences are the correctness backbone
//! (see [`check`]).

mod ops;
mod tape;

pub mod check;
pub mod nn;
pub mod optim;

pub use ops::{matvec_into, sigmoid_scalar, softmax_in_place};
pub use tape::{Gradients, NodeId, Tape};

/// Dense n-dimensional array of `f64`, row-major.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(
            n,
            data.len(),
            "tensor shape {:?} implies {} elements, got {}",
            shape,
            n,
            data.len()
        );
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single element of a scalar tensor.
    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    /// Rows of a matrix-shaped tensor.
    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() on tensor of shape {:?}", self.shape);
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() on tensor of shape {:?}", self.shape);
        self.shape[1]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
