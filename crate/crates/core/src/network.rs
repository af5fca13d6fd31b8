//! Layered prox-affine networks `T = T_m ∘ … ∘ T_1` with
//! `T_i x = R_i(W_i x + b_i)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::operator::ActivationOperator;

/// One affine-then-activate layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weight: DMatrix<f64>,
    bias: DVector<f64>,
    activation: ActivationOperator,
    weight_norm: f64,
    bias_norm: f64,
}

impl Layer {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>, activation: ActivationOperator) -> Result<Self> {
        if weight.nrows() == 0 || weight.ncols() == 0 {
            return Err(Error::InvalidParameter("weight matrix must be nonempty".into()));
        }
        if bias.len() != weight.nrows() {
            return Err(Error::DimensionMismatch { expected: weight.nrows(), found: bias.len() });
        }
        if activation.dim() != weight.nrows() {
            return Err(Error::DimensionMismatch {
                expected: weight.nrows(),
                found: activation.dim(),
            });
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("weights and biases must be finite".into()));
        }
        let weight_norm = spectral_norm(&weight);
        let bias_norm = bias.norm();
        Ok(Self { weight, bias, activation, weight_norm, bias_norm })
    }

    pub fn dim_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.weight.nrows()
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.weight
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn activation(&self) -> &ActivationOperator {
        &self.activation
    }

    /// Spectral norm of the weight, cached at construction.
    pub fn weight_norm(&self) -> f64 {
        self.weight_norm
    }

    pub fn bias_norm(&self) -> f64 {
        self.bias_norm
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim_in() {
            return Err(Error::DimensionMismatch { expected: self.dim_in(), found: x.len() });
        }
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut pre = &self.weight * x;
        pre += &self.bias;
        self.activation.apply_unchecked(&pre)
    }
}

/// A nonempty chain of layers whose output space equals its input space.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let (first, last) = match (layers.first(), layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidParameter("a network needs at least one layer".into())),
        };
        for pair in layers.windows(2) {
            if pair[1].dim_in() != pair[0].dim_out() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].dim_out(),
                    found: pair[1].dim_in(),
                });
            }
        }
        if last.dim_out() != first.dim_in() {
            return Err(Error::DimensionMismatch {
                expected: first.dim_in(),
                found: last.dim_out(),
            });
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim_in()
    }

    /// Output dimensions `N_1, …, N_m` of the layers.
    pub fn layer_dims(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::dim_out).collect()
    }

    pub fn weights(&self) -> Vec<DMatrix<f64>> {
        self.layers.iter().map(|l| l.weight.clone()).collect()
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut cur = self.layers[0].apply_unchecked(x);
        for layer in &self.layers[1..] {
            cur = layer.apply_unchecked(&cur);
        }
        cur
    }

    /// `(T_1 x, T_2 T_1 x, …, T x)`.
    pub fn layer_outputs(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.check_input(x)?;
        let mut outs: Vec<DVector<f64>> = Vec::with_capacity(self.depth());
        for layer in &self.layers {
            let next = layer.apply_unchecked(outs.last().unwrap_or(x));
            outs.push(next);
        }
        Ok(outs)
    }

    /// Upper bound on `‖(T_to ∘ … ∘ T_from) x‖` for `‖x‖ = x_norm`, layers
    /// numbered from 1.
    pub fn output_norm_bound(&self, from: usize, to: usize, x_norm: f64) -> Result<f64> {
        if from < 1 || from > to || to > self.depth() {
            return Err(Error::LayerRange { from, to, layers: self.depth() });
        }
        if !(x_norm >= 0.0) {
            return Err(Error::InvalidParameter(format!("norm must be nonnegative, got {x_norm}")));
        }
        // Horner form of ‖x‖∏‖W_k‖ + Σ_q ‖b_q‖∏_{k>q}‖W_k‖
        let mut bound = x_norm;
        for layer in &self.layers[from - 1..to] {
            bound = layer.weight_norm * bound + layer.bias_norm;
        }
        Ok(bound)
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }
}
