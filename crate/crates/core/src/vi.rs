//! Block formulation of network fixed points: a point `(x_1, …, x_m)` with
//! `x_i = T_i x_{i−1}` (cyclically, `x_0 = x_m`) solves the associated
//! variational inequality. Also assembles the block shift and weight
//! operators and evaluates the finite-dimensional existence tests.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_symmetric_eigenvalue, parse_row, smallest_singular_value};
use crate::network::Network;

/// Threshold on the smallest singular value for a trivial kernel.
pub const KERNEL_TOL: f64 = 1e-10;
/// Slack on the eigenvalue bound of the monotonicity test.
pub const MONOTONE_TOL: f64 = 1e-10;

const NORM_SLACK: f64 = 1e-12;

/// One vector per layer output space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPoint {
    components: Vec<DVector<f64>>,
}

impl BlockPoint {
    pub fn new(components: Vec<DVector<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("a block point needs at least one component".into()));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[DVector<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<DVector<f64>> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.len()).collect()
    }

    /// Stacks the components into one vector.
    pub fn concat(&self) -> DVector<f64> {
        DVector::from_iterator(self.dims().iter().sum(), self.components.iter().flat_map(|c| c.iter().copied()))
    }

    pub fn from_concat(v: &DVector<f64>, dims: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().sum();
        if v.len() != total {
            return Err(Error::DimensionMismatch { expected: total, found: v.len() });
        }
        let mut offset = 0;
        let components = dims
            .iter()
            .map(|&d| {
                let c = v.rows(offset, d).into_owned();
                offset += d;
                c
            })
            .collect();
        Self::new(components)
    }

    /// One whitespace-separated line per component; blank and `#` lines
    /// are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut components = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = parse_row(line).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            components.push(DVector::from_vec(row));
        }
        if components.is_empty() {
            return Err(Error::Parse("block point has no components".into()));
        }
        Self::new(components)
    }

    fn check_against(&self, net: &Network) -> Result<()> {
        if self.len() != net.depth() {
            return Err(Error::DimensionMismatch { expected: net.depth(), found: self.len() });
        }
        for (c, l) in self.components.iter().zip(net.layers()) {
            if c.len() != l.dim_out() {
                return Err(Error::DimensionMismatch { expected: l.dim_out(), found: c.len() });
            }
        }
        Ok(())
    }
}

impl fmt::Display for BlockPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            let row: Vec<String> = c.iter().map(|v| format!("{v}")).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViResidual {
    /// `‖x_i − T_i x_{i−1}‖` for each layer.
    pub per_layer: Vec<f64>,
    pub max: f64,
}

pub fn vi_residual(net: &Network, p: &BlockPoint) -> Result<ViResidual> {
    p.check_against(net)?;
    let image = block_map_unchecked(net, p);
    let per_layer: Vec<f64> = p.components.iter().zip(&image).map(|(x, t)| (x - t).norm()).collect();
    let max = per_layer.iter().copied().fold(0.0, f64::max);
    Ok(ViResidual { per_layer, max })
}

/// `(T_1 x_m, T_2 T_1 x_m, …, T x_m)`, with the last slot replaced by `x_m`
/// itself.
pub fn lift_fixed_point(net: &Network, xm: &DVector<f64>) -> Result<BlockPoint> {
    let mut outs = net.layer_outputs(xm)?;
    *outs.last_mut().expect("network has layers") = xm.clone();
    BlockPoint::new(outs)
}

/// `p ↦ (T_1 x_m, T_2 x_1, …, T_m x_{m−1})`, the prox of the bias-shifted
/// potential applied to `W S p`.
pub fn block_map(net: &Network, p: &BlockPoint) -> Result<BlockPoint> {
    p.check_against(net)?;
    BlockPoint::new(block_map_unchecked(net, p))
}

fn block_map_unchecked(net: &Network, p: &BlockPoint) -> Vec<DVector<f64>> {
    let m = p.len();
    net.layers()
        .iter()
        .enumerate()
        .map(|(i, layer)| layer.apply_unchecked(&p.components[(i + m - 1) % m]))
        .collect()
}

/// Explicit matrices of the block shift `S` and block weight `W` on the
/// stacked space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperators {
    dims: Vec<usize>,
    shift: DMatrix<f64>,
    weights: DMatrix<f64>,
}

impl BlockOperators {
    pub fn new(net: &Network) -> Self {
        let dims = net.layer_dims();
        let m = dims.len();
        let total: usize = dims.iter().sum();
        let offsets = offsets(&dims);
        // shifted ordering (x_m, x_1, …, x_{m−1})
        let shifted_order: Vec<usize> = (0..m).map(|k| (k + m - 1) % m).collect();
        let mut shifted_offsets = vec![0; m];
        let mut acc = 0;
        for &b in &shifted_order {
            shifted_offsets[b] = acc;
            acc += dims[b];
        }
        let mut shift = DMatrix::zeros(total, total);
        for b in 0..m {
            for j in 0..dims[b] {
                shift[(shifted_offsets[b] + j, offsets[b] + j)] = 1.0;
            }
        }
        let mut weights = DMatrix::zeros(total, total);
        for (i, layer) in net.layers().iter().enumerate() {
            let src = (i + m - 1) % m;
            weights
                .view_mut((offsets[i], shifted_offsets[src]), (dims[i], dims[src]))
                .copy_from(layer.weight());
        }
        Self { dims, shift, weights }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn shift(&self) -> &DMatrix<f64> {
        &self.shift
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// `W ∘ S` as a product of the two stored matrices.
    pub fn composed(&self) -> DMatrix<f64> {
        &self.weights * &self.shift
    }
}

/// The block-circulant matrix with block `(i, i−1)` equal to `W_i`,
/// assembled directly.
pub fn circulant(net: &Network) -> DMatrix<f64> {
    let dims = net.layer_dims();
    let m = dims.len();
    let offsets = offsets(&dims);
    let total: usize = dims.iter().sum();
    let mut out = DMatrix::zeros(total, total);
    for (i, layer) in net.layers().iter().enumerate() {
        let src = (i + m - 1) % m;
        out.view_mut((offsets[i], offsets[src]), (dims[i], dims[src])).copy_from(layer.weight());
    }
    out
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    /// `Id − W S` is monotone.
    pub monotone: bool,
    /// Largest eigenvalue of `WS + (WS)ᵀ`.
    pub max_eigenvalue: f64,
    /// `2 − max_eigenvalue`.
    pub margin: f64,
}

pub fn monotonicity_check(net: &Network) -> MonotonicityReport {
    let ws = circulant(net);
    let sym = &ws + ws.transpose();
    let max_eigenvalue = max_symmetric_eigenvalue(&sym).expect("block matrix is square");
    MonotonicityReport { monotone: max_eigenvalue <= 2.0 + MONOTONE_TOL, max_eigenvalue, margin: 2.0 - max_eigenvalue }
}

/// Sufficient conditions for a nonempty fixed-point set, each evaluated
/// independently. The first two also need an averagedness certificate, the
/// last three need [`monotonicity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceFlags {
    /// Range of the network operator is bounded.
    pub bounded_range: bool,
    /// Radius of a ball containing the range, when known.
    pub range_radius: Option<f64>,
    /// Some layer potential has bounded domain.
    pub some_domain_bounded: bool,
    /// Weights nonexpansive and `S − Wᵀ` injective.
    pub kernel_condition: bool,
    /// Weights nonexpansive and every conjugate potential finite.
    pub conjugate_condition: bool,
    /// Every layer potential has bounded domain.
    pub all_domains_bounded: bool,
    /// Smallest singular value of `S − Wᵀ`.
    pub kernel_singular_value: f64,
}

pub fn existence_flags(net: &Network) -> ExistenceFlags {
    let layers = net.layers();
    let depth = net.depth();
    // bound on ‖T_j y‖ for every y, then pushed through the later layers
    let range_radius = layers
        .iter()
        .enumerate()
        .filter_map(|(j, l)| {
            let from_activation = l.activation().range_radius();
            let from_zero = (l.weight_norm() == 0.0).then(|| l.bias_norm());
            let r = match (from_activation, from_zero) {
                (Some(a), Some(b)) => a.min(b),
                (a, b) => a.or(b)?,
            };
            if j + 1 == depth {
                Some(r)
            } else {
                net.output_norm_bound(j + 2, depth, r).ok()
            }
        })
        .reduce(f64::min);
    let nonexpansive = layers.iter().all(|l| l.weight_norm() <= 1.0 + NORM_SLACK);
    let ops = BlockOperators::new(net);
    let kernel_singular_value = smallest_singular_value(&(ops.shift() - ops.weights().transpose()));
    ExistenceFlags {
        bounded_range: range_radius.is_some(),
        range_radius,
        some_domain_bounded: layers.iter().any(|l| l.activation().range_bounded()),
        kernel_condition: nonexpansive && kernel_singular_value > KERNEL_TOL,
        conjugate_condition: nonexpansive && layers.iter().all(|l| l.activation().conjugate_full_domain()),
        all_domains_bounded: layers.iter().all(|l| l.activation().range_bounded()),
        kernel_singular_value,
    }
}
