//! Averagedness certificates for layered networks.
//!
//! A chain of weights `W_1, …, W_L` with `W = W_L ⋯ W_1` square is checked
//! against three sufficient conditions (a vanishing factor, a norm bound and
//! a one-parameter η test). The smallest grid value of α passing one of them
//! certifies that the network operator is α-averaged.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, spectral_norm};
use crate::network::Network;

/// Default α grid spacing on `[1/2, 1]`.
pub const DEFAULT_ALPHA_STEP: f64 = 1e-3;
/// Default number of η grid points.
pub const DEFAULT_ETA_GRID: usize = 1000;
/// Sign patterns are enumerated when the stacked input has at most this
/// many coordinates.
pub const SIGN_PATTERN_LIMIT: usize = 16;

const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionUsed {
    ZeroFactor,
    NormBound,
    EtaCondition,
    None,
}

impl ConditionUsed {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionUsed::ZeroFactor => "zero_factor",
            ConditionUsed::NormBound => "norm_bound",
            ConditionUsed::EtaCondition => "eta_condition",
            ConditionUsed::None => "none",
        }
    }
}

impl fmt::Display for ConditionUsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Smallest certified α, absent when no condition passes.
    pub alpha: Option<f64>,
    pub condition_used: ConditionUsed,
    /// `θ_0, …, θ_L` for the `L` network weights.
    pub theta: Vec<f64>,
    pub eta: Option<f64>,
    /// Smallest eigenvalue of the symmetric part of the product weight.
    pub mu: Option<f64>,
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.alpha {
            Some(a) => write!(f, "alpha={a}")?,
            None => write!(f, "alpha=none")?,
        }
        write!(f, " condition={}", self.condition_used)?;
        let theta: Vec<String> = self.theta.iter().map(|t| format!("{t}")).collect();
        write!(f, "\ntheta={}", theta.join(","))?;
        if let Some(eta) = self.eta {
            write!(f, "\neta={eta}")?;
        }
        if let Some(mu) = self.mu {
            write!(f, "\nmu={mu}")?;
        }
        Ok(())
    }
}

/// Sampled lower bound on the mixed-norm quantity of the weight chain.
#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub lower_bound: f64,
    pub samples: usize,
    /// Blocks `x_0, …, x_{L-1}` attaining `lower_bound`.
    pub witness: Vec<DVector<f64>>,
}

/// Outcome of the per-layer β search.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerwiseOutcome {
    Certified(Vec<f64>),
    /// 1-based index of the first layer with no admissible β.
    Failed { layer: usize },
}

/// Norms and products shared by all conditions.
struct ChainAnalysis {
    /// `composite[i-1][k] = ‖W_i ⋯ W_{k+1}‖` for `0 ≤ k < i`.
    composite: Vec<Vec<f64>>,
    /// `tails[k] = W_L ⋯ W_{k+1}` for `0 ≤ k < L`.
    tails: Vec<DMatrix<f64>>,
    theta: Vec<f64>,
}

impl ChainAnalysis {
    fn new(weights: &[DMatrix<f64>]) -> Result<Self> {
        check_chain(weights)?;
        let depth = weights.len();
        let mut composite = Vec::with_capacity(depth);
        let mut tails = Vec::new();
        for i in 1..=depth {
            let mut row = vec![0.0; i];
            let mut product = weights[i - 1].clone();
            for k in (0..i).rev() {
                row[k] = spectral_norm(&product);
                if i == depth {
                    tails.push(product.clone());
                }
                if k > 0 {
                    product *= &weights[k - 1];
                }
            }
            composite.push(row);
        }
        tails.reverse();
        let mut theta = vec![1.0];
        for row in &composite {
            let next = row.iter().zip(&theta).map(|(n, t)| n * t).sum();
            theta.push(next);
        }
        Ok(Self { composite, tails, theta })
    }

    fn depth(&self) -> usize {
        self.composite.len()
    }

    fn product(&self) -> &DMatrix<f64> {
        &self.tails[0]
    }

    fn product_norm(&self) -> f64 {
        self.composite[self.depth() - 1][0]
    }

    fn theta_last(&self) -> f64 {
        self.theta[self.depth()]
    }
}

fn check_chain(weights: &[DMatrix<f64>]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter("weight chain is empty".into()));
    }
    for pair in weights.windows(2) {
        if pair[1].ncols() != pair[0].nrows() {
            return Err(Error::DimensionMismatch { expected: pair[0].nrows(), found: pair[1].ncols() });
        }
    }
    Ok(())
}

fn check_closed(weights: &[DMatrix<f64>]) -> Result<()> {
    let (first, last) = (&weights[0], &weights[weights.len() - 1]);
    if last.nrows() != first.ncols() {
        return Err(Error::DimensionMismatch { expected: first.ncols(), found: last.nrows() });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [1/2, 1], got {alpha}")));
    }
    Ok(())
}

fn leq(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + SLACK * rhs.abs().max(1.0)
}

fn is_zero(m: &DMatrix<f64>) -> bool {
    m.iter().all(|&v| v == 0.0)
}

/// `θ_0 = 1, θ_i = Σ_{k<i} θ_k ‖W_i ⋯ W_{k+1}‖` with composite norms taken
/// on explicit products.
pub fn theta_sequence(weights: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    Ok(ChainAnalysis::new(weights)?.theta)
}

/// Infimum of `⟨Wx, x⟩` over the unit sphere.
pub fn mu_lower(w: &DMatrix<f64>) -> Result<f64> {
    min_symmetric_eigenvalue(w)
}

/// Norm-bound test `‖W − 2^L(1−α)Id‖ − ‖W‖ + 2θ_L ≤ 2^L α`.
pub fn check_norm_bound(weights: &[DMatrix<f64>], alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    let chain = ChainAnalysis::new(weights)?;
    check_closed(weights)?;
    Ok(norm_bound_holds(&chain, alpha))
}

fn norm_bound_holds(chain: &ChainAnalysis, alpha: f64) -> bool {
    let scale = 2f64.powi(chain.depth() as i32);
    let w = chain.product();
    let shifted = w - DMatrix::identity(w.nrows(), w.ncols()) * (scale * (1.0 - alpha));
    let lhs = spectral_norm(&shifted) - chain.product_norm() + 2.0 * chain.theta_last();
    leq(lhs, scale * alpha)
}

/// η test: searches a uniform grid on `[0, α/((1−α)θ_L)]`, refined once
/// around the best point, and returns the first admissible η.
pub fn check_eta_condition(weights: &[DMatrix<f64>], alpha: f64, eta_grid: usize) -> Result<(bool, Option<f64>)> {
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Err(Error::InvalidParameter("the eta condition requires alpha < 1".into()));
    }
    if eta_grid < 2 {
        return Err(Error::InvalidParameter(format!("eta grid needs at least 2 points, got {eta_grid}")));
    }
    if let Some(i) = weights.iter().position(is_zero) {
        return Err(Error::InvalidParameter(format!("weight {} is zero", i + 1)));
    }
    let chain = ChainAnalysis::new(weights)?;
    check_closed(weights)?;
    let mu = mu_lower(chain.product())?;
    let eta = eta_search(&chain, alpha, mu, eta_grid);
    Ok((eta.is_some(), eta))
}

fn eta_search(chain: &ChainAnalysis, alpha: f64, mu: f64, grid: usize) -> Option<f64> {
    let depth = chain.depth() as i32;
    let theta = chain.theta_last();
    if !leq(theta, 2f64.powi(depth) * alpha) {
        return None;
    }
    let w = chain.product();
    let w_norm = chain.product_norm();
    let gap = theta - w_norm;
    let rhs = 2f64.powi(depth - 1) * (2.0 * alpha - 1.0) + (1.0 - alpha) * mu;
    // ‖Id − ηW‖ − η‖W‖ ≥ −1 bounds the left side from below
    if !leq(alpha * theta - (1.0 - alpha) * gap, rhs) {
        return None;
    }
    let id = DMatrix::<f64>::identity(w.nrows(), w.ncols());
    let excess = |eta: f64| {
        let spread = spectral_norm(&(&id - w * eta)) - eta * w_norm;
        alpha * theta + (1.0 - alpha) * spread * gap - rhs
    };
    let admissible = |e: f64| e <= SLACK * rhs.abs().max(1.0);
    let eta_max = alpha / ((1.0 - alpha) * theta);
    let step = eta_max / (grid - 1) as f64;
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..grid {
        let eta = if k + 1 == grid { eta_max } else { k as f64 * step };
        let e = excess(eta);
        if admissible(e) {
            return Some(eta);
        }
        if e < best.0 {
            best = (e, k);
        }
    }
    let lo = best.1.saturating_sub(1) as f64 * step;
    let hi = ((best.1 + 1) as f64 * step).min(eta_max);
    let fine = (hi - lo) / (grid - 1) as f64;
    (0..grid).map(|k| lo + k as f64 * fine).find(|&eta| admissible(excess(eta)))
}

fn grid_points(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
    }
    let count = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
    Ok((0..=count).map(|k| lo + (hi - lo) * k as f64 / count as f64).collect())
}

/// Smallest α on a grid of spacing at most `alpha_step` over `[1/2, 1]`
/// certified by one of the sufficient conditions. At equal α the vanishing
/// factor wins over the norm bound, which wins over the η test.
pub fn certify_network(net: &Network, alpha_step: f64) -> Result<Certificate> {
    certify_weights(&net.weights(), alpha_step)
}

/// [`certify_network`] on a bare weight chain with square product.
pub fn certify_weights(weights: &[DMatrix<f64>], alpha_step: f64) -> Result<Certificate> {
    let alphas = grid_points(0.5, 1.0, alpha_step)?;
    let chain = ChainAnalysis::new(weights)?;
    check_closed(weights)?;
    let mu = mu_lower(chain.product())?;
    let mut cert = Certificate {
        alpha: None,
        condition_used: ConditionUsed::None,
        theta: chain.theta.clone(),
        eta: None,
        mu: Some(mu),
    };
    if weights.iter().any(is_zero) {
        cert.alpha = Some(0.5);
        cert.condition_used = ConditionUsed::ZeroFactor;
        return Ok(cert);
    }
    for &alpha in &alphas {
        if norm_bound_holds(&chain, alpha) {
            cert.alpha = Some(alpha);
            cert.condition_used = ConditionUsed::NormBound;
            return Ok(cert);
        }
        if alpha < 1.0 {
            if let Some(eta) = eta_search(&chain, alpha, mu, DEFAULT_ETA_GRID) {
                cert.alpha = Some(alpha);
                cert.condition_used = ConditionUsed::EtaCondition;
                cert.eta = Some(eta);
                return Ok(cert);
            }
        }
    }
    Ok(cert)
}

/// Per-layer search for the smallest β strictly inside `(0, 1)` with
/// `‖W_i − 2(1−β)Id‖ + ‖W_i‖ ≤ 2β`.
pub fn certify_layerwise(net: &Network, beta_step: f64) -> Result<LayerwiseOutcome> {
    let dim = net.dim();
    for layer in net.layers() {
        if layer.dim_in() != dim || layer.dim_out() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: layer.dim_out().max(layer.dim_in()) });
        }
    }
    let grid = grid_points(0.0, 1.0, beta_step)?;
    let interior = &grid[1..grid.len() - 1];
    let id = DMatrix::<f64>::identity(dim, dim);
    let mut betas = Vec::with_capacity(net.depth());
    for (i, layer) in net.layers().iter().enumerate() {
        let w = layer.weight();
        let found = interior.iter().copied().find(|&beta| {
            let lhs = spectral_norm(&(w - &id * (2.0 * (1.0 - beta)))) + layer.weight_norm();
            leq(lhs, 2.0 * beta)
        });
        match found {
            Some(beta) => betas.push(beta),
            None => return Ok(LayerwiseOutcome::Failed { layer: i + 1 }),
        }
    }
    Ok(LayerwiseOutcome::Certified(betas))
}

/// Lower bound on `sup (‖Mx − 2^L(1−α)x_0‖ + ‖Mx‖)/(2^L α)` over blocks
/// with `max_i ‖x_i‖ ≤ 1`, where `Mx = Σ_{i<L} θ_i (W_L ⋯ W_{i+1}) x_i`.
/// A value above 1 refutes the mixed-norm condition; anything else is
/// inconclusive.
pub fn m_norm_lower_bound(weights: &[DMatrix<f64>], alpha: f64, samples: usize, seed: u64) -> Result<NormEstimate> {
    check_alpha(alpha)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    let chain = ChainAnalysis::new(weights)?;
    check_closed(weights)?;
    let scale = 2f64.powi(chain.depth() as i32);
    let blocks: Vec<(usize, DMatrix<f64>)> = chain
        .tails
        .iter()
        .zip(&chain.theta)
        .map(|(tail, t)| (tail.ncols(), tail * *t))
        .collect();
    let value = |x: &[DVector<f64>]| {
        let mx = blocks.iter().zip(x).fold(DVector::zeros(blocks[0].1.nrows()), |acc, ((_, m), xi)| acc + m * xi);
        ((&mx - &x[0] * (scale * (1.0 - alpha))).norm() + mx.norm()) / (scale * alpha)
    };

    let mut best = NormEstimate { lower_bound: f64::NEG_INFINITY, samples: 0, witness: Vec::new() };
    let consider = |x: Vec<DVector<f64>>, best: &mut NormEstimate| {
        let v = value(&x);
        best.samples += 1;
        if v > best.lower_bound {
            best.lower_bound = v;
            best.witness = x;
        }
    };

    let total: usize = blocks.iter().map(|(d, _)| d).sum();
    if total <= SIGN_PATTERN_LIMIT {
        for mask in 0u32..(1 << total) {
            let mut offset = 0;
            let x = blocks
                .iter()
                .map(|(d, _)| {
                    let v = DVector::from_fn(*d, |j, _| if mask >> (offset + j) & 1 == 1 { -1.0 } else { 1.0 });
                    offset += d;
                    v / (*d as f64).sqrt()
                })
                .collect();
            consider(x, &mut best);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let x = blocks
            .iter()
            .map(|(d, _)| loop {
                let v = DVector::from_fn(*d, |_, _| rng.random_range(-1.0..=1.0));
                let n = v.norm();
                if n > 1e-12 {
                    break v / n;
                }
            })
            .collect();
        consider(x, &mut best);
    }
    Ok(best)
}
