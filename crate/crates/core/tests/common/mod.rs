#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proxnet::{ActivationOperator, Layer, Network, ScalarActivation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest singular value straight from nalgebra's SVD.
pub fn svd_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random_range(-half_width..=half_width))
}

pub fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = uniform_vector(rng, dim, 1.0);
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Random matrix rescaled to the given spectral norm.
pub fn matrix_with_norm(rng: &mut ChaCha8Rng, rows: usize, cols: usize, norm: f64) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0));
        let n = svd_norm(&m);
        if n > 1e-9 {
            return m * (norm / n);
        }
    }
}

pub fn uniform_layer(w: DMatrix<f64>, b: DVector<f64>, act: ScalarActivation) -> Layer {
    let d = w.nrows();
    Layer::new(w, b, ActivationOperator::uniform(act, d).unwrap()).unwrap()
}

pub fn identity_net(dim: usize, factors: &[f64], act: ScalarActivation) -> Network {
    Network::new(
        factors
            .iter()
            .map(|&t| uniform_layer(DMatrix::identity(dim, dim) * t, DVector::zeros(dim), act.clone()))
            .collect(),
    )
    .unwrap()
}

pub fn affine_1d(w: f64, b: f64) -> Network {
    Network::new(vec![uniform_layer(
        DMatrix::from_element(1, 1, w),
        DVector::from_element(1, b),
        ScalarActivation::IDENTITY,
    )])
    .unwrap()
}

/// Random closed chain with separable catalog activations. Weight norms
/// are drawn from `norms`.
pub fn random_net(rng: &mut ChaCha8Rng, depth: usize, max_dim: usize, norms: (f64, f64)) -> Network {
    let catalog = ScalarActivation::catalog();
    let mut dims: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=max_dim)).collect();
    dims.push(dims[0]);
    let layers = (0..depth)
        .map(|i| {
            let (cols, rows) = (dims[i], dims[i + 1]);
            let norm = rng.random_range(norms.0..=norms.1);
            let w = matrix_with_norm(rng, rows, cols, norm);
            let b = uniform_vector(rng, rows, 1.0);
            let acts = (0..rows).map(|_| catalog[rng.random_range(0..catalog.len())].clone()).collect();
            Layer::new(w, b, ActivationOperator::separable(acts).unwrap()).unwrap()
        })
        .collect();
    Network::new(layers).unwrap()
}
