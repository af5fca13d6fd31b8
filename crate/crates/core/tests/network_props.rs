mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proxnet::{ActivationOperator, Layer, Network, ScalarActivation};
use rand::Rng;

use common::*;

fn net_from_seed(seed: u64, depth: usize, max_dim: usize, max_norm: f64) -> Network {
    let mut r = rng(seed);
    random_net(&mut r, depth, max_dim, (0.0, max_norm))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_respects_output_bound(seed in any::<u64>(), depth in 1usize..=4, scale in 0.1f64..5.0) {
        let net = net_from_seed(seed, depth, 8, 2.0);
        let mut r = rng(seed ^ 1);
        let x = uniform_vector(&mut r, net.dim(), scale);
        let y = net.forward(&x).unwrap();
        let bound = net.output_norm_bound(1, depth, x.norm()).unwrap();
        prop_assert!(y.norm() <= bound * (1.0 + 1e-12) + 1e-12, "{} > {}", y.norm(), bound);
    }

    #[test]
    fn intermediate_outputs_respect_partial_bounds(seed in any::<u64>(), depth in 2usize..=4) {
        let net = net_from_seed(seed, depth, 6, 1.5);
        let mut r = rng(seed ^ 2);
        let x = uniform_vector(&mut r, net.dim(), 3.0);
        let outs = net.layer_outputs(&x).unwrap();
        for (i, out) in outs.iter().enumerate() {
            let bound = net.output_norm_bound(1, i + 1, x.norm()).unwrap();
            prop_assert!(out.norm() <= bound * (1.0 + 1e-12) + 1e-12);
        }
        prop_assert_eq!(outs.last().unwrap(), &net.forward(&x).unwrap());
    }

    #[test]
    fn nonexpansive_weights_give_nonexpansive_network(seed in any::<u64>(), depth in 1usize..=4) {
        let net = net_from_seed(seed, depth, 8, 1.0);
        let mut r = rng(seed ^ 3);
        for _ in 0..20 {
            let x = uniform_vector(&mut r, net.dim(), 5.0);
            let y = uniform_vector(&mut r, net.dim(), 5.0);
            let d = (net.forward(&x).unwrap() - net.forward(&y).unwrap()).norm();
            prop_assert!(d <= (&x - &y).norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_input_with_zero_biases_stays_zero(seed in any::<u64>(), depth in 1usize..=4) {
        let mut r = rng(seed);
        let dim = r.random_range(1..=6);
        let layers = (0..depth)
            .map(|_| {
                let w = matrix_with_norm(&mut r, dim, dim, 1.5);
                let act = ScalarActivation::catalog()[r.random_range(0..14)].clone();
                Layer::new(w, DVector::zeros(dim), ActivationOperator::uniform(act, dim).unwrap()).unwrap()
            })
            .collect();
        let net = Network::new(layers).unwrap();
        prop_assert!(net.forward(&DVector::zeros(dim)).unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn open_chain_is_rejected() {
    let a = uniform_layer(DMatrix::zeros(3, 2), DVector::zeros(3), ScalarActivation::RELU);
    let b = uniform_layer(DMatrix::zeros(4, 3), DVector::zeros(4), ScalarActivation::RELU);
    assert!(Network::new(vec![a, b]).is_err());
}

#[test]
fn wrong_input_dimension_is_rejected() {
    let net = identity_net(3, &[1.0, 0.5], ScalarActivation::TANH);
    assert!(net.forward(&DVector::zeros(2)).is_err());
    assert!(net.output_norm_bound(2, 1, 1.0).is_err());
    assert!(net.output_norm_bound(1, 3, 1.0).is_err());
}
