//! Benchmark fixtures.

use gsbp_core::{BridgeProblem, Graph, HopfColePair, Matrix, Metric, PhaseState, Potential, Vector};
use nalgebra::dvector;

/// Euclidean metric with `F(q) = |q|^2 / 2` in `n` dimensions.
pub fn flat(n: usize) -> (Metric, Potential) {
    (Metric::Euclidean, Potential::quadratic(Matrix::identity(n, n), Vector::zeros(n)).unwrap())
}

/// Entropy on an unweighted cycle with `n` vertices.
pub fn cycle_entropy(n: usize) -> (Metric, Potential) {
    (Metric::GraphWasserstein(Graph::cycle(n).unwrap()), Potential::entropy(1.0).unwrap())
}

/// A slightly perturbed uniform density on `n` vertices, at rest. The uniform
/// density is an unstable fixed point, so keep horizons short on large cycles.
pub fn near_uniform(metric: &Metric, potential: &Potential, n: usize) -> PhaseState {
    let mut q = Vector::from_fn(n, |i, _| 1.0 + 0.02 * ((i % 3) as f64 - 1.0));
    q /= q.sum();
    PhaseState::new(metric, potential, q, Vector::zeros(n), 0.0).unwrap()
}

pub fn two_node_bridge(dt: f64) -> BridgeProblem {
    let metric = Metric::GraphWasserstein(Graph::two_node(1.0).unwrap());
    BridgeProblem::new(metric, Potential::entropy(1.0).unwrap(), dvector![0.3, 0.7], dvector![0.7, 0.3], 1.0, dt)
        .unwrap()
}

pub fn entropy_pair(n: usize) -> HopfColePair {
    let eta = Vector::from_fn(n, |i, _| 0.2 + 0.01 * i as f64);
    let eta_star = Vector::from_fn(n, |i, _| 0.3 - 0.01 * i as f64);
    HopfColePair::new(eta, eta_star).unwrap()
}
