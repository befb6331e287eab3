//! The generalized Hopf–Cole change of variables `(q, p) -> (eta, eta*)`:
//!
//! ```text
//! f(eta)  = (p + f(q)) / 2
//! f(eta*) = (-p + f(q)) / 2
//! ```
//!
//! with `f = grad F`, and its inverse `q = f^{-1}(f(eta) + f(eta*))`,
//! `p = f(eta) - f(eta*)`. In the new variables the Hamiltonian becomes
//! `K = -2 f(eta).G(q)f(eta*)` and the flow reads
//! `eta' = -sigma dK/deta*`, `eta*' = sigma^T dK/deta` with
//! `sigma = h(eta)^{-1} h(q) h(eta*)^{-1} / 2`.
//!
//! For the entropy `F = gamma sum(rho log rho - rho)` this is
//! `eta = sqrt(rho) exp(S / 2 gamma)` and `sigma = I / (2 gamma)`.
//!
//! On graphs the transform sees the momentum as given, not its gauge class:
//! adding `c` to `S` multiplies the entropy `eta` by `exp(c / 2 gamma)`.

use crate::dynamics::{flow_field, hamiltonian, split as unstack, stack, PhaseState};
use crate::error::{Error, Result};
use crate::integrator::{jacobian, midpoint_step, step_count, MidpointOptions, StepError};
use crate::metrics::{Matrix, Metric, Vector};
use crate::potentials::Potential;

#[derive(Debug, Clone, PartialEq)]
pub struct HopfColePair {
    pub eta: Vector,
    pub eta_star: Vector,
}

impl HopfColePair {
    pub fn new(eta: Vector, eta_star: Vector) -> Result<Self> {
        if eta.len() != eta_star.len() {
            return Err(Error::Dimension { expected: eta.len(), got: eta_star.len() });
        }
        Ok(HopfColePair { eta, eta_star })
    }

    /// The pair with `eta` and `eta*` exchanged.
    pub fn swapped(&self) -> Self {
        HopfColePair { eta: self.eta_star.clone(), eta_star: self.eta.clone() }
    }

    pub(crate) fn pack(&self) -> Vector {
        stack(&self.eta, &self.eta_star)
    }

    pub(crate) fn unpack(z: &Vector) -> Self {
        let (eta, eta_star) = unstack(z);
        HopfColePair { eta, eta_star }
    }
}

pub fn to_eta(potential: &Potential, s: &PhaseState) -> Result<HopfColePair> {
    if s.q.len() != s.p.len() {
        return Err(Error::Dimension { expected: s.q.len(), got: s.p.len() });
    }
    let f = potential.gradient(&s.q)?;
    let eta = potential.gradient_inverse(&((&s.p + &f) * 0.5))?;
    let eta_star = potential.gradient_inverse(&((&f - &s.p) * 0.5))?;
    Ok(HopfColePair { eta, eta_star })
}

/// Inverse transform. The momentum is returned as computed, without gauge fixing.
pub fn from_eta(potential: &Potential, pair: &HopfColePair) -> Result<PhaseState> {
    let (a, b) = half_gradients(potential, pair)?;
    let q = potential.gradient_inverse(&(&a + &b))?;
    Ok(PhaseState { q, p: a - b, t: 0.0 })
}

fn half_gradients(potential: &Potential, pair: &HopfColePair) -> Result<(Vector, Vector)> {
    if pair.eta.len() != pair.eta_star.len() {
        return Err(Error::Dimension { expected: pair.eta.len(), got: pair.eta_star.len() });
    }
    Ok((potential.gradient(&pair.eta)?, potential.gradient(&pair.eta_star)?))
}

/// `sigma = h(eta)^{-1} h(q) h(eta*)^{-1} / 2`; does not involve the metric.
pub fn sigma(potential: &Potential, pair: &HopfColePair) -> Result<Matrix> {
    let q = from_eta(potential, pair)?.q;
    let hq = potential.hessian(&q)?;
    Ok(potential.hessian_inverse(&pair.eta)? * hq * potential.hessian_inverse(&pair.eta_star)? * 0.5)
}

/// `K(eta, eta*) = -2 f(eta).G(q)f(eta*)`, equal to `H` at `from_eta(pair)`.
pub fn hamiltonian_k(metric: &Metric, potential: &Potential, pair: &HopfColePair) -> Result<f64> {
    let (a, b) = half_gradients(potential, pair)?;
    let q = potential.gradient_inverse(&(&a + &b))?;
    Ok(-2.0 * metric.form(&q, &a, &b)?)
}

/// Partial derivatives `(dK/deta, dK/deta*)`, by the chain rule through
/// `q(eta, eta*)` with `dq/deta* = h(q)^{-1} h(eta*)`.
pub fn k_gradients(metric: &Metric, potential: &Potential, pair: &HopfColePair) -> Result<(Vector, Vector)> {
    let (a, b) = half_gradients(potential, pair)?;
    let q = potential.gradient_inverse(&(&a + &b))?;
    let g = metric.inverse_metric(&q)?;
    let w = potential.hessian_inverse(&q)? * metric.form_gradient(&q, &a, &b)?;
    let d_eta = potential.hessian(&pair.eta)? * (&w + &g * &b) * -2.0;
    let d_eta_star = potential.hessian(&pair.eta_star)? * (&w + &g * &a) * -2.0;
    Ok((d_eta, d_eta_star))
}

/// `(eta', eta*')` of the transformed flow.
pub fn eta_flow_field(metric: &Metric, potential: &Potential, pair: &HopfColePair) -> Result<(Vector, Vector)> {
    let s = sigma(potential, pair)?;
    let (d_eta, d_eta_star) = k_gradients(metric, potential, pair)?;
    Ok((-(&s * d_eta_star), s.transpose() * d_eta))
}

/// A trajectory of the transformed flow.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTrajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub pairs: Vec<HopfColePair>,
    pub k: Vec<f64>,
}

impl EtaTrajectory {
    pub fn last(&self) -> &HopfColePair {
        &self.pairs[self.pairs.len() - 1]
    }

    pub fn k_drift(&self) -> f64 {
        self.k.iter().map(|k| (k - self.k[0]).abs()).fold(0.0, f64::max)
    }
}

/// Integrates the transformed flow with the implicit midpoint rule.
pub fn integrate_eta(
    metric: &Metric,
    potential: &Potential,
    pair0: &HopfColePair,
    t_end: f64,
    dt: f64,
) -> Result<EtaTrajectory> {
    let steps = step_count(t_end, dt)?;
    let field = |z: &Vector| -> Result<Vector> {
        let (e, es) = eta_flow_field(metric, potential, &HopfColePair::unpack(z))?;
        Ok(stack(&e, &es))
    };
    let opts = MidpointOptions::default();
    let mut pairs = vec![pair0.clone()];
    let mut k = vec![hamiltonian_k(metric, potential, pair0)?];
    let mut times = vec![0.0];
    let mut z = pair0.pack();
    for step in 0..steps {
        let t = (step + 1) as f64 * dt;
        z = midpoint_step(&field, &z, dt, &opts).map_err(|e| match e {
            StepError::DomainExit(reason) => Error::DomainExit { time: t - dt, reason },
            StepError::NoConvergence(residual) => Error::StepFailure { step, residual },
        })?;
        let pair = HopfColePair::unpack(&z);
        k.push(
            hamiltonian_k(metric, potential, &pair)
                .map_err(|e| Error::DomainExit { time: t, reason: e.to_string() })?,
        );
        pairs.push(pair);
        times.push(t);
    }
    Ok(EtaTrajectory { dt, times, pairs, k })
}

/// Central-difference Jacobian of `(eta, eta*) -> (q, p)`.
pub fn from_eta_jacobian(potential: &Potential, pair: &HopfColePair, step: f64) -> Result<Matrix> {
    let map = |z: &Vector| -> Result<Vector> {
        let s = from_eta(potential, &HopfColePair::unpack(z))?;
        Ok(stack(&s.q, &s.p))
    };
    jacobian(&map, &pair.pack(), step)
}

/// Outcome of [`symplectic_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticResidual {
    /// `max |J X_K - X_H o s|`.
    pub field: f64,
    /// `max |J^T Omega J - B^{-T}| / max(1, max |B^{-T}|)` with
    /// `B = [[0, -sigma], [sigma^T, 0]]`.
    pub form: f64,
}

/// Numerical check that the transform carries the `K`-flow to the `H`-flow
/// and pulls the canonical form `Omega = [[0, I], [-I, 0]]` back to the
/// structure defined by `sigma`. `step` is the finite-difference step of the
/// Jacobian `J` of `from_eta`.
pub fn symplectic_residual(
    metric: &Metric,
    potential: &Potential,
    pair: &HopfColePair,
    step: f64,
) -> Result<SymplecticResidual> {
    let n = pair.eta.len();
    let j = from_eta_jacobian(potential, pair, step)?;
    let (e, es) = eta_flow_field(metric, potential, pair)?;
    let pushed = &j * stack(&e, &es);
    let state = from_eta(potential, pair)?;
    let (qd, pd) = flow_field(metric, potential, &state)?;
    let field = (pushed - stack(&qd, &pd)).amax();

    let s = sigma(potential, pair)?;
    let s_inv = s.clone().try_inverse().ok_or_else(|| Error::Singular("sigma is not invertible".into()))?;
    let mut omega = Matrix::zeros(2 * n, 2 * n);
    let mut target = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    target.view_mut((0, n), (n, n)).copy_from(&(-s_inv.transpose()));
    target.view_mut((n, 0), (n, n)).copy_from(&s_inv);
    let form = (j.transpose() * omega * j - &target).amax() / target.amax().max(1.0);
    Ok(SymplecticResidual { field, form })
}

/// `|K(pair) - H(from_eta(pair))|`.
pub fn k_consistency(metric: &Metric, potential: &Potential, pair: &HopfColePair) -> Result<f64> {
    let s = from_eta(potential, pair)?;
    Ok((hamiltonian_k(metric, potential, pair)? - hamiltonian(metric, potential, &s)?).abs())
}
