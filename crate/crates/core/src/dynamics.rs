//! Hamiltonian flows of the bridge problem.
//!
//! The Hamiltonian is `H(q, p) = p.G(q)p / 2 - f(q).G(q)f(q) / 2` with
//! `f = grad F`, and Hamilton's equations read
//!
//! ```text
//! q' = G(q) p
//! p'_i = -1/2 p.(d_i G)p + 1/2 f.(d_i G)f + (h G f)_i
//! ```
//!
//! On graphs `G = L(rho)` and the first line is the continuity equation
//! `rho_i' + sum_j w_ij theta_ij (S_j - S_i) = 0` (the edge factor `theta_ij`
//! is required for `rho' = L(rho) S`).
//!
//! Graph momenta live modulo constants. Trajectories store them in the
//! mean-zero gauge, re-imposed after every step; the constant removed at each
//! step is accumulated in [`Trajectory::gauge_shift`] so that the momentum of
//! the untouched Hamiltonian flow can be recovered with
//! [`Trajectory::raw_momentum`]. Quantities such as the split energies depend
//! on that choice.

use crate::error::{Error, Result};
use crate::integrator::{midpoint_step, step_count, MidpointOptions, StepError};
use crate::metrics::{project_mean_zero, Metric, Vector, SIMPLEX_MASS_TOL};
use crate::potentials::Potential;

/// A point `(q, p)` of phase space at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vector,
    pub p: Vector,
    pub t: f64,
}

impl PhaseState {
    /// Validates `q` against the metric and potential domains. For graph
    /// metrics `q` must have unit mass and `p` is moved to the mean-zero gauge.
    pub fn new(metric: &Metric, potential: &Potential, q: Vector, p: Vector, t: f64) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Dimension { expected: q.len(), got: p.len() });
        }
        metric.check_domain(&q)?;
        potential.check_domain(&q)?;
        let p = if metric.has_gauge() {
            let mass = q.sum();
            if (mass - 1.0).abs() > SIMPLEX_MASS_TOL {
                return Err(Error::Domain(format!("density has mass {mass}, expected 1")));
            }
            project_mean_zero(&p)
        } else {
            p
        };
        Ok(PhaseState { q, p, t })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub(crate) fn pack(&self) -> Vector {
        stack(&self.q, &self.p)
    }
}

pub(crate) fn stack(a: &Vector, b: &Vector) -> Vector {
    let n = a.len();
    Vector::from_fn(2 * n, |i, _| if i < n { a[i] } else { b[i - n] })
}

pub(crate) fn split(z: &Vector) -> (Vector, Vector) {
    let n = z.len() / 2;
    (z.rows(0, n).into_owned(), z.rows(n, n).into_owned())
}

/// Split-energy diagnostics recorded on request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDiagnostics {
    pub k: f64,
    pub g: f64,
    pub g_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub hamiltonian: f64,
    pub potential: f64,
    pub mass: f64,
    pub split: Option<SplitDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    /// Constant removed from the momentum by gauge fixing, accumulated up to each node.
    pub gauge_shift: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &PhaseState {
        &self.states[0]
    }

    pub fn last(&self) -> &PhaseState {
        &self.states[self.states.len() - 1]
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    /// Momentum of the Hamiltonian flow before gauge fixing.
    pub fn raw_momentum(&self, k: usize) -> Vector {
        self.states[k].p.add_scalar(self.gauge_shift[k])
    }

    /// The state at node `k` with its un-gauged momentum.
    pub fn raw_state(&self, k: usize) -> PhaseState {
        PhaseState { q: self.states[k].q.clone(), p: self.raw_momentum(k), t: self.times[k] }
    }

    /// Largest deviation of the Hamiltonian from its initial value.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.diagnostics[0].hamiltonian;
        self.diagnostics.iter().map(|d| (d.hamiltonian - h0).abs()).fold(0.0, f64::max)
    }
}

/// `H(q, p)`.
pub fn hamiltonian(metric: &Metric, potential: &Potential, s: &PhaseState) -> Result<f64> {
    let f = potential.gradient(&s.q)?;
    Ok(0.5 * metric.form(&s.q, &s.p, &s.p)? - 0.5 * metric.form(&s.q, &f, &f)?)
}

/// The Lagrangian `|p|^2 / 2 + |grad F|^2 / 2` in momentum coordinates.
pub fn lagrangian(metric: &Metric, potential: &Potential, s: &PhaseState) -> Result<f64> {
    let f = potential.gradient(&s.q)?;
    Ok(0.5 * metric.form(&s.q, &s.p, &s.p)? + 0.5 * metric.form(&s.q, &f, &f)?)
}

/// Hamilton's equations: returns `(q', p')`.
pub fn flow_field(metric: &Metric, potential: &Potential, s: &PhaseState) -> Result<(Vector, Vector)> {
    let q = &s.q;
    let p = &s.p;
    let g = metric.inverse_metric(q)?;
    let f = potential.gradient(q)?;
    let h = potential.hessian(q)?;
    let q_dot = &g * p;
    let p_dot = metric.form_gradient(q, p, p)? * -0.5 + metric.form_gradient(q, &f, &f)? * 0.5 + h * (g * &f);
    Ok((q_dot, p_dot))
}

/// Options for [`integrate_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrateOptions {
    pub solver: MidpointOptions,
    /// Record `K`, `G`, `G*` at every node (needs homogeneity metadata).
    pub record_split: bool,
}

/// Integrates Hamilton's equations with the implicit midpoint rule from `s0`
/// over `[s0.t, s0.t + t_end]`.
pub fn integrate(metric: &Metric, potential: &Potential, s0: &PhaseState, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_with(metric, potential, s0, t_end, dt, &IntegrateOptions::default())
}

pub fn integrate_with(
    metric: &Metric,
    potential: &Potential,
    s0: &PhaseState,
    t_end: f64,
    dt: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let steps = step_count(t_end, dt)?;
    let s0 = PhaseState::new(metric, potential, s0.q.clone(), s0.p.clone(), s0.t)?;
    let field = |z: &Vector| -> Result<Vector> {
        let (q, p) = split(z);
        let (qd, pd) = flow_field(metric, potential, &PhaseState { q, p, t: 0.0 })?;
        Ok(stack(&qd, &pd))
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut shifts = Vec::with_capacity(steps + 1);
    times.push(s0.t);
    shifts.push(0.0);
    let mut z = s0.pack();
    states.push(s0.clone());
    let mut shift = 0.0;

    for k in 0..steps {
        let t_next = s0.t + (k + 1) as f64 * dt;
        let mut next = midpoint_step(&field, &z, dt, &opts.solver).map_err(|e| match e {
            StepError::DomainExit(reason) => Error::DomainExit { time: t_next - dt, reason },
            StepError::NoConvergence(residual) => Error::StepFailure { step: k, residual },
        })?;
        let (q, mut p) = split(&next);
        if let Err(e) = metric.check_domain(&q) {
            return Err(Error::DomainExit { time: t_next, reason: e.to_string() });
        }
        if metric.has_gauge() {
            let mean = p.mean();
            shift += mean;
            p.add_scalar_mut(-mean);
            next = stack(&q, &p);
        }
        z = next;
        times.push(t_next);
        shifts.push(shift);
        states.push(PhaseState { q, p, t: t_next });
    }

    let mut traj = Trajectory { dt, times, states, gauge_shift: shifts, diagnostics: Vec::new() };
    traj.diagnostics = diagnose(metric, potential, &traj, opts.record_split)?;
    Ok(traj)
}

fn diagnose(metric: &Metric, potential: &Potential, traj: &Trajectory, record_split: bool) -> Result<Vec<Diagnostics>> {
    let homogeneity = if record_split { Some(potential.homogeneity().ok_or(Error::MissingHomogeneity)?) } else { None };
    (0..traj.len())
        .map(|k| {
            let s = &traj.states[k];
            let split = match homogeneity {
                Some(hom) => {
                    let pair = crate::hopf_cole::to_eta(potential, &traj.raw_state(k))?;
                    let k_val = crate::hopf_cole::hamiltonian_k(metric, potential, &pair)?;
                    let (g, g_star) = crate::splitting::split_with(potential, hom, &pair)?;
                    Some(SplitDiagnostics { k: k_val, g, g_star })
                }
                None => None,
            };
            Ok(Diagnostics {
                hamiltonian: hamiltonian(metric, potential, s)?,
                potential: potential.evaluate(&s.q)?,
                mass: s.q.sum(),
                split,
            })
        })
        .collect()
}

/// The action `int L dt` along a trajectory, by composite Simpson quadrature
/// on the trajectory grid (trapezoid for a single interval).
pub fn action(metric: &Metric, potential: &Potential, traj: &Trajectory) -> Result<f64> {
    let values: Vec<f64> = traj.states.iter().map(|s| lagrangian(metric, potential, s)).collect::<Result<_>>()?;
    Ok(simpson(&values, traj.dt))
}

/// Action of an arbitrary sampled path `q(t)` in velocity coordinates:
/// `int |q'|_g^2 / 2 + |grad F|^2 / 2 dt` with midpoint velocities. On graphs
/// `|v|_g^2 = v.L(rho)^+ v`.
pub fn path_action(metric: &Metric, potential: &Potential, dt: f64, path: &[Vector]) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::InvalidArgument("path needs at least two nodes".into()));
    }
    let mut total = 0.0;
    for w in path.windows(2) {
        let mid = (&w[0] + &w[1]) * 0.5;
        let v = (&w[1] - &w[0]) / dt;
        let kinetic = v.dot(&metric.lower(&mid, &v)?);
        let f = potential.gradient(&mid)?;
        total += (0.5 * kinetic + 0.5 * metric.form(&mid, &f, &f)?) * dt;
    }
    Ok(total)
}

pub(crate) fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        _ => {
            // Simpson 1/3 on an even number of intervals, 3/8 on the last three if odd.
            let (even, tail) = if n.is_multiple_of(2) { (n, 0) } else { (n - 3, 3) };
            let mut s = 0.0;
            let mut k = 0;
            while k < even {
                s += h / 3.0 * (values[k] + 4.0 * values[k + 1] + values[k + 2]);
                k += 2;
            }
            if tail == 3 {
                let v = &values[even..];
                s += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            s
        }
    }
}
