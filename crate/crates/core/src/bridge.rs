//! Two-endpoint bridge problems solved by shooting on the initial momentum.
//!
//! The residual `R(p0) = q(T; x, p0) - y` is driven to zero with
//! Levenberg–Marquardt steps on a central-difference Jacobian. On graphs the
//! momentum is kept in the mean-zero gauge and the residual has zero sum, so
//! the unknowns live on the mean-zero subspace. A shot that leaves the domain
//! rejects the trial step and raises the damping.

use log::debug;

use crate::dynamics::{action, integrate, PhaseState, Trajectory};
use crate::error::{Error, Result};
use crate::metrics::{project_mean_zero, Matrix, Metric, Vector, SIMPLEX_MASS_TOL};
use crate::potentials::Potential;

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeProblem {
    pub metric: Metric,
    pub potential: Potential,
    pub x: Vector,
    pub y: Vector,
    pub horizon: f64,
    pub dt: f64,
    /// Max-norm tolerance on the terminal residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl BridgeProblem {
    /// A problem with `tol = 1e-8` and `max_iter = 50`.
    pub fn new(metric: Metric, potential: Potential, x: Vector, y: Vector, horizon: f64, dt: f64) -> Result<Self> {
        let problem = BridgeProblem { metric, potential, x, y, horizon, dt, tol: 1e-8, max_iter: 50 };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::Dimension { expected: self.x.len(), got: self.y.len() });
        }
        if let Some(n) = self.metric.dim() {
            if n != self.x.len() {
                return Err(Error::Dimension { expected: n, got: self.x.len() });
            }
        }
        for (name, v) in [("start", &self.x), ("end", &self.y)] {
            self.metric.check_domain(v)?;
            self.potential.check_domain(v)?;
            if self.metric.has_gauge() && (v.sum() - 1.0).abs() > SIMPLEX_MASS_TOL {
                return Err(Error::Domain(format!("{name} density has mass {}", v.sum())));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        crate::integrator::step_count(self.horizon, self.dt)?;
        Ok(())
    }

    fn shoot(&self, p0: &Vector) -> Result<Trajectory> {
        let s0 = PhaseState::new(&self.metric, &self.potential, self.x.clone(), p0.clone(), 0.0)?;
        integrate(&self.metric, &self.potential, &s0, self.horizon, self.dt)
    }

    fn residual(&self, p0: &Vector) -> Result<Vector> {
        let traj = self.shoot(p0)?;
        let r = &traj.last().q - &self.y;
        Ok(self.gauge(r))
    }

    fn gauge(&self, v: Vector) -> Vector {
        if self.metric.has_gauge() {
            project_mean_zero(&v)
        } else {
            v
        }
    }

    /// For entropy on a graph, `p0 = f(y) - f(x)` in the mean-zero gauge.
    pub fn warm_start(&self) -> Option<Vector> {
        match (&self.metric, &self.potential) {
            (Metric::GraphWasserstein(_), Potential::Entropy { .. }) => {
                let fy = self.potential.gradient(&self.y).ok()?;
                let fx = self.potential.gradient(&self.x).ok()?;
                Some(project_mean_zero(&(fy - fx)))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSolution {
    pub p0: Vector,
    pub trajectory: Trajectory,
    pub action: f64,
    /// Max-norm terminal residual.
    pub residual: f64,
    pub iterations: usize,
}

/// Shooting from [`initial_guess`].
pub fn solve(problem: &BridgeProblem) -> Result<BridgeSolution> {
    solve_from(problem, &initial_guess(problem))
}

/// `p0 = 0`, unless the problem has a [`BridgeProblem::warm_start`] `w`: then
/// the multiple `k w / 4`, `k = 0..=12`, whose shot stays in the domain with
/// the smallest terminal residual (ties to the smaller `k`).
pub fn initial_guess(problem: &BridgeProblem) -> Vector {
    let zero = Vector::zeros(problem.x.len());
    let Some(warm) = problem.warm_start() else {
        return zero;
    };
    let mut best = (f64::INFINITY, zero);
    for k in 0..=12 {
        let guess = &warm * (k as f64 / 4.0);
        if let Ok(r) = problem.residual(&guess) {
            if r.amax() < best.0 {
                best = (r.amax(), guess);
            }
        }
    }
    debug!("initial guess with terminal residual {:e}", best.0);
    best.1
}

pub fn solve_from(problem: &BridgeProblem, p_init: &Vector) -> Result<BridgeSolution> {
    problem.validate()?;
    let n = problem.x.len();
    if p_init.len() != n {
        return Err(Error::Dimension { expected: n, got: p_init.len() });
    }
    let mut p = problem.gauge(p_init.clone());
    let mut r = problem.residual(&p)?;
    let mut mu = 1e-3;
    let mut iterations = 0;

    while r.amax() > problem.tol {
        if iterations == problem.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                best_residual: r.amax(),
                best_p0: p.iter().copied().collect(),
            });
        }
        iterations += 1;
        let jac = shooting_jacobian(problem, &p)?;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let scale = jtj.diagonal().amax().max(1e-12);
        let mut accepted = false;
        for _ in 0..30 {
            let system = &jtj + Matrix::identity(n, n) * (mu * scale);
            let Some(delta) = system.cholesky().map(|c| c.solve(&(-&jtr))) else {
                mu *= 10.0;
                continue;
            };
            let trial = problem.gauge(&p + delta);
            match problem.residual(&trial) {
                Ok(rt) if rt.norm() < r.norm() => {
                    p = trial;
                    r = rt;
                    mu = (mu / 3.0).max(1e-15);
                    accepted = true;
                    break;
                }
                Ok(_) => mu *= 4.0,
                Err(Error::DomainExit { .. }) => {
                    debug!("trial shot left the domain; raising damping");
                    mu *= 10.0;
                }
                Err(e) => return Err(e),
            }
        }
        debug!("iteration {iterations}: residual {:e}, damping {mu:e}", r.amax());
        if !accepted {
            return Err(Error::NoConvergence {
                iterations,
                best_residual: r.amax(),
                best_p0: p.iter().copied().collect(),
            });
        }
    }

    let trajectory = problem.shoot(&p)?;
    let action = action(&problem.metric, &problem.potential, &trajectory)?;
    Ok(BridgeSolution { p0: p, trajectory, action, residual: r.amax(), iterations })
}

fn shooting_jacobian(problem: &BridgeProblem, p: &Vector) -> Result<Matrix> {
    let n = p.len();
    let mut jac = Matrix::zeros(n, n);
    for j in 0..n {
        let h = 1e-6 * (1.0 + p[j].abs());
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus[j] += h;
        minus[j] -= h;
        // Perturbing one component also shifts the gauge; `residual` re-projects.
        let col = match (problem.residual(&plus), problem.residual(&minus)) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            (Ok(a), Err(_)) => (a - problem.residual(p)?) / h,
            (Err(_), Ok(b)) => (problem.residual(p)? - b) / h,
            (Err(e), Err(_)) => return Err(e),
        };
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Runs [`solve_from`] from each start concurrently and returns the solution
/// with the smallest residual, ties going to the lowest start index. If no
/// start converges, the failure with the smallest best residual is returned.
pub fn solve_multistart(problem: &BridgeProblem, starts: &[Vector]) -> Result<BridgeSolution> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("no initial guesses".into()));
    }
    let results: Vec<Result<BridgeSolution>> = std::thread::scope(|scope| {
        let handles: Vec<_> = starts.iter().map(|s| scope.spawn(move || solve_from(problem, s))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidArgument("solver thread panicked".into()))))
            .collect()
    });
    let mut best: Option<BridgeSolution> = None;
    let mut best_err: Option<Error> = None;
    for r in results {
        match r {
            Ok(sol) => {
                if best.as_ref().is_none_or(|b| sol.residual < b.residual) {
                    best = Some(sol);
                }
            }
            Err(e) => {
                let better = match (&e, &best_err) {
                    (_, None) => true,
                    (
                        Error::NoConvergence { best_residual: a, .. },
                        Some(Error::NoConvergence { best_residual: b, .. }),
                    ) => a < b,
                    (Error::NoConvergence { .. }, Some(_)) => true,
                    _ => false,
                };
                if better {
                    best_err = Some(e);
                }
            }
        }
    }
    best.ok_or_else(|| best_err.expect("at least one start"))
}

/// Exact initial momentum of the quadratic bridge (`F = q.Wq / 2`, Euclidean
/// metric). With `eta(t) = exp(tW) eta0`, `eta*(t) = exp(-tW) eta0*` the
/// endpoint conditions are `eta0 + eta0* = x` and
/// `exp(TW) eta0 + exp(-TW) eta0* = y`; the momentum is `W (eta0 - eta0*)`.
pub fn quadratic_oracle(w: &Matrix, x: &Vector, y: &Vector, horizon: f64) -> Result<Vector> {
    if !w.is_square() || w.nrows() != x.len() || x.len() != y.len() {
        return Err(Error::Dimension { expected: w.nrows(), got: x.len() });
    }
    let eig = w.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::InvalidArgument("W must be positive definite".into()));
    }
    let basis = &eig.eigenvectors;
    let xt = basis.transpose() * x;
    let yt = basis.transpose() * y;
    let mut coeff = Vector::zeros(x.len());
    for k in 0..x.len() {
        let l = eig.eigenvalues[k];
        let (up, down) = ((l * horizon).exp(), (-l * horizon).exp());
        let a = (yt[k] - down * xt[k]) / (up - down);
        let b = xt[k] - a;
        coeff[k] = l * (a - b);
    }
    Ok(basis * coeff)
}
