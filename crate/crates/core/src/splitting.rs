//! Energy splitting `F(q) = G + G*` along bridge flows.
//!
//! For a potential with `F(q) = q.f(q) / a + b` the split energies are
//!
//! ```text
//! G  = q.f(eta)  / a + b / 2
//! G* = q.f(eta*) / a + b / 2
//! ```
//!
//! and, when the inverse metric has Euler degree `m` (`q.dG = m G`), they
//! evolve with `dG/dt = f(eta).G f(eta) - cH` and
//! `dG*/dt = -f(eta*).G f(eta*) + cH` where `c = (a^{-1}(m - 2) + 1) / 2`.
//! If `F` is `lambda`-convex, `psi(s) = G + c s H` satisfies
//! `psi'' >= 2 lambda psi'` on `[0, 1]`, which yields
//!
//! ```text
//! G(s) + c s H   <= alpha_{1-s} G(0) + (1 - alpha_{1-s}) (G(1) + cH)
//! G*(s) - c s H  <= (1 - alpha_s) G*(0) + alpha_s (G*(1) - cH)
//! ```
//!
//! with `alpha_s = (1 - exp(-2 lambda s)) / (1 - exp(-2 lambda))`.
//! A trajectory on `[0, T]` is audited in the rescaled time `s = t / T`,
//! where the Hamiltonian becomes `T H` and the modulus `T lambda`.
//!
//! Split energies are computed from the un-gauged momentum of the
//! trajectory (see [`Trajectory::raw_momentum`]).

use crate::dynamics::{action, hamiltonian, Trajectory};
use crate::error::{Error, Result};
use crate::hopf_cole::{from_eta, to_eta, HopfColePair};
use crate::metrics::{metric_homogeneity_degree, Metric, Vector, SIMPLEX_MASS_TOL};
use crate::potentials::{Homogeneity, Potential};

/// Tolerance on the fitted metric degree before the splitting formulas are used.
pub const DEGREE_FIT_TOL: f64 = 1e-8;
/// Audit passes iff every slack is at least `-AUDIT_TOL`.
pub const AUDIT_TOL: f64 = 1e-7;

/// `(G, G*)` at `pair`.
pub fn split(potential: &Potential, pair: &HopfColePair) -> Result<(f64, f64)> {
    let hom = potential.homogeneity().ok_or(Error::MissingHomogeneity)?;
    split_with(potential, hom, pair)
}

pub(crate) fn split_with(potential: &Potential, hom: Homogeneity, pair: &HopfColePair) -> Result<(f64, f64)> {
    let q = from_eta(potential, pair)?.q;
    let g = q.dot(&potential.gradient(&pair.eta)?) / hom.a + 0.5 * hom.b;
    let g_star = q.dot(&potential.gradient(&pair.eta_star)?) / hom.a + 0.5 * hom.b;
    Ok((g, g_star))
}

/// `c = (a^{-1}(m - 2) + 1) / 2`.
pub fn c_constant(a: f64, m: f64) -> f64 {
    ((m - 2.0) / a + 1.0) / 2.0
}

/// `alpha_t = (1 - exp(-2 lambda t)) / (1 - exp(-2 lambda))`, equal to `t` for `|lambda| <= 1e-8`.
pub fn alpha(lambda: f64, t: f64) -> f64 {
    if lambda.abs() <= 1e-8 {
        t
    } else {
        (-2.0 * lambda * t).exp_m1() / (-2.0 * lambda).exp_m1()
    }
}

/// Verified homogeneity data of a (metric, potential) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSetting {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub c: f64,
}

/// Checks the preconditions of the splitting formulas on the given states:
/// the potential carries homogeneity metadata (valid on the simplex where
/// required) and the inverse metric fits an Euler degree.
pub fn verify_homogeneity(metric: &Metric, potential: &Potential, samples: &[Vector]) -> Result<SplitSetting> {
    let hom = potential.homogeneity().ok_or(Error::MissingHomogeneity)?;
    if potential.homogeneity_needs_simplex() {
        if let Some(q) = samples.iter().find(|q| (q.sum() - 1.0).abs() > 1e3 * SIMPLEX_MASS_TOL) {
            return Err(Error::Precondition(format!(
                "{} homogeneity holds on the simplex only; state has mass {}",
                potential.name(),
                q.sum()
            )));
        }
    }
    let samples = padded(samples);
    let fit = metric_homogeneity_degree(metric, &samples)?;
    if fit.residual > DEGREE_FIT_TOL * (1.0 + fit.degree.abs()) {
        return Err(Error::Precondition(format!(
            "metric is not Euler-homogeneous on the samples (residual {:e})",
            fit.residual
        )));
    }
    Ok(SplitSetting { a: hom.a, b: hom.b, m: fit.degree, c: c_constant(hom.a, fit.degree) })
}

// The degree fit needs three samples; short inputs are padded by repetition.
fn padded(samples: &[Vector]) -> Vec<Vector> {
    let mut out = samples.to_vec();
    if let Some(first) = samples.first() {
        while out.len() < 3 {
            out.push(first.clone());
        }
    }
    out
}

/// Formula values `(dG/dt, dG*/dt)` at `pair`, for constants `c` and `H`.
pub fn splitting_rates(
    metric: &Metric,
    potential: &Potential,
    pair: &HopfColePair,
    c: f64,
    h: f64,
) -> Result<(f64, f64)> {
    let q = from_eta(potential, pair)?.q;
    verify_homogeneity(metric, potential, std::slice::from_ref(&q))?;
    rates_unchecked(metric, potential, pair, &q, c, h)
}

fn rates_unchecked(
    metric: &Metric,
    potential: &Potential,
    pair: &HopfColePair,
    q: &Vector,
    c: f64,
    h: f64,
) -> Result<(f64, f64)> {
    let a = potential.gradient(&pair.eta)?;
    let b = potential.gradient(&pair.eta_star)?;
    Ok((metric.form(q, &a, &a)? - c * h, -metric.form(q, &b, &b)? + c * h))
}

/// `d^2G/dt^2 = 2 (h_kl(q) - Gamma^n_kl f_n(q)) v^k v^l` with `v = G(q) f(eta)`.
pub fn second_derivative_formula(metric: &Metric, potential: &Potential, pair: &HopfColePair) -> Result<f64> {
    let q = from_eta(potential, pair)?.q;
    let gamma = metric.christoffel(&q)?;
    let v = metric.inverse_metric(&q)? * potential.gradient(&pair.eta)?;
    let hess = potential.hessian(&q)? - gamma.contract(&potential.gradient(&q)?);
    Ok(2.0 * v.dot(&(hess * &v)))
}

/// One time node of a [`SplitReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitNode {
    pub t: f64,
    pub g: f64,
    pub g_star: f64,
    pub dg: f64,
    pub dg_star: f64,
    pub slack_g: f64,
    pub slack_g_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub c: f64,
    /// Hamiltonian at the initial node.
    pub h: f64,
    pub lambda: f64,
    pub a: f64,
    pub m: f64,
    pub horizon: f64,
    pub nodes: Vec<SplitNode>,
}

impl SplitReport {
    pub fn min_slack(&self) -> f64 {
        self.nodes.iter().map(|n| n.slack_g.min(n.slack_g_star)).fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self) -> bool {
        self.min_slack() >= -AUDIT_TOL
    }
}

/// Per-node `(G, G*, F(q))` of a trajectory, from its un-gauged states.
pub fn split_series(potential: &Potential, traj: &Trajectory) -> Result<Vec<(f64, f64, f64)>> {
    let hom = potential.homogeneity().ok_or(Error::MissingHomogeneity)?;
    (0..traj.len())
        .map(|k| {
            let s = traj.raw_state(k);
            let (g, gs) = split_with(potential, hom, &to_eta(potential, &s)?)?;
            Ok((g, gs, potential.evaluate(&s.q)?))
        })
        .collect()
}

fn setting_for(metric: &Metric, potential: &Potential, traj: &Trajectory) -> Result<SplitSetting> {
    let qs: Vec<Vector> = traj.states.iter().map(|s| s.q.clone()).collect();
    verify_homogeneity(metric, potential, &qs)
}

/// Evaluates both splitting bounds at every node of `traj` with modulus `lambda`.
pub fn audit_inequalities(
    traj: &Trajectory,
    potential: &Potential,
    metric: &Metric,
    lambda: f64,
) -> Result<SplitReport> {
    let setting = setting_for(metric, potential, traj)?;
    audit_with(traj, potential, metric, lambda, &setting)
}

fn audit_with(
    traj: &Trajectory,
    potential: &Potential,
    metric: &Metric,
    lambda: f64,
    setting: &SplitSetting,
) -> Result<SplitReport> {
    if traj.len() < 2 {
        return Err(Error::InvalidArgument("audit needs at least two nodes".into()));
    }
    let horizon = traj.horizon();
    let h = hamiltonian(metric, potential, traj.first())?;
    let c = setting.c;
    let lam = lambda * horizon;
    let ch = c * h * horizon;
    let t0 = traj.times[0];

    let hom = Homogeneity { a: setting.a, b: setting.b };
    let mut raw = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let s = traj.raw_state(k);
        let pair = to_eta(potential, &s)?;
        let (g, gs) = split_with(potential, hom, &pair)?;
        let (dg, dgs) = rates_unchecked(metric, potential, &pair, &s.q, c, h)?;
        raw.push((traj.times[k], g, gs, dg, dgs));
    }
    let (g0, gs0) = (raw[0].1, raw[0].2);
    let last = raw[raw.len() - 1];
    let (g1, gs1) = (last.1, last.2);

    let nodes = raw
        .into_iter()
        .map(|(t, g, gs, dg, dgs)| {
            let s = ((t - t0) / horizon).clamp(0.0, 1.0);
            let a_rev = alpha(lam, 1.0 - s);
            let a_fwd = alpha(lam, s);
            let bound_g = a_rev * g0 + (1.0 - a_rev) * (g1 + ch);
            let bound_gs = (1.0 - a_fwd) * gs0 + a_fwd * (gs1 - ch);
            SplitNode {
                t,
                g,
                g_star: gs,
                dg,
                dg_star: dgs,
                slack_g: bound_g - (g + ch * s),
                slack_g_star: bound_gs - (gs - ch * s),
            }
        })
        .collect();
    Ok(SplitReport { c, h, lambda, a: setting.a, m: setting.m, horizon, nodes })
}

/// Largest `lambda` in `[lo, hi]` for which the audit passes, by bisection
/// to width `tol`. `None` if it fails already at `lo`.
pub fn largest_passing_lambda(
    traj: &Trajectory,
    potential: &Potential,
    metric: &Metric,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Option<f64>> {
    let setting = setting_for(metric, potential, traj)?;
    let passes = |lambda: f64| -> Result<bool> { Ok(audit_with(traj, potential, metric, lambda, &setting)?.passes()) };
    if !passes(lo)? {
        return Ok(None);
    }
    if passes(hi)? {
        return Ok(Some(hi));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if passes(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(a))
}

/// `|A - (2 G(T) + 2 G*(0) - F(0) - F(T) + 2 c H T)|`, with the action `A`
/// from [`action`].
pub fn action_identity_residual(traj: &Trajectory, potential: &Potential, metric: &Metric, c: f64) -> Result<f64> {
    let series = split_series(potential, traj)?;
    let (_, gs0, f0) = series[0];
    let (g1, _, f1) = series[series.len() - 1];
    let h = hamiltonian(metric, potential, traj.first())?;
    let identity = 2.0 * g1 + 2.0 * gs0 - f0 - f1 + 2.0 * c * h * traj.horizon();
    Ok((action(metric, potential, traj)? - identity).abs())
}

/// Max over interior nodes of the gap between the rate formulas and centered
/// differences of the recorded `G`, `G*`.
pub fn rate_difference_residual(traj: &Trajectory, potential: &Potential, metric: &Metric) -> Result<f64> {
    let setting = setting_for(metric, potential, traj)?;
    let h = hamiltonian(metric, potential, traj.first())?;
    let series = split_series(potential, traj)?;
    let mut worst: f64 = 0.0;
    for k in 1..traj.len().saturating_sub(1) {
        let s = traj.raw_state(k);
        let pair = to_eta(potential, &s)?;
        let (dg, dgs) = rates_unchecked(metric, potential, &pair, &s.q, setting.c, h)?;
        let fd_g = (series[k + 1].0 - series[k - 1].0) / (2.0 * traj.dt);
        let fd_gs = (series[k + 1].1 - series[k - 1].1) / (2.0 * traj.dt);
        worst = worst.max((dg - fd_g).abs()).max((dgs - fd_gs).abs());
    }
    Ok(worst)
}

/// Max over interior nodes of `|d^2G/dt^2 formula - centered second difference of G|`.
pub fn second_derivative_check(traj: &Trajectory, potential: &Potential, metric: &Metric) -> Result<f64> {
    if metric.has_gauge() {
        return Err(Error::Unsupported(
            "no Christoffel symbols for the graph metric; use the rate residual instead".into(),
        ));
    }
    setting_for(metric, potential, traj)?;
    let series = split_series(potential, traj)?;
    let dt2 = traj.dt * traj.dt;
    let mut worst: f64 = 0.0;
    for k in 1..traj.len().saturating_sub(1) {
        let pair = to_eta(potential, &traj.raw_state(k))?;
        let formula = second_derivative_formula(metric, potential, &pair)?;
        let fd = (series[k + 1].0 - 2.0 * series[k].0 + series[k - 1].0) / dt2;
        worst = worst.max((formula - fd).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, PhaseState};
    use crate::graph::Graph;
    use crate::metrics::Matrix;
    use nalgebra::dvector;

    fn ident(n: usize) -> Potential {
        Potential::quadratic(Matrix::identity(n, n), Vector::zeros(n)).unwrap()
    }

    #[test]
    fn split_examples() {
        let pair = HopfColePair::new(dvector![1.0], dvector![1.0]).unwrap();
        assert_eq!(split(&ident(1), &pair).unwrap(), (1.0, 1.0));

        let ent = Potential::entropy(1.0).unwrap();
        let h = 0.5f64.sqrt();
        let pair = HopfColePair::new(dvector![h, h], dvector![h, h]).unwrap();
        let (g, gs) = split(&ent, &pair).unwrap();
        let expected = 0.5 * 0.5f64.ln() - 0.5;
        assert!((g - expected).abs() < 1e-15 && (gs - expected).abs() < 1e-15);

        let ren = Potential::renyi(0.8, 2.0).unwrap();
        let pair = to_eta(&ren, &PhaseState { q: dvector![0.2, 0.8], p: dvector![0.3, -0.3], t: 0.0 }).unwrap();
        let (g, gs) = split(&ren, &pair).unwrap();
        let (gsw, gw) = split(&ren, &pair.swapped()).unwrap();
        assert_eq!((g, gs), (gw, gsw));
        assert!((g + gs - ren.evaluate(&dvector![0.2, 0.8]).unwrap()).abs() <= 1e-12);

        let shifted = Potential::quadratic(Matrix::identity(1, 1), dvector![1.0]).unwrap();
        assert_eq!(
            split(&shifted, &HopfColePair::new(dvector![1.0], dvector![1.0]).unwrap()),
            Err(Error::MissingHomogeneity)
        );
    }

    #[test]
    fn c_constant_examples() {
        assert_eq!(c_constant(2.0, 0.0), 0.0);
        for a in [1.0, 1.5, 2.0, 3.0, 7.25] {
            assert!((c_constant(a, 1.0) - (1.0 - 1.0 / a) / 2.0).abs() <= 1e-15);
        }
        let m = 2.0;
        assert!((c_constant(m + 1.0, 1.0) - m / (2.0 * (m + 1.0))).abs() <= 1e-15);
    }

    #[test]
    fn alpha_examples() {
        for lambda in [-3.0, -1e-9, 0.0, 0.5, 4.0] {
            assert_eq!(alpha(lambda, 0.0), 0.0);
            assert!((alpha(lambda, 1.0) - 1.0).abs() < 1e-15);
        }
        assert_eq!(alpha(1e-9, 0.3), 0.3);
        assert!((alpha(1e-6, 0.3) - 0.3).abs() < 1e-6);
    }

    #[test]
    fn rate_examples() {
        let pair = HopfColePair::new(dvector![1.0], dvector![1.0]).unwrap();
        assert_eq!(splitting_rates(&Metric::Euclidean, &ident(1), &pair, 0.0, -2.0).unwrap(), (1.0, -1.0));

        let gm = Metric::GraphWasserstein(Graph::two_node(1.0).unwrap());
        let h = 0.5f64.sqrt();
        let pair = HopfColePair::new(dvector![h, h], dvector![h, h]).unwrap();
        let (a, b) = splitting_rates(&gm, &Potential::entropy(1.0).unwrap(), &pair, 0.0, 0.0).unwrap();
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);

        let off = HopfColePair::new(dvector![0.6, 0.9], dvector![0.5, 0.5]).unwrap();
        let err = splitting_rates(&gm, &Potential::entropy(1.0).unwrap(), &off, 0.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn flat_audit_and_identity() {
        let s0 = PhaseState::new(&Metric::Euclidean, &ident(1), dvector![2.0], dvector![0.0], 0.0).unwrap();
        let traj = integrate(&Metric::Euclidean, &ident(1), &s0, 1.0, 1e-3).unwrap();
        let report = audit_inequalities(&traj, &ident(1), &Metric::Euclidean, 1.0).unwrap();
        assert!(report.passes(), "min slack {}", report.min_slack());
        assert!(report.nodes.iter().all(|n| (n.g + n.g_star - 2.0 * n.t.cosh().powi(2)).abs() < 1e-5));
        let loose = audit_inequalities(&traj, &ident(1), &Metric::Euclidean, 0.0).unwrap();
        assert!(loose.nodes[1..loose.nodes.len() - 1].iter().all(|n| n.slack_g > 0.0 && n.slack_g_star > 0.0));
        let tight = audit_inequalities(&traj, &ident(1), &Metric::Euclidean, 11.0).unwrap();
        assert!(!tight.passes());

        let r = action_identity_residual(&traj, &ident(1), &Metric::Euclidean, 0.0).unwrap();
        assert!(r <= 1e-6, "{r}");
        let d2 = second_derivative_check(&traj, &ident(1), &Metric::Euclidean).unwrap();
        assert!(d2 <= 1e-5, "{d2}");
    }

    #[test]
    fn longer_horizon_is_rescaled() {
        // q = 2 cosh t on [0, 2]: rescaled modulus 2 lambda is still tight
        let s0 = PhaseState::new(&Metric::Euclidean, &ident(1), dvector![2.0], dvector![0.0], 0.0).unwrap();
        let traj = integrate(&Metric::Euclidean, &ident(1), &s0, 2.0, 1e-3).unwrap();
        assert!(audit_inequalities(&traj, &ident(1), &Metric::Euclidean, 1.0).unwrap().passes());
        assert!(!audit_inequalities(&traj, &ident(1), &Metric::Euclidean, 1.5).unwrap().passes());
        let best = largest_passing_lambda(&traj, &ident(1), &Metric::Euclidean, 0.0, 5.0, 1e-4).unwrap().unwrap();
        assert!((best - 1.0).abs() < 1e-2, "{best}");
    }

    #[test]
    fn diagonal_power_rates_and_second_derivative() {
        for m in [0.5, 1.0, 2.0, 2.5] {
            let metric = Metric::DiagonalPower { m };
            let w = Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8]);
            let pot = Potential::quadratic(w, Vector::zeros(2)).unwrap();
            let s0 = PhaseState::new(&metric, &pot, dvector![0.6, 0.8], dvector![0.1, -0.1], 0.0).unwrap();
            let traj = integrate(&metric, &pot, &s0, 0.3, 1e-3).unwrap();
            let setting = verify_homogeneity(&metric, &pot, std::slice::from_ref(&s0.q)).unwrap();
            assert!((setting.m - m).abs() < 1e-10);
            let coarse = integrate(&metric, &pot, &s0, 0.3, 2e-3).unwrap();
            let r = rate_difference_residual(&traj, &pot, &metric).unwrap();
            let ratio = rate_difference_residual(&coarse, &pot, &metric).unwrap() / r;
            assert!(r <= 1e-4 && (ratio - 4.0).abs() < 0.5, "m = {m}: rate residual {r}, ratio {ratio}");
            let d2 = second_derivative_check(&traj, &pot, &metric).unwrap();
            assert!(d2 <= 1e-4, "m = {m}: second derivative residual {d2}");
            let ai = action_identity_residual(&traj, &pot, &metric, setting.c).unwrap();
            assert!(ai <= 1e-6, "m = {m}: action identity {ai}");
        }
    }

    #[test]
    fn graph_rates_converge() {
        let gm = Metric::GraphWasserstein(Graph::path(3).unwrap());
        let ren = Potential::renyi(1.0, 2.0).unwrap();
        let s0 = PhaseState::new(&gm, &ren, dvector![0.2, 0.3, 0.5], dvector![0.3, 0.1, -0.4], 0.0).unwrap();
        let err = |dt: f64| {
            let traj = integrate(&gm, &ren, &s0, 0.4, dt).unwrap();
            rate_difference_residual(&traj, &ren, &gm).unwrap()
        };
        let ratio = err(2e-3) / err(1e-3);
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
        let traj = integrate(&gm, &ren, &s0, 0.4, 1e-3).unwrap();
        let setting = verify_homogeneity(&gm, &ren, std::slice::from_ref(&s0.q)).unwrap();
        assert!(action_identity_residual(&traj, &ren, &gm, setting.c).unwrap() <= 1e-6);
        assert!(matches!(second_derivative_check(&traj, &ren, &gm), Err(Error::Unsupported(_))));
    }
}
