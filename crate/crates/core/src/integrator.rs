//! Implicit midpoint rule for autonomous systems `z' = X(z)`.
//!
//! Each step solves `z1 = z0 + dt X((z0 + z1) / 2)` by fixed-point iteration,
//! falling back to a damped Newton iteration with a finite-difference
//! Jacobian when the fixed point stalls or an iterate leaves the domain of
//! `X`. The rule is symplectic, symmetric and second order.

use crate::error::{Error, Result};
use crate::metrics::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointOptions {
    /// Convergence threshold on the max-norm update, relative to `1 + |z|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MidpointOptions {
    fn default() -> Self {
        MidpointOptions { tol: 1e-12, max_iter: 50 }
    }
}

/// Why a single implicit step could not be completed.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum StepError {
    /// The field is undefined at the explicit predictor: the state is leaving the domain.
    DomainExit(String),
    NoConvergence(f64),
}

pub(crate) fn midpoint_step<F>(
    field: &F,
    z0: &Vector,
    dt: f64,
    opts: &MidpointOptions,
) -> std::result::Result<Vector, StepError>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let x0 = field(z0).map_err(|e| StepError::DomainExit(e.to_string()))?;
    let predictor = z0 + &x0 * dt;
    let scale = 1.0 + z0.amax();

    let mut z1 = predictor.clone();
    let mut last_update = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let mid = (z0 + &z1) * 0.5;
        let x = match field(&mid) {
            Ok(x) => x,
            Err(_) => break,
        };
        let next = z0 + x * dt;
        last_update = (&next - &z1).amax();
        z1 = next;
        if last_update <= opts.tol * scale {
            return Ok(z1);
        }
    }

    match newton(field, z0, &predictor, dt, opts) {
        Ok(z) => Ok(z),
        Err(res) => {
            if field(&predictor).is_err() {
                Err(StepError::DomainExit("explicit predictor leaves the domain".into()))
            } else {
                Err(StepError::NoConvergence(res.min(last_update)))
            }
        }
    }
}

/// Damped Newton on `R(z1) = z1 - z0 - dt X((z0 + z1) / 2)`.
fn newton<F>(
    field: &F,
    z0: &Vector,
    start: &Vector,
    dt: f64,
    opts: &MidpointOptions,
) -> std::result::Result<Vector, f64>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let residual = |z1: &Vector| -> Result<Vector> {
        let mid = (z0 + z1) * 0.5;
        Ok(z1 - z0 - field(&mid)? * dt)
    };
    let scale = 1.0 + z0.amax();
    let mut z1 = start.clone();
    let mut r = residual(&z1).map_err(|_| f64::INFINITY)?;
    for _ in 0..opts.max_iter {
        if r.amax() <= opts.tol * scale {
            return Ok(z1);
        }
        let mid = (z0 + &z1) * 0.5;
        let jac = match jacobian(field, &mid, 1e-7) {
            Ok(j) => j,
            Err(_) => return Err(r.amax()),
        };
        let n = z1.len();
        let system = Matrix::identity(n, n) - jac * (0.5 * dt);
        let Some(delta) = system.lu().solve(&(-&r)) else {
            return Err(r.amax());
        };
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-6 {
            let trial = &z1 + &delta * step;
            if let Ok(rt) = residual(&trial) {
                if rt.amax() < r.amax() || rt.amax() <= opts.tol * scale {
                    z1 = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(r.amax());
        }
    }
    if r.amax() <= opts.tol * scale {
        Ok(z1)
    } else {
        Err(r.amax())
    }
}

/// Central-difference Jacobian of `field` at `z`.
pub(crate) fn jacobian<F>(field: &F, z: &Vector, h: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let n = z.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut a = z.clone();
        let mut b = z.clone();
        a[j] += h;
        b[j] -= h;
        cols.push((field(&a)? - field(&b)?) / (2.0 * h));
    }
    let m = cols.first().map_or(0, |c| c.len());
    let mut out = Matrix::zeros(m, n);
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    Ok(out)
}

/// Number of steps for horizon `t_end` at step `dt`; `t_end / dt` must be an
/// integer to within `1e-9`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("T must be positive, got {t_end}")));
    }
    let ratio = t_end / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidArgument(format!("T / dt = {ratio} is not an integer")));
    }
    Ok(steps as usize)
}
