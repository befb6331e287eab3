//! Potential energies `F` with analytic gradients, Hessians and inverse
//! gradients.
//!
//! | family | `F(q)` | `f = grad F` | `a` | `b` |
//! |---|---|---|---|---|
//! | `Quadratic(W, U)` | `q.Wq / 2 + U.q` | `Wq + U` | 2 | 0 (only when `U = 0`) |
//! | `Entropy(gamma)` | `gamma sum(r log r - r)` | `gamma log r` | 1 | `-gamma` (on the simplex) |
//! | `Renyi(gamma, m)` | see below | `(gamma/m)(r^m - 1)` | `m + 1` | `gamma / (m (m+1))` (on the simplex) |
//!
//! The Rényi family carries the linear correction
//! `F(r) = gamma/(m(m+1)) [sum r^(m+1) - (m+1) sum r + (m+1)]`, which equals
//! `gamma/(m(m+1)) sum r^(m+1)` on the simplex and makes the shifted first
//! variation `(gamma/m)(r^m - 1)` an exact gradient. With that convention the
//! Hopf-Cole variables satisfy `eta^m + eta*^m = r^m + 1`.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::metrics::{check_len, Matrix, Vector, SIMPLEX_MASS_TOL};

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Quadratic { w: Matrix, u: Vector },
    Entropy { gamma: f64 },
    Renyi { gamma: f64, m: f64 },
}

/// Homogeneity metadata: `F(q) = q.grad F(q) / a + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homogeneity {
    pub a: f64,
    pub b: f64,
}

/// Result of [`homogeneity_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneityFit {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

impl Potential {
    /// A quadratic potential; `w` must be symmetric positive definite.
    pub fn quadratic(w: Matrix, u: Vector) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::InvalidArgument("W must be square".into()));
        }
        check_len(w.nrows(), u.len())?;
        let scale = w.amax().max(1.0);
        if (&w - w.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidArgument("W must be symmetric".into()));
        }
        if Cholesky::new(w.clone()).is_none() {
            return Err(Error::InvalidArgument("W must be positive definite".into()));
        }
        Ok(Potential::Quadratic { w, u })
    }

    pub fn entropy(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Potential::Entropy { gamma })
    }

    pub fn renyi(gamma: f64, m: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidArgument(format!("m must be positive, got {m}")));
        }
        Ok(Potential::Renyi { gamma, m })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::Quadratic { .. } => "quadratic",
            Potential::Entropy { .. } => "entropy",
            Potential::Renyi { .. } => "renyi",
        }
    }

    /// Exact homogeneity metadata, when the family has it. For the entropy
    /// and Rényi families the offset is valid on the probability simplex.
    pub fn homogeneity(&self) -> Option<Homogeneity> {
        match self {
            Potential::Quadratic { u, .. } => (u.amax() == 0.0).then_some(Homogeneity { a: 2.0, b: 0.0 }),
            Potential::Entropy { gamma } => Some(Homogeneity { a: 1.0, b: -gamma }),
            Potential::Renyi { gamma, m } => Some(Homogeneity { a: m + 1.0, b: gamma / (m * (m + 1.0)) }),
        }
    }

    /// Whether the homogeneity offset only holds on the simplex.
    pub fn homogeneity_needs_simplex(&self) -> bool {
        !matches!(self, Potential::Quadratic { .. })
    }

    /// Smallest eigenvalue of `W` for the quadratic family: the convexity
    /// modulus under the Euclidean metric.
    pub fn convexity_modulus(&self) -> Option<f64> {
        match self {
            Potential::Quadratic { w, .. } => Some(w.clone().symmetric_eigen().eigenvalues.min()),
            _ => None,
        }
    }

    pub fn check_domain(&self, q: &Vector) -> Result<()> {
        match self {
            Potential::Quadratic { w, .. } => check_len(w.nrows(), q.len()),
            Potential::Entropy { .. } | Potential::Renyi { .. } => {
                match q.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                    Some(i) => {
                        Err(Error::Domain(format!("potential needs positive entries, coordinate {i} = {}", q[i])))
                    }
                    None => Ok(()),
                }
            }
        }
    }

    pub fn evaluate(&self, q: &Vector) -> Result<f64> {
        self.check_domain(q)?;
        Ok(match self {
            Potential::Quadratic { w, u } => 0.5 * q.dot(&(w * q)) + u.dot(q),
            Potential::Entropy { gamma } => gamma * q.iter().map(|&r| r * r.ln() - r).sum::<f64>(),
            Potential::Renyi { gamma, m } => {
                let s: f64 = q.iter().map(|&r| r.powf(m + 1.0) - (m + 1.0) * r).sum();
                gamma / (m * (m + 1.0)) * (s + m + 1.0)
            }
        })
    }

    pub fn gradient(&self, q: &Vector) -> Result<Vector> {
        self.check_domain(q)?;
        Ok(match self {
            Potential::Quadratic { w, u } => w * q + u,
            Potential::Entropy { gamma } => q.map(|r| gamma * r.ln()),
            Potential::Renyi { gamma, m } => q.map(|r| gamma / m * (r.powf(*m) - 1.0)),
        })
    }

    pub fn hessian(&self, q: &Vector) -> Result<Matrix> {
        self.check_domain(q)?;
        Ok(match self {
            Potential::Quadratic { w, .. } => w.clone(),
            Potential::Entropy { gamma } => Matrix::from_diagonal(&q.map(|r| gamma / r)),
            Potential::Renyi { gamma, m } => Matrix::from_diagonal(&q.map(|r| gamma * r.powf(m - 1.0))),
        })
    }

    /// Inverse of the Hessian, computed in closed form for the diagonal families.
    pub fn hessian_inverse(&self, q: &Vector) -> Result<Matrix> {
        self.check_domain(q)?;
        match self {
            Potential::Quadratic { w, .. } => {
                w.clone().try_inverse().ok_or_else(|| Error::Singular("W is not invertible".into()))
            }
            Potential::Entropy { gamma } => Ok(Matrix::from_diagonal(&q.map(|r| r / gamma))),
            Potential::Renyi { gamma, m } => Ok(Matrix::from_diagonal(&q.map(|r| r.powf(1.0 - m) / gamma))),
        }
    }

    /// Solves `grad F(q) = xi` for `q`.
    pub fn gradient_inverse(&self, xi: &Vector) -> Result<Vector> {
        match self {
            Potential::Quadratic { w, u } => {
                check_len(w.nrows(), xi.len())?;
                let chol =
                    Cholesky::new(w.clone()).ok_or_else(|| Error::Singular("W is not positive definite".into()))?;
                Ok(chol.solve(&(xi - u)))
            }
            Potential::Entropy { gamma } => Ok(xi.map(|x| (x / gamma).exp())),
            Potential::Renyi { gamma, m } => {
                let base = xi.map(|x| m * x / gamma + 1.0);
                if let Some(i) = base.iter().position(|&b| !(b > 0.0)) {
                    return Err(Error::Domain(format!(
                        "component {i}: m xi / gamma + 1 = {} is outside the gradient range",
                        base[i]
                    )));
                }
                Ok(base.map(|b| b.powf(1.0 / m)))
            }
        }
    }
}

/// Least-squares fit of `F(q) = q.grad F(q) / a + b` over the samples.
///
/// With `constrained`, every sample must lie on the probability simplex.
pub fn homogeneity_fit(potential: &Potential, samples: &[Vector], constrained: bool) -> Result<HomogeneityFit> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: samples.len() });
    }
    let mut rows = Vec::with_capacity(samples.len());
    for q in samples {
        if constrained && (q.sum() - 1.0).abs() > SIMPLEX_MASS_TOL {
            return Err(Error::Domain(format!("constrained fit needs simplex samples, got mass {}", q.sum())));
        }
        let euler = q.dot(&potential.gradient(q)?);
        rows.push((euler, potential.evaluate(q)?));
    }
    // Regress F on [euler, 1]; the slope is 1/a.
    let k = rows.len() as f64;
    let mean_s = rows.iter().map(|r| r.0).sum::<f64>() / k;
    let mean_f = rows.iter().map(|r| r.1).sum::<f64>() / k;
    let sxx: f64 = rows.iter().map(|r| (r.0 - mean_s).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| (r.0 - mean_s) * (r.1 - mean_f)).sum();
    let spread = rows.iter().map(|r| r.0.abs()).fold(0.0, f64::max).max(1.0);
    if sxx <= (1e-12 * spread).powi(2) * k {
        return Err(Error::Rank("q.grad F(q) is constant across the samples".into()));
    }
    let slope = sxy / sxx;
    if slope == 0.0 {
        return Err(Error::Rank("fitted slope is zero; no finite degree".into()));
    }
    let b = mean_f - slope * mean_s;
    let residual = rows.iter().map(|&(s, f)| (f - slope * s - b).abs()).fold(0.0, f64::max);
    Ok(HomogeneityFit { a: 1.0 / slope, b, residual })
}
