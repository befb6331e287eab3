//! State-space geometries, expressed through the inverse metric tensor `G(q)`.
//!
//! Three families are provided:
//!
//! * [`Metric::Euclidean`]: `G(q) = I`.
//! * [`Metric::DiagonalPower`]: `G(q) = diag(q_i^m)` on the positive orthant.
//! * [`Metric::GraphWasserstein`]: `G(rho) = L(rho)`, the weighted graph
//!   Laplacian with edge coefficients
//!   `theta_ij(rho) = (rho_i / d_i + rho_j / d_j) / 2`.
//!
//! All three satisfy the Euler homogeneity condition `q^i d_i G^{jk} = m G^{jk}`
//! with `m = 0`, `m` and `1` respectively. (An older statement of this condition
//! reads `G = m q.dG`; that form is inconsistent with the first-derivative
//! identity for the split energies and with the flat case, and is not used.)
//!
//! `L(rho)` is linear in `rho`, so it is well defined on the whole open
//! positive orthant and not only on the simplex. The domain checks here only
//! ask for positivity; unit mass is enforced where densities are constructed
//! (see [`SimplexDensity`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Tolerance on `sum(rho) = 1` for simplex densities.
pub const SIMPLEX_MASS_TOL: f64 = 1e-12;

/// A strictly positive vector of unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexDensity(Vector);

impl SimplexDensity {
    pub fn new(rho: Vector) -> Result<Self> {
        if let Some(i) = rho.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Domain(format!("density entry {i} = {} is not strictly positive", rho[i])));
        }
        let mass = rho.sum();
        if (mass - 1.0).abs() > SIMPLEX_MASS_TOL {
            return Err(Error::Domain(format!("density has mass {mass}, expected 1")));
        }
        Ok(SimplexDensity(rho))
    }

    pub fn uniform(n: usize) -> Self {
        SimplexDensity(Vector::from_element(n, 1.0 / n as f64))
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn into_inner(self) -> Vector {
        self.0
    }
}

/// `theta_ij(rho) = (rho_i / d_i + rho_j / d_j) / 2` for an edge `{i, j}`.
pub fn theta(graph: &Graph, rho: &Vector, i: usize, j: usize) -> Result<f64> {
    check_len(graph.n(), rho.len())?;
    check_nonnegative(rho)?;
    if graph.weight(i, j).is_none() {
        return Err(Error::NotAnEdge(i, j));
    }
    Ok(theta_unchecked(graph, rho, i, j))
}

#[inline]
fn theta_unchecked(graph: &Graph, rho: &Vector, i: usize, j: usize) -> f64 {
    let d = graph.d();
    0.5 * (rho[i] / d[i] + rho[j] / d[j])
}

/// The weighted Laplacian `L(rho)`.
pub fn laplacian(graph: &Graph, rho: &Vector) -> Result<Matrix> {
    check_len(graph.n(), rho.len())?;
    check_nonnegative(rho)?;
    Ok(laplacian_directional_derivative(graph, rho))
}

/// Derivative of `rho -> L(rho)` in direction `v`. Since `L` is linear this is
/// `L(v)`, evaluated with the same formula and no sign restriction on `v`.
pub fn laplacian_directional_derivative(graph: &Graph, v: &Vector) -> Matrix {
    let n = graph.n();
    let mut l = Matrix::zeros(n, n);
    for e in graph.edges() {
        let c = e.weight * theta_unchecked(graph, v, e.i, e.j);
        l[(e.i, e.i)] += c;
        l[(e.j, e.j)] += c;
        l[(e.i, e.j)] -= c;
        l[(e.j, e.i)] -= c;
    }
    l
}

/// `x^T L(rho) y = sum_edges w_ij theta_ij(rho) (x_i - x_j)(y_i - y_j)`.
fn laplacian_form(graph: &Graph, rho: &Vector, x: &Vector, y: &Vector) -> f64 {
    graph
        .edges()
        .iter()
        .map(|e| e.weight * theta_unchecked(graph, rho, e.i, e.j) * (x[e.i] - x[e.j]) * (y[e.i] - y[e.j]))
        .sum()
}

/// Solves `L x = b` on the mean-zero subspace, for a Laplacian-like `L`
/// (symmetric, `L 1 = 0`, one-dimensional kernel). `b` must have zero sum.
pub fn solve_mean_zero(l: &Matrix, b: &Vector) -> Result<Vector> {
    let n = b.len();
    if l.nrows() != n || l.ncols() != n {
        return Err(Error::Dimension { expected: n, got: l.nrows() });
    }
    let total = b.sum();
    if total.abs() > 1e-10 {
        return Err(Error::Domain(format!("right-hand side has sum {total:e}; expected a mean-zero vector")));
    }
    let shifted = l + Matrix::from_element(n, n, 1.0 / n as f64);
    let x = shifted
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("Laplacian has a kernel larger than the constants".into()))?;
    Ok(project_mean_zero(&x))
}

/// Removes the mean of `v`.
pub fn project_mean_zero(v: &Vector) -> Vector {
    let mean = v.mean();
    v.map(|x| x - mean)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Euclidean,
    DiagonalPower { m: f64 },
    GraphWasserstein(Graph),
}

/// Christoffel symbols `Gamma^n_{kl}`, stored as one matrix per upper index.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub symbols: Vec<Matrix>,
}

impl Christoffel {
    /// `Gamma^n_{kl}` at the given indices.
    pub fn get(&self, n: usize, k: usize, l: usize) -> f64 {
        self.symbols[n][(k, l)]
    }

    /// The contraction `sum_n Gamma^n_{kl} f_n`.
    pub fn contract(&self, f: &Vector) -> Matrix {
        let dim = self.symbols.len();
        let mut out = Matrix::zeros(dim, dim);
        for (n, gamma) in self.symbols.iter().enumerate() {
            out += gamma * f[n];
        }
        out
    }
}

/// Least-squares fit of the Euler degree of a metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeFit {
    pub degree: f64,
    pub residual: f64,
}

impl Metric {
    pub fn graph(&self) -> Option<&Graph> {
        match self {
            Metric::GraphWasserstein(g) => Some(g),
            _ => None,
        }
    }

    /// Whether momenta carry the constant gauge freedom `p -> p + c 1`.
    pub fn has_gauge(&self) -> bool {
        matches!(self, Metric::GraphWasserstein(_))
    }

    /// Dimension imposed by the metric, if any.
    pub fn dim(&self) -> Option<usize> {
        self.graph().map(Graph::n)
    }

    /// The exact Euler degree `m` with `q . dG = m G`.
    pub fn euler_degree(&self) -> f64 {
        match self {
            Metric::Euclidean => 0.0,
            Metric::DiagonalPower { m } => *m,
            Metric::GraphWasserstein(_) => 1.0,
        }
    }

    pub fn check_domain(&self, q: &Vector) -> Result<()> {
        if let Some(n) = self.dim() {
            check_len(n, q.len())?;
        }
        if let Some(i) = q.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("coordinate {i} is not finite")));
        }
        match self {
            Metric::Euclidean => Ok(()),
            Metric::DiagonalPower { .. } | Metric::GraphWasserstein(_) => match q.iter().position(|&x| x <= 0.0) {
                Some(i) => Err(Error::Domain(format!("coordinate {i} = {} must be strictly positive", q[i]))),
                None => Ok(()),
            },
        }
    }

    /// The inverse metric tensor `G(q)`.
    pub fn inverse_metric(&self, q: &Vector) -> Result<Matrix> {
        self.check_domain(q)?;
        Ok(match self {
            Metric::Euclidean => Matrix::identity(q.len(), q.len()),
            Metric::DiagonalPower { m } => Matrix::from_diagonal(&q.map(|x| x.powf(*m))),
            Metric::GraphWasserstein(g) => laplacian_directional_derivative(g, q),
        })
    }

    /// `sum_i v_i d_i G(q)`.
    pub fn directional_derivative(&self, q: &Vector, v: &Vector) -> Result<Matrix> {
        self.check_domain(q)?;
        check_len(q.len(), v.len())?;
        let n = q.len();
        Ok(match self {
            Metric::Euclidean => Matrix::zeros(n, n),
            Metric::DiagonalPower { m } => Matrix::from_diagonal(&q.zip_map(v, |x, vi| m * x.powf(m - 1.0) * vi)),
            Metric::GraphWasserstein(g) => laplacian_directional_derivative(g, v),
        })
    }

    /// The partial derivative `d_i G(q)`.
    pub fn partial(&self, q: &Vector, i: usize) -> Result<Matrix> {
        let mut e = Vector::zeros(q.len());
        e[i] = 1.0;
        self.directional_derivative(q, &e)
    }

    /// The quadratic form `x^T G(q) y`.
    pub fn form(&self, q: &Vector, x: &Vector, y: &Vector) -> Result<f64> {
        self.check_domain(q)?;
        check_len(q.len(), x.len())?;
        check_len(q.len(), y.len())?;
        Ok(match self {
            Metric::Euclidean => x.dot(y),
            Metric::DiagonalPower { m } => {
                q.iter().zip(x.iter().zip(y.iter())).map(|(qi, (xi, yi))| qi.powf(*m) * xi * yi).sum()
            }
            Metric::GraphWasserstein(g) => laplacian_form(g, q, x, y),
        })
    }

    /// The vector with entries `x^T (d_i G(q)) y`.
    pub fn form_gradient(&self, q: &Vector, x: &Vector, y: &Vector) -> Result<Vector> {
        self.check_domain(q)?;
        check_len(q.len(), x.len())?;
        check_len(q.len(), y.len())?;
        let n = q.len();
        Ok(match self {
            Metric::Euclidean => Vector::zeros(n),
            Metric::DiagonalPower { m } => Vector::from_fn(n, |i, _| m * q[i].powf(m - 1.0) * x[i] * y[i]),
            Metric::GraphWasserstein(g) => {
                // d theta_ij / d rho_i = 1 / (2 d_i)
                let d = g.d();
                Vector::from_fn(n, |i, _| {
                    g.neighbors(i).iter().map(|&(k, w)| w * (x[i] - x[k]) * (y[i] - y[k])).sum::<f64>() / (2.0 * d[i])
                })
            }
        })
    }

    /// Lowers a tangent vector: solves `G(q) x = v`. For the graph metric the
    /// solve runs on the mean-zero subspace and `v` must have zero sum.
    pub fn lower(&self, q: &Vector, v: &Vector) -> Result<Vector> {
        self.check_domain(q)?;
        check_len(q.len(), v.len())?;
        match self {
            Metric::Euclidean => Ok(v.clone()),
            Metric::DiagonalPower { m } => Ok(v.zip_map(q, |vi, qi| vi / qi.powf(*m))),
            Metric::GraphWasserstein(g) => solve_mean_zero(&laplacian_directional_derivative(g, q), v),
        }
    }

    /// Levi-Civita symbols of the metric `g = G^{-1}`.
    pub fn christoffel(&self, q: &Vector) -> Result<Christoffel> {
        if let Metric::GraphWasserstein(_) = self {
            return Err(Error::Unsupported(
                "Christoffel symbols of the graph Wasserstein metric; use the finite-difference audit path".into(),
            ));
        }
        let n = q.len();
        let inv = self.inverse_metric(q)?;
        let g = inv.clone().try_inverse().ok_or_else(|| Error::Singular("inverse metric is not invertible".into()))?;
        // d_k g = -g (d_k G) g
        let dg: Vec<Matrix> = (0..n).map(|k| self.partial(q, k).map(|p| -(&g * p * &g))).collect::<Result<_>>()?;
        let mut symbols = vec![Matrix::zeros(n, n); n];
        for (a, sym) in symbols.iter_mut().enumerate() {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for b in 0..n {
                        s += inv[(a, b)] * (dg[k][(b, l)] + dg[l][(b, k)] - dg[b][(k, l)]);
                    }
                    sym[(k, l)] = 0.5 * s;
                }
            }
        }
        Ok(Christoffel { symbols })
    }
}

/// Fits `m` in `q . dG(q) = m G(q)` over the samples by least squares
/// (entrywise), returning the maximal absolute misfit as the residual.
pub fn metric_homogeneity_degree(metric: &Metric, samples: &[Vector]) -> Result<DegreeFit> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: samples.len() });
    }
    let mut pairs = Vec::with_capacity(samples.len());
    let (mut num, mut den) = (0.0, 0.0);
    for q in samples {
        let g = metric.inverse_metric(q)?;
        let euler = metric.directional_derivative(q, q)?;
        num += euler.dot(&g);
        den += g.dot(&g);
        pairs.push((g, euler));
    }
    if den == 0.0 {
        return Err(Error::Rank("inverse metric vanishes on every sample".into()));
    }
    let degree = num / den;
    let residual = pairs.iter().map(|(g, euler)| (euler - g * degree).amax()).fold(0.0, f64::max);
    Ok(DegreeFit { degree, residual })
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

fn check_nonnegative(v: &Vector) -> Result<()> {
    match v.iter().position(|&x| !(x >= 0.0)) {
        Some(i) => Err(Error::Domain(format!("entry {i} = {} is negative", v[i]))),
        None => Ok(()),
    }
}
