//! Experiment documents.
//!
//! One experiment per TOML file. Unknown keys are rejected. Relative paths
//! (`output`, `metric.graph_file`) are resolved against the directory of the
//! config file.
//!
//! ```toml
//! kind = "bridge"
//! T = 1.0
//! dt = 1e-3
//! x = [2.0]
//! y = [3.0861612696304874]
//!
//! [metric]
//! kind = "euclidean"
//!
//! [potential]
//! kind = "quadratic"
//! w = [[1.0]]
//! ```

use std::path::{Path, PathBuf};

use gsbp_core::{Graph, Matrix, Metric, Potential, Vector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Flow,
    EtaFlow,
    Bridge,
    SplitAudit,
    SymplecticCheck,
    HomogeneityReport,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean,
    DiagonalPower {
        m: f64,
    },
    Graph {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edges: Option<Vec<(usize, usize, f64)>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph_file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `w` row-major; `u` defaults to zero.
    Quadratic {
        w: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u: Option<Vec<f64>>,
    },
    Entropy {
        gamma: f64,
    },
    Renyi {
        gamma: f64,
        m: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    /// Bridge tolerance on the terminal residual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub metric: MetricSpec,
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    /// Convexity modulus for the splitting audit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Random states (symplectic check, homogeneity report) or extra bridge starts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Half-width of the random perturbations around `q0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    /// Finite-difference step of the symplectic check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

pub(crate) fn field_error(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("field `{field}`: {message}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Schema(e.to_string().trim_end().to_string()))
    }

    /// Checks the cross-field rules the deserializer cannot express.
    pub fn check(&self) -> Result<(), CliError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(field_error("T", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(field_error("dt", format!("must lie in (0, T], got {}", self.dt)));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(field_error("tol", format!("must be positive, got {tol}")));
            }
        }
        let need = |field: &str, v: &Option<Vec<f64>>| {
            v.as_ref().map(|_| ()).ok_or_else(|| field_error(field, format!("required for kind {:?}", self.kind)))
        };
        match self.kind {
            Kind::Flow | Kind::EtaFlow | Kind::SymplecticCheck | Kind::HomogeneityReport => need("q0", &self.q0)?,
            Kind::Bridge => {
                need("x", &self.x)?;
                need("y", &self.y)?;
            }
            Kind::SplitAudit => {
                if self.q0.is_none() && (self.x.is_none() || self.y.is_none()) {
                    return Err(field_error("q0", "split_audit needs either q0 or both x and y"));
                }
                if self.lambda.is_none() && !matches!(self.potential, PotentialSpec::Quadratic { .. }) {
                    return Err(field_error("lambda", "required unless the potential is quadratic"));
                }
            }
        }
        if self.kind == Kind::HomogeneityReport && self.samples.is_some_and(|s| s < 3) {
            return Err(field_error("samples", "the fits need at least 3"));
        }
        if let Some(spread) = self.spread {
            if !(spread > 0.0) {
                return Err(field_error("spread", format!("must be positive, got {spread}")));
            }
        }
        Ok(())
    }

    pub fn build_metric(&self, base: &Path) -> Result<Metric, CliError> {
        Ok(match &self.metric {
            MetricSpec::Euclidean => Metric::Euclidean,
            MetricSpec::DiagonalPower { m } => {
                if !(*m > 0.0) {
                    return Err(field_error("metric.m", format!("must be positive, got {m}")));
                }
                Metric::DiagonalPower { m: *m }
            }
            MetricSpec::Graph { n, edges, graph_file } => {
                let graph = match (n, edges, graph_file) {
                    (Some(n), Some(edges), None) => {
                        Graph::new(*n, edges).map_err(|e| field_error("metric.edges", e))?
                    }
                    (None, None, Some(file)) => {
                        Graph::from_path(base.join(file)).map_err(|e| field_error("metric.graph_file", e))?
                    }
                    _ => return Err(field_error("metric", "give either `n` and `edges`, or `graph_file`")),
                };
                Metric::GraphWasserstein(graph)
            }
        })
    }

    pub fn build_potential(&self) -> Result<Potential, CliError> {
        match &self.potential {
            PotentialSpec::Quadratic { w, u } => {
                let n = w.len();
                if w.iter().any(|row| row.len() != n) {
                    return Err(field_error("potential.w", "must be a square matrix"));
                }
                let w = Matrix::from_row_iterator(n, n, w.iter().flatten().copied());
                let u = match u {
                    Some(u) if u.len() == n => Vector::from_vec(u.clone()),
                    Some(u) => return Err(field_error("potential.u", format!("expected length {n}, got {}", u.len()))),
                    None => Vector::zeros(n),
                };
                Potential::quadratic(w, u).map_err(|e| field_error("potential.w", e))
            }
            PotentialSpec::Entropy { gamma } => {
                Potential::entropy(*gamma).map_err(|e| field_error("potential.gamma", e))
            }
            PotentialSpec::Renyi { gamma, m } => Potential::renyi(*gamma, *m).map_err(|e| field_error("potential", e)),
        }
    }

    /// Where artifacts go: `output` if given, else a directory named after the
    /// config file, both relative to the config's directory.
    pub fn output_dir(&self, config_path: &Path) -> PathBuf {
        let base = config_path.parent().unwrap_or(Path::new("."));
        match &self.output {
            Some(out) => base.join(out),
            None => {
                let stem = config_path.file_stem().map(|s| s.to_string_lossy().into_owned());
                base.join(format!("{}.out", stem.unwrap_or_else(|| "experiment".into())))
            }
        }
    }
}

pub fn vector(field: &str, v: &Option<Vec<f64>>) -> Result<Vector, CliError> {
    v.as_ref().map(|v| Vector::from_vec(v.clone())).ok_or_else(|| field_error(field, "missing"))
}
