//! Executes one experiment and writes its artifacts.
//!
//! Every run writes `report.csv` (`quantity,value` rows) and `manifest.json`
//! into its output directory, plus per kind:
//!
//! | kind                 | extra artifacts                     |
//! |----------------------|-------------------------------------|
//! | `flow`               | `trajectory.csv`                    |
//! | `eta_flow`           | `eta_trajectory.csv`                |
//! | `bridge`             | `trajectory.csv`                    |
//! | `split_audit`        | `trajectory.csv`, `split.csv`       |
//! | `symplectic_check`   | `symplectic.csv`                    |
//! | `homogeneity_report` | none                                |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use gsbp_core::bridge::{initial_guess, solve_multistart};
use gsbp_core::dynamics::{integrate_with, IntegrateOptions};
use gsbp_core::export::{write_eta_trajectory, write_split_report, write_trajectory};
use gsbp_core::hopf_cole::{integrate_eta, k_consistency, symplectic_residual};
use gsbp_core::metrics::{metric_homogeneity_degree, project_mean_zero};
use gsbp_core::potentials::homogeneity_fit;
use gsbp_core::splitting::{
    action_identity_residual, audit_inequalities, rate_difference_residual, second_derivative_check, verify_homogeneity,
};
use gsbp_core::{action, to_eta, BridgeProblem, Metric, PhaseState, Potential, Trajectory, Vector};
use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{field_error, vector, ExperimentConfig, Kind};
use crate::CliError;

/// A parsed and validated experiment, ready to execute.
#[derive(Debug)]
pub struct Experiment {
    pub path: PathBuf,
    pub config: ExperimentConfig,
    pub metric: Metric,
    pub potential: Potential,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output: PathBuf,
    pub artifacts: Vec<String>,
}

impl Experiment {
    /// Reads, parses and validates a config file, including its initial data.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let config = ExperimentConfig::parse(&text)?;
        config.check()?;
        let base = path.parent().unwrap_or(Path::new("."));
        let metric = config.build_metric(base)?;
        let potential = config.build_potential()?;
        let output = config.output_dir(path);
        let exp = Experiment { path: path.to_path_buf(), config, metric, potential, output };
        exp.initial_data()?;
        Ok(exp)
    }

    fn state(&self) -> Result<PhaseState, CliError> {
        let q = vector("q0", &self.config.q0)?;
        let p = match &self.config.p0 {
            Some(p) => Vector::from_vec(p.clone()),
            None => Vector::zeros(q.len()),
        };
        if p.len() != q.len() {
            return Err(field_error("p0", format!("expected length {}, got {}", q.len(), p.len())));
        }
        PhaseState::new(&self.metric, &self.potential, q, p, 0.0).map_err(|e| field_error("q0", e))
    }

    fn bridge(&self) -> Result<BridgeProblem, CliError> {
        let x = vector("x", &self.config.x)?;
        let y = vector("y", &self.config.y)?;
        let mut problem =
            BridgeProblem::new(self.metric.clone(), self.potential.clone(), x, y, self.config.horizon, self.config.dt)
                .map_err(|e| field_error("x", e))?;
        if let Some(tol) = self.config.tol {
            problem.tol = tol;
        }
        if let Some(max_iter) = self.config.max_iter {
            problem.max_iter = max_iter;
        }
        Ok(problem)
    }

    fn initial_data(&self) -> Result<(), CliError> {
        match self.config.kind {
            Kind::Bridge => self.bridge().map(drop),
            Kind::SplitAudit if self.config.q0.is_none() => self.bridge().map(drop),
            _ => self.state().map(drop),
        }
    }

    /// Runs the experiment and writes its artifacts.
    pub fn run(&self) -> Result<RunSummary, CliError> {
        let started = Instant::now();
        info!("{}: running {:?}", self.path.display(), self.config.kind);
        fs::create_dir_all(&self.output).map_err(CliError::io(&self.output))?;
        let mut report = Report::default();
        let mut artifacts = match self.config.kind {
            Kind::Flow => self.flow(&mut report)?,
            Kind::EtaFlow => self.eta_flow(&mut report)?,
            Kind::Bridge => self.run_bridge(&mut report)?,
            Kind::SplitAudit => self.split_audit(&mut report)?,
            Kind::SymplecticCheck => self.symplectic(&mut report)?,
            Kind::HomogeneityReport => self.homogeneity(&mut report)?,
        };
        self.write("report.csv", |w| report.write(w))?;
        artifacts.push("report.csv".into());
        artifacts.push("manifest.json".into());
        let manifest = serde_json::json!({
            "config_path": self.path.display().to_string(),
            "config": self.config,
            "versions": {
                "gsbp": env!("CARGO_PKG_VERSION"),
                "gsbp-core": gsbp_core::VERSION,
            },
            "wall_time_seconds": started.elapsed().as_secs_f64(),
            "artifacts": artifacts,
        });
        self.write("manifest.json", |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            writeln!(w)
        })?;
        Ok(RunSummary { output: self.output.clone(), artifacts })
    }

    fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.output.join(name);
        let file = File::create(&path).map_err(CliError::io(&path))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(CliError::io(&path))
    }

    fn options(&self) -> IntegrateOptions {
        IntegrateOptions { record_split: self.potential.homogeneity().is_some(), ..Default::default() }
    }

    fn integrate(&self, s0: &PhaseState) -> Result<Trajectory, CliError> {
        let c = &self.config;
        Ok(integrate_with(&self.metric, &self.potential, s0, c.horizon, c.dt, &self.options())?)
    }

    fn trajectory_summary(&self, traj: &Trajectory, report: &mut Report) -> Result<(), CliError> {
        report.push("horizon", traj.horizon());
        report.push("steps", (traj.len() - 1) as f64);
        report.push("energy_drift", traj.energy_drift());
        report.push("action", action(&self.metric, &self.potential, traj)?);
        for (i, q) in traj.last().q.iter().enumerate() {
            report.push(&format!("q_final_{}", i + 1), *q);
        }
        Ok(())
    }

    fn flow(&self, report: &mut Report) -> Result<Vec<String>, CliError> {
        let traj = self.integrate(&self.state()?)?;
        self.trajectory_summary(&traj, report)?;
        self.write("trajectory.csv", |w| write_trajectory(w, &traj))?;
        Ok(vec!["trajectory.csv".into()])
    }

    fn eta_flow(&self, report: &mut Report) -> Result<Vec<String>, CliError> {
        let pair = to_eta(&self.potential, &self.state()?)?;
        let traj = integrate_eta(&self.metric, &self.potential, &pair, self.config.horizon, self.config.dt)?;
        report.push("K_initial", traj.k[0]);
        report.push("K_drift", traj.k_drift());
        report.push("K_minus_H_initial", k_consistency(&self.metric, &self.potential, &pair)?);
        self.write("eta_trajectory.csv", |w| write_eta_trajectory(w, &traj))?;
        Ok(vec!["eta_trajectory.csv".into()])
    }

    /// Solves the bridge; `samples` adds seeded random restarts around the
    /// default initial guess.
    fn solve_bridge(&self, report: &mut Report) -> Result<Trajectory, CliError> {
        let problem = self.bridge()?;
        let guess = initial_guess(&problem);
        let mut starts = vec![guess.clone()];
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let spread = self.config.spread.unwrap_or(0.1);
        for _ in 0..self.config.samples.unwrap_or(0) {
            starts.push(guess.map(|g| g + rng.random_range(-spread..spread)));
        }
        let solution = solve_multistart(&problem, &starts)?;
        debug!("bridge converged in {} iterations", solution.iterations);
        report.push("residual", solution.residual);
        report.push("iterations", solution.iterations as f64);
        for (i, p) in solution.p0.iter().enumerate() {
            report.push(&format!("p0_{}", i + 1), *p);
        }
        // Re-shoot with split diagnostics recorded when the potential allows it.
        if self.options().record_split {
            let s0 = PhaseState::new(&self.metric, &self.potential, problem.x.clone(), solution.p0.clone(), 0.0)?;
            self.integrate(&s0)
        } else {
            Ok(solution.trajectory)
        }
    }

    fn run_bridge(&self, report: &mut Report) -> Result<Vec<String>, CliError> {
        let traj = self.solve_bridge(report)?;
        self.trajectory_summary(&traj, report)?;
        self.write("trajectory.csv", |w| write_trajectory(w, &traj))?;
        Ok(vec!["trajectory.csv".into()])
    }

    fn split_audit(&self, report: &mut Report) -> Result<Vec<String>, CliError> {
        let traj = match self.config.q0 {
            Some(_) => self.integrate(&self.state()?)?,
            None => self.solve_bridge(report)?,
        };
        self.trajectory_summary(&traj, report)?;
        let lambda = match self.config.lambda {
            Some(l) => l,
            None => self
                .potential
                .convexity_modulus()
                .ok_or_else(|| field_error("lambda", "required unless the potential is quadratic"))?,
        };
        let setting = verify_homogeneity(&self.metric, &self.potential, &[traj.first().q.clone()])?;
        let audit = audit_inequalities(&traj, &self.potential, &self.metric, lambda)?;
        report.push("lambda", lambda);
        report.push("c", setting.c);
        report.push("min_slack", audit.min_slack());
        report.push("passes", if audit.passes() { 1.0 } else { 0.0 });
        report.push(
            "action_identity_residual",
            action_identity_residual(&traj, &self.potential, &self.metric, setting.c)?,
        );
        report.push("rate_difference_residual", rate_difference_residual(&traj, &self.potential, &self.metric)?);
        if !self.metric.has_gauge() {
            report.push("second_derivative_residual", second_derivative_check(&traj, &self.potential, &self.metric)?);
        }
        self.write("trajectory.csv", |w| write_trajectory(w, &traj))?;
        self.write("split.csv", |w| write_split_report(w, &audit))?;
        Ok(vec!["trajectory.csv".into(), "split.csv".into()])
    }

    /// Seeded random states `q0 + U(-s, s)` (renormalized on graphs) with
    /// momenta `U(-s, s)`; draws outside the domain are skipped.
    fn random_states(&self, count: usize) -> Result<Vec<PhaseState>, CliError> {
        let center = self.state()?;
        let spread = self.config.spread.unwrap_or(0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let on_simplex = self.metric.has_gauge() || self.potential.homogeneity_needs_simplex();
        let mut states = Vec::with_capacity(count);
        for _ in 0..100 * count {
            if states.len() == count {
                break;
            }
            let mut q = center.q.map(|x| x + rng.random_range(-spread..spread));
            if on_simplex {
                q /= q.sum();
            }
            let mut p = center.p.map(|x| x + rng.random_range(-spread..spread));
            if self.metric.has_gauge() {
                p = project_mean_zero(&p);
            }
            if let Ok(s) = PhaseState::new(&self.metric, &self.potential, q, p, 0.0) {
                states.push(s);
            }
        }
        if states.len() < count {
            return Err(field_error(
                "spread",
                format!("only {} of {count} random states fell in the domain", states.len()),
            ));
        }
        Ok(states)
    }

    fn symplectic(&self, report: &mut Report) -> Result<Vec<String>, CliError> {
        let step = self.config.fd_step.unwrap_or(1e-5);
        let mut rows = Vec::new();
        for s in self.random_states(self.config.samples.unwrap_or(16))? {
            let pair = match to_eta(&self.potential, &s) {
                Ok(pair) => pair,
                Err(e) => {
                    debug!("skipping state outside the transform's range: {e}");
                    continue;
                }
            };
            let res = symplectic_residual(&self.metric, &self.potential, &pair, step)?;
            rows.push([res.field, res.form, k_consistency(&self.metric, &self.potential, &pair)?]);
        }
        let max = |i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
        report.push("samples", rows.len() as f64);
        report.push("max_field_residual", max(0));
        report.push("max_form_residual", max(1));
        report.push("max_K_minus_H", max(2));
        self.write("symplectic.csv", |w| {
            writeln!(w, "sample,field,form,K_minus_H")?;
            for (i, r) in rows.iter().enumerate() {
                writeln!(w, "{i},{},{},{}", num(r[0]), num(r[1]), num(r[2]))?;
            }
            Ok(())
        })?;
        Ok(vec!["symplectic.csv".into()])
    }

    fn homogeneity(&self, report: &mut Report) -> Result<Vec<String>, CliError> {
        let samples: Vec<Vector> =
            self.random_states(self.config.samples.unwrap_or(8))?.into_iter().map(|s| s.q).collect();
        let fit = homogeneity_fit(&self.potential, &samples, self.potential.homogeneity_needs_simplex())?;
        report.push("potential_a", fit.a);
        report.push("potential_b", fit.b);
        report.push("potential_residual", fit.residual);
        let degree = metric_homogeneity_degree(&self.metric, &samples)?;
        report.push("metric_degree", degree.degree);
        report.push("metric_residual", degree.residual);
        if let Ok(setting) = verify_homogeneity(&self.metric, &self.potential, &samples) {
            report.push("c", setting.c);
        }
        Ok(Vec::new())
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Default)]
struct Report(Vec<(String, f64)>);

impl Report {
    fn push(&mut self, key: &str, value: f64) {
        self.0.push((key.to_string(), value));
    }

    fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "quantity,value")?;
        for (k, v) in &self.0 {
            writeln!(w, "{k},{}", num(*v))?;
        }
        Ok(())
    }
}
