//! Comma-separated exports.
//!
//! Every float is written in `{:.16e}` form (17 significant digits) so that
//! reruns can be diffed byte for byte.
//!
//! * Trajectories: header `t,q_1..q_n,p_1..p_n,H,F,mass`, followed by
//!   `K,G,Gstar` when split diagnostics were recorded. Momenta are in the
//!   mean-zero gauge on graphs.
//! * Transformed trajectories: `t,eta_1..eta_n,etastar_1..etastar_n,K`.
//! * Split reports: comment lines `# c = ..`, `# H = ..`, `# lambda = ..`,
//!   `# a = ..`, `# m = ..`, then `t,G,Gstar,dG_formula,dGstar_formula,slack_G,slack_Gstar`.
//!   Times and rates are in the trajectory's own time; slacks refer to the
//!   bounds on the rescaled interval `[0, 1]`.

use std::io::{self, Write};

use crate::dynamics::Trajectory;
use crate::hopf_cole::EtaTrajectory;
use crate::splitting::SplitReport;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn write_row<W: Write>(out: &mut W, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let row: Vec<String> = values.into_iter().map(num).collect();
    writeln!(out, "{}", row.join(","))
}

pub fn write_trajectory<W: Write>(out: &mut W, traj: &Trajectory) -> io::Result<()> {
    let n = traj.first().dim();
    let with_split = traj.diagnostics.iter().all(|d| d.split.is_some());
    let mut cols = vec!["t".to_string()];
    cols.extend(header("q", n));
    cols.extend(header("p", n));
    cols.extend(["H", "F", "mass"].map(String::from));
    if with_split {
        cols.extend(["K", "G", "Gstar"].map(String::from));
    }
    writeln!(out, "{}", cols.join(","))?;
    for ((t, s), d) in traj.times.iter().zip(&traj.states).zip(&traj.diagnostics) {
        let mut row = vec![*t];
        row.extend(s.q.iter());
        row.extend(s.p.iter());
        row.extend([d.hamiltonian, d.potential, d.mass]);
        if let (true, Some(sp)) = (with_split, d.split) {
            row.extend([sp.k, sp.g, sp.g_star]);
        }
        write_row(out, row)?;
    }
    Ok(())
}

pub fn write_eta_trajectory<W: Write>(out: &mut W, traj: &EtaTrajectory) -> io::Result<()> {
    let n = traj.pairs[0].eta.len();
    let mut cols = vec!["t".to_string()];
    cols.extend(header("eta", n));
    cols.extend(header("etastar", n));
    cols.push("K".into());
    writeln!(out, "{}", cols.join(","))?;
    for ((t, pair), k) in traj.times.iter().zip(&traj.pairs).zip(&traj.k) {
        let mut row = vec![*t];
        row.extend(pair.eta.iter());
        row.extend(pair.eta_star.iter());
        row.push(*k);
        write_row(out, row)?;
    }
    Ok(())
}

pub fn write_split_report<W: Write>(out: &mut W, report: &SplitReport) -> io::Result<()> {
    for (key, v) in [("c", report.c), ("H", report.h), ("lambda", report.lambda), ("a", report.a), ("m", report.m)] {
        writeln!(out, "# {key} = {}", num(v))?;
    }
    writeln!(out, "t,G,Gstar,dG_formula,dGstar_formula,slack_G,slack_Gstar")?;
    for n in &report.nodes {
        write_row(out, [n.t, n.g, n.g_star, n.dg, n.dg_star, n.slack_g, n.slack_g_star])?;
    }
    Ok(())
}
