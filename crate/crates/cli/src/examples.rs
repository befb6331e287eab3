//! Example experiments compiled into the binary.

use std::fs;
use std::path::Path;

use crate::CliError;

pub struct Example {
    pub file: &'static str,
    pub text: &'static str,
}

macro_rules! bundled {
    ($($file:literal),* $(,)?) => {
        &[$(Example { file: $file, text: include_str!(concat!("../configs/", $file)) }),*]
    };
}

pub const EXAMPLES: &[Example] = bundled![
    "flat_flow.cfg",
    "flat_eta_flow.cfg",
    "flat_bridge.cfg",
    "flat_audit.cfg",
    "two_node_stationary.cfg",
    "two_node_bridge.cfg",
    "path3_renyi_audit.cfg",
    "path3_homogeneity.cfg",
    "diagonal_power_audit.cfg",
    "cycle4_bridge.cfg",
    "cycle4_symplectic.cfg",
    "cycle4.toml",
];

impl Example {
    pub fn is_config(&self) -> bool {
        self.file.ends_with(".cfg")
    }

    /// The leading comment block, joined into one line.
    pub fn summary(&self) -> String {
        self.text.lines().map_while(|l| l.strip_prefix('#')).map(str::trim).collect::<Vec<_>>().join(" ")
    }
}

/// Writes every bundled file (configs and the graph files they reference) into `dir`.
pub fn write_all(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    for ex in EXAMPLES {
        let path = dir.join(ex.file);
        fs::write(&path, ex.text).map_err(CliError::io(&path))?;
    }
    Ok(())
}
