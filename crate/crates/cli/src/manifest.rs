//! Run manifest, written after every other output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::presets::Check;

/// `git describe` of the source tree at build time, or the package version.
pub const VERSION: &str = env!("EOSLAB_VERSION");

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Clone, Debug)]
pub struct RunManifest {
    pub config_text: String,
    pub version: String,
    /// `(file name, sha256)` for every CSV written.
    pub outputs: Vec<(String, String)>,
    pub duration_secs: f64,
    pub checks: Vec<Check>,
}

impl RunManifest {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn checksum(&self, file: &str) -> Option<&str> {
        self.outputs.iter().find(|(f, _)| f == file).map(|(_, s)| s.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "duration_secs = {:.3}", self.duration_secs);
        let _ = writeln!(s, "checks_passed = {}", self.all_passed());
        s.push_str("\n[outputs]\n");
        for (f, sum) in &self.outputs {
            let _ = writeln!(s, "{f} = {sum}");
        }
        s.push_str("\n[checks]\n");
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{} = {verdict} {}", c.name, c.detail);
        }
        s.push_str("\n[config]\n");
        s.push_str(&self.config_text);
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.render()).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
