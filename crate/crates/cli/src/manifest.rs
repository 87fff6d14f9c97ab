use std::fmt::Display;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// `key=value` record of a run: effective parameters, then input checksums.
/// The thread count is left out on purpose since it cannot affect output.
#[derive(Debug, Default)]
pub struct Manifest {
    params: Vec<(String, String)>,
    inputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(subcommand: &str) -> Self {
        let mut m = Self::default();
        m.param("tool_version", env!("CARGO_PKG_VERSION"));
        m.param("subcommand", subcommand);
        m
    }

    pub fn param(&mut self, key: &str, value: impl Display) {
        self.params.push((key.to_string(), value.to_string()));
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push((path.display().to_string(), hex::encode(Sha256::digest(bytes))));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.params {
            out.push_str(&format!("{k}={v}\n"));
        }
        for (path, sum) in &self.inputs {
            out.push_str(&format!("input.sha256.{path}={sum}\n"));
        }
        out
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}
