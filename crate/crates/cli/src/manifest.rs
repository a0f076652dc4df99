use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

/// Ordered `key=value` record of a run, written as `manifest.txt`.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn set_opt<T: Display>(&mut self, key: &str, value: Option<T>) {
        match value {
            Some(v) => self.set(key, v),
            None => self.set(key, "none"),
        }
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.txt");
        fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}
