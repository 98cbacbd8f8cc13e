//! Run manifests: written into the output directory before any
//! computation so a run can be reproduced from its manifest alone.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::Settings;

pub struct Manifest<'a> {
    pub command: &'a str,
    pub settings: &'a Settings,
    pub seed: u64,
    pub inputs: Vec<(&'a str, PathBuf)>,
    pub outputs: Vec<(&'a str, PathBuf)>,
}

impl Manifest<'_> {
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("creating {}", out_dir.display()))?;
        let mut text = String::new();
        text.push_str(&format!("tool_version={}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("command={}\n", self.command));
        text.push_str(&format!("seed={}\n", self.seed));
        text.push_str(&format!("config_hash={}\n", self.settings.hash()));
        for (name, path) in &self.inputs {
            text.push_str(&format!("input_{name}={}\n", path.display()));
        }
        for (name, path) in &self.outputs {
            text.push_str(&format!("output_{name}={}\n", path.display()));
        }
        text.push_str(&self.settings.render());
        std::fs::write(out_dir.join("manifest.txt"), text)
            .with_context(|| format!("writing manifest in {}", out_dir.display()))?;
        Ok(())
    }
}
