//! Run manifests: everything needed to repeat a command bit-for-bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lesionseg::phantom::PhantomSpec;
use lesionseg::{PipelineConfig, PixelSpacing};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, PathBuf>,
    /// Output files, relative to the output directory.
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub spacing: PixelSpacing,
    #[serde(default)]
    pub pipelines: Vec<PipelineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker_sweep: Option<MarkerSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantoms: Option<PhantomRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerSweep {
    pub from: usize,
    pub to: usize,
    /// Watershed settings; the marker count is replaced per step.
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomRecord {
    pub noise_algorithm: String,
    pub cases: Vec<PhantomCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomCase {
    /// Subdirectory of the output directory, empty for a single phantom.
    pub dir: String,
    pub spec: PhantomSpec,
}

impl RunManifest {
    pub fn new(command: &str, spacing: PixelSpacing) -> Self {
        Self {
            tool: "lesionseg".into(),
            version: lesionseg::VERSION.into(),
            command: command.into(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            spacing,
            pipelines: Vec::new(),
            marker_sweep: None,
            phantoms: None,
        }
    }

    pub fn load(path: &Path, command: &str) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
        let m: Self = serde_json::from_str(&text)
            .with_context(|| format!("{}: not a run manifest", path.display()))?;
        if m.command != command {
            anyhow::bail!(
                "{}: manifest records a '{}' run, not '{command}'",
                path.display(),
                m.command
            );
        }
        for p in &m.pipelines {
            p.validate()
                .with_context(|| format!("{}", path.display()))?;
        }
        Ok(m)
    }

    pub fn input(&self, key: &str) -> Option<&Path> {
        self.inputs.get(key).map(PathBuf::as_path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("{}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lesionseg::{Method, MethodKind};

    #[test]
    fn json_round_trip() {
        let mut m = RunManifest::new("segment", PixelSpacing::new(0.5, 0.7).unwrap());
        m.inputs.insert("image".into(), "a/b.png".into());
        m.pipelines
            .push(PipelineConfig::new(Method::default_for(MethodKind::Gmm)));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        assert_eq!(RunManifest::load(&path, "segment").unwrap(), m);
        assert!(RunManifest::load(&path, "benchmark").is_err());
    }
}
