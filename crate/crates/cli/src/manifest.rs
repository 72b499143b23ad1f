use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{Failure, Outcome};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record written next to every output as `<output>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: &'static str,
}

impl RunManifest {
    pub fn new(command: &'static str, params: &impl Serialize, seed: Option<u64>) -> Outcome<Self> {
        let params =
            serde_json::to_value(params).map_err(|e| Failure::Json("manifest parameters".into(), e))?;
        Ok(Self {
            command,
            params,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION"),
        })
    }

    pub fn input(&mut self, path: &Path) -> Outcome {
        let bytes = std::fs::read(path).map_err(|e| Failure::Io(path.to_path_buf(), e))?;
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes the manifest beside each recorded output.
    pub fn write(&self) -> Outcome {
        let text = to_json(self)?;
        for out in &self.outputs {
            write_text(&manifest_path(out), &text)?;
        }
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn to_json(value: &impl Serialize) -> Outcome<String> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Failure::Json("report".into(), e))?;
    text.push('\n');
    Ok(text)
}

pub fn write_text(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}
