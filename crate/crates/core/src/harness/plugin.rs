//! Out-of-process model adapters.
//!
//! A descriptor file names the command to run. For every question the harness starts
//! the command, writes one JSON request to its stdin and reads one JSON reply from
//! its stdout:
//!
//! ```json
//! {"image_id": "...", "image_path": "...", "prompt": "...", "plan": {...}, "capture": false, "options": {}}
//! {"raw_text": "{12}", "captures_dir": "/optional/dir/with/sidecar.json"}
//! ```

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendAnswer, BackendDescriptor, BackendError, BackendRequest, Capability, CaptureBundle};
use crate::intervention::capture::read_captures;
use crate::intervention::{InterventionPlan, ModelFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginDescriptor {
    pub id: String,
    pub capabilities: BTreeSet<Capability>,
    pub model_family: ModelFamily,
    /// Program and arguments.
    pub command: Vec<String>,
}

#[derive(Serialize)]
struct Request<'a> {
    image_id: &'a str,
    image_path: Option<&'a Path>,
    prompt: &'a str,
    plan: Option<&'a InterventionPlan>,
    capture: bool,
    options: &'a serde_json::Value,
}

#[derive(Deserialize)]
struct Reply {
    raw_text: String,
    #[serde(default)]
    captures_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PluginBackend {
    descriptor: BackendDescriptor,
    command: Vec<String>,
}

impl PluginBackend {
    pub fn new(d: PluginDescriptor) -> Result<Self, BackendError> {
        if d.command.is_empty() {
            return Err(BackendError::AdapterFailure { backend: d.id, message: "descriptor has an empty command".into() });
        }
        Ok(Self {
            descriptor: BackendDescriptor { id: d.id, capabilities: d.capabilities, model_family: d.model_family },
            command: d.command,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let fail = |message: String| BackendError::AdapterFailure { backend: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        Self::new(serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?)
    }

    fn fail(&self, message: impl Into<String>) -> BackendError {
        BackendError::AdapterFailure { backend: self.descriptor.id.clone(), message: message.into() }
    }
}

impl Backend for PluginBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn answer(&self, req: &BackendRequest<'_>) -> Result<BackendAnswer, BackendError> {
        let body = serde_json::to_vec(&Request {
            image_id: &req.manifest.image_id,
            image_path: req.image_path,
            prompt: req.prompt,
            plan: req.plan,
            capture: req.capture,
            options: req.options,
        })
        .map_err(|e| self.fail(e.to_string()))?;
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| self.fail(format!("cannot start {:?}: {e}", self.command[0])))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&body)
            .map_err(|e| self.fail(format!("writing request: {e}")))?;
        let out = child.wait_with_output().map_err(|e| self.fail(e.to_string()))?;
        if !out.status.success() {
            return Err(self.fail(format!("{}: {}", out.status, String::from_utf8_lossy(&out.stderr).trim())));
        }
        let reply: Reply = serde_json::from_slice(&out.stdout).map_err(|e| self.fail(format!("bad reply: {e}")))?;
        let captures = match reply.captures_dir {
            Some(dir) if req.capture => {
                let (sidecar, layers) = read_captures(&dir).map_err(|e| self.fail(e.to_string()))?;
                Some(CaptureBundle { sidecar, layers })
            }
            _ => None,
        };
        Ok(BackendAnswer { raw_text: reply.raw_text, captures })
    }
}
