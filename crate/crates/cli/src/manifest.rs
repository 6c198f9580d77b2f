use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};

use crate::sequence::write_file;

/// JSON record written next to every command's outputs.
pub struct Manifest {
    command: &'static str,
    config: Value,
    started: Instant,
    record_timing: bool,
}

impl Manifest {
    /// `record_timing = false` keeps the manifest byte-stable across runs.
    pub fn start(command: &'static str, config: &impl Serialize, record_timing: bool) -> Result<Self> {
        Ok(Self {
            command,
            config: serde_json::to_value(config)?,
            started: Instant::now(),
            record_timing,
        })
    }

    pub fn elapsed_ms(&self) -> f64 {
        self.started.elapsed().as_secs_f64() * 1e3
    }

    pub fn finish(&self, summary: Value) -> Value {
        let mut m = json!({
            "tool": "sscfuse",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "summary": summary,
        });
        if self.record_timing {
            m["timing_ms"] = json!(self.elapsed_ms());
        }
        m
    }

    pub fn write(&self, dir: &Path, summary: Value) -> Result<Value> {
        let m = self.finish(summary);
        write_file(&dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(m)
    }
}
