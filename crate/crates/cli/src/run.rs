//! Per-invocation state: output files, summary lines and the JSON report.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Global;
use shellforge::blank::{BlankSpec, CircuitSpec};
use shellforge::mesh::{detect_format, parse_mesh, write_mesh, MeshFormat, TriangleMesh};
use shellforge::registration::parse_points;
use shellforge::voxel::DEFAULT_PITCH;

/// A stage that did not complete.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl Failure {
    pub fn new(stage: impl Into<String>, message: impl Display) -> Self {
        Self {
            stage: stage.into(),
            message: message.to_string(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

/// `result.map_err(at("shell"))`
pub fn at<E: Display>(stage: &'static str) -> impl Fn(E) -> Failure {
    move |e| Failure::new(stage, e)
}

pub struct Run {
    global: Global,
    command: &'static str,
    config: Value,
    report_name: String,
    outputs: Vec<String>,
    warnings: Vec<String>,
    summary: Vec<String>,
}

impl Run {
    pub fn new(global: &Global, command: &'static str) -> Self {
        Self {
            global: global.clone(),
            command,
            config: Value::Null,
            report_name: format!("{}_report.json", command.replace('-', "_")),
            outputs: Vec::new(),
            warnings: Vec::new(),
            summary: Vec::new(),
        }
    }

    /// Records `args` in the report, then runs `f`.
    pub fn with_config<A: Serialize>(
        &mut self,
        args: &A,
        f: impl FnOnce(&mut Run) -> Result<Value, Failure>,
    ) -> Result<Value, Failure> {
        self.config = json!({
            "global": self.global,
            "pitch": self.pitch(),
            "args": serde_json::to_value(args).map_err(at("config"))?,
        });
        f(self)
    }

    pub fn pitch(&self) -> f64 {
        self.global.pitch.unwrap_or(DEFAULT_PITCH)
    }

    pub fn pitch_override(&self) -> Option<f64> {
        self.global.pitch
    }

    pub fn seed(&self) -> u64 {
        self.global.seed
    }

    pub fn set_report_name(&mut self, name: String) {
        self.report_name = name;
    }

    pub fn progress(&self, msg: impl Display) {
        if self.global.verbose > 0 {
            eprintln!("[{}] {msg}", self.command);
        }
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.global.out.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.out_path(name);
        std::fs::create_dir_all(&self.global.out).map_err(at("export"))?;
        std::fs::write(&path, bytes).map_err(|e| Failure::new("export", format!("{}: {e}", path.display())))?;
        self.progress(format!("wrote {}", path.display()));
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn write_mesh(&mut self, name: &str, mesh: &TriangleMesh) -> Result<PathBuf, Failure> {
        let path = self.write(name, &write_mesh(mesh, MeshFormat::StlBinary))?;
        self.say(format!("wrote {} ({} triangles)", path.display(), mesh.triangles.len()));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let text = serde_json::to_string_pretty(value).map_err(at("export"))? + "\n";
        self.write(name, text.as_bytes())
    }

    /// Writes the report, prints the summary or the failure, and picks the
    /// exit status.
    pub fn finish(mut self, outcome: Result<Value, Failure>) -> ExitCode {
        let (status, failure, result) = match &outcome {
            Ok(v) => ("ok", Value::Null, v.clone()),
            Err(f) => ("failed", json!(f), Value::Null),
        };
        let report = json!({
            "tool": "shellforge",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "status": status,
            "failure": failure,
            "outputs": self.outputs,
            "warnings": self.warnings,
            "result": result,
        });
        let name = self.report_name.clone();
        let written = self.write_json(&name, &report);
        for w in &self.warnings {
            eprintln!("shellforge: warning: {w}");
        }
        match (outcome, written) {
            (Ok(_), Ok(path)) => {
                if !self.global.quiet {
                    for line in &self.summary {
                        println!("{line}");
                    }
                    println!("report: {}", path.display());
                }
                ExitCode::SUCCESS
            }
            (Ok(_), Err(f)) | (Err(f), _) => {
                eprintln!("shellforge: {} stage failed: {}", f.stage, f.message);
                ExitCode::from(2)
            }
        }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::new("input", format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new("input", format!("{}: {e}", path.display())))
}

pub fn read_mesh(path: &Path) -> Result<TriangleMesh, Failure> {
    let bytes = read_bytes(path)?;
    let by_ext = path.extension().and_then(|e| e.to_str()).and_then(MeshFormat::from_extension);
    let format = match by_ext {
        Some(MeshFormat::Obj) => MeshFormat::Obj,
        _ => detect_format(&bytes),
    };
    let mesh = parse_mesh(&bytes, format).map_err(|e| Failure::new("input", format!("{}: {e}", path.display())))?;
    Ok(mesh.with_name(stem(path)))
}

pub fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string()
}

/// A blank spec, or a bare circuit spec with default blank settings.
pub fn read_spec(path: &Path) -> Result<BlankSpec, Failure> {
    let text = read_text(path)?;
    let bad = |e: serde_json::Error| Failure::new("input", format!("{}: {e}", path.display()));
    let value: Value = serde_json::from_str(&text).map_err(bad)?;
    let spec = if value.get("circuit").is_some() {
        serde_json::from_value::<BlankSpec>(value).map_err(bad)?
    } else {
        BlankSpec::new(serde_json::from_value::<CircuitSpec>(value).map_err(bad)?)
    };
    spec.validate().map_err(at("spec"))?;
    Ok(spec)
}

pub fn read_points(path: &Path) -> Result<[nalgebra::Point3<f64>; 3], Failure> {
    parse_points(&read_text(path)?).map_err(|e| Failure::new("input", format!("{}: {e}", path.display())))
}
