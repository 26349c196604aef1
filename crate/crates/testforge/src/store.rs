//! On-disk artifacts. Every write goes to a temporary file in the target
//! directory and is renamed into place, so a crash never leaves a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use testforge_core::suite::{decode_suite, encode_suite};
use testforge_core::{SlotTemplate, Stage, TestSuite};

use crate::error::{TfError, TfResult};

pub const TEMPLATES_FILE: &str = "templates.json";
pub const GENERATION_REJECTS_FILE: &str = "generation_rejected.jsonl";
pub const ATTACK_LOG_FILE: &str = "attack_log.jsonl";
pub const EXPAND_DIAGNOSTICS_FILE: &str = "expand_diagnostics.jsonl";

pub fn stage_file_name(stage: Stage) -> String {
    format!("{}.jsonl", stage.as_str())
}

pub fn stage_path(dir: &Path, stage: Stage) -> PathBuf {
    dir.join(stage_file_name(stage))
}

/// Sidecar holding the verification records of the stage.
pub fn records_path(dir: &Path, stage: Stage) -> PathBuf {
    dir.join(format!("{}.records.jsonl", stage.as_str()))
}

/// Temporary file that ends up with ordinary (0644 on unix) permissions once renamed.
pub(crate) fn temp_file_in(dir: &Path) -> std::io::Result<tempfile::NamedTempFile> {
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    builder.prefix(".tmp-").tempfile_in(dir)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> TfResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| TfError::io(dir, e))?;
    let mut tmp = temp_file_in(dir).map_err(|e| TfError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| TfError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| TfError::io(path, e))?;
    tmp.persist(path).map_err(|e| TfError::io(path, e.error))?;
    Ok(())
}

pub fn save_suite(path: &Path, suite: &TestSuite) -> TfResult<()> {
    write_atomic(path, encode_suite(suite).as_bytes())
}

pub fn load_suite(path: &Path) -> TfResult<TestSuite> {
    let text = std::fs::read_to_string(path).map_err(|e| TfError::io(path, e))?;
    decode_suite(&text).map_err(|source| TfError::Format { path: path.into(), source })
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> TfResult<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> TfResult<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| TfError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TfError::Format {
                path: path.into(),
                source: testforge_core::Error::Parse { line: i + 1, message: e.to_string() },
            })
        })
        .collect()
}

/// Template files are a JSON array of template objects.
pub fn save_templates(path: &Path, templates: &[SlotTemplate]) -> TfResult<()> {
    let mut text = serde_json::to_string_pretty(templates).expect("serializable templates");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_templates(path: &Path) -> TfResult<Vec<SlotTemplate>> {
    let text = std::fs::read_to_string(path).map_err(|e| TfError::io(path, e))?;
    let mut templates: Vec<SlotTemplate> = serde_json::from_str(&text).map_err(|e| TfError::Format {
        path: path.into(),
        source: testforge_core::Error::Parse { line: e.line(), message: e.to_string() },
    })?;
    for t in &mut templates {
        t.ensure_id();
    }
    Ok(templates)
}
