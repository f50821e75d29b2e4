//! Atomic writes, hashing and versioned headers.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{config_err, data_err, CliResult, Context};

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).config(&format!("cannot create {}", dir.display()))?;
    let name = path.file_name().ok_or_else(|| config_err(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.config(&format!("cannot write {}", path.display()))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).data(&format!("cannot read {}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&fs::read(path).data(&format!("cannot read {}", path.display()))?))
}

/// `#nhpp-<kind> v<version>`
pub fn header_line(kind: &str, version: u32) -> String {
    format!("#nhpp-{kind} v{version}")
}

/// Checks a header line for the expected kind and version.
pub fn check_header(line: Option<&str>, kind: &str, version: u32, path: &Path) -> CliResult<()> {
    let line = line.map(str::trim_end).unwrap_or("");
    let prefix = format!("#nhpp-{kind} v");
    match line.strip_prefix(&prefix) {
        Some(v) if v == version.to_string() => Ok(()),
        Some(v) => Err(data_err(format!(
            "{}: {kind} format version {v} is not supported (expected {version})",
            path.display()
        ))),
        None => Err(data_err(format!("{}: missing '{prefix}{version}' header", path.display()))),
    }
}

/// JSON report wrapper with a schema name and version.
pub fn to_json_report<T: serde::Serialize>(schema: &str, version: u32, body: &T) -> CliResult<Vec<u8>> {
    let v = serde_json::json!({ "schema": schema, "version": version, "body": body });
    let mut s = serde_json::to_string_pretty(&v).config("serializing report")?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Reads a report written by [`to_json_report`], rejecting other schemas and versions.
pub fn read_json_report<T: serde::de::DeserializeOwned>(path: &Path, schema: &str, version: u32) -> CliResult<T> {
    let text = read_text(path)?;
    let v: serde_json::Value = serde_json::from_str(&text).data(&format!("{}", path.display()))?;
    if v.get("schema").and_then(|s| s.as_str()) != Some(schema) {
        return Err(data_err(format!("{}: not a {schema} report", path.display())));
    }
    if v.get("version").and_then(|s| s.as_u64()) != Some(version as u64) {
        return Err(data_err(format!("{}: {schema} version mismatch (expected {version})", path.display())));
    }
    serde_json::from_value(v["body"].clone()).data(&format!("{}", path.display()))
}

/// Joins floats with `sep` using the shortest round-trip form.
pub fn join_f64(xs: &[f64], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn parse_f64_list(s: &str, sep: char) -> Result<Vec<f64>, String> {
    s.split(sep).map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect()
}
