use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::RunConfig;
use crate::run::Output;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("serializable config"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub sha256: String,
}

/// The JSON document written next to (or instead of) the data files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub ok: bool,
    pub result: Value,
    pub files: BTreeMap<String, FileEntry>,
}

/// Adds a `# config_hash` comment after the magic line of PGM/PPM data.
fn embed_hash(suffix: &str, bytes: Vec<u8>, hash: &str) -> Vec<u8> {
    if !(suffix.ends_with("ppm") || suffix.ends_with("pgm")) {
        return bytes;
    }
    let Some(nl) = bytes.iter().position(|&b| b == b'\n') else {
        return bytes;
    };
    let mut out = Vec::with_capacity(bytes.len() + 80);
    out.extend_from_slice(&bytes[..=nl]);
    out.extend_from_slice(format!("# config_hash {hash}\n").as_bytes());
    out.extend_from_slice(&bytes[nl + 1..]);
    out
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Final file contents keyed by suffix, plus the document describing them.
pub fn assemble(cfg: &RunConfig, out: Output, prefix: Option<&Path>) -> (Document, Vec<(PathBuf, Vec<u8>)>) {
    let hash = config_hash(cfg);
    let mut files = BTreeMap::new();
    let mut blobs = Vec::new();
    for (suffix, bytes) in out.files {
        let bytes = embed_hash(&suffix, bytes, &hash);
        let path = prefix.map_or_else(|| PathBuf::from(format!("<{suffix}>")), |p| with_suffix(p, &suffix));
        files.insert(suffix, FileEntry { path: path.clone(), sha256: sha256_hex(&bytes) });
        blobs.push((path, bytes));
    }
    let doc = Document {
        tool: "harper".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        config_hash: hash,
        ok: out.ok,
        result: out.result,
        files,
    };
    (doc, blobs)
}

pub fn write_all(prefix: &Path, doc: &Document, blobs: &[(PathBuf, Vec<u8>)]) -> Result<PathBuf> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for (path, bytes) in blobs {
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    let json_path = with_suffix(prefix, "json");
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    std::fs::write(&json_path, text).with_context(|| format!("writing {}", json_path.display()))?;
    Ok(json_path)
}

/// Result of `--verify`.
#[derive(Debug, Default)]
pub struct Verification {
    pub problems: Vec<String>,
    pub checked: Vec<String>,
}

/// Checks the stored config hash, re-runs the stored config, and compares
/// the result and every file digest, also against the files on disk.
pub fn verify(path: &Path) -> Result<Verification> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Document = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut v = Verification::default();
    let hash = config_hash(&doc.config);
    if hash != doc.config_hash {
        v.problems.push(format!("config hash {} != stored {}", hash, doc.config_hash));
    }
    v.checked.push("config_hash".into());
    let out = match crate::run::execute(&doc.config) {
        Ok(o) => o,
        Err(e) => return Err(anyhow!("re-running stored config failed: {e:?}")),
    };
    let (fresh, blobs) = assemble(&doc.config, out, None);
    if fresh.result != doc.result {
        v.problems.push("result differs from the stored one".into());
    }
    if fresh.ok != doc.ok {
        v.problems.push("verdict differs from the stored one".into());
    }
    v.checked.push("result".into());
    for (suffix, entry) in &doc.files {
        match fresh.files.get(suffix) {
            Some(f) if f.sha256 == entry.sha256 => v.checked.push(format!("{suffix} (recomputed)")),
            Some(_) => v.problems.push(format!("{suffix}: recomputed digest differs")),
            None => v.problems.push(format!("{suffix}: not produced by the re-run")),
        }
        let on_disk = if entry.path.is_absolute() { entry.path.clone() } else { resolve(path, &entry.path) };
        if let Ok(bytes) = std::fs::read(&on_disk) {
            if sha256_hex(&bytes) == entry.sha256 {
                v.checked.push(format!("{} (on disk)", on_disk.display()));
            } else {
                v.problems.push(format!("{}: digest on disk differs", on_disk.display()));
            }
        }
    }
    for suffix in fresh.files.keys().filter(|s| !doc.files.contains_key(*s)) {
        v.problems.push(format!("{suffix}: produced by the re-run but not recorded"));
    }
    drop(blobs);
    Ok(v)
}

/// Relative paths are tried as given, then next to the document.
fn resolve(doc_path: &Path, p: &Path) -> PathBuf {
    if p.exists() {
        return p.to_path_buf();
    }
    match (doc_path.parent(), p.file_name()) {
        (Some(dir), Some(name)) => dir.join(name),
        _ => p.to_path_buf(),
    }
}
