//! Deterministic on-disk report formats: CSV, flat JSON, field dumps, and
//! the run manifest with checksums.

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use todalab_core::Mesh;

/// 17-significant-digit float rendering, stable across runs.
pub fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

/// Flat JSON value assembled by hand so floats keep the fnum format.
pub enum Jv {
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
    NumList(Vec<f64>),
}

pub fn json_object(fields: &[(&str, Jv)]) -> String {
    let mut s = String::from("{\n");
    for (i, (key, value)) in fields.iter().enumerate() {
        let _ = write!(s, "  \"{key}\": ");
        match value {
            Jv::Num(x) => s.push_str(&fnum(*x)),
            Jv::Int(n) => {
                let _ = write!(s, "{n}");
            }
            Jv::Str(t) => {
                let _ = write!(s, "{}", serde_json::Value::String(t.clone()));
            }
            Jv::Bool(b) => {
                let _ = write!(s, "{b}");
            }
            Jv::NumList(xs) => {
                s.push('[');
                for (j, x) in xs.iter().enumerate() {
                    if j > 0 {
                        s.push_str(", ");
                    }
                    s.push_str(&fnum(*x));
                }
                s.push(']');
            }
        }
        s.push_str(if i + 1 < fields.len() { ",\n" } else { "\n" });
    }
    s.push_str("}\n");
    s
}

/// CSV builder: a seed/config comment line, a header, fnum-formatted rows.
pub struct Csv {
    body: String,
    columns: usize,
}

impl Csv {
    pub fn new(seed: u64, config_hash: &str, columns: &[&str]) -> Csv {
        let mut body = format!("# seed={seed} config={config_hash}\n");
        body.push_str(&columns.join(","));
        body.push('\n');
        Csv { body, columns: columns.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width mismatch");
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    /// Append a footer line carrying a JSON payload (comment-prefixed so
    /// plain CSV readers skip it).
    pub fn footer_json(&mut self, json: &str) {
        self.body.push_str("# ");
        self.body.push_str(json.trim());
        self.body.push('\n');
    }

    pub fn into_string(self) -> String {
        self.body
    }
}

/// Nodal field dump: the mesh in its text format, a "field" separator, and
/// one value per node.
pub fn field_dump(mesh: &Mesh, values: &[f64]) -> String {
    assert_eq!(values.len(), mesh.num_nodes());
    let mut s = mesh.to_text();
    s.push_str("field\n");
    for v in values {
        s.push_str(&fnum(*v));
        s.push('\n');
    }
    s
}

/// Output directory handle that records every file it writes and finishes
/// with a checksum manifest.
pub struct OutDir {
    dir: PathBuf,
    pub seed: u64,
    pub config_hash: String,
    files: Vec<(String, String, usize)>,
    stages: Vec<(String, String)>,
}

impl OutDir {
    pub fn create(dir: &Path, seed: u64, config_text: &str) -> Result<OutDir> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let config_hash = sha_hex(config_text.as_bytes());
        Ok(OutDir { dir: dir.to_path_buf(), seed, config_hash, files: Vec::new(), stages: Vec::new() })
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.files.push((name.to_string(), sha_hex(body.as_bytes()), body.len()));
        Ok(())
    }

    pub fn stage(&mut self, name: &str, status: &str) {
        self.stages.push((name.to_string(), status.to_string()));
    }

    /// Write manifest.json: config hash, seed, stage statuses, and the file
    /// inventory. The timestamp lives here and only here.
    pub fn finish(mut self) -> Result<()> {
        let mut s = String::from("{\n");
        let _ = writeln!(s, "  \"tool\": \"todalab {}\",", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "  \"config_sha256\": \"{}\",", self.config_hash);
        let _ = writeln!(s, "  \"seed\": {},", self.seed);
        let _ = writeln!(s, "  \"unix_time\": {},", unix_time());
        s.push_str("  \"stages\": {\n");
        for (i, (name, status)) in self.stages.iter().enumerate() {
            let comma = if i + 1 < self.stages.len() { "," } else { "" };
            let _ = writeln!(s, "    \"{name}\": \"{status}\"{comma}");
        }
        s.push_str("  },\n  \"files\": [\n");
        self.files.sort_by(|a, b| a.0.cmp(&b.0));
        for (i, (name, hash, bytes)) in self.files.iter().enumerate() {
            let comma = if i + 1 < self.files.len() { "," } else { "" };
            let _ = writeln!(
                s,
                "    {{ \"name\": \"{name}\", \"sha256\": \"{hash}\", \"bytes\": {bytes} }}{comma}"
            );
        }
        s.push_str("  ]\n}\n");
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnum_has_17_significant_digits() {
        assert_eq!(fnum(std::f64::consts::PI), "3.1415926535897931e0");
        assert_eq!(fnum(-1.0e-5), "-1.0000000000000001e-5");
    }

    #[test]
    fn csv_layout_is_stable() {
        let mut csv = Csv::new(7, "abc", &["a", "b"]);
        csv.row(&["1".into(), fnum(0.5)]);
        csv.footer_json("{\"s\": 1}");
        assert_eq!(
            csv.into_string(),
            "# seed=7 config=abc\na,b\n1,5.0000000000000000e-1\n# {\"s\": 1}\n"
        );
    }
}
