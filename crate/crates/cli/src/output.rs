//! Deterministic artifact writing: 17 significant digits, atomic renames and
//! a manifest beside every artifact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};
use spinlattice::c64;

use crate::failure::Failure;

/// A float written as `d.dddddddddddddddde±x`. Non-finite values become the
/// strings `"inf"`, `"-inf"` and `"nan"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

impl Num {
    pub fn text(self) -> String {
        let v = self.0;
        if v.is_nan() {
            "nan".into()
        } else if v.is_infinite() {
            if v > 0.0 {
                "inf".into()
            } else {
                "-inf".into()
            }
        } else {
            format!("{v:.16e}")
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(self.text()).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_str(&self.text())
        }
    }
}

pub fn nums(values: &[f64]) -> Vec<Num> {
    values.iter().copied().map(Num).collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Complex {
    pub re: Num,
    pub im: Num,
}

impl From<c64> for Complex {
    fn from(c: c64) -> Self {
        Complex { re: Num(c.re), im: Num(c.im) }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes `contents` to `path` through a sibling temporary file, so readers
/// never observe a partial artifact.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path.file_name().ok_or_else(|| Failure::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub artifact: String,
    pub config_sha256: String,
    pub library_version: &'a str,
    pub seed: u64,
    pub jobs: usize,
    pub wall_time_seconds: Num,
}

/// Path of the manifest that accompanies `artifact`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    artifact.with_file_name("manifest.json")
}
