//! On-disk formats. Binary layouts are documented in `docs/formats.md` at
//! the repository root and guarded by round-trip tests.

pub mod checkpoint;
pub mod decisions;
pub mod jsonl;
pub mod manifest;
pub mod stats;
pub mod threshold;
pub mod trace;

use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::Path;

/// Hex SHA-256 of a file, used to pair stats files to checkpoints and
/// thresholds to stats.
pub fn file_sha256(path: &Path) -> anyhow::Result<String> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("cannot open {}: {e}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Shortest-round-trip float formatting for data CSVs: parsing the printed
/// value recovers the exact f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
