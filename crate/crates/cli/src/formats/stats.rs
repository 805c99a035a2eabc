//! Versioned binary container for fitted layer statistics, paired to its
//! checkpoint by content hash. Layout in `docs/formats.md`.

use std::io::{Read, Write};
use std::path::Path;

use ontopic_core::linalg::Mat;
use ontopic_core::oodstats::LayerStats;

pub const MAGIC: &[u8; 8] = b"ONTOPST\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct StatsFile {
    pub stats: LayerStats,
    /// Hex SHA-256 of the checkpoint the features came from.
    pub checkpoint_hash: String,
}

pub fn write(path: &Path, stats: &LayerStats, checkpoint_hash: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(stats.layer_count() as u32).to_le_bytes())?;
    w.write_all(&(stats.dim() as u32).to_le_bytes())?;
    w.write_all(&(stats.sample_count as u64).to_le_bytes())?;
    w.write_all(&(checkpoint_hash.len() as u32).to_le_bytes())?;
    w.write_all(checkpoint_hash.as_bytes())?;
    for layer in &stats.layers {
        w.write_all(&layer.epsilon.to_le_bytes())?;
        for v in &layer.mean {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in layer.cov.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> anyhow::Result<StatsFile> {
    let file = std::fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("cannot open stats file {}: {e}", path.display()))?;
    let mut r = std::io::BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        anyhow::bail!("not a stats file: bad magic");
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != FORMAT_VERSION {
        anyhow::bail!("unsupported stats version {version}");
    }
    r.read_exact(&mut b4)?;
    let layers = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let sample_count = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b4)?;
    let hash_len = u32::from_le_bytes(b4) as usize;
    if hash_len > 128 {
        anyhow::bail!("hash length {hash_len} is implausible; corrupt file");
    }
    let mut hash_bytes = vec![0u8; hash_len];
    r.read_exact(&mut hash_bytes)?;
    let checkpoint_hash = String::from_utf8(hash_bytes)?;

    let mut parts = Vec::with_capacity(layers);
    for _ in 0..layers {
        r.read_exact(&mut b8)?;
        let epsilon = f64::from_le_bytes(b8);
        let mut mean = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut b8)?;
            mean.push(f64::from_le_bytes(b8));
        }
        let mut cov = Mat::zeros(dim, dim);
        for v in cov.data_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        parts.push((mean, cov, epsilon));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        anyhow::bail!("stats file has trailing bytes; corrupt file");
    }
    let stats = LayerStats::from_parts(parts, sample_count)?;
    Ok(StatsFile { stats, checkpoint_hash })
}
