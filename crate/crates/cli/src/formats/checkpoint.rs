//! Versioned binary model container. Exact byte layout in
//! `docs/formats.md`; all multi-byte values are little-endian, all
//! parameter tensors are f64 in the model's fixed flattening order.

use std::io::{Read, Write};
use std::path::Path;

use ontopic_core::baselines::ModelKind;
use ontopic_core::corpus::Prompt;
use ontopic_core::encoder::{EncoderConfig, EncoderModel, Vocabulary};
use ontopic_core::trm::Head;

pub const MAGIC: &[u8; 8] = b"ONTOPCK\0";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to score and detect for one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub prompt: Prompt,
    pub vocab: Vocabulary,
    pub encoder: EncoderModel,
    pub head: Head,
}

fn kind_tag(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::Aoes => 0,
        ModelKind::AoesNoTrm => 1,
        ModelKind::AoesL2 => 2,
        ModelKind::Baseline1 => 3,
        ModelKind::Baseline2 => 4,
    }
}

fn kind_from_tag(tag: u8) -> anyhow::Result<ModelKind> {
    Ok(match tag {
        0 => ModelKind::Aoes,
        1 => ModelKind::AoesNoTrm,
        2 => ModelKind::AoesL2,
        3 => ModelKind::Baseline1,
        4 => ModelKind::Baseline2,
        other => anyhow::bail!("unknown model kind tag {other}"),
    })
}

/// Head section tags; gated and dual heads serialize identically but must
/// reload as the right variant.
fn head_tag(head: &Head) -> u8 {
    match head {
        Head::Gated(_) => 0,
        Head::Linear(_) => 1,
        Head::Dual { .. } => 2,
    }
}

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn i32(&mut self, v: i32) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64s(&mut self, vs: &[f64]) -> std::io::Result<()> {
        for v in vs {
            self.0.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
    fn string(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len() as u32)?;
        self.0.write_all(s.as_bytes())
    }
    fn byte(&mut self, b: u8) -> std::io::Result<()> {
        self.0.write_all(&[b])
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn u32(&mut self) -> anyhow::Result<u32> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn i32(&mut self) -> anyhow::Result<i32> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(i32::from_le_bytes(b))
    }
    fn u64(&mut self) -> anyhow::Result<u64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64s(&mut self, n: usize) -> anyhow::Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            self.0.read_exact(&mut b)?;
            out.push(f64::from_le_bytes(b));
        }
        Ok(out)
    }
    fn string(&mut self) -> anyhow::Result<String> {
        let len = self.u32()? as usize;
        if len > 1 << 20 {
            anyhow::bail!("string length {len} is implausible; corrupt file");
        }
        let mut b = vec![0u8; len];
        self.0.read_exact(&mut b)?;
        Ok(String::from_utf8(b)?)
    }
    fn byte(&mut self) -> anyhow::Result<u8> {
        let mut b = [0u8; 1];
        self.0.read_exact(&mut b)?;
        Ok(b[0])
    }
}

pub fn write(path: &Path, ckpt: &Checkpoint) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(path)?;
    let mut w = Writer(std::io::BufWriter::new(file));
    let cfg = &ckpt.encoder.config;

    w.0.write_all(MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u32(cfg.dim as u32)?;
    w.u32(cfg.layers as u32)?;
    w.u32(ckpt.vocab.size() as u32)?;
    w.u32(cfg.max_len as u32)?;
    w.u64(cfg.seed)?;
    w.byte(u8::from(cfg.positional))?;
    w.byte(kind_tag(ckpt.kind))?;
    w.byte(head_tag(&ckpt.head))?;
    w.byte(0)?; // reserved

    w.string(&ckpt.prompt.id)?;
    w.i32(ckpt.prompt.score_min)?;
    w.i32(ckpt.prompt.score_max)?;
    w.u32(ckpt.prompt.topic_keywords.len() as u32)?;
    for kw in &ckpt.prompt.topic_keywords {
        w.string(kw)?;
    }

    for token in ckpt.vocab.tokens() {
        w.string(token)?;
    }

    let mut params = Vec::with_capacity(ckpt.encoder.param_count() + ckpt.head.param_count());
    ckpt.encoder.flatten_into(&mut params);
    ckpt.head.flatten_into(&mut params);
    w.f64s(&params)?;
    w.0.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> anyhow::Result<Checkpoint> {
    let file = std::fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("cannot open checkpoint {}: {e}", path.display()))?;
    let mut r = Reader(std::io::BufReader::new(file));

    let mut magic = [0u8; 8];
    r.0.read_exact(&mut magic)?;
    if &magic != MAGIC {
        anyhow::bail!("not a model checkpoint: bad magic");
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        anyhow::bail!("unsupported checkpoint version {version}");
    }
    let dim = r.u32()? as usize;
    let layers = r.u32()? as usize;
    let vocab_size = r.u32()? as usize;
    let max_len = r.u32()? as usize;
    let seed = r.u64()?;
    let positional = r.byte()? != 0;
    let kind = kind_from_tag(r.byte()?)?;
    let head_tag_value = r.byte()?;
    let _reserved = r.byte()?;

    let prompt_id = r.string()?;
    let score_min = r.i32()?;
    let score_max = r.i32()?;
    let n_keywords = r.u32()? as usize;
    let mut topic_keywords = Vec::with_capacity(n_keywords);
    for _ in 0..n_keywords {
        topic_keywords.push(r.string()?);
    }
    let prompt = Prompt { id: prompt_id, topic_keywords, score_min, score_max };

    let mut tokens = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        tokens.push(r.string()?);
    }
    let vocab = Vocabulary::from_tokens(tokens);

    let config = EncoderConfig { dim, layers, max_len, positional, seed };
    let mut encoder = EncoderModel::init(config, vocab_size);
    let mut head = match head_tag_value {
        0 => Head::init_gated(dim, 0),
        1 => Head::init_linear(dim, 0),
        2 => Head::init_dual(dim, 0),
        other => anyhow::bail!("unknown head tag {other}"),
    };
    let total = encoder.param_count() + head.param_count();
    let params = r.f64s(total)?;
    let used = encoder.assign_from_flat(&params);
    head.assign_from_flat(&params[used..]);

    // Trailing bytes mean the file does not match the declared shapes.
    let mut rest = [0u8; 1];
    if r.0.read(&mut rest)? != 0 {
        anyhow::bail!("checkpoint has trailing bytes; corrupt file");
    }

    Ok(Checkpoint { kind, prompt, vocab, encoder, head })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ontopic_core::corpus::{Split, SynthConfig, synthesize};

    fn sample_checkpoint() -> Checkpoint {
        let corpus = synthesize(&SynthConfig {
            n_prompts: 1,
            essays_per_prompt: 30,
            ..SynthConfig::default()
        })
        .unwrap();
        let texts: Vec<&str> = corpus
            .essays_in("p1", Split::Train)
            .iter()
            .map(|e| e.text.as_str())
            .collect();
        let vocab = Vocabulary::build(texts);
        let config = EncoderConfig { dim: 8, layers: 2, max_len: 32, positional: true, seed: 9 };
        let encoder = EncoderModel::init(config, vocab.size());
        Checkpoint {
            kind: ModelKind::Aoes,
            prompt: corpus.prompt("p1").unwrap().clone(),
            vocab,
            encoder,
            head: Head::init_gated(8, 77),
        }
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = sample_checkpoint();
        write(&path, &ckpt).unwrap();
        let loaded = read(&path).unwrap();
        assert_eq!(loaded, ckpt);
    }

    #[test]
    fn writes_are_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        let ckpt = sample_checkpoint();
        write(&a, &ckpt).unwrap();
        write(&b, &ckpt).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn corrupt_and_truncated_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = sample_checkpoint();
        write(&path, &ckpt).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(read(&path).is_err());

        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(read(&path).is_err());

        let mut extended = bytes.clone();
        extended.push(0);
        std::fs::write(&path, &extended).unwrap();
        assert!(read(&path).is_err());
    }
}
