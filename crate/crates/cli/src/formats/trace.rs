//! Loss trace CSV: `step,lr,l_mse[,l_topic],l_total`. The topic column is
//! present only for losses that have a second term.

use std::io::Write;
use std::path::Path;

use ontopic_core::trm::StepRecord;

use super::fmt_f64;

pub fn write(path: &Path, trace: &[StepRecord]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let has_topic = trace.iter().any(|r| r.topic.is_some());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if has_topic {
        writeln!(out, "step,lr,l_mse,l_topic,l_total")?;
    } else {
        writeln!(out, "step,lr,l_mse,l_total")?;
    }
    for r in trace {
        if has_topic {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.step,
                fmt_f64(r.lr),
                fmt_f64(r.mse),
                fmt_f64(r.topic.unwrap_or(0.0)),
                fmt_f64(r.total)
            )?;
        } else {
            writeln!(out, "{},{},{},{}", r.step, fmt_f64(r.lr), fmt_f64(r.mse), fmt_f64(r.total))?;
        }
    }
    out.flush()?;
    Ok(())
}
