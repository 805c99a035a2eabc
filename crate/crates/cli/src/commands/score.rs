use std::io::Write;

use ontopic_core::corpus::denormalize_score;

use crate::args::ScoreArgs;
use crate::formats::{checkpoint, fmt_f64};
use crate::{CliResult, commands::detect::read_input_essays};

/// Pure scoring: predicted grades with no detection gate. Columns:
/// `essay_id,y_h,y_t,y_s,final_score`.
pub fn run(args: &ScoreArgs) -> CliResult {
    let ckpt = checkpoint::read(&args.checkpoint)?;
    let essays = read_input_essays(&args.input)?;

    if let Some(parent) = args.out.parent() {
        std::fs::create_dir_all(parent).map_err(anyhow::Error::from)?;
    }
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(&args.out).map_err(anyhow::Error::from)?,
    );
    writeln!(out, "essay_id,y_h,y_t,y_s,final_score").map_err(anyhow::Error::from)?;
    for essay in &essays {
        let scored = pipeline_score(&ckpt, essay)?;
        writeln!(
            out,
            "{},{},{},{},{}",
            essay.id,
            fmt_f64(scored.y_h),
            scored.y_t.map(fmt_f64).unwrap_or_default(),
            fmt_f64(scored.y_s),
            denormalize_score(scored.y_s, &ckpt.prompt)
        )
        .map_err(anyhow::Error::from)?;
    }
    out.flush().map_err(anyhow::Error::from)?;
    eprintln!("scored {} essays into {}", essays.len(), args.out.display());
    Ok(())
}

fn pipeline_score(
    ckpt: &crate::formats::checkpoint::Checkpoint,
    essay: &ontopic_core::corpus::Essay,
) -> anyhow::Result<ontopic_core::trm::HeadEval> {
    let ids = ontopic_core::encoder::tokenize(&essay.text, &ckpt.vocab, ckpt.encoder.config.max_len)?;
    let cache = ckpt.encoder.forward(&ids)?;
    Ok(ckpt.head.eval(cache.pooled()))
}
