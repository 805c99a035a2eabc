use ontopic_core::corpus::{Essay, Split};

use crate::args::DetectArgs;
use crate::formats::{checkpoint, decisions, file_sha256, jsonl, stats, threshold};
use crate::pipeline;
use crate::{CliError, CliResult};

pub fn run(args: &DetectArgs) -> CliResult {
    let ckpt = checkpoint::read(&args.checkpoint)?;

    let stats_file = match (&args.stats, ckpt.kind.uses_mahalanobis()) {
        (Some(path), _) => {
            let file = stats::read(path)?;
            let ckpt_hash = file_sha256(&args.checkpoint)?;
            if file.checkpoint_hash != ckpt_hash {
                return Err(CliError::Data(anyhow::anyhow!(
                    "stats file was fitted for a different checkpoint \
                     (stats expect {}, checkpoint is {ckpt_hash})",
                    file.checkpoint_hash
                )));
            }
            Some((file, file_sha256(path)?))
        }
        (None, true) => {
            return Err(CliError::Data(anyhow::anyhow!(
                "model kind '{}' detects via layer stats; pass --stats",
                ckpt.kind.as_str()
            )));
        }
        (None, false) => None,
    };

    let threshold_file = threshold::read(&args.threshold)?;
    if let Some((_, stats_hash)) = &stats_file {
        if !threshold_file.source_stats_hash.is_empty()
            && threshold_file.source_stats_hash != *stats_hash
        {
            return Err(CliError::Data(anyhow::anyhow!(
                "threshold was calibrated against different stats \
                 (threshold expects {}, stats file is {stats_hash})",
                threshold_file.source_stats_hash
            )));
        }
    }
    let thresh = threshold_file.threshold()?;

    let essays = read_input_essays(&args.input)?;
    let stats_ref = stats_file.as_ref().map(|(f, _)| &f.stats);
    let scored = pipeline::score_essays(&ckpt, stats_ref, &essays)?;
    let rows = pipeline::decide_rows(&scored, &thresh, &ckpt);
    let n_layers = stats_ref.map_or(0, |s| s.layer_count());
    decisions::write(&args.out, &rows, n_layers)?;
    eprintln!("wrote {} decisions to {}", rows.len(), args.out.display());
    Ok(())
}

/// Input rows for detection: text is normalized, split tags are irrelevant,
/// gold scores are carried along only by the eval side.
pub fn read_input_essays(path: &std::path::Path) -> anyhow::Result<Vec<Essay>> {
    let (rows, rejects) = jsonl::read_rows(path)?;
    if let Some(first) = rejects.first() {
        anyhow::bail!("input line {}: {}", first.row, first.error);
    }
    Ok(rows
        .into_iter()
        .map(|(_, r)| Essay {
            id: r.id,
            prompt_id: r.prompt_id,
            text: ontopic_core::text::normalize(&r.text),
            gold_score: r.score,
            split: r.split.as_deref().and_then(Split::parse).unwrap_or(Split::Test),
        })
        .collect())
}
