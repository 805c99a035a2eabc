use ontopic_core::corpus::Split;

use crate::args::FitStatsArgs;
use crate::formats::{checkpoint, file_sha256, manifest, stats, threshold};
use crate::pipeline;
use crate::{CliError, CliResult};

pub fn run(args: &FitStatsArgs) -> CliResult {
    let ckpt = checkpoint::read(&args.checkpoint)?;
    let corpus = manifest::read_corpus_dir(&args.corpus)?;
    if corpus.prompt(&ckpt.prompt.id).is_none() {
        return Err(CliError::Data(anyhow::anyhow!(
            "checkpoint is bound to prompt '{}' which the corpus does not contain",
            ckpt.prompt.id
        )));
    }
    let on_train: Vec<_> = corpus
        .essays_in(&ckpt.prompt.id, Split::Train)
        .into_iter()
        .cloned()
        .collect();
    if on_train.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!(
            "corpus has no train-split essays for prompt '{}'",
            ckpt.prompt.id
        )));
    }

    let fitted = pipeline::fit_cell_stats(&ckpt, &on_train, args.include_embedding)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.checkpoint.with_extension("stats"));
    let ckpt_hash = file_sha256(&args.checkpoint)?;
    stats::write(&out, &fitted, &ckpt_hash)?;

    // Deployment-time fallback threshold: a quantile of the on-topic train
    // distances, usable when no labeled off-topic calibration set exists.
    let data = pipeline::PromptData {
        prompt: ckpt.prompt.clone(),
        on_train,
        on_dev: Vec::new(),
        on_test: Vec::new(),
        off_train: Vec::new(),
        off_dev: Vec::new(),
        off_test: Vec::new(),
        train_donors: Vec::new(),
        test_donors: Vec::new(),
    };
    let distances = pipeline::train_split_distances(&ckpt, &fitted, &data)?;
    let quantile = ontopic_core::calibrate::calibrate_quantile(&distances, args.quantile)?;
    let stats_hash = file_sha256(&out)?;
    let threshold_path = out.with_extension("threshold.json");
    threshold::write(&threshold_path, &threshold::ThresholdFile::from_quantile(&quantile, &stats_hash))?;

    eprintln!(
        "fitted {}-layer stats on {} essays -> {} (threshold at {})",
        fitted.layer_count(),
        fitted.sample_count,
        out.display(),
        threshold_path.display()
    );
    Ok(())
}
