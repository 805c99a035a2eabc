use ontopic_core::encoder::EncoderConfig;
use ontopic_core::trm::TrainConfig;

use crate::args::TrainArgs;
use crate::formats::{checkpoint, manifest, trace};
use crate::pipeline::{CellConfig, OffTopicCaps, prompt_data, train_cell};
use crate::{CliError, CliResult, resolve_out_dir};

pub fn run(args: &TrainArgs) -> CliResult {
    let corpus = manifest::read_corpus_dir(&args.corpus)?;
    let prompt_ids: Vec<String> = if args.prompt == "all" {
        corpus.prompts.keys().cloned().collect()
    } else if corpus.prompts.contains_key(&args.prompt) {
        vec![args.prompt.clone()]
    } else {
        return Err(CliError::Data(anyhow::anyhow!(
            "prompt '{}' not found in corpus",
            args.prompt
        )));
    };

    let cell = CellConfig {
        encoder: EncoderConfig {
            dim: args.dim,
            layers: args.layers,
            max_len: args.max_len,
            positional: args.positional,
            seed: 0, // per-cell seed derived in train_cell
        },
        train: TrainConfig {
            lambda: args.lambda,
            lr: args.lr,
            warmup_steps: args.warmup_steps,
            epochs: args.epochs,
            batch_size: args.batch_size,
            seed: 0,
        },
        include_embedding: false,
    };
    let caps = OffTopicCaps { train_cap: args.off_train_cap, test_cap: 0 };
    let out = resolve_out_dir(args.out.as_deref(), "models");
    std::fs::create_dir_all(&out).map_err(anyhow::Error::from)?;

    for prompt_id in prompt_ids {
        let data = prompt_data(&corpus, &prompt_id, caps)?;
        let (ckpt, steps) = train_cell(args.model, &data, &cell, args.seed)?;
        let stem = format!("{}-{}", args.model.as_str(), prompt_id);
        let ckpt_path = out.join(format!("{stem}.ckpt"));
        checkpoint::write(&ckpt_path, &ckpt)?;
        trace::write(&out.join(format!("{stem}-trace.csv")), &steps)?;
        eprintln!("trained {stem}: {} steps, checkpoint at {}", steps.len(), ckpt_path.display());
    }
    Ok(())
}
