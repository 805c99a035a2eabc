use ontopic_core::corpus::{SynthConfig, synthesize};

use crate::args::SynthArgs;
use crate::formats::manifest;
use crate::{CliResult, resolve_out_dir};

pub fn run(args: &SynthArgs) -> CliResult {
    let config = SynthConfig {
        n_prompts: args.prompts,
        essays_per_prompt: args.essays_per_prompt,
        vocab_shared: args.vocab_shared,
        vocab_per_topic: args.vocab_per_topic,
        quality_noise: args.quality_noise,
        seed: args.seed,
    };
    let corpus = synthesize(&config)?;
    let out = resolve_out_dir(args.out.as_deref(), "corpus");
    manifest::write_corpus_dir(&out, &corpus)?;
    eprintln!(
        "wrote {} essays across {} prompts to {}",
        corpus.essays.len(),
        corpus.prompts.len(),
        out.display()
    );
    Ok(())
}
