use ontopic_core::adversary;
use ontopic_core::corpus::{Essay, Split};
use ontopic_core::seed;

use crate::args::PerturbArgs;
use crate::formats::{jsonl, manifest};
use crate::pipeline::PerturbSpec;
use crate::{CliError, CliResult};

/// Applies every spec in the manifest to the target prompt's test split and
/// writes the adversarial essays as corpus JSONL with `split=test` and a
/// `perturbation` tag.
pub fn run(args: &PerturbArgs) -> CliResult {
    let corpus = manifest::read_corpus_dir(&args.corpus)?;
    let prompt = corpus
        .prompt(&args.prompt)
        .ok_or_else(|| CliError::Data(anyhow::anyhow!("prompt '{}' not in corpus", args.prompt)))?
        .clone();

    let manifest_text =
        std::fs::read_to_string(&args.manifest).map_err(anyhow::Error::from)?;
    let specs: Vec<PerturbSpec> =
        serde_json::from_str(&manifest_text).map_err(anyhow::Error::from)?;
    if specs.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("perturbation manifest is empty")));
    }

    let targets: Vec<Essay> = corpus
        .essays_in(&args.prompt, Split::Test)
        .into_iter()
        .cloned()
        .collect();
    if targets.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!(
            "prompt '{}' has no test-split essays to perturb",
            args.prompt
        )));
    }
    // Donor pool for sentence replacement: test-split essays of the other
    // prompts.
    let donors: Vec<Essay> = corpus
        .prompts
        .keys()
        .filter(|id| *id != &args.prompt)
        .flat_map(|id| corpus.essays_in(id, Split::Test).into_iter().cloned())
        .collect();

    let mut rows = Vec::new();
    for spec in &specs {
        let speech = match spec {
            PerturbSpec::AddSpeech { resource_path: Some(path), .. } => {
                let text = std::fs::read_to_string(path).map_err(anyhow::Error::from)?;
                ontopic_core::text::sentences(&ontopic_core::text::normalize(&text))
            }
            _ => adversary::default_speech_sentences(),
        };
        let base_seed = seed::derive(
            args.seed,
            &format!("perturb/{}/{}", spec.kind().as_str(), prompt.id),
        );
        let essays = crate::pipeline::apply_perturbation(
            spec,
            &targets,
            &donors,
            &prompt.topic_keywords,
            &speech,
            base_seed,
            &prompt.id,
        )?;
        rows.extend(essays.iter().map(|e| {
            jsonl::EssayRow::from_essay(e).with_perturbation(spec.kind().as_str())
        }));
    }

    jsonl::write_rows(&args.out, &rows)?;
    eprintln!(
        "wrote {} adversarial essays ({} specs) to {}",
        rows.len(),
        specs.len(),
        args.out.display()
    );
    Ok(())
}
