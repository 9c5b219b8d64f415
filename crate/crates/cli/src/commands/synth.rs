use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use getok_core::mask_io::write_png;
use getok_core::synth::{synth_corpus, SynthConfig};
use serde_json::json;

use crate::io::write_jsonl;
use crate::{CliError, DataContext, Outcome, RunConfig};

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Number of masks to draw.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Side of the square masks, in pixels.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
}

/// Writes `masks/<id>.png` plus three JSONL views of the same corpus:
/// `dataset.jsonl` for build-offset, `masks.jsonl` for encode and
/// `ground_truth.jsonl` for score.
pub fn run(cfg: &RunConfig, args: &SynthArgs) -> Result<Outcome, CliError> {
    let sc = SynthConfig {
        width: args.size,
        height: args.size,
        ..SynthConfig::default()
    };
    let g = cfg.geometry(args.size, args.size).map_err(|e| CliError::Usage(e.into()))?;
    let items = synth_corpus(args.count, &sc, &g, cfg.seed).data()?;
    let masks = args.out_dir.join("masks");
    std::fs::create_dir_all(&masks)
        .with_context(|| format!("creating {}", masks.display()))
        .data()?;
    let (mut dataset, mut plain, mut truth) = (Vec::new(), Vec::new(), Vec::new());
    for it in &items {
        let rel = format!("masks/{}.png", it.id);
        write_png(&it.mask, args.out_dir.join(&rel)).data()?;
        dataset.push(json!({"image": format!("images/{}.png", it.id), "mask": rel, "query": it.query}));
        plain.push(json!({"id": it.id, "mask": rel}));
        truth.push(json!({"id": it.id, "instances": [{"mask": rel}]}));
    }
    write_jsonl(&args.out_dir.join("dataset.jsonl"), &dataset).data()?;
    write_jsonl(&args.out_dir.join("masks.jsonl"), &plain).data()?;
    write_jsonl(&args.out_dir.join("ground_truth.jsonl"), &truth).data()?;
    Ok(Outcome {
        records: items.len(),
        failed: 0,
    })
}
