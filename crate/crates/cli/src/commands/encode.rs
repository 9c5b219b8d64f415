use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;
use getok_core::codec::greedy_select;
use getok_core::mask_io::MaskSource;
use serde::{Deserialize, Serialize};

use super::proposals_for;
use crate::io::{base_dir, read_jsonl, write_jsonl};
use crate::{parallel_map, CliError, DataContext, Outcome, RunConfig};

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    /// JSONL of {"id", "mask", "proposals"?}.
    #[arg(long)]
    pub input: PathBuf,
    /// Output JSONL, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
    /// Use the built-in synthetic segmenter when a record names no proposal directory.
    #[arg(long)]
    pub synth: bool,
}

#[derive(Debug, Clone, Deserialize)]
struct EncodeInput {
    id: String,
    mask: MaskSource,
    #[serde(default)]
    proposals: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum EncodeRow {
    Ok {
        id: String,
        tokens: String,
        token_count: usize,
        iou_max: f64,
        satisfied: bool,
        mask: MaskSource,
        #[serde(skip_serializing_if = "Option::is_none")]
        proposals: Option<PathBuf>,
    },
    Failed {
        id: String,
        error: String,
    },
}

pub fn run(cfg: &RunConfig, args: &EncodeArgs) -> Result<Outcome, CliError> {
    let rows = read_jsonl::<EncodeInput>(&args.input).data()?;
    let base = base_dir(&args.input);
    let conv = cfg.conversion();
    let out = parallel_map(&rows, cfg.jobs, |i, (line, rec)| {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                return EncodeRow::Failed {
                    id: format!("line:{line}"),
                    error: e.clone(),
                }
            }
        };
        let go = || -> anyhow::Result<EncodeRow> {
            let gt = rec.mask.load(Some(&base))?;
            let g = cfg.geometry(gt.width(), gt.height())?;
            let ps = proposals_for(rec.proposals.as_deref(), &base, args.synth, Some(&gt), &g, cfg, i)?
                .ok_or_else(|| anyhow!("no proposal source: give a proposals directory or --synth"))?;
            let r = greedy_select(&gt, &ps, &conv)?;
            Ok(EncodeRow::Ok {
                id: rec.id.clone(),
                tokens: r.to_sequence(&g).to_string(),
                token_count: r.selected.len(),
                iou_max: r.iou_max,
                satisfied: r.satisfied,
                mask: rec.mask.clone(),
                proposals: rec.proposals.clone(),
            })
        };
        go().unwrap_or_else(|e| EncodeRow::Failed {
            id: rec.id.clone(),
            error: format!("{e:#}"),
        })
    })
    .data()?;
    let failed = out.iter().filter(|r| matches!(r, EncodeRow::Failed { .. })).count();
    for r in &out {
        if let EncodeRow::Failed { id, error } = r {
            log::warn!("{id}: {error}");
        }
    }
    write_jsonl(&args.output, &out).data()?;
    Ok(Outcome {
        records: out.len(),
        failed,
    })
}
