use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use getok_core::codec::load_proposals;
use getok_core::geometry::{mask_iou, Bbox};
use getok_core::mask_io::{write_png, MaskSource};
use getok_core::reward::{instance_from_sequence, MaskDecoder};
use getok_core::vocab::parse;
use serde::{Deserialize, Serialize};

use super::{proposals_for, resolve};
use crate::io::{base_dir, file_stem, read_jsonl};
use crate::{parallel_map, CliError, DataContext, Outcome, RunConfig};

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    /// JSONL of {"id", "tokens", "mask"?, "proposals"?, "width"?, "height"?}.
    #[arg(long)]
    pub input: PathBuf,
    /// Receives `<id>.png` and `<id>.json` per record.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Rebuild proposals with the synthetic segmenter from each record's mask.
    #[arg(long)]
    pub synth: bool,
}

#[derive(Debug, Clone, Deserialize)]
struct DecodeInput {
    id: String,
    tokens: String,
    #[serde(default)]
    mask: Option<MaskSource>,
    #[serde(default)]
    proposals: Option<PathBuf>,
    #[serde(default)]
    width: Option<usize>,
    #[serde(default)]
    height: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct DecodeReport {
    id: String,
    decoder: &'static str,
    width: u32,
    height: u32,
    /// Box of the sequence's `<box>` group, if it has one.
    #[serde(rename = "box")]
    bbox: Option<Bbox>,
    pixels: usize,
    /// IoU against the record's mask when one is given.
    iou: Option<f64>,
}

fn decode_one(cfg: &RunConfig, args: &DecodeArgs, base: &Path, index: usize, rec: &DecodeInput) -> anyhow::Result<()> {
    let gt = rec.mask.as_ref().map(|m| m.load(Some(base))).transpose()?;
    let (w, h) = match (&gt, rec.width, rec.height) {
        (Some(m), _, _) => (m.width(), m.height()),
        (None, Some(w), Some(h)) => (w, h),
        _ => match &rec.proposals {
            Some(dir) => {
                let ps = load_proposals(resolve(base, dir), cfg.grid)?;
                (ps.width(), ps.height())
            }
            None => return Err(anyhow!("image size unknown: give a mask, width and height, or proposals")),
        },
    };
    let g = cfg.geometry(w, h)?;
    let seq = parse(&rec.tokens, &g)?;
    let ps = proposals_for(rec.proposals.as_deref(), base, args.synth, gt.as_ref(), &g, cfg, index)?;
    let (decoder, name) = match &ps {
        Some(ps) => (MaskDecoder::Proposals(ps), "proposals"),
        None => (MaskDecoder::Cells, "cells"),
    };
    let mask = decoder.decode(&seq, &g)?;
    let bbox = instance_from_sequence(seq, &rec.tokens, &g)?.bbox;
    let stem = file_stem(&rec.id);
    write_png(&mask, args.out_dir.join(format!("{stem}.png")))?;
    let report = DecodeReport {
        id: rec.id.clone(),
        decoder: name,
        width: g.width(),
        height: g.height(),
        bbox,
        pixels: mask.count(),
        iou: gt.as_ref().map(|m| mask_iou(m, &mask)).transpose()?,
    };
    let path = args.out_dir.join(format!("{stem}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn run(cfg: &RunConfig, args: &DecodeArgs) -> Result<Outcome, CliError> {
    let rows = read_jsonl::<DecodeInput>(&args.input).data()?;
    let base = base_dir(&args.input);
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))
        .data()?;
    let results = parallel_map(&rows, cfg.jobs, |i, (line, rec)| match rec {
        Ok(rec) => decode_one(cfg, args, &base, i, rec).map_err(|e| format!("{}: {e:#}", rec.id)),
        Err(e) => Err(format!("line {line}: {e}")),
    })
    .data()?;
    let mut failed = 0;
    for e in results.iter().filter_map(|r| r.as_ref().err()) {
        log::warn!("{e}");
        failed += 1;
    }
    Ok(Outcome {
        records: results.len(),
        failed,
    })
}
