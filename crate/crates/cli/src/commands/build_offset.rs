use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use getok_core::offset::{build_sample, verify_sample, BuildStats, DatasetEntry, OffsetSample};
use serde::Serialize;

use crate::io::{base_dir, read_jsonl, write_jsonl};
use crate::{parallel_map, CliError, DataContext, Outcome, RunConfig};

#[derive(Debug, Clone, Args)]
pub struct BuildOffsetArgs {
    /// JSONL of {"image", "mask", "query"}.
    #[arg(long)]
    pub input: PathBuf,
    /// Output JSONL, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
    /// Re-check every emitted label against its mask; any violation exits 2.
    #[arg(long)]
    pub verify: bool,
    /// Also write the run summary as JSON here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct Summary {
    #[serde(flatten)]
    stats: BuildStats,
    failed: usize,
    verified: bool,
    violations: usize,
}

enum Built {
    Sample(Box<OffsetSample>, Vec<String>),
    Empty,
    Failed(String),
}

pub fn run(cfg: &RunConfig, args: &BuildOffsetArgs) -> Result<Outcome, CliError> {
    let rows = read_jsonl::<DatasetEntry>(&args.input).data()?;
    let base = base_dir(&args.input);
    let ocfg = cfg.offset_config();
    // the image size here is a placeholder; samples use each mask's own frame
    let g = cfg.geometry(cfg.grid as usize, cfg.grid as usize).map_err(|e| CliError::Usage(e.into()))?;
    let built = parallel_map(&rows, cfg.jobs, |i, (line, rec)| {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => return Built::Failed(format!("line {line}: {e}")),
        };
        let go = || -> anyhow::Result<Built> {
            let Some(s) = build_sample(i, rec, Some(&base), &g, &ocfg, cfg.seed)? else {
                return Ok(Built::Empty);
            };
            let bad = if args.verify {
                let gt = rec.mask.load(Some(&base))?;
                verify_sample(&s, &gt, &g, &ocfg)?
            } else {
                Vec::new()
            };
            Ok(Built::Sample(Box::new(s), bad))
        };
        go().unwrap_or_else(|e| Built::Failed(format!("line {line} ({}): {e:#}", rec.image)))
    })
    .data()?;

    let mut stats = BuildStats::default();
    let (mut failed, mut violations) = (0, 0);
    let mut out = Vec::new();
    for b in built {
        match b {
            Built::Sample(s, bad) => {
                for v in &bad {
                    log::error!("{}: {v}", s.image);
                }
                violations += bad.len();
                stats.add(&s);
                out.push(*s);
            }
            Built::Empty => stats.skipped += 1,
            Built::Failed(e) => {
                log::warn!("{e}");
                stats.skipped += 1;
                failed += 1;
            }
        }
    }
    write_jsonl(&args.output, &out).data()?;

    let summary = Summary {
        stats,
        failed,
        verified: args.verify,
        violations,
    };
    let text = serde_json::to_string_pretty(&summary).data()?;
    eprintln!("{text}");
    if let Some(p) = &args.summary {
        std::fs::write(p, text + "\n")
            .with_context(|| format!("writing {}", p.display()))
            .data()?;
    }
    if violations > 0 {
        return Err(CliError::Data(anyhow::anyhow!("{violations} label violations")));
    }
    Ok(Outcome {
        records: out.len(),
        failed,
    })
}
