use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail};
use clap::{Args, ValueEnum};
use getok_core::geometry::{BinaryMask, Bbox};
use getok_core::mask_io::MaskSource;
use getok_core::reward::{
    group_advantages, score_grid, score_offset, GtInstance, MaskDecoder, Matching,
};
use getok_core::vocab::{parse, SpatialSequence};
use serde::{Deserialize, Serialize};

use super::proposals_for;
use crate::io::{base_dir, read_jsonl, write_jsonl};
use crate::{parallel_map, CliError, DataContext, Outcome, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Grid,
    Offset,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long, value_enum)]
    pub stage: Stage,
    /// JSONL of {"id", "text"}; rollouts sharing an id form one group.
    #[arg(long)]
    pub predictions: PathBuf,
    /// JSONL of {"id", "instances": [{"mask", "box"?}], "proposal"?, "proposals"?}.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Output JSONL, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
    /// Decode masks with the synthetic segmenter over the union of the targets.
    #[arg(long)]
    pub synth: bool,
}

#[derive(Debug, Clone, Deserialize)]
struct InstanceInput {
    mask: MaskSource,
    #[serde(default, rename = "box")]
    bbox: Option<Bbox>,
}

#[derive(Debug, Clone, Deserialize)]
struct GroundTruth {
    id: String,
    instances: Vec<InstanceInput>,
    /// Grid-stage answer line per instance, refined in the offset stage.
    #[serde(default)]
    proposal: Vec<String>,
    #[serde(default)]
    proposals: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
struct Prediction {
    id: String,
    text: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum Components {
    Grid {
        #[serde(flatten)]
        scores: getok_core::reward::GridBreakdown,
        matching: Matching,
    },
    Offset(getok_core::reward::OffsetBreakdown),
}

impl Components {
    fn total(&self) -> f64 {
        match self {
            Components::Grid { scores, .. } => scores.total,
            Components::Offset(s) => s.total,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum ScoreRow {
    Ok {
        id: String,
        rollout: usize,
        #[serde(flatten)]
        components: Components,
        /// Group-normalized total; absent for single-rollout groups.
        advantage: Option<f64>,
    },
    Failed {
        id: String,
        rollout: usize,
        error: String,
    },
}

/// A ground-truth record loaded and ready to score against.
struct Target {
    gts: Vec<GtInstance>,
    proposal: Vec<SpatialSequence>,
    ps: Option<getok_core::codec::ProposalSet>,
    g: getok_core::vocab::GridGeometry,
}

fn load_target(cfg: &RunConfig, args: &ScoreArgs, base: &Path, index: usize, gt: &GroundTruth) -> anyhow::Result<Target> {
    if gt.instances.is_empty() {
        bail!("no instances");
    }
    let gts = gt
        .instances
        .iter()
        .map(|i| Ok(GtInstance::new(i.mask.load(Some(base))?, i.bbox)?))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let (w, h) = (gts[0].mask.width(), gts[0].mask.height());
    let g = cfg.geometry(w, h)?;
    let mut union = BinaryMask::new(w, h)?;
    for t in &gts {
        union.union_in_place(&t.mask)?;
    }
    let ps = proposals_for(gt.proposals.as_deref(), base, args.synth, Some(&union), &g, cfg, index)?;
    let proposal = gt
        .proposal
        .iter()
        .map(|l| parse(l, &g))
        .collect::<Result<Vec<_>, _>>()?;
    if args.stage == Stage::Offset && proposal.len() != gts.len() {
        bail!("{} proposal lines for {} instances", proposal.len(), gts.len());
    }
    Ok(Target { gts, proposal, ps, g })
}

fn score_one(cfg: &RunConfig, stage: Stage, t: &Target, text: &str) -> anyhow::Result<Components> {
    let decoder = t.ps.as_ref().map_or(MaskDecoder::Cells, MaskDecoder::Proposals);
    Ok(match stage {
        Stage::Grid => {
            let (scores, matching) = score_grid(text, &t.gts, decoder, &t.g, &cfg.reward, &cfg.grid_weights)?;
            Components::Grid { scores, matching }
        }
        Stage::Offset => Components::Offset(score_offset(
            text,
            &t.proposal,
            &t.gts,
            decoder,
            &t.g,
            &cfg.reward,
            &cfg.offset_weights,
        )?),
    })
}

pub fn run(cfg: &RunConfig, args: &ScoreArgs) -> Result<Outcome, CliError> {
    let gt_rows = read_jsonl::<GroundTruth>(&args.ground_truth).data()?;
    let preds = read_jsonl::<Prediction>(&args.predictions).data()?;
    let base = base_dir(&args.ground_truth);

    let mut index = HashMap::new();
    for (i, (line, r)) in gt_rows.iter().enumerate() {
        let r = r
            .as_ref()
            .map_err(|e| anyhow!("{}:{line}: {e}", args.ground_truth.display()))
            .data()?;
        if index.insert(r.id.clone(), i).is_some() {
            return Err(CliError::Data(anyhow!("duplicate ground-truth id {}", r.id)));
        }
    }
    let mut preds_ok = Vec::with_capacity(preds.len());
    for (line, p) in &preds {
        let p = p
            .as_ref()
            .map_err(|e| anyhow!("{}:{line}: {e}", args.predictions.display()))
            .data()?;
        preds_ok.push(p);
    }
    let missing: BTreeSet<&str> = preds_ok
        .iter()
        .filter(|p| !index.contains_key(&p.id))
        .map(|p| p.id.as_str())
        .collect();
    if !missing.is_empty() {
        let list: Vec<_> = missing.into_iter().collect();
        return Err(CliError::Data(anyhow!("no ground truth for ids: {}", list.join(", "))));
    }

    let used: BTreeSet<usize> = preds_ok.iter().map(|p| index[&p.id]).collect();
    let used: Vec<usize> = used.into_iter().collect();
    let loaded = parallel_map(&used, cfg.jobs, |_, &i| {
        let gt = gt_rows[i].1.as_ref().expect("checked above");
        load_target(cfg, args, &base, i, gt).map_err(|e| format!("{e:#}"))
    })
    .data()?;
    let targets: HashMap<usize, Result<Target, String>> = used.into_iter().zip(loaded).collect();

    let mut rollout_of = HashMap::<&str, usize>::new();
    let jobs: Vec<(usize, &Prediction)> = preds_ok
        .iter()
        .map(|p| {
            let k = rollout_of.entry(p.id.as_str()).or_default();
            *k += 1;
            (*k - 1, *p)
        })
        .collect();
    let mut rows = parallel_map(&jobs, cfg.jobs, |_, &(rollout, p)| {
        let scored = match &targets[&index[&p.id]] {
            Ok(t) => score_one(cfg, args.stage, t, &p.text).map_err(|e| format!("{e:#}")),
            Err(e) => Err(e.clone()),
        };
        match scored {
            Ok(components) => ScoreRow::Ok {
                id: p.id.clone(),
                rollout,
                components,
                advantage: None,
            },
            Err(error) => ScoreRow::Failed {
                id: p.id.clone(),
                rollout,
                error,
            },
        }
    })
    .data()?;

    // advantages within each fully scored group of two or more rollouts
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    for (k, r) in rows.iter().enumerate() {
        let id = match r {
            ScoreRow::Ok { id, .. } | ScoreRow::Failed { id, .. } => id,
        };
        groups.entry(id.clone()).or_default().push(k);
    }
    for members in groups.values().filter(|m| m.len() >= 2) {
        let totals: Option<Vec<f64>> = members
            .iter()
            .map(|&k| match &rows[k] {
                ScoreRow::Ok { components, .. } => Some(components.total()),
                ScoreRow::Failed { .. } => None,
            })
            .collect();
        let Some(totals) = totals else { continue };
        let adv = group_advantages(&totals, cfg.reward.eps).data()?;
        for (&k, a) in members.iter().zip(adv) {
            if let ScoreRow::Ok { advantage, .. } = &mut rows[k] {
                *advantage = Some(a);
            }
        }
    }

    let mut failed = 0;
    for r in &rows {
        if let ScoreRow::Failed { id, rollout, error } = r {
            log::warn!("{id}#{rollout}: {error}");
            failed += 1;
        }
    }
    write_jsonl(&args.output, &rows).data()?;
    Ok(Outcome {
        records: rows.len(),
        failed,
    })
}
