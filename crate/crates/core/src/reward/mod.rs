//! Rollout rewards for grid-token generation and offset refinement.

mod grid;
mod matching;
mod refine;

pub use grid::{
    answer_lines, box_reward, format_reward_grid, instance_from_sequence, mask_reward, nonrepeat_reward,
    point_set_quality, predicted_instances, score_grid, semantic_points_reward, GridBreakdown, GridComponentWeights,
};
pub use matching::{assignment_cost, brute_force_assignment, hungarian};
pub use refine::{
    align_refinement, box_refine_reward, format_reward_offset, mask_iou_gain_reward,
    offset_blocks, point_refine_reward, point_refine_score, score_offset, OffsetBreakdown, OffsetComponentWeights,
};

use serde::{Deserialize, Serialize};

use crate::codec::{decode_tokens_to_cells, decode_tokens_to_mask, ProposalSet};
use crate::error::{Error, Result};
use crate::geometry::{bbox_of_mask, box_iou, point_in_mask, Bbox, BinaryMask, Point2};
use crate::vocab::{GridGeometry, SpatialSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_hit: f64,
    pub w_spread: f64,
    pub lambda_m: f64,
    pub rho_s: f64,
    pub m0: f64,
    pub tau_l1: f64,
    pub mask_lo: f64,
    pub mask_hi: f64,
    pub eps: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_hit: 0.6,
            w_spread: 0.4,
            lambda_m: 0.02,
            rho_s: 0.30,
            m0: 5.0,
            tau_l1: 18.0,
            mask_lo: 0.5,
            mask_hi: 0.9,
            eps: 1e-6,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_hit,
            self.w_spread,
            self.lambda_m,
            self.rho_s,
            self.m0,
            self.tau_l1,
            self.mask_lo,
            self.mask_hi,
            self.eps,
        ];
        if all.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidConfig(format!("reward weights must be positive: {all:?}")));
        }
        if self.mask_lo >= self.mask_hi {
            return Err(Error::InvalidConfig(format!(
                "mask reward breakpoints {} >= {}",
                self.mask_lo, self.mask_hi
            )));
        }
        Ok(())
    }
}

/// A ground-truth object.
#[derive(Debug, Clone, PartialEq)]
pub struct GtInstance {
    pub mask: BinaryMask,
    pub bbox: Bbox,
    /// Equivalent radius `sqrt(area / π)`.
    pub radius: f64,
}

impl GtInstance {
    /// `bbox` defaults to the tight box of `mask`.
    pub fn new(mask: BinaryMask, bbox: Option<Bbox>) -> Result<Self> {
        let tight = bbox_of_mask(&mask)?;
        let radius = (mask.count() as f64 / std::f64::consts::PI).sqrt();
        Ok(Self {
            bbox: bbox.unwrap_or(tight),
            mask,
            radius,
        })
    }
}

/// One answer line read as an object prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedInstance {
    pub bbox: Option<Bbox>,
    pub points: Vec<Point2>,
    pub sequence: SpatialSequence,
    pub raw_line: String,
}

/// Pairwise similarity terms between a prediction and a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairScore {
    pub iou: f64,
    pub hit: f64,
    pub l1: f64,
    pub sim: f64,
}

/// `clip(1 - mean|b̂ - b| / τ, 0, 1)` over the four box coordinates.
pub fn l1_box_score(pred: &Bbox, gt: &Bbox, w: &RewardWeights) -> f64 {
    (1.0 - (pred.l1_distance(gt) / 4.0) / w.tau_l1).clamp(0.0, 1.0)
}

/// Fraction of points inside `mask`, 0 for no points.
pub fn hit_ratio(points: &[Point2], mask: &BinaryMask) -> f64 {
    let hits = points.iter().filter(|&&q| point_in_mask(mask, q)).count();
    hits as f64 / points.len().max(1) as f64
}

pub fn pairwise_sim(p: &PredictedInstance, g: &GtInstance, w: &RewardWeights) -> PairScore {
    let (iou, l1) = match &p.bbox {
        Some(b) => (box_iou(b, &g.bbox), l1_box_score(b, &g.bbox, w)),
        None => (0.0, 0.0),
    };
    let hit = hit_ratio(&p.points, &g.mask);
    PairScore {
        iou,
        hit,
        l1,
        sim: iou + hit + l1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub gt: usize,
    #[serde(flatten)]
    pub score: PairScore,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Matching {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
    pub total_cost: f64,
}

/// Matches predictions to targets minimizing `Σ (3 - Sim)`.
pub fn hungarian_match(preds: &[PredictedInstance], gts: &[GtInstance], w: &RewardWeights) -> Matching {
    let scores: Vec<Vec<PairScore>> = preds
        .iter()
        .map(|p| gts.iter().map(|g| pairwise_sim(p, g, w)).collect())
        .collect();
    let cost: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|s| 3.0 - s.sim).collect()).collect();
    let pairs = hungarian(&cost);
    let total_cost = assignment_cost(&cost, &pairs);
    Matching {
        unmatched_preds: (0..preds.len()).filter(|&i| pairs.iter().all(|p| p.0 != i)).collect(),
        unmatched_gts: (0..gts.len()).filter(|&j| pairs.iter().all(|p| p.1 != j)).collect(),
        pairs: pairs
            .into_iter()
            .map(|(i, j)| MatchedPair {
                pred: i,
                gt: j,
                score: scores[i][j],
            })
            .collect(),
        total_cost,
    }
}

/// Turns rendered spatial answers into masks.
#[derive(Debug, Clone, Copy)]
pub enum MaskDecoder<'a> {
    /// Union of the proposals the designated cells prompt.
    Proposals(&'a ProposalSet),
    /// The designated cells themselves.
    Cells,
}

impl MaskDecoder<'_> {
    pub fn decode(&self, seq: &SpatialSequence, g: &GridGeometry) -> Result<BinaryMask> {
        match self {
            MaskDecoder::Proposals(ps) => decode_tokens_to_mask(seq, ps, g),
            MaskDecoder::Cells => decode_tokens_to_cells(seq, g),
        }
    }
}

/// Group-normalized advantages `(r - mean) / (std + eps)` with the population std.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "advantages need a group of at least 2, got {}",
            rewards.len()
        )));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(rewards.iter().map(|r| (r - mean) / (std + eps)).collect())
}
