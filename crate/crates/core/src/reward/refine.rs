use serde::{Deserialize, Serialize};

use super::{GtInstance, MaskDecoder, RewardWeights};
use crate::error::{Error, Result};
use crate::geometry::{box_iou, mask_iou, point_in_mask, Bbox, BinaryMask, Point2};
use crate::vocab::{parse, GridGeometry, Group, GroupKind, OffsetToken, SpatialSequence};

/// Contents of the `<offset>` blocks of a refinement answer, one per
/// instance. A leading `<think>` block is skipped; any other text outside
/// the blocks makes the answer unreadable.
pub fn offset_blocks(text: &str, g: &GridGeometry) -> Option<Vec<SpatialSequence>> {
    let mut rest = text.trim_start();
    if let Some(after) = rest.strip_prefix("<think>") {
        rest = after.split_once("</think>")?.1;
    }
    let mut blocks = Vec::new();
    loop {
        rest = rest.trim_start();
        if rest.is_empty() {
            return Some(blocks);
        }
        let (inner, after) = rest.strip_prefix("<offset>")?.split_once("</offset>")?;
        if inner.contains("<offset>") {
            return None;
        }
        blocks.push(parse(inner, g).ok()?);
        rest = after;
    }
}

/// Pairs each proposed group with the offsets answering it.
///
/// The answer must repeat the proposal's group kinds in order, carry no grid
/// tokens and give one offset per proposed grid token. Returns the proposal
/// with those offsets attached.
pub fn align_refinement(proposal: &SpatialSequence, answer: &SpatialSequence) -> Option<SpatialSequence> {
    if proposal.groups.len() != answer.groups.len() {
        return None;
    }
    proposal
        .groups
        .iter()
        .zip(&answer.groups)
        .map(|(p, a)| {
            if p.kind() != a.kind() || !a.grids().is_empty() || a.offsets().len() != p.grids().len() {
                return None;
            }
            Group::new(p.kind(), p.grids().to_vec(), a.offsets().to_vec()).ok()
        })
        .collect::<Option<Vec<_>>>()
        .map(SpatialSequence::new)
}

/// 1 iff there is one readable `<offset>` block per proposed instance and
/// each aligns with its proposal.
pub fn format_reward_offset(text: &str, proposals: &[SpatialSequence], g: &GridGeometry) -> f64 {
    let ok = offset_blocks(text, g).is_some_and(|blocks| {
        blocks.len() == proposals.len()
            && proposals
                .iter()
                .zip(&blocks)
                .all(|(p, a)| align_refinement(p, a).is_some())
    });
    if ok {
        1.0
    } else {
        0.0
    }
}

/// Score of one refined point: -1 for leaving the mask (deleting an inside
/// point included), +1 for entering or staying inside or for deleting a
/// point whose nine one-step probes all miss, 0 otherwise.
pub fn point_refine_score(mask: &BinaryMask, coarse: Point2, refined: Option<Point2>, g: &GridGeometry) -> i8 {
    let was_in = point_in_mask(mask, coarse);
    let now_in = refined.is_some_and(|p| point_in_mask(mask, p));
    match (was_in, now_in, refined) {
        (true, false, _) => -1,
        (_, true, _) => 1,
        (false, false, None) if g.probes(coarse).iter().all(|&p| !point_in_mask(mask, p)) => 1,
        _ => 0,
    }
}

/// Mean point score; `refined[k]` is `None` for a deleted point.
pub fn point_refine_reward(
    mask: &BinaryMask,
    coarse: &[Point2],
    refined: &[Option<Point2>],
    g: &GridGeometry,
) -> Result<f64> {
    if coarse.len() != refined.len() {
        return Err(Error::Misaligned(format!(
            "{} coarse points but {} refined",
            coarse.len(),
            refined.len()
        )));
    }
    if coarse.is_empty() {
        return Ok(0.0);
    }
    let total: i64 = coarse
        .iter()
        .zip(refined)
        .map(|(&c, &r)| point_refine_score(mask, c, r, g) as i64)
        .sum();
    Ok(total as f64 / coarse.len() as f64)
}

/// IoU gained over the initial box, floored at 0.
pub fn box_refine_reward(init: &Bbox, refined: &Bbox, gt: &Bbox) -> f64 {
    (box_iou(refined, gt) - box_iou(init, gt)).max(0.0)
}

/// IoU gain relative to the available headroom, clipped to [-1, 1]. The
/// headroom is floored at `eps` so a saturated start cannot divide by zero.
pub fn mask_iou_gain_reward(iou_init: f64, iou_refined: f64, eps: f64) -> f64 {
    ((iou_refined - iou_init) / (1.0 - iou_init).max(eps)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffsetComponentWeights {
    pub format: f64,
    pub point_refine: f64,
    pub box_refine: f64,
    pub iou_gain: f64,
}

impl Default for OffsetComponentWeights {
    fn default() -> Self {
        Self {
            format: 1.0,
            point_refine: 1.0,
            box_refine: 1.0,
            iou_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetBreakdown {
    pub format: f64,
    pub point_refine: f64,
    pub box_refine: f64,
    pub iou_gain: f64,
    pub total: f64,
}

struct InstanceScores {
    points: f64,
    bbox: Option<f64>,
    gain: f64,
}

fn score_instance(
    merged: &SpatialSequence,
    gt: &GtInstance,
    decoder: MaskDecoder<'_>,
    g: &GridGeometry,
    w: &RewardWeights,
) -> Result<InstanceScores> {
    let mut coarse = Vec::new();
    let mut refined = Vec::new();
    for group in merged
        .groups
        .iter()
        .filter(|gr| matches!(gr.kind(), GroupKind::Seg | GroupKind::Point))
    {
        for (t, o) in group.anchors() {
            let c = g.grid_center(t)?;
            coarse.push(c);
            refined.push(g.apply_offset(c, o.unwrap_or(OffsetToken::STAY)));
        }
    }
    let points = point_refine_reward(&gt.mask, &coarse, &refined, g)?;

    let bbox = match merged.groups_of(GroupKind::Box).next() {
        Some(b) => {
            let (tl, br) = (b.grids()[0], b.grids()[1]);
            let init = g.box_from_corner_tokens(tl, br)?;
            let moved = match (b.offsets()[0], b.offsets()[1]) {
                (OffsetToken::Move(_), OffsetToken::Move(_)) => Some(Bbox::from_corners(
                    g.apply_offset(g.cell_top_left(tl), b.offsets()[0]).expect("move"),
                    g.apply_offset(g.cell_bottom_right(br), b.offsets()[1]).expect("move"),
                )),
                _ => None,
            };
            Some(moved.map_or(0.0, |r| box_refine_reward(&init, &r, &gt.bbox)))
        }
        None => None,
    };

    let coarse_seq = SpatialSequence::new(
        merged
            .groups_of(GroupKind::Seg)
            .map(|s| Group::seg(s.grids().to_vec()))
            .collect(),
    );
    let iou_init = mask_iou(&decoder.decode(&coarse_seq, g)?, &gt.mask)?;
    let iou_refined = mask_iou(&decoder.decode(merged, g)?, &gt.mask)?;
    Ok(InstanceScores {
        points,
        bbox,
        gain: mask_iou_gain_reward(iou_init, iou_refined, w.eps),
    })
}

/// Scores one refinement rollout. Instance `k` of the answer answers
/// `proposals[k]` and is judged against `gts[k]`; unreadable or misaligned
/// instances score 0.
pub fn score_offset(
    text: &str,
    proposals: &[SpatialSequence],
    gts: &[GtInstance],
    decoder: MaskDecoder<'_>,
    g: &GridGeometry,
    w: &RewardWeights,
    cw: &OffsetComponentWeights,
) -> Result<OffsetBreakdown> {
    if proposals.len() != gts.len() {
        return Err(Error::Misaligned(format!(
            "{} proposed instances for {} targets",
            proposals.len(),
            gts.len()
        )));
    }
    let blocks = offset_blocks(text, g).unwrap_or_default();
    let mut points = 0.0;
    let mut gain = 0.0;
    let mut boxes = (0.0, 0usize);
    for (k, (prop, gt)) in proposals.iter().zip(gts).enumerate() {
        let has_box = prop.groups_of(GroupKind::Box).next().is_some();
        boxes.1 += has_box as usize;
        let Some(merged) = blocks.get(k).and_then(|a| align_refinement(prop, a)) else {
            continue;
        };
        let s = score_instance(&merged, gt, decoder, g, w)?;
        points += s.points;
        gain += s.gain;
        boxes.0 += s.bbox.unwrap_or(0.0);
    }
    let n = gts.len().max(1) as f64;
    let format = format_reward_offset(text, proposals, g);
    let (point_refine, iou_gain) = (points / n, gain / n);
    let box_refine = if boxes.1 == 0 { 0.0 } else { boxes.0 / boxes.1 as f64 };
    let total = cw.format * format
        + cw.point_refine * point_refine
        + cw.box_refine * box_refine
        + cw.iou_gain * iou_gain;
    Ok(OffsetBreakdown {
        format,
        point_refine,
        box_refine,
        iou_gain,
        total,
    })
}
