use serde::{Deserialize, Serialize};

use super::{hungarian_match, GtInstance, MaskDecoder, Matching, PredictedInstance, RewardWeights};
use crate::codec::resolve_anchor;
use crate::error::{Error, Result};
use crate::geometry::{box_iou, mask_iou, Bbox, Point2};
use crate::vocab::{parse, GridGeometry, GroupKind, OffsetToken, SpatialSequence};

/// 1 iff `text` is one `<think>` block followed by one `<answer>` block whose
/// every nonblank line parses and holds a `<seg>` or `<box>` group.
pub fn format_reward_grid(text: &str, g: &GridGeometry) -> f64 {
    let ok = || -> Option<()> {
        let rest = text.trim().strip_prefix("<think>")?;
        let (think, rest) = rest.split_once("</think>")?;
        if ["<think>", "<answer>", "</answer>"].iter().any(|t| think.contains(t)) {
            return None;
        }
        let body = rest.trim().strip_prefix("<answer>")?.strip_suffix("</answer>")?;
        if ["<think>", "</think>", "<answer>", "</answer>"].iter().any(|t| body.contains(t)) {
            return None;
        }
        let mut lines = body.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
        lines.peek()?;
        for line in lines {
            let seq = parse(line, g).ok()?;
            if !seq.groups.iter().any(|gr| matches!(gr.kind(), GroupKind::Seg | GroupKind::Box)) {
                return None;
            }
        }
        Some(())
    };
    if ok().is_some() {
        1.0
    } else {
        0.0
    }
}

/// Share of distinct sentences, splitting on `.`, `!`, `?` and newlines.
pub fn nonrepeat_reward(text: &str) -> f64 {
    let sentences: Vec<&str> = text
        .split(['.', '!', '?', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if sentences.len() <= 1 {
        return 1.0;
    }
    let mut unique = sentences.clone();
    unique.sort_unstable();
    unique.dedup();
    unique.len() as f64 / sentences.len() as f64
}

/// 0 below `lo`, a linear ramp to 1 at `hi`, then 1.
pub fn mask_reward(iou: f64, w: &RewardWeights) -> f64 {
    if iou < w.mask_lo {
        0.0
    } else if iou < w.mask_hi {
        (iou - w.mask_lo) / (w.mask_hi - w.mask_lo)
    } else {
        1.0
    }
}

pub fn box_reward(pred: &Bbox, gt: &Bbox, w: &RewardWeights) -> f64 {
    0.5 * box_iou(pred, gt) + 0.5 * super::l1_box_score(pred, gt, w)
}

/// Mean nearest-neighbour distance, 0 for fewer than two points.
fn mean_nn_distance(points: &[Point2]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let total: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| p.distance(*q))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / points.len() as f64
}

/// Per-instance point quality `F`: saturation times the hit/spread blend,
/// less a length penalty.
pub fn point_set_quality(m: f64, hit: f64, spread: f64, w: &RewardWeights) -> f64 {
    let sat = 1.0 - (-m / w.m0).exp();
    sat * (w.w_hit * hit + w.w_spread * spread) - w.lambda_m * m
}

/// Point-count weighted key-point quality over matched pairs, clipped to [0, 1].
pub fn semantic_points_reward(
    matching: &Matching,
    preds: &[PredictedInstance],
    gts: &[GtInstance],
    w: &RewardWeights,
) -> f64 {
    let denom: f64 = preds.iter().map(|p| p.points.len().max(1) as f64).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = matching
        .pairs
        .iter()
        .map(|pair| {
            let p = &preds[pair.pred];
            let g = &gts[pair.gt];
            let m = p.points.len() as f64;
            let spread = (mean_nn_distance(&p.points) / (w.rho_s * g.radius)).clamp(0.0, 1.0);
            m * point_set_quality(m, pair.score.hit, spread, w)
        })
        .sum();
    (num / denom).clamp(0.0, 1.0)
}

/// Nonblank lines of the first `<answer>` block, if there is one.
pub fn answer_lines(text: &str) -> Option<Vec<&str>> {
    let start = text.find("<answer>")? + "<answer>".len();
    let end = text[start..].find("</answer>")? + start;
    Some(text[start..end].lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

fn corner(g: &GridGeometry, p: Point2, o: Option<OffsetToken>) -> Option<Point2> {
    match o {
        None => Some(p),
        Some(o) => g.apply_offset(p, o),
    }
}

/// Box and points of one parsed answer line.
pub fn instance_from_sequence(seq: SpatialSequence, raw_line: &str, g: &GridGeometry) -> Result<PredictedInstance> {
    let mut bbox = None;
    if let Some(b) = seq.groups_of(GroupKind::Box).find(|b| b.grids().len() == 2) {
        let anchors: Vec<_> = b.anchors().collect();
        let (tl, otl) = anchors[0];
        let (br, obr) = anchors[1];
        g.check(tl)?;
        g.check(br)?;
        if let (Some(a), Some(c)) = (
            corner(g, g.cell_top_left(tl), otl),
            corner(g, g.cell_bottom_right(br), obr),
        ) {
            bbox = Some(Bbox::from_corners(a, c));
        }
    }
    let mut points = Vec::new();
    for group in seq
        .groups
        .iter()
        .filter(|gr| matches!(gr.kind(), GroupKind::Seg | GroupKind::Point))
    {
        for (t, o) in group.anchors() {
            if resolve_anchor(g, t, o)?.is_some() {
                let c = g.grid_center(t)?;
                points.push(corner(g, c, o).expect("not deleted"));
            }
        }
    }
    Ok(PredictedInstance {
        bbox,
        points,
        sequence: seq,
        raw_line: raw_line.to_string(),
    })
}

/// One prediction per parseable answer line; other lines are dropped.
pub fn predicted_instances(text: &str, g: &GridGeometry) -> Vec<PredictedInstance> {
    answer_lines(text)
        .unwrap_or_default()
        .into_iter()
        .filter_map(|line| {
            let seq = parse(line, g).ok()?;
            instance_from_sequence(seq, line, g).ok()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridComponentWeights {
    pub format: f64,
    pub nonrepeat: f64,
    pub mask: f64,
    #[serde(rename = "box")]
    pub bbox: f64,
    pub points: f64,
}

impl Default for GridComponentWeights {
    fn default() -> Self {
        Self {
            format: 1.0,
            nonrepeat: 1.0,
            mask: 1.0,
            bbox: 1.0,
            points: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridBreakdown {
    pub format: f64,
    pub nonrepeat: f64,
    pub mask: f64,
    #[serde(rename = "box")]
    pub bbox: f64,
    pub points: f64,
    pub total: f64,
}

/// Scores one grid-stage rollout against its targets.
///
/// Mask and box terms sum over matched pairs and divide by `max(P, G)`, so
/// missing and surplus objects both cost reward.
pub fn score_grid(
    text: &str,
    gts: &[GtInstance],
    decoder: MaskDecoder<'_>,
    g: &GridGeometry,
    w: &RewardWeights,
    cw: &GridComponentWeights,
) -> Result<(GridBreakdown, Matching)> {
    for gt in gts {
        if gt.mask.width() != g.width() as usize || gt.mask.height() != g.height() as usize {
            return Err(Error::Misaligned(format!(
                "target mask {}x{} on a {}x{} geometry",
                gt.mask.width(),
                gt.mask.height(),
                g.width(),
                g.height()
            )));
        }
    }
    let preds = predicted_instances(text, g);
    let matching = hungarian_match(&preds, gts, w);
    let norm = preds.len().max(gts.len()).max(1) as f64;
    let mut mask = 0.0;
    let mut bbox = 0.0;
    for pair in &matching.pairs {
        let p = &preds[pair.pred];
        let gt = &gts[pair.gt];
        let decoded = decoder.decode(&p.sequence, g)?;
        mask += mask_reward(mask_iou(&decoded, &gt.mask)?, w);
        if let Some(b) = &p.bbox {
            bbox += box_reward(b, &gt.bbox, w);
        }
    }
    let format = format_reward_grid(text, g);
    let nonrepeat = nonrepeat_reward(text);
    let points = semantic_points_reward(&matching, &preds, gts, w);
    let (mask, bbox) = (mask / norm, bbox / norm);
    let total = cw.format * format
        + cw.nonrepeat * nonrepeat
        + cw.mask * mask
        + cw.bbox * bbox
        + cw.points * points;
    Ok((
        GridBreakdown {
            format,
            nonrepeat,
            mask,
            bbox,
            points,
            total,
        },
        matching,
    ))
}
