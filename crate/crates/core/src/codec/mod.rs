//! Mask ↔ grid-token conversion against a proposal source.

mod greedy;
mod proposals;

pub use greedy::{
    brute_force_select, greedy_select, ConversionConfig, ConversionResult, BRUTE_FORCE_LIMIT,
    DEFAULT_TAU,
};
pub use proposals::{load_proposals, ProposalSet, DEDUP_IOU};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    bbox_of_mask, dilate, erode, point_in_mask, BinaryMask, Point2, StructuringElement,
};
use crate::vocab::{GridGeometry, GridToken, GroupKind, OffsetToken, SpatialSequence};

fn check_frame(ps: &ProposalSet, g: &GridGeometry) -> Result<()> {
    if ps.n() != g.n() || ps.width() != g.width() as usize || ps.height() != g.height() as usize {
        return Err(Error::InvalidProposals(format!(
            "proposal set ({}x{} grid, {}x{} px) does not match geometry ({}x{} grid, {}x{} px)",
            ps.n(),
            ps.n(),
            ps.width(),
            ps.height(),
            g.n(),
            g.n(),
            g.width(),
            g.height()
        )));
    }
    Ok(())
}

/// Union of the proposals prompted at the cells containing `points`.
pub fn decode_points(points: &[Point2], ps: &ProposalSet, g: &GridGeometry) -> Result<BinaryMask> {
    check_frame(ps, g)?;
    let mut out = BinaryMask::new(ps.width(), ps.height())?;
    for &p in points {
        let cell = g.nearest_grid(p)?;
        out.union_in_place(ps.proposal(ps.proposal_for(cell)?))?;
    }
    Ok(out)
}

/// Cell a grid token designates once its offset is applied; `None` if deleted.
pub fn resolve_anchor(
    g: &GridGeometry,
    t: GridToken,
    offset: Option<OffsetToken>,
) -> Result<Option<GridToken>> {
    match offset {
        None => g.check(t).map(|_| Some(t)),
        Some(o) => match g.apply_offset(g.grid_center(t)?, o) {
            Some(p) => g.nearest_grid(p).map(Some),
            None => Ok(None),
        },
    }
}

/// Decodes the `<seg>` groups by painting the designated cells, for use
/// when no proposal source is available.
pub fn decode_tokens_to_cells(tokens: &SpatialSequence, g: &GridGeometry) -> Result<BinaryMask> {
    let (w, h, n) = (g.width() as usize, g.height() as usize, g.n() as usize);
    let mut out = BinaryMask::new(w, h)?;
    // pixel x lies in column floor(x n / w), so column c starts at ceil(c w / n)
    let start = |c: usize, size: usize| (c * size).div_ceil(n);
    for group in tokens.groups_of(GroupKind::Seg) {
        for (t, offset) in group.anchors() {
            if let Some(cell) = resolve_anchor(g, t, offset)? {
                let (r, c) = (cell.row as usize, cell.col as usize);
                out.fill_rect(start(c, w), start(r, h), start(c + 1, w), start(r + 1, h));
            }
        }
    }
    Ok(out)
}

/// Decodes the `<seg>` groups of a sequence to a mask.
///
/// Each grid token contributes the proposal θ maps it to. A paired offset
/// first moves the cell centre and the moved point is re-resolved to its
/// cell; deleted tokens contribute nothing.
pub fn decode_tokens_to_mask(
    tokens: &SpatialSequence,
    ps: &ProposalSet,
    g: &GridGeometry,
) -> Result<BinaryMask> {
    check_frame(ps, g)?;
    let mut out = BinaryMask::new(ps.width(), ps.height())?;
    for group in tokens.groups_of(GroupKind::Seg) {
        for (t, offset) in group.anchors() {
            if let Some(cell) = resolve_anchor(g, t, offset)? {
                out.union_in_place(ps.proposal(ps.proposal_for(cell)?))?;
            }
        }
    }
    Ok(out)
}

/// Stand-in for a promptable segmenter, deterministic in `seed`.
///
/// Proposals are the 4-connected components of `gt`, each component dilated
/// and eroded by one pixel, and two to four random background rectangles.
/// Every cell maps to a proposal containing its centre (the nearest one by
/// box distance when none does). The first cell inside each component maps
/// to the unperturbed component, so an exact cover is always reachable for
/// components that contain a cell centre.
pub fn synth_proposals(gt: &BinaryMask, g: &GridGeometry, seed: u64) -> Result<ProposalSet> {
    if gt.is_empty() {
        return Err(Error::EmptyMask);
    }
    if gt.width() != g.width() as usize || gt.height() != g.height() as usize {
        return Err(Error::InvalidProposals(format!(
            "mask {}x{} does not match geometry {}x{}",
            gt.width(),
            gt.height(),
            g.width(),
            g.height()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (gt.width(), gt.height());
    let k3 = StructuringElement::new(3)?;

    let components = gt.components();
    let mut proposals: Vec<BinaryMask> = components.clone();
    for c in &components {
        proposals.push(dilate(c, k3));
        let e = erode(c, k3);
        if !e.is_empty() {
            proposals.push(e);
        }
    }
    let blobs = rng.gen_range(2..=4);
    for _ in 0..blobs {
        let bw = rng.gen_range((w / 10).max(1)..=(w * 3 / 10).max(1));
        let bh = rng.gen_range((h / 10).max(1)..=(h * 3 / 10).max(1));
        let x0 = rng.gen_range(0..=w - bw);
        let y0 = rng.gen_range(0..=h - bh);
        let mut m = BinaryMask::new(w, h)?;
        m.fill_rect(x0, y0, x0 + bw, y0 + bh);
        proposals.push(m);
    }

    let boxes: Vec<_> = proposals
        .iter()
        .map(|m| bbox_of_mask(m).expect("proposals are nonempty"))
        .collect();
    let mut anchored = vec![false; components.len()];
    let mut theta = Vec::with_capacity(g.cell_count());
    for t in g.tokens() {
        let c = g.grid_center(t)?;
        let containing: Vec<usize> = (0..proposals.len())
            .filter(|&k| point_in_mask(&proposals[k], c))
            .collect();
        let pick = if let Some(comp) = (0..components.len())
            .find(|&k| !anchored[k] && containing.contains(&k))
        {
            anchored[comp] = true;
            comp
        } else if !containing.is_empty() {
            containing[rng.gen_range(0..containing.len())]
        } else {
            let dist = |k: usize| {
                let b = &boxes[k];
                let dx = (b.x_min - c.x).max(c.x - b.x_max).max(0.0);
                let dy = (b.y_min - c.y).max(c.y - b.y_max).max(0.0);
                dx.hypot(dy)
            };
            (0..proposals.len())
                .min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)))
                .expect("at least one proposal")
        };
        theta.push(pick);
    }
    ProposalSet::new(g.n(), proposals, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mask_iou;
    use crate::vocab::{parse, Group};

    fn geo() -> GridGeometry {
        GridGeometry::new(8, 16, 64, 64).unwrap()
    }

    fn blob() -> BinaryMask {
        let mut m = BinaryMask::new(64, 64).unwrap();
        m.fill_rect(10, 12, 40, 36);
        m
    }

    #[test]
    fn synth_contains_component_and_maps_inside_cells() {
        let gt = blob();
        let ps = synth_proposals(&gt, &geo(), 7).unwrap();
        assert_eq!(ps.proposal(0), &gt);
        // the blob spans x in [10, 40), y in [12, 36); cell (1,1) has centre (12, 12).
        let first_inside = geo()
            .tokens()
            .find(|&t| point_in_mask(&gt, geo().grid_center(t).unwrap()))
            .unwrap();
        assert_eq!(first_inside, GridToken::new(1, 1));
        assert_eq!(ps.proposal_for(first_inside).unwrap(), 0);
        // every cell inside maps to some proposal containing its centre
        for t in geo().tokens() {
            let c = geo().grid_center(t).unwrap();
            if point_in_mask(&gt, c) {
                assert!(point_in_mask(ps.proposal(ps.proposal_for(t).unwrap()), c));
            }
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_proposals(&blob(), &geo(), 11).unwrap();
        let b = synth_proposals(&blob(), &geo(), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn greedy_on_synth_reaches_exact_cover() {
        let mut gt = blob();
        gt.fill_rect(48, 44, 60, 60);
        let ps = synth_proposals(&gt, &geo(), 3).unwrap();
        let r = greedy_select(&gt, &ps, &ConversionConfig::default()).unwrap();
        assert_eq!(r.iou_max, 1.0);
        let decoded = decode_tokens_to_mask(&r.to_sequence(&geo()), &ps, &geo()).unwrap();
        assert_eq!(decoded, gt);
    }

    #[test]
    fn decode_matches_greedy_iou() {
        let gt = blob();
        let ps = synth_proposals(&gt, &geo(), 5).unwrap();
        let r = greedy_select(&gt, &ps, &ConversionConfig::default()).unwrap();
        let m = decode_tokens_to_mask(&r.to_sequence(&geo()), &ps, &geo()).unwrap();
        assert_eq!(mask_iou(&m, &gt).unwrap(), r.iou_max);
    }

    #[test]
    fn decode_edge_cases() {
        let g = geo();
        let ps = synth_proposals(&blob(), &g, 1).unwrap();
        let empty = decode_tokens_to_mask(&parse("<seg></seg>", &g).unwrap(), &ps, &g).unwrap();
        assert!(empty.is_empty());

        let t = GridToken::new(3, 3);
        let other = GridToken::new(0, 0);
        let with_delete = SpatialSequence::new(vec![Group::new(
            GroupKind::Seg,
            vec![t, other],
            vec![OffsetToken::Delete, OffsetToken::STAY],
        )
        .unwrap()]);
        let without = SpatialSequence::new(vec![Group::seg(vec![other])]);
        assert_eq!(
            decode_tokens_to_mask(&with_delete, &ps, &g).unwrap(),
            decode_tokens_to_mask(&without, &ps, &g).unwrap()
        );

        // boxes and points do not decode into the mask
        let boxed = SpatialSequence::new(vec![Group::bbox(t, t)]);
        assert!(decode_tokens_to_mask(&boxed, &ps, &g).unwrap().is_empty());

        let bad = SpatialSequence::new(vec![Group::seg(vec![GridToken::new(8, 0)])]);
        assert!(matches!(
            decode_tokens_to_mask(&bad, &ps, &g),
            Err(Error::TokenOutOfRange { .. })
        ));
    }

    #[test]
    fn cell_painting_matches_nearest_grid() {
        // 50 px over 8 cells: uneven cell widths
        let g = GridGeometry::new(8, 16, 50, 50).unwrap();
        let seq = parse("<seg><grid_0_0><grid_3_5><grid_7_7></seg>", &g).unwrap();
        let m = decode_tokens_to_cells(&seq, &g).unwrap();
        let cells = [GridToken::new(0, 0), GridToken::new(3, 5), GridToken::new(7, 7)];
        for y in 0..50 {
            for x in 0..50 {
                let t = g.nearest_grid(Point2::new(x as f64, y as f64)).unwrap();
                assert_eq!(m.get(x, y), cells.contains(&t), "({x}, {y})");
            }
        }
    }

    #[test]
    fn decode_resolves_moved_points() {
        let g = geo();
        let ps = synth_proposals(&blob(), &g, 1).unwrap();
        // centre of (3,3) is (28,28); one step is 4 px, staying inside cell (3,3).
        let t = GridToken::new(3, 3);
        let moved = SpatialSequence::new(vec![Group::new(
            GroupKind::Seg,
            vec![t],
            vec![OffsetToken::moving(1, 1)],
        )
        .unwrap()]);
        let expected = ps.proposal(ps.proposal_for(GridToken::new(4, 4)).unwrap()).clone();
        // (28+4, 28+4) = (32, 32) falls in cell (4, 4)
        assert_eq!(decode_tokens_to_mask(&moved, &ps, &g).unwrap(), expected);
    }
}
