//! Offset supervision: band masks, cell pools, sampled prompts and labels.

mod dataset;

pub use dataset::{
    build_dataset, build_sample, label_mask, record_seed, verify_sample, BoxCornerRecord,
    BuildStats, DatasetEntry, OffsetSample, PoolCounts,
};

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    bbox_of_mask, box_iou, dilate_square, erode_square, morph_gradient, point_in_mask, Bbox,
    BinaryMask, StructuringElement,
};
use crate::vocab::{Delta, GridGeometry, GridToken, OffsetToken};

/// Side of the element the boundary gradient is taken with.
pub const GRADIENT_SIDE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolWeights {
    pub inside: f64,
    pub ring: f64,
    pub far: f64,
    pub hard_delete: f64,
}

impl Default for PoolWeights {
    fn default() -> Self {
        Self {
            inside: 0.4,
            ring: 0.4,
            far: 0.1,
            hard_delete: 0.1,
        }
    }
}

impl PoolWeights {
    pub fn of(&self, pool: Pool) -> f64 {
        match pool {
            Pool::Inside => self.inside,
            Pool::Ring => self.ring,
            Pool::Far => self.far,
            Pool::HardDelete => self.hard_delete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffsetConfig {
    /// Side of the square the boundary gradient is dilated with.
    pub band_width: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub weights: PoolWeights,
    /// Box-corner IoU threshold.
    pub tau: f64,
    /// Corner tokens are jittered by up to this many cells per coordinate.
    pub corner_jitter: u32,
    /// Masks are resized to this square size; `None` keeps their own size.
    pub resize: Option<u32>,
}

impl Default for OffsetConfig {
    fn default() -> Self {
        Self {
            band_width: 3,
            k_min: 4,
            k_max: 12,
            weights: PoolWeights::default(),
            tau: 0.85,
            corner_jitter: 1,
            resize: Some(840),
        }
    }
}

impl OffsetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.band_width == 0 {
            return bad("band width must be positive".into());
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return bad(format!("bad grid count range [{}, {}]", self.k_min, self.k_max));
        }
        let w = &self.weights;
        let all = [w.inside, w.ring, w.far, w.hard_delete];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) || all.iter().sum::<f64>() <= 0.0 {
            return bad(format!("bad pool weights {all:?}"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau {} outside (0, 1]", self.tau));
        }
        if self.resize == Some(0) {
            return bad("resize target must be positive".into());
        }
        Ok(())
    }
}

/// Erosion, dilation and boundary band of a ground-truth mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSet {
    pub erosion: BinaryMask,
    pub dilation: BinaryMask,
    pub boundary: BinaryMask,
    pub k_e: usize,
    pub k_d: usize,
    pub band_width: usize,
}

/// `(k_e, k_d) = (⌊s_y⌋ + 1, 2⌊s_y⌋ + 1)` for the vertical step `s_y`.
pub fn kernel_sizes(g: &GridGeometry) -> (usize, usize) {
    let s = g.step_y().floor() as usize;
    (s + 1, 2 * s + 1)
}

pub fn compute_bands(gt: &BinaryMask, g: &GridGeometry, band_width: usize) -> Result<BandSet> {
    if gt.is_empty() {
        return Err(Error::EmptyMask);
    }
    if band_width == 0 {
        return Err(Error::InvalidConfig("band width must be positive".into()));
    }
    let (k_e, k_d) = kernel_sizes(g);
    let grad = morph_gradient(gt, StructuringElement::new(GRADIENT_SIDE)?);
    Ok(BandSet {
        erosion: erode_square(gt, k_e),
        dilation: dilate_square(gt, k_d),
        boundary: dilate_square(&grad, band_width),
        k_e,
        k_d,
        band_width,
    })
}

/// Whether any of the nine one-step probes around the cell centre lands in `gt`.
pub fn hit_test(g: &GridGeometry, gt: &BinaryMask, cell: GridToken) -> Result<bool> {
    let c = g.grid_center(cell)?;
    Ok(g.probes(c).iter().any(|&p| point_in_mask(gt, p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    Inside,
    Ring,
    Far,
    HardDelete,
}

impl Pool {
    pub const ALL: [Pool; 4] = [Pool::Inside, Pool::Ring, Pool::Far, Pool::HardDelete];

    pub fn name(self) -> &'static str {
        match self {
            Pool::Inside => "inside",
            Pool::Ring => "ring",
            Pool::Far => "far",
            Pool::HardDelete => "hard_delete",
        }
    }
}

/// One pool per grid cell, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPools {
    n: u32,
    pools: Vec<Pool>,
}

impl RegionPools {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn pools(&self) -> &[Pool] {
        &self.pools
    }

    pub fn of(&self, t: GridToken) -> Pool {
        self.pools[(t.row * self.n + t.col) as usize]
    }

    pub fn cells_in(&self, pool: Pool) -> impl Iterator<Item = GridToken> + '_ {
        let n = self.n;
        self.pools
            .iter()
            .enumerate()
            .filter(move |(_, &p)| p == pool)
            .map(move |(i, _)| GridToken::new(i as u32 / n, i as u32 % n))
    }

    /// Cell counts in [`Pool::ALL`] order.
    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for &p in &self.pools {
            c[p as usize] += 1;
        }
        c
    }
}

/// Assigns each cell a pool from the band values at its centre, testing
/// HardDelete, Inside, Ring and Far in that order.
pub fn classify_cells(g: &GridGeometry, gt: &BinaryMask, bands: &BandSet) -> Result<RegionPools> {
    for m in [&bands.erosion, &bands.dilation, &bands.boundary] {
        gt.ensure_same_shape(m)?;
    }
    if gt.width() != g.width() as usize || gt.height() != g.height() as usize {
        return Err(Error::Misaligned(format!(
            "mask {}x{} on a {}x{} geometry",
            gt.width(),
            gt.height(),
            g.width(),
            g.height()
        )));
    }
    let pools = g
        .tokens()
        .map(|t| {
            let c = g.center_unchecked(t);
            let in_gt = point_in_mask(gt, c);
            if point_in_mask(&bands.boundary, c)
                && !in_gt
                && !g.probes(c).iter().any(|&p| point_in_mask(gt, p))
            {
                Pool::HardDelete
            } else if point_in_mask(&bands.erosion, c) {
                Pool::Inside
            } else if point_in_mask(&bands.dilation, c) && !in_gt {
                Pool::Ring
            } else {
                Pool::Far
            }
        })
        .collect();
    Ok(RegionPools { n: g.n(), pools })
}

/// Draws `K ~ U[k_min, k_max]` distinct cells, choosing a pool by weight
/// (renormalized over pools with cells left) and then a cell uniformly within it.
pub fn sample_grids<R: Rng + ?Sized>(
    pools: &RegionPools,
    cfg: &OffsetConfig,
    rng: &mut R,
) -> Vec<GridToken> {
    let mut remaining: Vec<Vec<GridToken>> =
        Pool::ALL.iter().map(|&p| pools.cells_in(p).collect()).collect();
    let total: usize = remaining.iter().map(Vec::len).sum();
    let k = rng.gen_range(cfg.k_min..=cfg.k_max).min(total);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let weights: Vec<f64> = Pool::ALL
            .iter()
            .zip(&remaining)
            .map(|(&p, cells)| if cells.is_empty() { 0.0 } else { cfg.weights.of(p) })
            .collect();
        let sum: f64 = weights.iter().sum();
        let pick = if sum > 0.0 {
            let mut u = rng.gen::<f64>() * sum;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // every nonempty pool has zero weight: fall back to uniform over cells
            let left: usize = remaining.iter().map(Vec::len).sum();
            let mut u = rng.gen_range(0..left);
            let mut pick = 0;
            for (i, cells) in remaining.iter().enumerate() {
                if u < cells.len() {
                    pick = i;
                    break;
                }
                u -= cells.len();
            }
            pick
        };
        let cells = &mut remaining[pick];
        let j = rng.gen_range(0..cells.len());
        out.push(cells.remove(j));
    }
    out
}

/// `Move(0,0)` for a centre inside `gt`, else the entering step of least
/// Manhattan length (ties by `dv`, then `du`), else `Delete`.
pub fn assign_point_offset(g: &GridGeometry, gt: &BinaryMask, cell: GridToken) -> Result<OffsetToken> {
    let c = g.grid_center(cell)?;
    if point_in_mask(gt, c) {
        return Ok(OffsetToken::STAY);
    }
    Ok(Delta::ALL
        .into_iter()
        .filter(|&d| point_in_mask(gt, g.probe(c, d)))
        .min_by_key(|d| (d.magnitude(), d.dv(), d.du()))
        .map_or(OffsetToken::Delete, OffsetToken::Move))
}

/// Corner offsets chosen for a proposed box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCornerLabel {
    pub tl: GridToken,
    pub br: GridToken,
    /// Offsets for the two corners, or two deletes.
    pub offsets: [OffsetToken; 2],
    /// Best IoU over all 81 offset pairs.
    pub iou_max: f64,
    /// The pair attaining `iou_max`, whether or not it was emitted.
    pub best: [Delta; 2],
}

/// Box spanned by the corner anchors of `tl` and `br` after moving them.
pub fn moved_box(g: &GridGeometry, tl: GridToken, br: GridToken, d: [Delta; 2]) -> Bbox {
    let a = g
        .apply_offset(g.cell_top_left(tl), OffsetToken::Move(d[0]))
        .expect("moves are never deleted");
    let b = g
        .apply_offset(g.cell_bottom_right(br), OffsetToken::Move(d[1]))
        .expect("moves are never deleted");
    Bbox::from_corners(a, b)
}

/// Scores all 81 corner-offset pairs against `target`.
///
/// Ties on IoU go to the smaller total offset length, then to the
/// lexicographically smaller `(tl.du, tl.dv, br.du, br.dv)`.
pub fn label_box_corners(
    g: &GridGeometry,
    target: &Bbox,
    tl: GridToken,
    br: GridToken,
    tau: f64,
) -> Result<BoxCornerLabel> {
    g.check(tl)?;
    g.check(br)?;
    let key = |d: &[Delta; 2]| (d[0].du(), d[0].dv(), d[1].du(), d[1].dv());
    let mut best: Option<([Delta; 2], f64)> = None;
    for a in Delta::ALL {
        for b in Delta::ALL {
            let pair = [a, b];
            let iou = box_iou(&moved_box(g, tl, br, pair), target);
            let better = match &best {
                None => true,
                Some((bp, bi)) => match iou.total_cmp(bi) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => {
                        let len = |p: &[Delta; 2]| p[0].magnitude() + p[1].magnitude();
                        (len(&pair), key(&pair)) < (len(bp), key(bp))
                    }
                },
            };
            if better {
                best = Some((pair, iou));
            }
        }
    }
    let (pair, iou_max) = best.expect("81 candidates");
    let offsets = if iou_max >= tau {
        [OffsetToken::Move(pair[0]), OffsetToken::Move(pair[1])]
    } else {
        [OffsetToken::Delete, OffsetToken::Delete]
    };
    Ok(BoxCornerLabel {
        tl,
        br,
        offsets,
        iou_max,
        best: pair,
    })
}

/// Snaps the tight box of `gt` to corner tokens, jitters each token
/// coordinate uniformly within `±jitter` cells and labels the result.
pub fn assign_box_corner_offsets<R: Rng + ?Sized>(
    g: &GridGeometry,
    gt: &BinaryMask,
    tau: f64,
    jitter: u32,
    rng: &mut R,
) -> Result<BoxCornerLabel> {
    let target = bbox_of_mask(gt)?;
    let (tl, br) = g.corner_tokens_for_box(&target)?;
    let last = (g.n() - 1) as i64;
    let j = jitter as i64;
    let mut shake = |v: u32| (v as i64 + rng.gen_range(-j..=j)).clamp(0, last) as u32;
    let tl = GridToken::new(shake(tl.row), shake(tl.col));
    let br = GridToken::new(shake(br.row), shake(br.col));
    label_box_corners(g, &target, tl, br, tau)
}
