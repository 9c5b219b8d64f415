use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    assign_box_corner_offsets, assign_point_offset, classify_cells, compute_bands, sample_grids,
    OffsetConfig, Pool,
};
use crate::error::{Error, Result};
use crate::geometry::{bbox_of_mask, box_iou, Bbox, BinaryMask, Point2};
use crate::mask_io::MaskSource;
use crate::vocab::{
    parse_grid_token, parse_offset_token, Delta, GridGeometry, GridToken, Group, GroupKind,
    OffsetToken,
};

/// One input line of a referring dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub image: String,
    pub mask: MaskSource,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCornerRecord {
    pub tl: String,
    pub br: String,
    pub offsets: [String; 2],
    pub iou_max: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolCounts {
    pub inside: usize,
    pub ring: usize,
    pub far: usize,
    pub hard_delete: usize,
}

impl PoolCounts {
    pub fn total(&self) -> usize {
        self.inside + self.ring + self.far + self.hard_delete
    }
}

impl From<[usize; 4]> for PoolCounts {
    fn from(c: [usize; 4]) -> Self {
        Self {
            inside: c[0],
            ring: c[1],
            far: c[2],
            hard_delete: c[3],
        }
    }
}

/// One emitted training sample.
///
/// `pools` gives the pool of each sampled cell; `pool_counts` covers the
/// whole grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSample {
    pub image: String,
    pub query: String,
    pub width: u32,
    pub height: u32,
    pub grids: Vec<String>,
    pub offsets: Vec<String>,
    pub box_corners: BoxCornerRecord,
    pub pools: Vec<Pool>,
    pub pool_counts: PoolCounts,
    pub seed: u64,
    pub user: String,
    pub assistant: String,
}

/// Per-record seed, a splitmix64 mix of the master seed and the record index.
pub fn record_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The mask at working resolution and the geometry over it.
fn working_frame(gt: &BinaryMask, g: &GridGeometry, cfg: &OffsetConfig) -> Result<(BinaryMask, GridGeometry)> {
    match cfg.resize {
        Some(side) => {
            let m = gt.resize_nearest(side as usize, side as usize)?;
            Ok((m, g.with_image(side, side)?))
        }
        None => Ok((gt.clone(), g.with_image(gt.width() as u32, gt.height() as u32)?)),
    }
}

/// Labels one mask. `g` supplies the grid and offset sizes; the image size
/// comes from the mask after resizing.
pub fn label_mask(
    image: &str,
    query: &str,
    gt: &BinaryMask,
    g: &GridGeometry,
    cfg: &OffsetConfig,
    seed: u64,
) -> Result<OffsetSample> {
    cfg.validate()?;
    let (gt, g) = working_frame(gt, g, cfg)?;
    let bands = compute_bands(&gt, &g, cfg.band_width)?;
    let pools = classify_cells(&g, &gt, &bands)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = sample_grids(&pools, cfg, &mut rng);
    let offsets = cells
        .iter()
        .map(|&t| assign_point_offset(&g, &gt, t))
        .collect::<Result<Vec<_>>>()?;
    let corners = assign_box_corner_offsets(&g, &gt, cfg.tau, cfg.corner_jitter, &mut rng)?;

    let user = format!("{query}\n{}{}", Group::seg(cells.clone()), Group::bbox(corners.tl, corners.br));
    let seg = Group::new(GroupKind::Seg, Vec::new(), offsets.clone()).expect("offsets only");
    let bx = Group::new(GroupKind::Box, Vec::new(), corners.offsets.to_vec()).expect("two corners");
    Ok(OffsetSample {
        image: image.to_string(),
        query: query.to_string(),
        width: g.width(),
        height: g.height(),
        grids: cells.iter().map(ToString::to_string).collect(),
        offsets: offsets.iter().map(ToString::to_string).collect(),
        box_corners: BoxCornerRecord {
            tl: corners.tl.to_string(),
            br: corners.br.to_string(),
            offsets: corners.offsets.map(|o| o.to_string()),
            iou_max: corners.iou_max,
        },
        pools: cells.iter().map(|&t| pools.of(t)).collect(),
        pool_counts: pools.counts().into(),
        seed,
        user,
        assistant: format!("<offset>{seg}{bx}</offset>"),
    })
}

/// Loads and labels entry `index`. Empty masks yield `Ok(None)`.
pub fn build_sample(
    index: usize,
    entry: &DatasetEntry,
    base: Option<&Path>,
    g: &GridGeometry,
    cfg: &OffsetConfig,
    master_seed: u64,
) -> Result<Option<OffsetSample>> {
    let gt = entry.mask.load(base)?;
    if gt.is_empty() {
        return Ok(None);
    }
    label_mask(&entry.image, &entry.query, &gt, g, cfg, record_seed(master_seed, index as u64)).map(Some)
}

/// Running totals over emitted samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BuildStats {
    pub records: usize,
    pub skipped: usize,
    pub pools: PoolCounts,
    pub labels: BTreeMap<String, usize>,
}

impl BuildStats {
    pub fn add(&mut self, s: &OffsetSample) {
        self.records += 1;
        let c = &s.pool_counts;
        self.pools.inside += c.inside;
        self.pools.ring += c.ring;
        self.pools.far += c.far;
        self.pools.hard_delete += c.hard_delete;
        for o in s.offsets.iter().chain(&s.box_corners.offsets) {
            *self.labels.entry(o.clone()).or_default() += 1;
        }
    }
}

/// Sequential builder writing one JSON line per labelled entry.
///
/// Entries that fail to load or have empty masks are logged and skipped.
pub fn build_dataset<W: Write>(
    entries: &[DatasetEntry],
    base: Option<&Path>,
    g: &GridGeometry,
    cfg: &OffsetConfig,
    master_seed: u64,
    out: &mut W,
) -> Result<BuildStats> {
    let mut stats = BuildStats::default();
    for (i, e) in entries.iter().enumerate() {
        match build_sample(i, e, base, g, cfg, master_seed) {
            Ok(Some(s)) => {
                serde_json::to_writer(&mut *out, &s)?;
                out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
                stats.add(&s);
            }
            Ok(None) => {
                log::warn!("record {i} ({}): empty mask, skipped", e.image);
                stats.skipped += 1;
            }
            Err(err) => {
                log::warn!("record {i} ({}): {err}, skipped", e.image);
                stats.skipped += 1;
            }
        }
    }
    Ok(stats)
}

/// Re-simulates every label of `sample` against `gt` from first principles
/// and returns a description of each violation.
pub fn verify_sample(
    sample: &OffsetSample,
    gt: &BinaryMask,
    g: &GridGeometry,
    cfg: &OffsetConfig,
) -> Result<Vec<String>> {
    let (gt, g) = working_frame(gt, g, cfg)?;
    let mut bad = Vec::new();
    if (sample.width, sample.height) != (g.width(), g.height()) {
        bad.push(format!(
            "frame {}x{} but mask is {}x{}",
            sample.width,
            sample.height,
            g.width(),
            g.height()
        ));
        return Ok(bad);
    }
    if sample.grids.len() != sample.offsets.len() || sample.grids.len() != sample.pools.len() {
        bad.push(format!(
            "{} grids, {} offsets, {} pools",
            sample.grids.len(),
            sample.offsets.len(),
            sample.pools.len()
        ));
        return Ok(bad);
    }
    let (sx, sy) = (g.width() as f64 / g.m() as f64, g.height() as f64 / g.m() as f64);
    let (cw, ch) = (g.width() as f64 / g.n() as f64, g.height() as f64 / g.n() as f64);
    let inside = |x: f64, y: f64| {
        x >= 0.0 && y >= 0.0 && (x as usize) < gt.width() && (y as usize) < gt.height() && gt.get(x as usize, y as usize)
    };
    let parse_grid = |raw: &str| parse_grid_token(raw, &g).map_err(|e| Error::InvalidConfig(e.to_string()));
    let parse_off = |raw: &str| parse_offset_token(raw).map_err(|e| Error::InvalidConfig(e.to_string()));

    for ((raw_t, raw_o), pool) in sample.grids.iter().zip(&sample.offsets).zip(&sample.pools) {
        let t: GridToken = parse_grid(raw_t)?;
        let o = parse_off(raw_o)?;
        let (cx, cy) = ((t.col as f64 + 0.5) * cw, (t.row as f64 + 0.5) * ch);
        let probe = |d: Delta| (cx + d.du() as f64 * sx, cy + d.dv() as f64 * sy);
        match o {
            OffsetToken::Move(d) if d == Delta::ZERO => {
                if !inside(cx, cy) {
                    bad.push(format!("{raw_t}: stay label but centre ({cx}, {cy}) is outside"));
                }
            }
            OffsetToken::Move(d) => {
                let (px, py) = probe(d);
                if !inside(px, py) {
                    bad.push(format!("{raw_t}: {raw_o} lands outside at ({px}, {py})"));
                }
            }
            OffsetToken::Delete => {
                if let Some(d) = Delta::ALL.into_iter().find(|&d| {
                    let (px, py) = probe(d);
                    inside(px, py)
                }) {
                    bad.push(format!("{raw_t}: deleted but probe {d:?} hits the mask"));
                }
            }
        }
        match (pool, o) {
            (Pool::Inside, o) if o != OffsetToken::STAY => {
                bad.push(format!("{raw_t}: inside cell labelled {raw_o}"))
            }
            (Pool::HardDelete, o) if o != OffsetToken::Delete => {
                bad.push(format!("{raw_t}: hard-delete cell labelled {raw_o}"))
            }
            _ => {}
        }
    }

    let bc = &sample.box_corners;
    let tl = parse_grid(&bc.tl)?;
    let br = parse_grid(&bc.br)?;
    let target = bbox_of_mask(&gt)?;
    let corner_box = |a: Delta, b: Delta| {
        let clamp = |v: f64, hi: u32| v.clamp(0.0, hi as f64);
        let p = Point2::new(
            clamp(tl.col as f64 * cw + a.du() as f64 * sx, g.width()),
            clamp(tl.row as f64 * ch + a.dv() as f64 * sy, g.height()),
        );
        let q = Point2::new(
            clamp((br.col + 1) as f64 * cw + b.du() as f64 * sx, g.width()),
            clamp((br.row + 1) as f64 * ch + b.dv() as f64 * sy, g.height()),
        );
        Bbox::from_corners(p, q)
    };
    match (parse_off(&bc.offsets[0])?, parse_off(&bc.offsets[1])?) {
        (OffsetToken::Move(a), OffsetToken::Move(b)) => {
            let iou = box_iou(&corner_box(a, b), &target);
            if iou < cfg.tau {
                bad.push(format!("box corners reach IoU {iou} < {}", cfg.tau));
            }
        }
        (OffsetToken::Delete, OffsetToken::Delete) => {
            for a in Delta::ALL {
                for b in Delta::ALL {
                    let iou = box_iou(&corner_box(a, b), &target);
                    if iou >= cfg.tau {
                        bad.push(format!("box corners deleted but {a:?}/{b:?} reaches IoU {iou}"));
                    }
                }
            }
        }
        _ => bad.push("box corners mix a move and a delete".to_string()),
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask_io::Rle;

    fn geo() -> GridGeometry {
        GridGeometry::new(8, 16, 64, 64).unwrap()
    }

    fn small_cfg() -> OffsetConfig {
        OffsetConfig {
            resize: None,
            ..OffsetConfig::default()
        }
    }

    fn blob() -> BinaryMask {
        let mut m = BinaryMask::new(64, 64).unwrap();
        m.fill_rect(10, 12, 40, 36);
        m.fill_rect(44, 40, 60, 60);
        m
    }

    fn entry(m: &BinaryMask) -> DatasetEntry {
        DatasetEntry {
            image: "img.png".into(),
            mask: MaskSource::Rle(Rle::encode(m)),
            query: "the thing".into(),
        }
    }

    #[test]
    fn sample_shape_and_soundness() {
        let s = label_mask("a.png", "q", &blob(), &geo(), &small_cfg(), 17).unwrap();
        assert_eq!(s.grids.len(), s.offsets.len());
        assert_eq!(s.pool_counts.total(), 64);
        assert!(s.user.starts_with("q\n<seg><grid_"));
        assert!(s.assistant.starts_with("<offset><seg>") && s.assistant.ends_with("</box></offset>"));
        assert_eq!(verify_sample(&s, &blob(), &geo(), &small_cfg()).unwrap(), Vec::<String>::new());
    }

    #[test]
    fn verify_catches_tampering() {
        let mut s = label_mask("a.png", "q", &blob(), &geo(), &small_cfg(), 17).unwrap();
        let flip = |o: &str| if o == "<DELETE>" { "<OFF_0_0>".to_string() } else { "<DELETE>".to_string() };
        s.offsets[0] = flip(&s.offsets[0]);
        s.box_corners.offsets[1] = flip(&s.box_corners.offsets[1]);
        let v = verify_sample(&s, &blob(), &geo(), &small_cfg()).unwrap();
        assert!(v.len() >= 2, "{v:?}");
    }

    #[test]
    fn resize_to_default_frame() {
        let s = label_mask("a.png", "q", &blob(), &geo(), &OffsetConfig::default(), 3).unwrap();
        assert_eq!((s.width, s.height), (840, 840));
        assert!(verify_sample(&s, &blob(), &geo(), &OffsetConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn dataset_is_deterministic_and_skips_empty() {
        let entries = vec![entry(&blob()), entry(&BinaryMask::new(64, 64).unwrap()), entry(&blob())];
        let run = || {
            let mut out = Vec::new();
            let stats = build_dataset(&entries, None, &geo(), &small_cfg(), 99, &mut out).unwrap();
            (out, stats)
        };
        let (a, stats) = run();
        let (b, _) = run();
        assert_eq!(a, b);
        assert_eq!((stats.records, stats.skipped), (2, 1));
        assert_eq!(stats.pools.total(), 2 * 64);
        let lines: Vec<OffsetSample> = String::from_utf8(a)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        // same mask, different index: different seed
        assert_ne!(lines[0].seed, lines[1].seed);
        assert_eq!(lines[1].seed, record_seed(99, 2));

        let mut out = Vec::new();
        let stats = build_dataset(&[], None, &geo(), &small_cfg(), 99, &mut out).unwrap();
        assert!(out.is_empty());
        assert_eq!(stats.records, 0);
    }

    #[test]
    fn record_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| record_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(record_seed(7, 0), record_seed(8, 0));
    }
}
