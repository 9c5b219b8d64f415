//! Seeded synthetic referring corpus: masks made of a few separated shapes.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::BinaryMask;
use crate::vocab::GridGeometry;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub min_shapes: usize,
    pub max_shapes: usize,
    /// Smallest shape side, in grid cells.
    pub min_cells: f64,
    /// Largest shape side as a fraction of the image side.
    pub max_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            min_shapes: 3,
            max_shapes: 8,
            min_cells: 2.0,
            max_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub id: String,
    pub mask: BinaryMask,
    pub query: String,
}

#[derive(Clone, Copy)]
enum Shape {
    Rect,
    Ellipse,
    Ell,
}

const NOUNS: [&str; 6] = ["cups", "birds", "boxes", "tiles", "stones", "lamps"];
const COLORS: [&str; 5] = ["red", "blue", "green", "small", "dark"];

fn paint(m: &mut BinaryMask, shape: Shape, x0: usize, y0: usize, w: usize, h: usize) {
    let (cx, cy) = (x0 as f64 + w as f64 / 2.0, y0 as f64 + h as f64 / 2.0);
    let (rx, ry) = (w as f64 / 2.0, h as f64 / 2.0);
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            let on = match shape {
                Shape::Rect => true,
                Shape::Ellipse => {
                    let dx = (x as f64 + 0.5 - cx) / rx;
                    let dy = (y as f64 + 0.5 - cy) / ry;
                    dx * dx + dy * dy <= 1.0
                }
                // an L: left column and bottom row, each half the box thick
                Shape::Ell => x < x0 + w.div_ceil(2) || y >= y0 + h / 2,
            };
            if on {
                m.set(x, y, true);
            }
        }
    }
}

/// A mask of `min_shapes..=max_shapes` shapes placed with a one-cell gap
/// between bounding boxes where possible. Shapes that find no free spot
/// after a bounded number of tries are left out.
pub fn synth_mask<R: Rng + ?Sized>(cfg: &SynthConfig, g: &GridGeometry, rng: &mut R) -> Result<BinaryMask> {
    let (w, h) = (cfg.width, cfg.height);
    let mut m = BinaryMask::new(w, h)?;
    let gap_x = g.cell_width().ceil() as usize;
    let gap_y = g.cell_height().ceil() as usize;
    let min_w = ((cfg.min_cells * g.cell_width()).ceil() as usize).clamp(1, w);
    let min_h = ((cfg.min_cells * g.cell_height()).ceil() as usize).clamp(1, h);
    let max_w = ((w as f64 * cfg.max_fraction) as usize).max(min_w).min(w);
    let max_h = ((h as f64 * cfg.max_fraction) as usize).max(min_h).min(h);
    let count = rng.gen_range(cfg.min_shapes..=cfg.max_shapes);
    let mut placed: Vec<(usize, usize, usize, usize)> = Vec::new();
    for _ in 0..count {
        for _ in 0..64 {
            let sw = rng.gen_range(min_w..=max_w);
            let sh = rng.gen_range(min_h..=max_h);
            let x0 = rng.gen_range(0..=w - sw);
            let y0 = rng.gen_range(0..=h - sh);
            let clear = placed.iter().all(|&(px, py, pw, ph)| {
                x0 >= px + pw + gap_x || px >= x0 + sw + gap_x || y0 >= py + ph + gap_y || py >= y0 + sh + gap_y
            });
            if clear {
                let shape = *[Shape::Rect, Shape::Ellipse, Shape::Ell].choose(rng).expect("nonempty");
                paint(&mut m, shape, x0, y0, sw, sh);
                placed.push((x0, y0, sw, sh));
                break;
            }
        }
    }
    if m.is_empty() {
        m.fill_rect(0, 0, min_w, min_h);
    }
    Ok(m)
}

/// `count` items, deterministic in `seed`.
pub fn synth_corpus(count: usize, cfg: &SynthConfig, g: &GridGeometry, seed: u64) -> Result<Vec<SynthItem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mask = synth_mask(cfg, g, &mut rng)?;
            let query = format!(
                "all the {} {}",
                COLORS.choose(&mut rng).expect("nonempty"),
                NOUNS.choose(&mut rng).expect("nonempty")
            );
            Ok(SynthItem {
                id: format!("s{i:05}"),
                mask,
                query,
            })
        })
        .collect()
}
