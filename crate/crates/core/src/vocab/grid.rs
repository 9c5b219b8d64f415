use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bbox, Point2};

pub const DEFAULT_GRID: u32 = 32;
pub const DEFAULT_OFFSET_GRANULARITY: u32 = 64;

/// An `n x n` anchor grid laid over a `width x height` image, refined by a
/// finer offset lattice with `m` steps per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridGeometry {
    n: u32,
    m: u32,
    width: u32,
    height: u32,
}

/// Cell `(row, col)` of the anchor grid. `row` runs down the image (y),
/// `col` runs across it (x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridToken {
    pub row: u32,
    pub col: u32,
}

impl GridToken {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for GridToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<grid_{}_{}>", self.row, self.col)
    }
}

/// A unit displacement on the offset lattice: `du` moves along x, `dv` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Delta {
    du: i8,
    dv: i8,
}

impl Delta {
    pub const ZERO: Delta = Delta { du: 0, dv: 0 };

    /// The nine displacements in `{-1,0,1}²`, row-major over `(dv, du)`.
    pub const ALL: [Delta; 9] = [
        Delta { du: -1, dv: -1 },
        Delta { du: 0, dv: -1 },
        Delta { du: 1, dv: -1 },
        Delta { du: -1, dv: 0 },
        Delta { du: 0, dv: 0 },
        Delta { du: 1, dv: 0 },
        Delta { du: -1, dv: 1 },
        Delta { du: 0, dv: 1 },
        Delta { du: 1, dv: 1 },
    ];

    pub fn new(du: i8, dv: i8) -> Option<Delta> {
        ((-1..=1).contains(&du) && (-1..=1).contains(&dv)).then_some(Delta { du, dv })
    }

    pub fn du(self) -> i8 {
        self.du
    }

    pub fn dv(self) -> i8 {
        self.dv
    }

    /// `|du| + |dv|`.
    pub fn magnitude(self) -> u8 {
        self.du.unsigned_abs() + self.dv.unsigned_abs()
    }
}

/// One of the ten refinement tokens: nine lattice moves or a deletion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OffsetToken {
    Move(Delta),
    Delete,
}

impl OffsetToken {
    pub const STAY: OffsetToken = OffsetToken::Move(Delta::ZERO);

    pub fn all() -> impl Iterator<Item = OffsetToken> {
        Delta::ALL
            .into_iter()
            .map(OffsetToken::Move)
            .chain(std::iter::once(OffsetToken::Delete))
    }

    /// Convenience constructor; panics outside `{-1,0,1}`.
    pub fn moving(du: i8, dv: i8) -> OffsetToken {
        OffsetToken::Move(Delta::new(du, dv).expect("offset components must be in {-1,0,1}"))
    }

    pub fn is_delete(self) -> bool {
        matches!(self, OffsetToken::Delete)
    }
}

impl fmt::Display for OffsetToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OffsetToken::Move(d) => write!(f, "<OFF_{}_{}>", d.du, d.dv),
            OffsetToken::Delete => f.write_str("<DELETE>"),
        }
    }
}

impl Default for GridGeometry {
    fn default() -> Self {
        GridGeometry {
            n: DEFAULT_GRID,
            m: DEFAULT_OFFSET_GRANULARITY,
            width: 840,
            height: 840,
        }
    }
}

impl GridGeometry {
    pub fn new(n: u32, m: u32, width: u32, height: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGeometry(format!("grid size {n} < 2")));
        }
        if m < n {
            return Err(Error::InvalidGeometry(format!(
                "offset granularity {m} smaller than grid size {n}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidGeometry(format!(
                "image size {width}x{height} must be positive"
            )));
        }
        Ok(Self {
            n,
            m,
            width,
            height,
        })
    }

    /// Same grid and offset lattice over a different image size.
    pub fn with_image(&self, width: u32, height: u32) -> Result<Self> {
        Self::new(self.n, self.m, width, height)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        (self.n * self.n) as usize
    }

    /// Offset step along x, `width / m`.
    pub fn step_x(&self) -> f64 {
        self.width as f64 / self.m as f64
    }

    /// Offset step along y, `height / m`.
    pub fn step_y(&self) -> f64 {
        self.height as f64 / self.m as f64
    }

    pub fn cell_width(&self) -> f64 {
        self.width as f64 / self.n as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.height as f64 / self.n as f64
    }

    pub fn contains(&self, t: GridToken) -> bool {
        t.row < self.n && t.col < self.n
    }

    pub fn check(&self, t: GridToken) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::TokenOutOfRange {
                row: t.row,
                col: t.col,
                n: self.n,
            })
        }
    }

    /// Row-major flat index `row * n + col`.
    pub fn index(&self, t: GridToken) -> usize {
        (t.row * self.n + t.col) as usize
    }

    pub fn token_at(&self, index: usize) -> GridToken {
        let n = self.n as usize;
        GridToken::new((index / n) as u32, (index % n) as u32)
    }

    pub fn tokens(&self) -> impl Iterator<Item = GridToken> + '_ {
        (0..self.cell_count()).map(|i| self.token_at(i))
    }

    pub fn in_bounds(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width as f64 && p.y <= self.height as f64
    }

    /// Pixel centre of a cell.
    pub fn grid_center(&self, t: GridToken) -> Result<Point2> {
        self.check(t)?;
        Ok(self.center_unchecked(t))
    }

    pub(crate) fn center_unchecked(&self, t: GridToken) -> Point2 {
        Point2::new(
            (t.col as f64 + 0.5) * self.cell_width(),
            (t.row as f64 + 0.5) * self.cell_height(),
        )
    }

    /// Cell containing `p`; the right and bottom image edges belong to the last cell.
    pub fn nearest_grid(&self, p: Point2) -> Result<GridToken> {
        if !p.x.is_finite() || !p.y.is_finite() || !self.in_bounds(p) {
            return Err(Error::PointOutOfBounds {
                x: p.x,
                y: p.y,
                width: self.width,
                height: self.height,
            });
        }
        let last = (self.n - 1) as f64;
        let col = (p.x * self.n as f64 / self.width as f64).floor().min(last);
        let row = (p.y * self.n as f64 / self.height as f64).floor().min(last);
        Ok(GridToken::new(row as u32, col as u32))
    }

    /// Displaces `p` by one lattice step, clamped to the image. `None` means deleted.
    pub fn apply_offset(&self, p: Point2, o: OffsetToken) -> Option<Point2> {
        match o {
            OffsetToken::Delete => None,
            OffsetToken::Move(d) => {
                let q = self.probe(p, d);
                Some(Point2::new(
                    q.x.clamp(0.0, self.width as f64),
                    q.y.clamp(0.0, self.height as f64),
                ))
            }
        }
    }

    /// `p + S·δ` without clamping.
    pub fn probe(&self, p: Point2, d: Delta) -> Point2 {
        Point2::new(
            p.x + d.du as f64 * self.step_x(),
            p.y + d.dv as f64 * self.step_y(),
        )
    }

    /// The nine one-step probes around `p`, in [`Delta::ALL`] order.
    pub fn probes(&self, p: Point2) -> [Point2; 9] {
        Delta::ALL.map(|d| self.probe(p, d))
    }

    /// Top-left corner of a cell, the anchor a box's first corner token names.
    pub fn cell_top_left(&self, t: GridToken) -> Point2 {
        Point2::new(t.col as f64 * self.cell_width(), t.row as f64 * self.cell_height())
    }

    /// Bottom-right corner of a cell, the anchor a box's second corner token names.
    pub fn cell_bottom_right(&self, t: GridToken) -> Point2 {
        Point2::new(
            (t.col + 1) as f64 * self.cell_width(),
            (t.row + 1) as f64 * self.cell_height(),
        )
    }

    /// Box spanned by the top-left corner of `tl` and the bottom-right corner of `br`.
    pub fn box_from_corner_tokens(&self, tl: GridToken, br: GridToken) -> Result<Bbox> {
        self.check(tl)?;
        self.check(br)?;
        Ok(Bbox::from_corners(self.cell_top_left(tl), self.cell_bottom_right(br)))
    }

    /// Corner tokens for a pixel-corner box: the cells holding its first and
    /// last covered pixel.
    pub fn corner_tokens_for_box(&self, b: &Bbox) -> Result<(GridToken, GridToken)> {
        let clamped = b.clamp_to(self.width as f64, self.height as f64);
        let tl = self.nearest_grid(Point2::new(clamped.x_min, clamped.y_min))?;
        let last = Point2::new(
            (clamped.x_max - 1.0).max(clamped.x_min),
            (clamped.y_max - 1.0).max(clamped.y_min),
        );
        let br = self.nearest_grid(last)?;
        Ok((tl, br))
    }
}
