use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::BinaryMask;

/// A continuous point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box in continuous pixel coordinates.
///
/// A pixel `(x, y)` covers `[x, x+1) x [y, y+1)`, so the box of a mask uses
/// exclusive maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Bbox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite box {b:?}")));
        }
        if x_min > x_max || y_min > y_max {
            return Err(Error::InvalidConfig(format!("inverted box {b:?}")));
        }
        Ok(b)
    }

    /// Box spanned by two arbitrary corner points.
    pub fn from_corners(a: Point2, b: Point2) -> Self {
        Self {
            x_min: a.x.min(b.x),
            y_min: a.y.min(b.y),
            x_max: a.x.max(b.x),
            y_max: a.y.max(b.y),
        }
    }

    pub fn width(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y_max - self.y_min).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn clamp_to(&self, width: f64, height: f64) -> Bbox {
        Bbox {
            x_min: self.x_min.clamp(0.0, width),
            y_min: self.y_min.clamp(0.0, height),
            x_max: self.x_max.clamp(0.0, width),
            y_max: self.y_max.clamp(0.0, height),
        }
    }

    /// Sum of absolute coordinate differences over the four box coordinates.
    pub fn l1_distance(&self, other: &Bbox) -> f64 {
        (self.x_min - other.x_min).abs()
            + (self.y_min - other.y_min).abs()
            + (self.x_max - other.x_max).abs()
            + (self.y_max - other.y_max).abs()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

/// Rectangle IoU. When the union has zero area the result is 1.0 for
/// identical boxes and 0.0 otherwise.
pub fn box_iou(a: &Bbox, b: &Bbox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Tight box over the set pixels of `m`.
pub fn bbox_of_mask(m: &BinaryMask) -> Result<Bbox> {
    let mut x_min = usize::MAX;
    let mut y_min = usize::MAX;
    let mut x_max = 0;
    let mut y_max = 0;
    let mut any = false;
    for (x, y) in m.iter_set() {
        any = true;
        x_min = x_min.min(x);
        y_min = y_min.min(y);
        x_max = x_max.max(x);
        y_max = y_max.max(y);
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    Ok(Bbox {
        x_min: x_min as f64,
        y_min: y_min as f64,
        x_max: (x_max + 1) as f64,
        y_max: (y_max + 1) as f64,
    })
}
