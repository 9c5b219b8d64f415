//! Binary morphology with square structuring elements.
//!
//! Pixels outside the raster count as background for both erosion and
//! dilation. A square element is separable, so each operator runs as a row
//! pass followed by a column pass over sliding-window counts: cost is
//! independent of the element size.

use crate::error::{Error, Result};

use super::BinaryMask;

/// Odd-sided square structuring element, anchored at its centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StructuringElement {
    side: usize,
}

impl StructuringElement {
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 || side.is_multiple_of(2) {
            return Err(Error::EvenStructuringElement(side));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }
}

/// Window offsets `[-before, after]` covered by a side-`k` square.
///
/// Even sides put the extra cell before the anchor, the same anchor rule
/// OpenCV uses for `anchor = (-1, -1)`.
fn extent(side: usize) -> (usize, usize) {
    let before = side / 2;
    (before, side - 1 - before)
}

pub fn erode(m: &BinaryMask, k: StructuringElement) -> BinaryMask {
    erode_square(m, k.side())
}

pub fn dilate(m: &BinaryMask, k: StructuringElement) -> BinaryMask {
    dilate_square(m, k.side())
}

/// `dilate(m, k) AND NOT erode(m, k)`.
pub fn morph_gradient(m: &BinaryMask, k: StructuringElement) -> BinaryMask {
    let d = dilate(m, k);
    let e = erode(m, k);
    d.difference(&e).expect("same shape")
}

/// Erosion by a square of any positive side, including even sides.
///
/// A pixel survives iff every pixel of the window `[x-before, x+after]²`
/// exists and is set.
pub fn erode_square(m: &BinaryMask, side: usize) -> BinaryMask {
    assert!(side >= 1, "structuring element side must be positive");
    let (before, after) = extent(side);
    separable(m, |line| window_all(line, before, after))
}

/// Dilation by a square of any positive side: the reflection of the erosion
/// window, so opening and closing keep their usual containment properties.
pub fn dilate_square(m: &BinaryMask, side: usize) -> BinaryMask {
    assert!(side >= 1, "structuring element side must be positive");
    let (before, after) = extent(side);
    separable(m, |line| window_any(line, after, before))
}

fn separable(m: &BinaryMask, op: impl Fn(&[bool]) -> Vec<bool>) -> BinaryMask {
    let (w, h) = (m.width(), m.height());
    let bits = m.bits();

    let mut rows = vec![false; w * h];
    for y in 0..h {
        let out = op(&bits[y * w..(y + 1) * w]);
        rows[y * w..(y + 1) * w].copy_from_slice(&out);
    }

    let mut result = vec![false; w * h];
    let mut column = vec![false; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = rows[y * w + x];
        }
        for (y, v) in op(&column).into_iter().enumerate() {
            result[y * w + x] = v;
        }
    }
    BinaryMask::from_bits(w, h, result).expect("shape preserved")
}

fn prefix_counts(line: &[bool]) -> Vec<usize> {
    let mut prefix = Vec::with_capacity(line.len() + 1);
    prefix.push(0);
    let mut acc = 0;
    for &b in line {
        acc += b as usize;
        prefix.push(acc);
    }
    prefix
}

/// out[i] = every sample in [i-before, i+after] is inside the line and set.
fn window_all(line: &[bool], before: usize, after: usize) -> Vec<bool> {
    let n = line.len();
    let prefix = prefix_counts(line);
    (0..n)
        .map(|i| {
            if i < before || i + after >= n {
                return false;
            }
            prefix[i + after + 1] - prefix[i - before] == before + after + 1
        })
        .collect()
}

/// out[i] = some sample in [i-before, i+after] ∩ line is set.
fn window_any(line: &[bool], before: usize, after: usize) -> Vec<bool> {
    let n = line.len();
    let prefix = prefix_counts(line);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            prefix[hi] > prefix[lo]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn se(k: usize) -> StructuringElement {
        StructuringElement::new(k).unwrap()
    }

    /// Direct neighbourhood scan, independent of the separable path.
    fn naive(m: &BinaryMask, side: usize, erode: bool) -> BinaryMask {
        let (before, after) = extent(side);
        let (b, a) = (before as i64, after as i64);
        BinaryMask::from_fn(m.width(), m.height(), |x, y| {
            let (x, y) = (x as i64, y as i64);
            if erode {
                (-b..=a).all(|dy| (-b..=a).all(|dx| m.get_signed(x + dx, y + dy)))
            } else {
                (-b..=a).any(|dy| (-b..=a).any(|dx| m.get_signed(x - dx, y - dy)))
            }
        })
        .unwrap()
    }

    #[test]
    fn even_side_rejected() {
        assert!(matches!(
            StructuringElement::new(4),
            Err(Error::EvenStructuringElement(4))
        ));
        assert!(StructuringElement::new(0).is_err());
    }

    #[test]
    fn erode_full_clears_border() {
        let full = BinaryMask::full(6, 5).unwrap();
        let e = erode(&full, se(3));
        let expected = BinaryMask::from_fn(6, 5, |x, y| x > 0 && x < 5 && y > 0 && y < 4).unwrap();
        assert_eq!(e, expected);
    }

    #[test]
    fn dilate_empty_is_empty() {
        let empty = BinaryMask::new(7, 7).unwrap();
        for k in [1, 3, 5, 9] {
            assert!(dilate(&empty, se(k)).is_empty());
        }
    }

    #[test]
    fn gradient_of_square_is_its_ring() {
        // 5x5 solid square at [2,7) inside 9x9.
        let m = BinaryMask::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y)).unwrap();
        let g = morph_gradient(&m, se(3));
        // dilate covers [1,8)², erode keeps [3,6)²: ring = 49 - 9 = 40 pixels.
        let expected = BinaryMask::from_fn(9, 9, |x, y| {
            let outer = (1..8).contains(&x) && (1..8).contains(&y);
            let inner = (3..6).contains(&x) && (3..6).contains(&y);
            outer && !inner
        })
        .unwrap();
        assert_eq!(g.count(), 40);
        assert_eq!(g, expected);
    }

    #[test]
    fn even_erosion_window_is_offset_before_anchor() {
        // side 2 covers offsets {-1, 0}: a pixel survives iff it and its
        // upper/left neighbours are set.
        let m = BinaryMask::from_fn(4, 4, |x, y| x >= 1 && y >= 1).unwrap();
        let e = erode_square(&m, 2);
        let expected = BinaryMask::from_fn(4, 4, |x, y| x >= 2 && y >= 2).unwrap();
        assert_eq!(e, expected);
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..14, 1usize..14).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), w * h)
                .prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
        })
    }

    proptest! {
        #[test]
        fn separable_matches_naive(m in arb_mask(), side in 1usize..8) {
            prop_assert_eq!(erode_square(&m, side), naive(&m, side, true));
            prop_assert_eq!(dilate_square(&m, side), naive(&m, side, false));
        }

        #[test]
        fn erosion_dilation_sandwich(m in arb_mask(), half in 0usize..4) {
            let k = se(2 * half + 1);
            let e = erode(&m, k);
            let d = dilate(&m, k);
            prop_assert!(e.is_subset_of(&m));
            prop_assert!(m.is_subset_of(&d));
            // opening ⊆ m ⊆ closing
            prop_assert!(dilate(&e, k).is_subset_of(&m));
            // Closing only contains m away from the border: erosion treats
            // outside pixels as background, so a set pixel within half a
            // window of the edge may be dropped.
            let closed = erode(&d, k);
            let r = half;
            for (x, y) in m.iter_set() {
                if x >= r && y >= r && x + r < m.width() && y + r < m.height() {
                    prop_assert!(closed.get(x, y));
                }
            }
            prop_assert!(closing_padded_contains(&m, k.side()));
            prop_assert!(morph_gradient(&m, k).intersection_count(&e).unwrap() == 0);
        }
    }

    fn closing_padded_contains(m: &BinaryMask, side: usize) -> bool {
        let pad = side;
        let big = BinaryMask::from_fn(m.width() + 2 * pad, m.height() + 2 * pad, |x, y| {
            x >= pad && y >= pad && x - pad < m.width() && y - pad < m.height() && m.get(x - pad, y - pad)
        })
        .unwrap();
        let closed = erode_square(&dilate_square(&big, side), side);
        m.iter_set().all(|(x, y)| closed.get(x + pad, y + pad))
    }
}
