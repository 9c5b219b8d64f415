//! The grid/offset token vocabulary: lattice geometry, offset application and
//! the answer text format.

mod grid;
mod text;

pub use grid::{
    Delta, GridGeometry, GridToken, OffsetToken, DEFAULT_GRID, DEFAULT_OFFSET_GRANULARITY,
};
pub use text::{
    parse, parse_grid_token, parse_offset_token, serialize, Group, GroupKind, ParseError, ParseErrorKind, SpatialSequence};

use serde::Serialize;

/// Token budget of a grid/offset vocabulary and the precision it reaches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VocabStats {
    pub grid_count: usize,
    pub offset_count: usize,
    /// Distinct x positions reachable with one offset from any grid centre.
    pub effective_positions_x: usize,
    pub effective_positions_y: usize,
    /// Spacing of the reachable positions when they form a uniform lattice.
    pub lattice_spacing_x: Option<f64>,
    pub lattice_spacing_y: Option<f64>,
    /// Grid tokens a plain `m x m` grid would need beyond the `n x n` one.
    pub dense_grid_extra_tokens: usize,
}

/// Reachable coordinates along one axis, as integer numerators over `2·n·m`:
/// centre `(2j+1)/(2n)` plus `δ/m` of the axis length.
fn reachable_numerators(n: u32, m: u32) -> Vec<i64> {
    let (n, m) = (n as i64, m as i64);
    let mut nums: Vec<i64> = (0..n)
        .flat_map(|j| (-1..=1).map(move |d| (2 * j + 1) * m + 2 * d * n))
        .collect();
    nums.sort_unstable();
    nums.dedup();
    nums
}

/// Positions along an axis of length `extent` reachable by one offset from a centre.
pub fn reachable_positions(n: u32, m: u32, extent: u32) -> Vec<f64> {
    let denom = 2.0 * n as f64 * m as f64;
    reachable_numerators(n, m)
        .into_iter()
        .map(|k| k as f64 * extent as f64 / denom)
        .collect()
}

fn uniform_spacing(n: u32, m: u32, extent: u32) -> Option<f64> {
    let nums = reachable_numerators(n, m);
    let step = nums.get(1)? - nums[0];
    nums.windows(2)
        .all(|w| w[1] - w[0] == step)
        .then(|| step as f64 * extent as f64 / (2.0 * n as f64 * m as f64))
}

pub fn vocab_stats(g: &GridGeometry) -> VocabStats {
    let (n, m) = (g.n(), g.m());
    let positions = reachable_numerators(n, m).len();
    VocabStats {
        grid_count: g.cell_count(),
        offset_count: OffsetToken::all().count(),
        effective_positions_x: positions,
        effective_positions_y: positions,
        lattice_spacing_x: uniform_spacing(n, m, g.width()),
        lattice_spacing_y: uniform_spacing(n, m, g.height()),
        dense_grid_extra_tokens: (m * m - n * n) as usize,
    }
}
