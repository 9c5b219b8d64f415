use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BinaryMask;
use crate::vocab::{GridGeometry, GridToken, Group, SpatialSequence};

use super::ProposalSet;

pub const DEFAULT_TAU: f64 = 0.85;

/// Largest candidate count [`brute_force_select`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionConfig {
    /// Target IoU between the selected union and the ground truth.
    pub tau: f64,
    /// Stop accepting proposals once this many are selected.
    pub max_tokens: Option<usize>,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            max_tokens: None,
        }
    }
}

impl ConversionConfig {
    pub fn with_tau(tau: f64) -> Result<Self> {
        let cfg = Self {
            tau,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig(format!("tau {} outside (0, 1]", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionResult {
    /// Selected proposal indices, in acceptance order.
    pub selected: Vec<usize>,
    /// Representative cell (smallest θ-preimage) of each selected proposal.
    pub cells: Vec<usize>,
    pub iou_max: f64,
    pub satisfied: bool,
    /// IoU after each accepted proposal.
    pub trace: Vec<f64>,
}

impl ConversionResult {
    /// Binary selection vector over grid cells.
    pub fn pi(&self, cell_count: usize) -> Vec<bool> {
        let mut pi = vec![false; cell_count];
        for &c in &self.cells {
            pi[c] = true;
        }
        pi
    }

    pub fn tokens(&self, g: &GridGeometry) -> Vec<GridToken> {
        self.cells.iter().map(|&c| g.token_at(c)).collect()
    }

    /// `<seg>` group of the selected tokens.
    pub fn to_sequence(&self, g: &GridGeometry) -> SpatialSequence {
        SpatialSequence::new(vec![Group::seg(self.tokens(g))])
    }
}

/// Per-proposal overlap statistics against one ground truth.
struct Candidate {
    index: usize,
    cell: usize,
    area: usize,
    inter: usize,
    iou: f64,
}

fn candidates(gt: &BinaryMask, ps: &ProposalSet) -> Result<Vec<Candidate>> {
    if gt.is_empty() {
        return Err(Error::EmptyMask);
    }
    gt.ensure_same_shape(ps.proposal(0))?;
    let gt_area = gt.count();
    let reps = ps.representatives();
    Ok(ps
        .proposals()
        .iter()
        .enumerate()
        .filter_map(|(index, m)| {
            let cell = reps[index]?;
            let area = m.count();
            let inter = m.intersection_count(gt).expect("shape checked");
            let union = area + gt_area - inter;
            Some(Candidate {
                index,
                cell,
                area,
                inter,
                iou: inter as f64 / union as f64,
            })
        })
        .collect())
}

/// Greedy mask-to-token conversion.
///
/// Proposals reachable through θ are visited by decreasing IoU with `gt`
/// (larger area, then lower index, on ties). A proposal is accepted iff
/// adding it to the running union strictly raises the union's IoU.
/// The loop stops once the IoU reaches 1 or the remaining proposals miss
/// `gt` entirely; neither exit changes which proposals are accepted.
pub fn greedy_select(
    gt: &BinaryMask,
    ps: &ProposalSet,
    cfg: &ConversionConfig,
) -> Result<ConversionResult> {
    cfg.validate()?;
    let mut cands = candidates(gt, ps)?;
    cands.sort_by(|a, b| {
        b.iou
            .partial_cmp(&a.iou)
            .unwrap_or(Ordering::Equal)
            .then(b.area.cmp(&a.area))
            .then(a.index.cmp(&b.index))
    });

    let gt_bits = gt.bits();
    let mut union = vec![false; gt_bits.len()];
    // |union ∩ gt| and |union ∪ gt|
    let mut inter = 0usize;
    let mut outer = gt.count();
    let mut iou_max = 0.0;
    let mut result = ConversionResult {
        selected: Vec::new(),
        cells: Vec::new(),
        iou_max: 0.0,
        satisfied: false,
        trace: Vec::new(),
    };

    for c in &cands {
        if iou_max >= 1.0 || c.inter == 0 {
            break;
        }
        if cfg.max_tokens.is_some_and(|cap| result.selected.len() >= cap) {
            break;
        }
        let bits = ps.proposal(c.index).bits();
        let (mut gain_in, mut gain_out) = (0, 0);
        for ((&p, &u), &g) in bits.iter().zip(&union).zip(gt_bits) {
            if p && !u {
                if g {
                    gain_in += 1;
                } else {
                    gain_out += 1;
                }
            }
        }
        let candidate_iou = (inter + gain_in) as f64 / (outer + gain_out) as f64;
        if candidate_iou > iou_max {
            for (u, &p) in union.iter_mut().zip(bits) {
                *u |= p;
            }
            inter += gain_in;
            outer += gain_out;
            iou_max = candidate_iou;
            result.selected.push(c.index);
            result.cells.push(c.cell);
            result.trace.push(iou_max);
        }
    }

    result.iou_max = iou_max;
    result.satisfied = iou_max >= cfg.tau;
    Ok(result)
}

/// Exact minimum-cardinality selection by enumerating every subset of the
/// reachable proposals (at most [`BRUTE_FORCE_LIMIT`]).
///
/// Among subsets meeting `tau` the smallest wins, then the higher IoU, then
/// the lexicographically smaller sorted index list. If no subset meets `tau`
/// the highest-IoU subset is returned, preferring fewer proposals.
pub fn brute_force_select(
    gt: &BinaryMask,
    ps: &ProposalSet,
    cfg: &ConversionConfig,
) -> Result<ConversionResult> {
    cfg.validate()?;
    let cands = candidates(gt, ps)?;
    let k = cands.len();
    if k > BRUTE_FORCE_LIMIT {
        return Err(Error::TooManyProposals(k));
    }

    // Collapse pixels into (membership signature, in-gt) buckets.
    let mut buckets: HashMap<(u32, bool), usize> = HashMap::new();
    for (i, &g) in gt.bits().iter().enumerate() {
        let mut sig = 0u32;
        for (bit, c) in cands.iter().enumerate() {
            if ps.proposal(c.index).bits()[i] {
                sig |= 1 << bit;
            }
        }
        if sig != 0 || g {
            *buckets.entry((sig, g)).or_default() += 1;
        }
    }
    let buckets: Vec<(u32, bool, usize)> = buckets.into_iter().map(|((s, g), n)| (s, g, n)).collect();

    let subset_iou = |subset: u32| {
        let (mut inter, mut union) = (0usize, 0usize);
        for &(sig, g, n) in &buckets {
            let covered = sig & subset != 0;
            if covered && g {
                inter += n;
            }
            if covered || g {
                union += n;
            }
        }
        inter as f64 / union as f64
    };
    let members = |subset: u32| -> Vec<usize> {
        let mut v: Vec<usize> = (0..k)
            .filter(|b| subset & (1 << b) != 0)
            .map(|b| cands[b].index)
            .collect();
        v.sort_unstable();
        v
    };

    let cap = cfg.max_tokens.unwrap_or(usize::MAX);
    // (subset, size, iou, sorted members)
    let mut best_feasible: Option<(u32, u32, f64, Vec<usize>)> = None;
    let mut best_any: Option<(u32, u32, f64, Vec<usize>)> = None;
    for subset in 0u32..(1u32 << k) {
        let size = subset.count_ones();
        if size as usize > cap {
            continue;
        }
        let iou = subset_iou(subset);
        let ids = members(subset);
        if iou >= cfg.tau {
            let better = match &best_feasible {
                None => true,
                Some((_, s, i, m)) => (size, -iou, &ids) < (*s, -*i, m),
            };
            if better {
                best_feasible = Some((subset, size, iou, ids.clone()));
            }
        }
        let better = match &best_any {
            None => true,
            Some((_, s, i, m)) => (-iou, size, &ids) < (-*i, *s, m),
        };
        if better {
            best_any = Some((subset, size, iou, ids));
        }
    }

    let satisfied = best_feasible.is_some();
    let (_, _, iou, ids) = best_feasible.or(best_any).expect("at least the empty subset");
    let reps = ps.representatives();
    Ok(ConversionResult {
        cells: ids.iter().map(|&i| reps[i].expect("reachable")).collect(),
        selected: ids,
        iou_max: iou,
        satisfied,
        trace: Vec::new(),
    })
}
