use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{mask_iou, BinaryMask};
use crate::mask_io;
use crate::vocab::GridToken;

/// Proposals whose IoU exceeds this are merged by [`ProposalSet::deduplicated`].
pub const DEDUP_IOU: f64 = 0.95;

/// Candidate masks from a promptable segmenter prompted at every grid centre,
/// with `theta[cell]` naming the proposal produced by that cell's prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    n: u32,
    proposals: Vec<BinaryMask>,
    theta: Vec<usize>,
}

impl ProposalSet {
    pub fn new(n: u32, proposals: Vec<BinaryMask>, theta: Vec<usize>) -> Result<Self> {
        let cells = (n as usize) * (n as usize);
        if proposals.is_empty() {
            return Err(Error::InvalidProposals("no proposals".into()));
        }
        if theta.len() != cells {
            return Err(Error::InvalidProposals(format!(
                "mapping covers {} of {cells} grid cells",
                theta.len()
            )));
        }
        if let Some((cell, &k)) = theta.iter().enumerate().find(|(_, &k)| k >= proposals.len()) {
            return Err(Error::InvalidProposals(format!(
                "cell {cell} maps to proposal {k}, only {} exist",
                proposals.len()
            )));
        }
        let first = &proposals[0];
        for p in &proposals[1..] {
            first.ensure_same_shape(p)?;
        }
        Ok(Self {
            n,
            proposals,
            theta,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn width(&self) -> usize {
        self.proposals[0].width()
    }

    pub fn height(&self) -> usize {
        self.proposals[0].height()
    }

    pub fn proposals(&self) -> &[BinaryMask] {
        &self.proposals
    }

    pub fn proposal(&self, k: usize) -> &BinaryMask {
        &self.proposals[k]
    }

    pub fn theta(&self) -> &[usize] {
        &self.theta
    }

    /// Proposal prompted by cell `index` (row-major).
    pub fn proposal_for_cell(&self, index: usize) -> usize {
        self.theta[index]
    }

    pub fn proposal_for(&self, t: GridToken) -> Result<usize> {
        if t.row >= self.n || t.col >= self.n {
            return Err(Error::TokenOutOfRange {
                row: t.row,
                col: t.col,
                n: self.n,
            });
        }
        Ok(self.theta[(t.row * self.n + t.col) as usize])
    }

    /// Smallest cell index mapping to each proposal, `None` if unreachable.
    pub fn representatives(&self) -> Vec<Option<usize>> {
        let mut reps = vec![None; self.proposals.len()];
        for (cell, &k) in self.theta.iter().enumerate() {
            reps[k].get_or_insert(cell);
        }
        reps
    }

    /// Merges near-duplicates and drops proposals no cell maps to.
    ///
    /// Proposals are visited by decreasing area (lower index first on ties);
    /// each one either joins the first kept proposal it overlaps with IoU
    /// above `threshold` or is kept itself. Kept proposals retain their
    /// original relative order.
    pub fn deduplicated(&self, threshold: f64) -> ProposalSet {
        let reps = self.representatives();
        let mut order: Vec<usize> = (0..self.len()).filter(|&k| reps[k].is_some()).collect();
        let areas: Vec<usize> = self.proposals.iter().map(BinaryMask::count).collect();
        order.sort_by(|&a, &b| areas[b].cmp(&areas[a]).then(a.cmp(&b)));

        let mut kept: Vec<usize> = Vec::new();
        let mut redirect = vec![usize::MAX; self.len()];
        for &k in &order {
            let survivor = kept.iter().copied().find(|&s| {
                mask_iou(&self.proposals[s], &self.proposals[k]).expect("shapes checked") > threshold
            });
            match survivor {
                Some(s) => redirect[k] = s,
                None => {
                    kept.push(k);
                    redirect[k] = k;
                }
            }
        }

        kept.sort_unstable();
        let mut new_index = vec![usize::MAX; self.len()];
        for (i, &k) in kept.iter().enumerate() {
            new_index[k] = i;
        }
        ProposalSet {
            n: self.n,
            proposals: kept.iter().map(|&k| self.proposals[k].clone()).collect(),
            theta: self.theta.iter().map(|&k| new_index[redirect[k]]).collect(),
        }
    }

    /// Writes `proposals/{k}.png` and `theta.json` under `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let pdir = dir.join("proposals");
        std::fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;
        for (k, m) in self.proposals.iter().enumerate() {
            mask_io::write_png(m, pdir.join(format!("{k}.png")))?;
        }
        let n = self.n;
        let map: BTreeMap<String, usize> = self
            .theta
            .iter()
            .enumerate()
            .map(|(i, &k)| (format!("{}_{}", i as u32 / n, i as u32 % n), k))
            .collect();
        let path = dir.join("theta.json");
        std::fs::write(&path, serde_json::to_string_pretty(&map)?).map_err(|e| Error::io(&path, e))
    }
}

/// Reads a proposal directory (`proposals/{k}.png` for consecutive `k` from 0,
/// plus `theta.json` mapping `"i_j"` cell keys to proposal indices) and
/// deduplicates it.
pub fn load_proposals(dir: impl AsRef<Path>, n: u32) -> Result<ProposalSet> {
    let dir = dir.as_ref();
    let theta_path = dir.join("theta.json");
    let text = std::fs::read_to_string(&theta_path).map_err(|e| Error::io(&theta_path, e))?;
    let map: BTreeMap<String, usize> = serde_json::from_str(&text)?;

    let cells = (n as usize) * (n as usize);
    let mut theta = vec![None; cells];
    for (key, &k) in &map {
        let (r, c) = key
            .split_once('_')
            .and_then(|(r, c)| Some((r.parse::<u32>().ok()?, c.parse::<u32>().ok()?)))
            .ok_or_else(|| Error::InvalidProposals(format!("bad cell key `{key}`")))?;
        if r >= n || c >= n {
            return Err(Error::InvalidProposals(format!(
                "cell key `{key}` outside a {n}x{n} grid"
            )));
        }
        theta[(r * n + c) as usize] = Some(k);
    }
    let theta: Vec<usize> = theta
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            k.ok_or_else(|| {
                Error::InvalidProposals(format!(
                    "missing mapping entry for cell {}_{}",
                    i as u32 / n,
                    i as u32 % n
                ))
            })
        })
        .collect::<Result<_>>()?;

    let mut proposals = Vec::new();
    loop {
        let path = dir.join("proposals").join(format!("{}.png", proposals.len()));
        if !path.exists() {
            break;
        }
        proposals.push(mask_io::read_png(&path)?);
    }
    Ok(ProposalSet::new(n, proposals, theta)?.deduplicated(DEDUP_IOU))
}
