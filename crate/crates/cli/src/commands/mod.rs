//! One module per subcommand. Each `run` reads JSONL, processes records in
//! parallel and writes results in input order.

pub mod build_offset;
pub mod decode;
pub mod encode;
pub mod score;
pub mod synth;

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail};
use getok_core::codec::{load_proposals, synth_proposals, ProposalSet};
use getok_core::geometry::BinaryMask;
use getok_core::offset::record_seed;
use getok_core::vocab::GridGeometry;

use crate::RunConfig;

/// Proposals for one record: a directory named by the record, or the
/// synthetic segmenter seeded by record index.
pub(crate) fn proposals_for(
    dir: Option<&Path>,
    base: &Path,
    synth: bool,
    gt: Option<&BinaryMask>,
    g: &GridGeometry,
    cfg: &RunConfig,
    index: usize,
) -> anyhow::Result<Option<ProposalSet>> {
    if let Some(dir) = dir {
        let ps = load_proposals(resolve(base, dir), g.n())?;
        if ps.width() != g.width() as usize || ps.height() != g.height() as usize {
            bail!(
                "proposals are {}x{} but the image is {}x{}",
                ps.width(),
                ps.height(),
                g.width(),
                g.height()
            );
        }
        return Ok(Some(ps));
    }
    if synth {
        let gt = gt.ok_or_else(|| anyhow!("--synth needs the record's mask"))?;
        return Ok(Some(synth_proposals(gt, g, record_seed(cfg.seed, index as u64))?));
    }
    Ok(None)
}

pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}
