//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any fails.
//!
//! Expected values come from oracles written here (bitset exhaustive search,
//! naive raster morphology, permutation search, inline probe arithmetic),
//! not from the library under test.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use getok_core::codec::{greedy_select, synth_proposals, ConversionConfig, ProposalSet};
use getok_core::geometry::{Bbox, BinaryMask, Point2};
use getok_core::offset::{classify_cells, compute_bands, record_seed, Pool};
use getok_core::reward::{
    assignment_cost, hungarian, l1_box_score, mask_iou_gain_reward, point_refine_score,
    point_set_quality, RewardWeights,
};
use getok_core::synth::{synth_corpus, SynthConfig};
use getok_core::vocab::{
    parse, reachable_positions, serialize, vocab_stats, Delta, GridGeometry, GridToken, Group,
    GroupKind, OffsetToken, SpatialSequence,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    } else {
        Ok(took)
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_getok")
}

fn run_bin(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "getok {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Random blobs, rectangles, thin lines and speckles.
fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryMask {
    let mut m = BinaryMask::new(w, h).unwrap();
    for _ in 0..rng.gen_range(1..=4) {
        let (cx, cy) = (rng.gen_range(0..w) as f64, rng.gen_range(0..h) as f64);
        let (rx, ry) = (rng.gen_range(2.0..w as f64 / 3.0), rng.gen_range(2.0..h as f64 / 3.0));
        match rng.gen_range(0..3) {
            0 => {
                let x0 = (cx - rx).max(0.0) as usize;
                let y0 = (cy - ry).max(0.0) as usize;
                m.fill_rect(x0, y0, ((cx + rx) as usize).min(w), ((cy + ry) as usize).min(h));
            }
            1 => {
                for y in 0..h {
                    for x in 0..w {
                        let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
                        if dx * dx + dy * dy <= 1.0 {
                            m.set(x, y, true);
                        }
                    }
                }
            }
            _ => {
                let y = cy as usize;
                let x0 = (cx - rx).max(0.0) as usize;
                m.fill_rect(x0, y, ((cx + rx) as usize).min(w), (y + 1).min(h));
            }
        }
    }
    for _ in 0..rng.gen_range(0..12) {
        m.set(rng.gen_range(0..w), rng.gen_range(0..h), true);
    }
    if m.is_empty() {
        m.set(w / 2, h / 2, true);
    }
    m
}

// 1 -------------------------------------------------------------------------

fn vocabulary_economy() -> Outcome {
    let start = Instant::now();
    let g = GridGeometry::new(32, 64, 840, 840).unwrap();
    let s = vocab_stats(&g);
    ensure!(s.grid_count == 1024, "grid tokens {}", s.grid_count);
    ensure!(s.offset_count == 10, "offset tokens {}", s.offset_count);
    ensure!(s.dense_grid_extra_tokens == 64 * 64 - 32 * 32, "extra {}", s.dense_grid_extra_tokens);

    // centre (j + 1/2)·840/32 plus δ·840/64 is 13.125·(2j + 1 + δ): every k·13.125, k = 0..=64
    let spacing = 840.0 / 64.0;
    let lattice: Vec<f64> = (0..=64).map(|k| k as f64 * spacing).collect();
    let mut seen: Vec<f64> = g
        .tokens()
        .flat_map(|t| g.probes(g.grid_center(t).unwrap()))
        .flat_map(|q| [q.x, q.y])
        .collect();
    seen.sort_by(f64::total_cmp);
    seen.dedup();
    ensure!(seen == lattice, "probe coordinates are not the 13.125 lattice ({} values)", seen.len());
    ensure!(reachable_positions(32, 64, 840) == lattice, "reachable_positions disagrees");
    ensure!(
        s.lattice_spacing_x == Some(spacing) && s.lattice_spacing_y == Some(spacing),
        "spacing {:?}/{:?}",
        s.lattice_spacing_x,
        s.lattice_spacing_y
    );
    ensure!(s.effective_positions_x == 65, "positions {}", s.effective_positions_x);
    let took = within(Duration::from_secs(1), start)?;
    Ok(format!("1024 grid + 10 offset tokens, 65-point lattice at 13.125 px, {took:.2?}"))
}

// 2 -------------------------------------------------------------------------

type Bits = [u64; 4];

fn to_bits(m: &BinaryMask) -> Bits {
    let mut b = [0u64; 4];
    for (i, &v) in m.bits().iter().enumerate() {
        if v {
            b[i / 64] |= 1 << (i % 64);
        }
    }
    b
}

fn bits_iou(a: &Bits, gt: &Bits) -> f64 {
    let inter: u32 = (0..4).map(|i| (a[i] & gt[i]).count_ones()).sum();
    let union: u32 = (0..4).map(|i| (a[i] | gt[i]).count_ones()).sum();
    inter as f64 / union as f64
}

fn greedy_vs_exhaustive() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = ConversionConfig::default();
    let (mut feasible, mut greedy_ok) = (0, 0);
    for inst in 0..500 {
        let k = rng.gen_range(1..=10);
        let props: Vec<BinaryMask> = (0..k)
            .map(|_| {
                let mut m = BinaryMask::new(16, 16).unwrap();
                let (w, h) = (rng.gen_range(2..=8), rng.gen_range(2..=8));
                let (x, y) = (rng.gen_range(0..=16 - w), rng.gen_range(0..=16 - h));
                m.fill_rect(x, y, x + w, y + h);
                m
            })
            .collect();
        let mut gt = BinaryMask::new(16, 16).unwrap();
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        for &i in &order[..rng.gen_range(1..=k.min(3))] {
            gt.union_in_place(&props[i]).unwrap();
        }
        let flip = [0.0, 0.02, 0.05, 0.1][rng.gen_range(0..4)];
        for y in 0..16 {
            for x in 0..16 {
                if rng.gen_bool(flip) {
                    gt.set(x, y, !gt.get(x, y));
                }
            }
        }
        if gt.is_empty() {
            gt.set(8, 8, true);
        }
        let theta: Vec<usize> = (0..16).map(|c| if c < k { c } else { rng.gen_range(0..k) }).collect();
        let ps = ProposalSet::new(4, props.clone(), theta).unwrap();

        let r = greedy_select(&gt, &ps, &cfg).map_err(|e| format!("instance {inst}: {e}"))?;
        ensure!(
            r.trace.windows(2).all(|w| w[1] > w[0]),
            "instance {inst}: trace not increasing {:?}",
            r.trace
        );

        let gtb = to_bits(&gt);
        let pb: Vec<Bits> = props.iter().map(to_bits).collect();
        let mut chosen = [0u64; 4];
        for &i in &r.selected {
            for w in 0..4 {
                chosen[w] |= pb[i][w];
            }
        }
        let actual = if r.selected.is_empty() { 0.0 } else { bits_iou(&chosen, &gtb) };
        ensure!(
            (actual - r.iou_max).abs() < 1e-12,
            "instance {inst}: reported {} but the union scores {actual}",
            r.iou_max
        );

        let mut best = 0.0f64;
        for subset in 1u32..(1 << k) {
            let mut u = [0u64; 4];
            for (i, b) in pb.iter().enumerate() {
                if subset & (1 << i) != 0 {
                    for w in 0..4 {
                        u[w] |= b[w];
                    }
                }
            }
            best = best.max(bits_iou(&u, &gtb));
        }
        ensure!(r.iou_max <= best + 1e-12, "instance {inst}: greedy {} above exhaustive {best}", r.iou_max);
        if best >= cfg.tau {
            feasible += 1;
            if r.satisfied {
                greedy_ok += 1;
            }
        }
    }
    let took = within(Duration::from_secs(10), start)?;
    let rate = greedy_ok as f64 / feasible.max(1) as f64;
    ensure!(rate >= 0.95, "greedy met tau on {greedy_ok}/{feasible} feasible instances");
    Ok(format!(
        "500 instances, greedy met tau on {greedy_ok}/{feasible} feasible ({:.1}%), {took:.2?}",
        rate * 100.0
    ))
}

// 3 -------------------------------------------------------------------------

/// Square window `[x-before, x+after]` per axis; outside pixels are background.
fn naive_window(m: &BinaryMask, before: i64, after: i64, all: bool) -> BinaryMask {
    BinaryMask::from_fn(m.width(), m.height(), |x, y| {
        let mut any = false;
        let mut every = true;
        for dy in -before..=after {
            for dx in -before..=after {
                let v = m.get_signed(x as i64 + dx, y as i64 + dy);
                any |= v;
                every &= v;
            }
        }
        if all {
            every
        } else {
            any
        }
    })
    .unwrap()
}

fn morphology_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    let mut sides = std::collections::BTreeSet::new();
    for i in 0..100 {
        let side = if i < 5 { 840 } else { rng.gen_range(64..=400) };
        let (w, h) = (side, side);
        let g = GridGeometry::new(32, 64, w as u32, h as u32).unwrap();
        let m = random_mask(&mut rng, w, h);
        let b = compute_bands(&m, &g, 3).unwrap();
        let (k_e, k_d) = (h / 64 + 1, 2 * (h / 64) + 1);
        ensure!((b.k_e, b.k_d) == (k_e, k_d), "mask {i}: kernels {:?} for height {h}", (b.k_e, b.k_d));
        sides.insert(k_e);
        if !b.erosion.is_subset_of(&m) || !m.is_subset_of(&b.dilation) {
            violations += 1;
        }
        if i % 10 == 0 && side <= 160 {
            let (eb, ea) = ((k_e / 2) as i64, (k_e - 1 - k_e / 2) as i64);
            ensure!(b.erosion == naive_window(&m, eb, ea, true), "mask {i}: erosion differs from raster oracle");
            let r = (k_d / 2) as i64;
            ensure!(b.dilation == naive_window(&m, r, r, false), "mask {i}: dilation differs from raster oracle");
        }
    }
    ensure!(violations == 0, "{violations} masks break E <= M <= D");
    Ok(format!("100 masks, k_e in {sides:?}, 0 violations"))
}

// 4 -------------------------------------------------------------------------

fn pool_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut hard = 0;
    for i in 0..100 {
        let side = [128, 256, 320, 840][i % 4];
        let g = GridGeometry::new(32, 64, side as u32, side as u32).unwrap();
        let m = random_mask(&mut rng, side, side);
        let bands = compute_bands(&m, &g, 3).unwrap();
        let pools = classify_cells(&g, &m, &bands).unwrap();
        ensure!(pools.pools().len() == 1024, "mask {i}: {} labels", pools.pools().len());
        ensure!(pools.counts().iter().sum::<usize>() == 1024, "mask {i}: counts {:?}", pools.counts());
        let (cw, s) = (side as f64 / 32.0, side as f64 / 64.0);
        let at = |mask: &BinaryMask, x: f64, y: f64| mask.get_signed(x.floor() as i64, y.floor() as i64);
        for row in 0..32u32 {
            for col in 0..32u32 {
                let (cx, cy) = ((col as f64 + 0.5) * cw, (row as f64 + 0.5) * cw);
                let hit = (-1..=1).any(|dv| (-1..=1).any(|du| at(&m, cx + du as f64 * s, cy + dv as f64 * s)));
                let in_gt = at(&m, cx, cy);
                let expect = if at(&bands.boundary, cx, cy) && !in_gt && !hit {
                    Pool::HardDelete
                } else if at(&bands.erosion, cx, cy) {
                    Pool::Inside
                } else if at(&bands.dilation, cx, cy) && !in_gt {
                    Pool::Ring
                } else {
                    Pool::Far
                };
                let got = pools.of(GridToken::new(row, col));
                ensure!(got == expect, "mask {i} cell ({row},{col}): {got:?}, rule gives {expect:?}");
                if got == Pool::HardDelete {
                    ensure!(!hit, "mask {i} cell ({row},{col}): hard-delete cell passes the hit test");
                    hard += 1;
                }
            }
        }
    }
    ensure!(hard > 0, "no hard-delete cells drawn, soundness check is vacuous");
    Ok(format!("100 masks x 1024 cells, {hard} hard-delete cells, 0 violations"))
}

// 5 -------------------------------------------------------------------------

fn offset_label_soundness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    run_bin(&["synth", "--count", "200", "--seed", "5", "--out-dir", p(d)])?;
    let summary = d.join("summary.json");
    run_bin(&[
        "build-offset",
        "--verify",
        "--seed",
        "5",
        "--input",
        p(&d.join("dataset.jsonl")),
        "--output",
        p(&d.join("offset.jsonl")),
        "--summary",
        p(&summary),
    ])?;
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(s["verified"] == true, "summary not verified: {s}");
    ensure!(s["records"] == 200, "records {}", s["records"]);
    ensure!(s["violations"] == 0, "violations {}", s["violations"]);
    let labels = s["labels"].as_object().map_or(0, |m| m.len());
    Ok(format!("200 samples verified, 0 violations, {labels} distinct labels"))
}

// 6 -------------------------------------------------------------------------

/// Minimum over injective row→column (or column→row) maps, summed in row order.
fn brute_min(cost: &[Vec<f64>]) -> f64 {
    let (p, g) = (cost.len(), cost.first().map_or(0, Vec::len));
    if p == 0 || g == 0 {
        return 0.0;
    }
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, pairs: &mut Vec<(usize, usize)>, best: &mut f64, need: usize) {
        if pairs.len() == need || row == cost.len() {
            if pairs.len() == need {
                let s = pairs.iter().fold(0.0, |a, &(i, j)| a + cost[i][j]);
                *best = best.min(s);
            }
            return;
        }
        // leaving rows unmatched only helps when rows outnumber columns
        if cost.len() - row > need - pairs.len() {
            go(cost, row + 1, used, pairs, best, need);
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                pairs.push((row, j));
                go(cost, row + 1, used, pairs, best, need);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; g], &mut Vec::new(), &mut best, p.min(g));
    best
}

fn hungarian_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for inst in 0..200 {
        let (p, g) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let dyadic = inst % 2 == 0;
        let cost: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                (0..g)
                    .map(|_| if dyadic { rng.gen_range(0..12) as f64 / 4.0 } else { rng.gen_range(0.0..3.0) })
                    .collect()
            })
            .collect();
        let pairs = hungarian(&cost);
        ensure!(pairs.len() == p.min(g), "instance {inst}: {} pairs for {p}x{g}", pairs.len());
        let got = assignment_cost(&cost, &pairs);
        let want = brute_min(&cost);
        ensure!(got == want, "instance {inst} ({p}x{g}): hungarian {got}, brute force {want}");
    }
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!("200 instances, exact cost equality, {took:.2?}"))
}

// 7 -------------------------------------------------------------------------

fn reward_spot_checks() -> Outcome {
    let w = RewardWeights::default();
    let gt = Bbox::new(20.0, 30.0, 120.0, 90.0).unwrap();
    let shifted = Bbox::new(29.0, 21.0, 111.0, 99.0).unwrap();
    let s = l1_box_score(&shifted, &gt, &w);
    ensure!(s == 0.5, "S_l1 at mean 9 px = {s}");

    let f = point_set_quality(5.0, 1.0, 1.0, &w);
    let expect = (1.0 - (-1.0f64).exp()) - 0.1;
    ensure!((f - expect).abs() < 1e-9, "F(5,1,1) = {f}, expected {expect}");

    let gain = mask_iou_gain_reward(0.5, 0.75, w.eps);
    ensure!(gain == 0.5, "gain(0.5 -> 0.75) = {gain}");

    // 8x8 image, 4x4 grid, one-pixel steps: every cell x every offset over many masks
    let g = GridGeometry::new(4, 8, 8, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut masks: Vec<BinaryMask> = Vec::new();
    for i in 0..64 {
        let single = BinaryMask::from_fn(8, 8, |x, y| y * 8 + x == i).unwrap();
        masks.push(BinaryMask::from_fn(8, 8, |x, y| !single.get(x, y)).unwrap());
        masks.push(single);
    }
    for _ in 0..200 {
        let density = rng.gen_range(0.05..0.6);
        let bits = (0..64).map(|_| rng.gen_bool(density)).collect();
        masks.push(BinaryMask::from_bits(8, 8, bits).unwrap());
    }
    let offsets: Vec<OffsetToken> = Delta::ALL.into_iter().map(OffsetToken::Move).chain([OffsetToken::Delete]).collect();
    // leave, stay-or-enter, valid delete, otherwise
    let mut branches = [0usize; 4];
    let mut cases = 0;
    for m in &masks {
        let at = |x: f64, y: f64| x >= 0.0 && y >= 0.0 && x < 8.0 && y < 8.0 && m.get(x as usize, y as usize);
        for t in g.tokens() {
            let (cx, cy) = (t.col as f64 * 2.0 + 1.0, t.row as f64 * 2.0 + 1.0);
            for &o in &offsets {
                let refined = match o {
                    OffsetToken::Move(d) => Some(((cx + d.du() as f64).clamp(0.0, 8.0), (cy + d.dv() as f64).clamp(0.0, 8.0))),
                    OffsetToken::Delete => None,
                };
                let was = at(cx, cy);
                let now = refined.is_some_and(|(x, y)| at(x, y));
                let all_miss = (-1..=1).all(|dv| (-1..=1).all(|du| !at(cx + du as f64, cy + dv as f64)));
                let (want, branch) = if was && !now {
                    (-1, 0)
                } else if now {
                    (1, 1)
                } else if refined.is_none() && all_miss {
                    (1, 2)
                } else {
                    (0, 3)
                };
                let got = point_refine_score(m, Point2::new(cx, cy), refined.map(|(x, y)| Point2::new(x, y)), &g);
                ensure!([-1, 0, 1].contains(&got), "score {got} outside the ternary set");
                ensure!(got == want, "cell {t:?} offset {o:?}: score {got}, oracle {want}");
                branches[branch] += 1;
                cases += 1;
            }
        }
    }
    ensure!(branches.iter().all(|&b| b > 0), "branches not all hit: {branches:?}");
    Ok(format!(
        "S_l1(9)=0.5, F(5,1,1) within 1e-9, gain=0.5, {cases} point cases with branch counts {branches:?}"
    ))
}

// 8 -------------------------------------------------------------------------

fn random_sequence(rng: &mut ChaCha8Rng, n: u32) -> SpatialSequence {
    let tok = |rng: &mut ChaCha8Rng| GridToken::new(rng.gen_range(0..n), rng.gen_range(0..n));
    let off = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.1) {
            OffsetToken::Delete
        } else {
            OffsetToken::Move(Delta::ALL[rng.gen_range(0..9)])
        }
    };
    let groups = (0..rng.gen_range(0..5))
        .map(|_| {
            let kind = GroupKind::ALL[rng.gen_range(0..4)];
            let count = match kind {
                GroupKind::Box => 2,
                GroupKind::Point => 1,
                _ => rng.gen_range(0..7),
            };
            let (grids, offs) = match rng.gen_range(0..3) {
                0 => ((0..count).map(|_| tok(rng)).collect(), Vec::new()),
                1 => ((0..count).map(|_| tok(rng)).collect(), (0..count).map(|_| off(rng)).collect()),
                _ => (Vec::new(), (0..count).map(|_| off(rng)).collect()),
            };
            Group::new(kind, grids, offs).expect("valid arity")
        })
        .collect();
    SpatialSequence::new(groups)
}

fn serialization_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..10_000 {
        let n = [4, 8, 16, 32, 64][rng.gen_range(0..5)];
        let g = GridGeometry::new(n, 2 * n, 840, 840).unwrap();
        let s = random_sequence(&mut rng, n);
        let text = serialize(&s);
        let back = parse(&text, &g).map_err(|e| format!("sequence {i}: {text:?} fails to parse: {e}"))?;
        ensure!(back == s, "sequence {i}: {text:?} parses to a different sequence");
        ensure!(serialize(&back) == text, "sequence {i}: {text:?} is not a fixed point");
    }
    let g = GridGeometry::new(32, 64, 840, 840).unwrap();
    let canonical = [
        "",
        "<seg></seg>",
        "<seg><grid_0_0><grid_31_31></seg>",
        "<seg><grid_3_4><OFF_0_0><grid_5_6><DELETE></seg><box><grid_1_1><grid_9_9></box>",
        "<box><OFF_-1_1><OFF_1_-1></box>",
        "<point><grid_7_2></point><line><grid_1_2><grid_3_4><grid_5_6></line>",
        "<seg><OFF_0_0><DELETE><OFF_1_1></seg><box><DELETE><DELETE></box>",
    ];
    for t in canonical {
        let s = parse(t, &g).map_err(|e| format!("{t:?}: {e}"))?;
        ensure!(serialize(&s) == t, "{t:?} reserializes as {:?}", serialize(&s));
    }
    Ok(format!("10000 random sequences and {} canonical texts, 0 failures", canonical.len()))
}

// 9 -------------------------------------------------------------------------

fn pipeline(dir: &Path, jobs: &str) -> Result<Vec<Vec<u8>>, String> {
    let d = |name: &str| p(&dir.join(name)).to_string();
    run_bin(&["synth", "--count", "40", "--seed", "9", "--out-dir", &d("")])?;
    run_bin(&["encode", "--synth", "--seed", "9", "--jobs", jobs, "--input", &d("masks.jsonl"), "--output", &d("encoded.jsonl")])?;
    run_bin(&["build-offset", "--seed", "9", "--jobs", jobs, "--input", &d("dataset.jsonl"), "--output", &d("offset.jsonl")])?;
    let encoded = std::fs::read_to_string(dir.join("encoded.jsonl")).map_err(|e| e.to_string())?;
    let mut preds = String::new();
    for line in encoded.lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let tokens = v["tokens"].as_str().unwrap_or_default();
        for text in [format!("<think>ok</think><answer>{tokens}</answer>"), format!("<answer>{tokens}{tokens}</answer>")] {
            preds.push_str(&serde_json::json!({"id": v["id"], "text": text}).to_string());
            preds.push('\n');
        }
    }
    std::fs::write(dir.join("predictions.jsonl"), preds).map_err(|e| e.to_string())?;
    run_bin(&[
        "score",
        "--stage",
        "grid",
        "--synth",
        "--seed",
        "9",
        "--jobs",
        jobs,
        "--predictions",
        &d("predictions.jsonl"),
        "--ground-truth",
        &d("ground_truth.jsonl"),
        "--output",
        &d("scores.jsonl"),
    ])?;
    ["encoded.jsonl", "offset.jsonl", "scores.jsonl"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| e.to_string()))
        .collect()
}

fn end_to_end_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline(a.path(), "1")?;
    let second = pipeline(b.path(), "4")?;
    for (name, (x, y)) in ["encode", "build-offset", "score"].iter().zip(first.iter().zip(&second)) {
        ensure!(!x.is_empty(), "{name} wrote nothing");
        ensure!(x == y, "{name} output differs between runs");
    }
    let bytes: usize = first.iter().map(Vec::len).sum();
    Ok(format!("encode, build-offset and score byte-identical across runs and thread counts ({bytes} bytes)"))
}

// 10 ------------------------------------------------------------------------

fn token_length() -> Outcome {
    let sc = SynthConfig::default();
    let g = GridGeometry::new(32, 64, sc.width as u32, sc.height as u32).unwrap();
    let items = synth_corpus(200, &sc, &g, 10).unwrap();
    let cfg = ConversionConfig::default();
    let mut total = 0;
    let mut satisfied = 0;
    for (i, it) in items.iter().enumerate() {
        let ps = synth_proposals(&it.mask, &g, record_seed(10, i as u64)).unwrap();
        let r = greedy_select(&it.mask, &ps, &cfg).unwrap();
        total += r.selected.len();
        satisfied += r.satisfied as usize;
    }
    let mean = total as f64 / items.len() as f64;
    ensure!((3.0..=15.0).contains(&mean), "mean {mean:.2} tokens per mask");
    Ok(format!("mean {mean:.2} tokens per mask over 200 masks, tau met on {satisfied}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("vocabulary economy", vocabulary_economy),
        ("greedy vs exhaustive", greedy_vs_exhaustive),
        ("morphology sandwich", morphology_sandwich),
        ("pool partition and hard-delete soundness", pool_partition),
        ("offset label soundness", offset_label_soundness),
        ("hungarian optimality", hungarian_optimality),
        ("reward spot checks", reward_spot_checks),
        ("serialization round trip", serialization_round_trip),
        ("end-to-end determinism", end_to_end_determinism),
        ("token length", token_length),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
