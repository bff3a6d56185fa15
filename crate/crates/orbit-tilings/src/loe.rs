//! The measure-preserving back-and-forth between two tiled orbit
//! fragments, the block-count arithmetic it rests on, the linear
//! extension of a tile bijection across regular tilings, and the
//! normalization verdicts (wHOE / HOE / LOE).
//!
//! Fragments are supplied by providers that issue tiles with side
//! lengths in [4, 5] and realize the compressibility maps τ_n: an
//! injective, label-preserving way to summon fresh tiles with pairwise
//! disjoint images, which is exactly what the forth and back steps
//! consume.

use crate::exactnum::QuadNum;
use crate::geometry::{Point, Rect};
use crate::tiling::RegularTiling;
use crate::towers::ThetaMatching;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LoeError {
    #[error("fragment provider refused a fresh tile (cap reached)")]
    ProviderExhausted,
    #[error("seed pairs tiles of different types")]
    TypeMismatch,
    #[error("normalization ratios differ within label {0}; not even wHOE")]
    InconsistentRatio(String),
    #[error("induced label map is not a bijection")]
    LabelMapNotBijective,
    #[error("audit failed: {0}")]
    AuditFailed(String),
}

/// Smallest n with 2^{-k}·n/ζ ∈ (1 − 2^{-k-1}, 1); by minimality the
/// ratio in fact lands in (1 − 2^{-k-1}, 1 − 2^{-k-2}].
pub fn block_counts(zeta: &QuadNum, k: u32) -> u64 {
    let four = QuadNum::from_int(4);
    let five = QuadNum::from_int(5);
    assert!(*zeta >= four && *zeta <= five, "zeta must lie in [4,5]");
    let scale = QuadNum::from_bigint(BigInt::from(2u8).pow(k));
    let threshold = (&QuadNum::one() - &QuadNum::dyadic(k + 1)) * zeta * &scale;
    let n = threshold.floor_int() + 1u32;
    use num_traits::ToPrimitive;
    n.to_u64().expect("block count fits u64")
}

/// The covered fraction 2^{-k}·n_{i,k}/ζ as an exact number.
pub fn covered_fraction(zeta: &QuadNum, k: u32) -> QuadNum {
    let n = block_counts(zeta, k);
    (QuadNum::dyadic(k) * QuadNum::from_int(n as i64)).div(zeta)
}

/// One tile of an orbit fragment: its label, side lengths ζᵢ ∈ [4, 5],
/// and a synthetic anchor used only for rendering.
#[derive(Clone, Debug, Serialize)]
pub struct FragmentTile {
    pub label: String,
    pub zeta: Vec<QuadNum>,
    pub anchor: Point,
}

/// A lazy orbit fragment: issues tiles on demand and realizes the
/// compressibility maps τ_n as memoized requests for fresh tiles.
#[derive(Clone, Debug)]
pub struct OrbitFragmentProvider {
    pub label: String,
    dim: usize,
    tiles: Vec<FragmentTile>,
    tau: BTreeMap<(u32, usize), usize>,
    rng: rand_chacha::ChaCha8Rng,
    max_tiles: Option<usize>,
    cursor: QuadNum,
}

impl OrbitFragmentProvider {
    pub fn new(label: &str, dim: usize, seed: u64, max_tiles: Option<usize>) -> Self {
        OrbitFragmentProvider {
            label: label.to_string(),
            dim,
            tiles: Vec::new(),
            tau: BTreeMap::new(),
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
            max_tiles,
            cursor: QuadNum::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tiles(&self) -> &[FragmentTile] {
        &self.tiles
    }

    /// Issue `count` initial tiles.
    pub fn issue_initial(&mut self, count: usize) -> Result<Vec<usize>, LoeError> {
        (0..count).map(|_| self.fresh_tile()).collect()
    }

    fn fresh_tile(&mut self) -> Result<usize, LoeError> {
        if let Some(cap) = self.max_tiles {
            if self.tiles.len() >= cap {
                return Err(LoeError::ProviderExhausted);
            }
        }
        // ζ on the grid 4 + j/8, j ∈ {0..8}, endpoints included
        let zeta: Vec<QuadNum> = (0..self.dim)
            .map(|_| QuadNum::from_int(4) + QuadNum::from_ratio(self.rng.gen_range(0..=8), 8))
            .collect();
        let anchor = {
            let mut coords = vec![QuadNum::zero(); self.dim];
            coords[0] = self.cursor.clone();
            Point(coords)
        };
        // tiles laid side by side with a unit gap, for rendering only
        self.cursor += &(&zeta[0] + &QuadNum::one());
        let id = self.tiles.len();
        self.tiles.push(FragmentTile {
            label: self.label.clone(),
            zeta,
            anchor,
        });
        Ok(id)
    }

    /// τ_n applied to a materialized tile: injective per n, images
    /// pairwise disjoint across n, label preserving. Memoized so each
    /// τ_n is a genuine map.
    pub fn tau(&mut self, n: u32, tile: usize) -> Result<usize, LoeError> {
        assert!(tile < self.tiles.len(), "tau argument must be materialized");
        if let Some(t) = self.tau.get(&(n, tile)) {
            return Ok(*t);
        }
        let fresh = self.fresh_tile()?;
        self.tau.insert((n, tile), fresh);
        Ok(fresh)
    }
}

/// Which fragment a block lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    X,
    Y,
}

/// A dyadic block B^k inside one tile:
/// geometry = anchor + 2^{-k}·idx + [0, 2^{-k})^d.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct BlockRef {
    pub tile: usize,
    pub level: u32,
    pub idx: Vec<u64>,
}

impl BlockRef {
    /// Lebesgue measure 2^{-k·d}.
    pub fn measure(&self, dim: usize) -> QuadNum {
        QuadNum::dyadic(self.level * dim as u32)
    }

    pub fn rect(&self, tile: &FragmentTile) -> Rect {
        let side = QuadNum::dyadic(self.level);
        let lo: Vec<QuadNum> = tile
            .anchor
            .0
            .iter()
            .zip(&self.idx)
            .map(|(a, i)| a + &(QuadNum::from_int(*i as i64) * &side))
            .collect();
        let hi: Vec<QuadNum> = lo.iter().map(|l| l + &side).collect();
        Rect::new(lo, hi)
    }
}

/// What stage produced a mapped pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Forth(u32),
    Back(u32),
}

#[derive(Clone, Debug, Serialize)]
pub struct MappedPair {
    pub source: BlockRef,
    pub target: BlockRef,
    pub stage: Stage,
}

/// Per-tile record of which blocks are spoken for, at every level.
#[derive(Clone, Debug, Default)]
struct CoverIndex {
    /// level -> covered block indices
    covered: BTreeMap<u32, BTreeSet<Vec<u64>>>,
    /// level -> blocks partially covered by something strictly deeper
    touched: BTreeMap<u32, BTreeSet<Vec<u64>>>,
}

impl CoverIndex {
    fn insert(&mut self, level: u32, idx: &[u64]) {
        self.covered.entry(level).or_default().insert(idx.to_vec());
        for coarser in 0..level {
            let shift = level - coarser;
            let anc: Vec<u64> = idx.iter().map(|i| i >> shift).collect();
            self.touched.entry(coarser).or_default().insert(anc);
        }
    }

    /// A block is free when neither it, an ancestor of it, nor any
    /// descendant inside it has been mapped.
    fn is_free(&self, level: u32, idx: &[u64]) -> bool {
        if let Some(set) = self.covered.get(&level) {
            if set.contains(idx) {
                return false;
            }
        }
        if let Some(set) = self.touched.get(&level) {
            if set.contains(idx) {
                return false;
            }
        }
        for (coarser, set) in self.covered.range(..level) {
            let shift = level - coarser;
            let anc: Vec<u64> = idx.iter().map(|i| i >> shift).collect();
            if set.contains(&anc) {
                return false;
            }
        }
        true
    }
}

/// Coverage verification snapshot taken after each stage.
#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    /// Tiles fully covered at this stage's grid: (side, tile, per-axis
    /// covered fractions, all inside the dyadic window of the level).
    pub full_tiles: Vec<(Side, usize, Vec<QuadNum>)>,
}

/// The partial measure-preserving bijection under construction.
#[derive(Debug, Serialize)]
pub struct BlockMap {
    pub dim: usize,
    pub pairs: Vec<MappedPair>,
    pub stage_reports: Vec<StageReport>,
    /// X tile -> associated Y tile (seed image or summoning origin).
    pub assoc_y: Vec<usize>,
    /// Y tile -> associated X tile.
    pub assoc_x: Vec<usize>,
    #[serde(skip)]
    src_cover: Vec<CoverIndex>,
    #[serde(skip)]
    tgt_cover: Vec<CoverIndex>,
}

impl BlockMap {
    fn ensure_side(cover: &mut Vec<CoverIndex>, tile: usize) {
        while cover.len() <= tile {
            cover.push(CoverIndex::default());
        }
    }

    fn record(&mut self, source: BlockRef, target: BlockRef, stage: Stage) {
        Self::ensure_side(&mut self.src_cover, source.tile);
        Self::ensure_side(&mut self.tgt_cover, target.tile);
        debug_assert!(self.src_cover[source.tile].is_free(source.level, &source.idx));
        debug_assert!(self.tgt_cover[target.tile].is_free(target.level, &target.idx));
        self.src_cover[source.tile].insert(source.level, &source.idx);
        self.tgt_cover[target.tile].insert(target.level, &target.idx);
        self.pairs.push(MappedPair { source, target, stage });
    }

    fn free_blocks(cover: &[CoverIndex], tile: usize, zeta: &[QuadNum], level: u32) -> Vec<Vec<u64>> {
        let counts: Vec<u64> = zeta.iter().map(|z| block_counts(z, level)).collect();
        let mut idxs: Vec<Vec<u64>> = vec![Vec::new()];
        for n in &counts {
            let mut next = Vec::new();
            for prefix in &idxs {
                for j in 0..*n {
                    let mut p = prefix.clone();
                    p.push(j);
                    next.push(p);
                }
            }
            idxs = next;
        }
        let empty = CoverIndex::default();
        let index = cover.get(tile).unwrap_or(&empty);
        idxs.into_iter().filter(|idx| index.is_free(level, idx)).collect()
    }

    /// Two-sided injectivity at block-geometry level: no two sources
    /// and no two targets overlap (equal or nested dyadic blocks). Each
    /// side is replayed into a fresh cover index, which refuses nested
    /// or repeated blocks.
    pub fn audit_injectivity(&self) -> Result<(), LoeError> {
        for (tag, pick_source) in [("source", true), ("target", false)] {
            let mut per_tile: BTreeMap<usize, CoverIndex> = BTreeMap::new();
            for pair in &self.pairs {
                let b = if pick_source { &pair.source } else { &pair.target };
                let index = per_tile.entry(b.tile).or_default();
                if !index.is_free(b.level, &b.idx) {
                    return Err(LoeError::AuditFailed(format!(
                        "{} blocks overlap in tile {}", tag, b.tile
                    )));
                }
                index.insert(b.level, &b.idx);
            }
        }
        Ok(())
    }

    /// Every mapped unit carries equal source and target measure.
    pub fn audit_measure(&self) -> Result<(), LoeError> {
        for pair in &self.pairs {
            if pair.source.level != pair.target.level {
                return Err(LoeError::AuditFailed(
                    "mapped unit with unequal block levels".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn total_mapped_measure(&self) -> QuadNum {
        self.pairs
            .iter()
            .fold(QuadNum::zero(), |acc, p| acc + p.source.measure(self.dim))
    }
}

/// Alternate forth and back steps through `levels`, extending the seed
/// bijection on initial tiles to a block map that exhausts every
/// materialized tile's dyadic grid.
pub fn run_back_and_forth(
    x: &mut OrbitFragmentProvider,
    y: &mut OrbitFragmentProvider,
    seed: &[(usize, usize)],
    levels: u32,
) -> Result<BlockMap, LoeError> {
    let dim = x.dim();
    assert_eq!(dim, y.dim());
    let mut map = BlockMap {
        dim,
        pairs: Vec::new(),
        stage_reports: Vec::new(),
        assoc_y: Vec::new(),
        assoc_x: Vec::new(),
        src_cover: Vec::new(),
        tgt_cover: Vec::new(),
    };
    // label consistency of the seed
    let mut label_map: BTreeMap<String, String> = BTreeMap::new();
    for &(xt, yt) in seed {
        let lx = &x.tiles()[xt].label;
        let ly = &y.tiles()[yt].label;
        if let Some(prev) = label_map.get(lx) {
            if prev != ly {
                return Err(LoeError::LabelMapNotBijective);
            }
        }
        label_map.insert(lx.clone(), ly.clone());
    }
    let distinct: BTreeSet<&String> = label_map.values().collect();
    if distinct.len() != label_map.len() {
        return Err(LoeError::LabelMapNotBijective);
    }
    for &(xt, yt) in seed {
        set_assoc(&mut map.assoc_y, xt, yt);
        set_assoc(&mut map.assoc_x, yt, xt);
    }

    forth_step(&mut map, x, y, 0)?;
    for k in 1..=levels {
        forth_step(&mut map, x, y, k)?;
        back_step(&mut map, x, y, k)?;
    }
    Ok(map)
}

fn set_assoc(assoc: &mut Vec<usize>, from: usize, to: usize) {
    while assoc.len() <= from {
        assoc.push(usize::MAX);
    }
    assoc[from] = to;
}

/// Map every uncovered level-k block of every materialized X tile onto
/// a free level-k block of the associated Y tile, pulling fresh Y tiles
/// through τ^Y while the demand exceeds the free supply.
pub fn forth_step(
    map: &mut BlockMap,
    x: &mut OrbitFragmentProvider,
    y: &mut OrbitFragmentProvider,
    k: u32,
) -> Result<(), LoeError> {
    let x_tiles: Vec<usize> = (0..x.tiles().len()).collect();
    for xt in x_tiles {
        let zeta_x = x.tiles()[xt].zeta.clone();
        let demand = BlockMap::free_blocks(&map.src_cover, xt, &zeta_x, k);
        if demand.is_empty() {
            continue;
        }
        let assoc = map.assoc_y[xt];
        let mut pool_tiles = vec![assoc];
        let mut tau_n = 1u32;
        let mut pool: Vec<BlockRef>;
        loop {
            pool = Vec::new();
            for &yt in &pool_tiles {
                let zeta_y = y.tiles()[yt].zeta.clone();
                for idx in BlockMap::free_blocks(&map.tgt_cover, yt, &zeta_y, k) {
                    pool.push(BlockRef { tile: yt, level: k, idx });
                }
            }
            if pool.len() >= demand.len() {
                break;
            }
            let fresh = y.tau(tau_n, assoc)?;
            tau_n += 1;
            if !pool_tiles.contains(&fresh) {
                set_assoc(&mut map.assoc_x, fresh, xt);
                pool_tiles.push(fresh);
            }
        }
        for (idx, target) in demand.into_iter().zip(pool) {
            map.record(BlockRef { tile: xt, level: k, idx }, target, Stage::Forth(k));
        }
    }
    let report = coverage_snapshot(map, x, y, Stage::Forth(k))?;
    map.stage_reports.push(report);
    Ok(())
}

/// Cover every still-free level-k block of every materialized Y tile:
/// its preimage is a set of 2^d level-(k+1) blocks drawn from fresh X
/// tiles summoned through τ^X for the associated X tile.
pub fn back_step(
    map: &mut BlockMap,
    x: &mut OrbitFragmentProvider,
    y: &mut OrbitFragmentProvider,
    k: u32,
) -> Result<(), LoeError> {
    let y_tiles: Vec<usize> = (0..y.tiles().len()).collect();
    for yt in y_tiles {
        let zeta_y = y.tiles()[yt].zeta.clone();
        let uncovered = BlockMap::free_blocks(&map.tgt_cover, yt, &zeta_y, k);
        if uncovered.is_empty() {
            continue;
        }
        let assoc = map.assoc_x[yt];
        let per_block = 1usize << map.dim;
        let demand_total = uncovered.len() * per_block;
        let mut source_tiles: Vec<usize> = Vec::new();
        let mut tau_n = 1u32;
        let mut sources: Vec<BlockRef>;
        loop {
            sources = Vec::new();
            for &st in &source_tiles {
                let zeta_st = x.tiles()[st].zeta.clone();
                for idx in BlockMap::free_blocks(&map.src_cover, st, &zeta_st, k + 1) {
                    sources.push(BlockRef { tile: st, level: k + 1, idx });
                }
            }
            if sources.len() >= demand_total {
                break;
            }
            let fresh = x.tau(tau_n, assoc)?;
            tau_n += 1;
            if !source_tiles.contains(&fresh) {
                set_assoc(&mut map.assoc_y, fresh, yt);
                source_tiles.push(fresh);
            }
        }
        let mut source_iter = sources.into_iter();
        for idx in uncovered {
            // the 2^d level-(k+1) sub-blocks of the uncovered Y block
            let mut subs: Vec<Vec<u64>> = vec![Vec::new()];
            for axis_idx in &idx {
                let mut next = Vec::new();
                for prefix in &subs {
                    for bit in 0..2u64 {
                        let mut p = prefix.clone();
                        p.push(axis_idx * 2 + bit);
                        next.push(p);
                    }
                }
                subs = next;
            }
            for sub in subs {
                let source = source_iter.next().expect("pool sized to demand");
                map.record(
                    source,
                    BlockRef { tile: yt, level: k + 1, idx: sub },
                    Stage::Back(k),
                );
            }
        }
    }
    let report = coverage_snapshot(map, x, y, Stage::Back(k))?;
    map.stage_reports.push(report);
    Ok(())
}

/// Verify and report coverage after a stage: X tiles after forth k and
/// Y tiles after back k must be covered exactly to their level-k grid,
/// checked by exact measure accounting, with per-axis fractions in
/// (1−2^{-k-1}, 1−2^{-k-2}]. Fresh tiles still mid-construction (the
/// other side's τ requests of this stage) are exempt.
fn coverage_snapshot(
    map: &BlockMap,
    x: &OrbitFragmentProvider,
    y: &OrbitFragmentProvider,
    stage: Stage,
) -> Result<StageReport, LoeError> {
    let mut full_tiles = Vec::new();
    let k = match stage {
        Stage::Forth(k) => k,
        Stage::Back(k) => k,
    };
    let lo = &QuadNum::one() - &QuadNum::dyadic(k + 1);
    let hi = &QuadNum::one() - &QuadNum::dyadic(k + 2);
    let (side, provider) = match stage {
        Stage::Forth(_) => (Side::X, x),
        Stage::Back(_) => (Side::Y, y),
    };
    // one pass over the pairs to total up per-tile mapped measure
    let mut mapped_by_tile: BTreeMap<usize, QuadNum> = BTreeMap::new();
    for pair in &map.pairs {
        let b = match side {
            Side::X => &pair.source,
            Side::Y => &pair.target,
        };
        *mapped_by_tile.entry(b.tile).or_insert_with(QuadNum::zero) += &b.measure(map.dim);
    }
    for (tile, info) in provider.tiles().iter().enumerate() {
        // grid measure the covered region should add up to
        let mut grid_measure = QuadNum::one();
        for z in &info.zeta {
            grid_measure *= &(QuadNum::from_int(block_counts(z, k) as i64) * QuadNum::dyadic(k));
        }
        let mapped = mapped_by_tile.remove(&tile).unwrap_or_else(QuadNum::zero);
        if mapped != grid_measure {
            // tiles summoned during this very stage join the next one
            if mapped < grid_measure {
                continue;
            }
            return Err(LoeError::AuditFailed(format!(
                "tile {} mapped measure {} exceeds its level-{} grid {}",
                tile, mapped, k, grid_measure
            )));
        }
        let fractions: Vec<QuadNum> = info.zeta.iter().map(|z| covered_fraction(z, k)).collect();
        for f in &fractions {
            if !(*f > lo && *f <= hi) {
                return Err(LoeError::AuditFailed(format!(
                    "covered fraction {} outside the dyadic window at level {}", f, k
                )));
            }
        }
        full_tiles.push((side, tile, fractions));
    }
    Ok(StageReport { stage, full_tiles })
}

/// A tile-type-preserving bijection between two regular tilings,
/// extended linearly inside each tile.
#[derive(Clone, Debug, Serialize)]
pub struct TileBijection {
    /// (X tile index, Y tile index) over all matched tiles.
    pub pairs: Vec<(usize, usize)>,
}

impl TileBijection {
    /// Evaluate the point map: locate the X tile containing `p` and
    /// translate by the paired Y tile's anchor.
    pub fn eval(&self, x: &RegularTiling, y: &RegularTiling, p: &Point) -> Option<Point> {
        for (xt, yt) in &self.pairs {
            let tile = &x.tiles[*xt];
            if tile.rect().contains(p) {
                let offset = p.sub(&tile.anchor);
                return Some(y.tiles[*yt].anchor.translate(&offset));
            }
        }
        None
    }
}

/// Extend a seed bijection on 1⃗-tiles to all tile types through the θ
/// matchings: φ(θ_a^X(c)) = θ_a^Y(φ(c)), then linearly inside tiles.
pub fn regular_tiling_loe(
    x: &RegularTiling,
    theta_x: &ThetaMatching,
    y: &RegularTiling,
    theta_y: &ThetaMatching,
    seed: &[(usize, usize)],
) -> Result<TileBijection, LoeError> {
    use crate::diophantine::SegLabel;
    let mut pairs = Vec::new();
    for &(xt, yt) in seed {
        let tx = &x.tiles[xt].tile_type;
        let ty = &y.tiles[yt].tile_type;
        if tx != ty || !tx.iter().all(|l| *l == SegLabel::One) {
            return Err(LoeError::TypeMismatch);
        }
        pairs.push((xt, yt));
        for ti in 0..theta_x.types.len() {
            if theta_x.types[ti].iter().all(|l| *l == SegLabel::One) {
                continue;
            }
            let ix = theta_x
                .theta(ti, xt)
                .ok_or_else(|| LoeError::AuditFailed("seed tile missing from θ^X".into()))?;
            let iy = theta_y
                .theta(ti, yt)
                .ok_or_else(|| LoeError::AuditFailed("seed tile missing from θ^Y".into()))?;
            pairs.push((ix, iy));
        }
    }
    let mut xs: Vec<usize> = pairs.iter().map(|(a, _)| *a).collect();
    let mut ys: Vec<usize> = pairs.iter().map(|(_, b)| *b).collect();
    xs.sort_unstable();
    ys.sort_unstable();
    let n = xs.len();
    xs.dedup();
    ys.dedup();
    if xs.len() != n || ys.len() != n {
        return Err(LoeError::AuditFailed("tile bijection is not injective".into()));
    }
    Ok(TileBijection { pairs })
}

/// One measured unit of a map: a source piece and its image, with
/// exact Lebesgue measures and fragment labels.
#[derive(Clone, Debug, Serialize)]
pub struct MeasuredUnit {
    pub label_src: String,
    pub label_tgt: String,
    pub src_measure: QuadNum,
    pub tgt_measure: QuadNum,
}

/// Measured units of a block map: every mapped pair with its block
/// measures 2^{-kd}.
pub fn block_map_units(
    map: &BlockMap,
    x: &OrbitFragmentProvider,
    y: &OrbitFragmentProvider,
) -> Vec<MeasuredUnit> {
    map.pairs
        .iter()
        .map(|p| MeasuredUnit {
            label_src: x.tiles()[p.source.tile].label.clone(),
            label_tgt: y.tiles()[p.target.tile].label.clone(),
            src_measure: p.source.measure(map.dim),
            tgt_measure: p.target.measure(map.dim),
        })
        .collect()
}

/// Measured units of a tile bijection: every matched tile (congruent
/// images, so target measure equals source measure exactly) plus one
/// seeded sub-box per tile.
pub fn tile_bijection_units(
    bij: &TileBijection,
    x: &RegularTiling,
    y: &RegularTiling,
    label_x: &str,
    label_y: &str,
    basis_seed: u64,
) -> Vec<MeasuredUnit> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(basis_seed);
    let mut units = Vec::new();
    for (xt, yt) in &bij.pairs {
        units.push(MeasuredUnit {
            label_src: label_x.to_string(),
            label_tgt: label_y.to_string(),
            src_measure: x.tiles[*xt].rect().volume(),
            tgt_measure: y.tiles[*yt].rect().volume(),
        });
        // a dyadic sub-box maps to its translate, so the measures agree
        let mut vol = QuadNum::one();
        for s in x.tiles[*xt].rect().sides() {
            vol *= &(QuadNum::from_ratio(rng.gen_range(1..=4i64), 4) * &s);
        }
        units.push(MeasuredUnit {
            label_src: label_x.to_string(),
            label_tgt: label_y.to_string(),
            src_measure: vol.clone(),
            tgt_measure: vol,
        });
    }
    units
}

/// The verdict ladder of the normalization function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// All ratios are exactly 1.
    Loe,
    /// All ratios agree but differ from 1.
    Hoe,
    /// Ratios are constant per label but vary across labels.
    Whoe,
}

/// Per-label normalization ratios and the resulting verdict.
#[derive(Clone, Debug, Serialize)]
pub struct NormalizationReport {
    pub per_label: BTreeMap<String, QuadNum>,
    pub verdict: Verdict,
}

/// Compute the per-label ratio of image measure to source measure and
/// classify: LOE iff all ratios are exactly 1, HOE iff constant, wHOE
/// otherwise. Errors if ratios differ within a label or if the induced
/// label map fails to be a bijection.
pub fn verify_normalization(units: &[MeasuredUnit]) -> Result<NormalizationReport, LoeError> {
    let mut label_map: BTreeMap<&str, &str> = BTreeMap::new();
    let mut ratios: BTreeMap<String, QuadNum> = BTreeMap::new();
    for unit in units {
        if let Some(prev) = label_map.get(unit.label_src.as_str()) {
            if *prev != unit.label_tgt.as_str() {
                return Err(LoeError::LabelMapNotBijective);
            }
        }
        label_map.insert(&unit.label_src, &unit.label_tgt);
        assert!(!unit.src_measure.is_zero(), "measured unit with zero source");
        let ratio = unit.tgt_measure.div(&unit.src_measure);
        if let Some(prev) = ratios.get(&unit.label_src) {
            if *prev != ratio {
                return Err(LoeError::InconsistentRatio(unit.label_src.clone()));
            }
        }
        ratios.insert(unit.label_src.clone(), ratio);
    }
    let images: BTreeSet<&&str> = label_map.values().collect();
    if images.len() != label_map.len() {
        return Err(LoeError::LabelMapNotBijective);
    }
    let one = QuadNum::one();
    let verdict = if ratios.values().all(|r| *r == one) {
        Verdict::Loe
    } else {
        let first = ratios.values().next();
        if ratios.values().all(|r| Some(r) == first) {
            Verdict::Hoe
        } else {
            Verdict::Whoe
        }
    };
    Ok(NormalizationReport { per_label: ratios, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> QuadNum {
        QuadNum::from_ratio(n, d)
    }

    /// Brute-force oracle: the literal smallest-n scan.
    fn oracle_block_counts(zeta: &QuadNum, k: u32) -> u64 {
        let lo = &QuadNum::one() - &QuadNum::dyadic(k + 1);
        let side = QuadNum::dyadic(k);
        let mut n = 1u64;
        loop {
            let ratio = (QuadNum::from_int(n as i64) * &side).div(zeta);
            if ratio > lo && ratio < QuadNum::one() {
                return n;
            }
            n += 1;
        }
    }

    #[test]
    fn block_count_paper_anchors() {
        // n = 3 at k = 0 for every ζ ∈ [4,5]
        for j in 0..=8 {
            let z = QuadNum::from_int(4) + q(j, 8);
            assert_eq!(block_counts(&z, 0), 3);
        }
        assert_eq!(block_counts(&q(9, 2), 1), 7);
        // the 8-vs-7 pair behind the 28 vs 13 new-block counts
        assert_eq!(block_counts(&q(5, 1), 1), 8);
        assert_eq!(block_counts(&q(4, 1), 1), 7);
        // d=2 block arithmetic: 8² − 6² = 28 and 7² − 6² = 13
        assert_eq!(8 * 8 - 6 * 6, 28);
        assert_eq!(7 * 7 - 6 * 6, 13);
    }

    #[test]
    fn block_count_matches_oracle_and_dyadic_window() {
        for j in 0..=20 {
            let z = QuadNum::from_int(4) + q(j, 20);
            for k in 0..=4 {
                let n = block_counts(&z, k);
                assert_eq!(n, oracle_block_counts(&z, k), "zeta={} k={}", z, k);
                let f = covered_fraction(&z, k);
                let lo = &QuadNum::one() - &QuadNum::dyadic(k + 1);
                let hi = &QuadNum::one() - &QuadNum::dyadic(k + 2);
                assert!(f > lo && f <= hi, "zeta={} k={} fraction={}", z, k, f);
            }
        }
    }

    #[test]
    fn provider_contract() {
        let mut p = OrbitFragmentProvider::new("x", 2, 5, None);
        let init = p.issue_initial(3).unwrap();
        assert_eq!(init, vec![0, 1, 2]);
        for t in p.tiles() {
            for z in &t.zeta {
                assert!(*z >= q(4, 1) && *z <= q(5, 1));
            }
            assert_eq!(t.label, "x");
        }
        // τ maps are injective with pairwise disjoint images
        let a = p.tau(1, 0).unwrap();
        let b = p.tau(1, 1).unwrap();
        let c = p.tau(2, 0).unwrap();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(p.tau(1, 0).unwrap(), a);
        // cap triggers exhaustion
        let mut capped = OrbitFragmentProvider::new("x", 1, 5, Some(1));
        capped.issue_initial(1).unwrap();
        assert_eq!(capped.tau(1, 0), Err(LoeError::ProviderExhausted));
    }

    #[test]
    fn level_zero_is_a_block_permutation() {
        let mut x = OrbitFragmentProvider::new("x", 2, 1, None);
        let mut y = OrbitFragmentProvider::new("y", 2, 2, None);
        let xs = x.issue_initial(2).unwrap();
        let ys = y.issue_initial(2).unwrap();
        let seed: Vec<(usize, usize)> = xs.into_iter().zip(ys).collect();
        let map = run_back_and_forth(&mut x, &mut y, &seed, 0).unwrap();
        // each tile has 3^d = 9 blocks B⁰, matched one-to-one
        assert_eq!(map.pairs.len(), 18);
        assert!(map.pairs.iter().all(|p| p.source.level == 0 && p.target.level == 0));
        map.audit_injectivity().unwrap();
        map.audit_measure().unwrap();
    }

    #[test]
    fn forth_narrative_28_into_13_plus_fresh() {
        // hand-built providers: ζ_X = (5,5), ζ_Y = (4,4)
        let mut x = OrbitFragmentProvider::new("x", 2, 1, None);
        let mut y = OrbitFragmentProvider::new("y", 2, 2, None);
        x.issue_initial(1).unwrap();
        y.issue_initial(1).unwrap();
        x.tiles[0].zeta = vec![q(5, 1), q(5, 1)];
        y.tiles[0].zeta = vec![q(4, 1), q(4, 1)];
        let mut map = BlockMap {
            dim: 2,
            pairs: Vec::new(),
            stage_reports: Vec::new(),
            assoc_y: vec![0],
            assoc_x: vec![0],
            src_cover: Vec::new(),
            tgt_cover: Vec::new(),
        };
        forth_step(&mut map, &mut x, &mut y, 0).unwrap();
        assert_eq!(map.pairs.len(), 9);
        forth_step(&mut map, &mut x, &mut y, 1).unwrap();
        // 28 new X blocks; 13 fit in the initial Y tile, the rest in a
        // fresh τ^Y tile
        let forth1: Vec<&MappedPair> = map
            .pairs
            .iter()
            .filter(|p| p.stage == Stage::Forth(1))
            .collect();
        assert_eq!(forth1.len(), 28);
        let into_initial = forth1.iter().filter(|p| p.target.tile == 0).count();
        assert_eq!(into_initial, 13);
        assert_eq!(y.tiles().len(), 2);

        // the back step covers every remaining Y B¹ block with 2^d = 4
        // B² sources from fresh X tiles
        back_step(&mut map, &mut x, &mut y, 1).unwrap();
        let back1: Vec<&MappedPair> = map
            .pairs
            .iter()
            .filter(|p| p.stage == Stage::Back(1))
            .collect();
        assert!(!back1.is_empty());
        assert_eq!(back1.len() % 4, 0);
        assert!(back1.iter().all(|p| p.source.level == 2 && p.target.level == 2));
        assert!(back1.iter().all(|p| p.source.tile >= 1));
        map.audit_injectivity().unwrap();
        map.audit_measure().unwrap();
    }

    #[test]
    fn back_step_measure_arithmetic() {
        // a single uncovered Y B¹ block in d=2 gets 4 B² preimages of
        // total measure (1/2)² = 4·(1/4)²
        let lhs = QuadNum::dyadic(1) * QuadNum::dyadic(1);
        let rhs = QuadNum::from_int(4) * QuadNum::dyadic(2) * QuadNum::dyadic(2);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn run_to_level_two_and_verify() {
        let mut x = OrbitFragmentProvider::new("orbit-a", 2, 11, None);
        let mut y = OrbitFragmentProvider::new("orbit-b", 2, 12, None);
        let xs = x.issue_initial(3).unwrap();
        let ys = y.issue_initial(3).unwrap();
        let seed: Vec<(usize, usize)> = xs.into_iter().zip(ys).collect();
        let map = run_back_and_forth(&mut x, &mut y, &seed, 2).unwrap();
        map.audit_injectivity().unwrap();
        map.audit_measure().unwrap();
        // coverage reports exist for forth 0..2 and back 1..2
        assert_eq!(map.stage_reports.len(), 5);
        for report in &map.stage_reports {
            let k = match report.stage {
                Stage::Forth(k) | Stage::Back(k) => k,
            };
            let lo = &QuadNum::one() - &QuadNum::dyadic(k + 1);
            let hi = &QuadNum::one() - &QuadNum::dyadic(k + 2);
            for (_, _, fractions) in &report.full_tiles {
                for f in fractions {
                    assert!(f > &lo && f <= &hi);
                }
            }
        }
        let units = block_map_units(&map, &x, &y);
        let report = verify_normalization(&units).unwrap();
        assert_eq!(report.verdict, Verdict::Loe);
    }

    #[test]
    fn identity_on_equal_fragments() {
        // X = Y layout and seed: the level-0 matching is the identity
        let mut x = OrbitFragmentProvider::new("same", 2, 7, None);
        let mut y = OrbitFragmentProvider::new("same", 2, 7, None);
        let xs = x.issue_initial(2).unwrap();
        let ys = y.issue_initial(2).unwrap();
        let seed: Vec<(usize, usize)> = xs.into_iter().zip(ys).collect();
        let map = run_back_and_forth(&mut x, &mut y, &seed, 1).unwrap();
        for pair in &map.pairs {
            assert_eq!(pair.source.tile, pair.target.tile);
            assert_eq!(pair.source.idx, pair.target.idx);
            assert_eq!(pair.source.level, pair.target.level);
        }
    }

    #[test]
    fn normalization_verdicts() {
        let unit = |ls: &str, lt: &str, s: QuadNum, t: QuadNum| MeasuredUnit {
            label_src: ls.into(),
            label_tgt: lt.into(),
            src_measure: s,
            tgt_measure: t,
        };
        // identity: ratio 1
        let r = verify_normalization(&[unit("a", "a'", q(1, 4), q(1, 4))]).unwrap();
        assert_eq!(r.verdict, Verdict::Loe);
        // one label scaled by 2, another at 1: wHOE but not HOE
        let r = verify_normalization(&[
            unit("a", "a'", q(1, 4), q(1, 2)),
            unit("b", "b'", q(1, 4), q(1, 4)),
        ])
        .unwrap();
        assert_eq!(r.verdict, Verdict::Whoe);
        // all labels scaled by the same 2: HOE but not LOE
        let r = verify_normalization(&[
            unit("a", "a'", q(1, 4), q(1, 2)),
            unit("b", "b'", q(1, 2), q(1, 1)),
        ])
        .unwrap();
        assert_eq!(r.verdict, Verdict::Hoe);
        // inconsistent ratios within one label: not even wHOE
        let err = verify_normalization(&[
            unit("a", "a'", q(1, 4), q(1, 2)),
            unit("a", "a'", q(1, 4), q(1, 4)),
        ])
        .unwrap_err();
        assert!(matches!(err, LoeError::InconsistentRatio(_)));
        // label map collapsing two labels: not a bijection
        let err = verify_normalization(&[
            unit("a", "c", q(1, 4), q(1, 4)),
            unit("b", "c", q(1, 4), q(1, 4)),
        ])
        .unwrap_err();
        assert_eq!(err, LoeError::LabelMapNotBijective);
    }

    #[test]
    fn regular_tiling_loe_on_towers() {
        use crate::towers::{ build_towers, limit_tiling, TowerSpec};
        use crate::geometry::Window;
        let spec = TowerSpec::with_defaults(2, 1, 1, 2);
        let side = QuadNum::from_int(8) * &spec.levels[0].l;
        let window = Window::Box {
            rect: Rect::new(vec![QuadNum::zero(); 2], vec![side; 2]),
        };
        let family = build_towers(&window, &spec).unwrap();
        let lx = limit_tiling(&family).unwrap();
        let ly = limit_tiling(&family).unwrap();
        // seed: identity on 1⃗-tiles
        use crate::diophantine::SegLabel;
        let ones: Vec<usize> = (0..lx.tiling.tiles.len())
            .filter(|i| lx.tiling.tiles[*i].tile_type.iter().all(|l| *l == SegLabel::One))
            .collect();
        let seed: Vec<(usize, usize)> = ones.iter().map(|i| (*i, *i)).collect();
        let bij = regular_tiling_loe(&lx.tiling, &lx.theta, &ly.tiling, &ly.theta, &seed).unwrap();
        assert_eq!(bij.pairs.len(), lx.tiling.tiles.len());
        // the square φ∘θ = θ∘φ commutes by construction: replay it
        for (ti, _) in lx.theta.types.iter().enumerate() {
            for &(xt, yt) in seed.iter() {
                if lx.theta.types[ti].iter().all(|l| *l == SegLabel::One) {
                    continue;
                }
                let lhs = lx.theta.theta(ti, xt).unwrap();
                let rhs = ly.theta.theta(ti, yt).unwrap();
                assert!(bij.pairs.contains(&(lhs, rhs)));
            }
        }
        // point map: translation inside each tile
        let tile = &lx.tiling.tiles[bij.pairs[0].0];
        let p = tile.anchor.translate(&[q(1, 3), q(1, 3)]);
        let image = bij.eval(&lx.tiling, &ly.tiling, &p).unwrap();
        let expected = ly.tiling.tiles[bij.pairs[0].1]
            .anchor
            .translate(&[q(1, 3), q(1, 3)]);
        assert_eq!(image, expected);
        // measured units: all ratios exactly 1
        let units = tile_bijection_units(&bij, &lx.tiling, &ly.tiling, "zx", "zy", 5);
        let report = verify_normalization(&units).unwrap();
        assert_eq!(report.verdict, Verdict::Loe);
        // a corrupt seed pairing different types is refused
        let alpha_tile = (0..lx.tiling.tiles.len())
            .find(|i| !lx.tiling.tiles[*i].tile_type.iter().all(|l| *l == SegLabel::One))
            .unwrap();
        let err = regular_tiling_loe(
            &lx.tiling,
            &lx.theta,
            &ly.tiling,
            &ly.theta,
            &[(ones[0], alpha_tile)],
        )
        .unwrap_err();
        assert_eq!(err, LoeError::TypeMismatch);
    }
}
