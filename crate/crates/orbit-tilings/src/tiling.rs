//! Rectangular tilings of windows: bounded-side tilings via equal
//! splitting, inscribed grids of congruent boxes, canonical {1, α}
//! tilings of (1+α)-multiple rectangles, and exact partition audits.

use crate::diophantine::{partition_exact, DiophantineError, SegLabel};
use crate::exactnum::QuadNum;
use crate::geometry::{CrossSection, GeometryError, Point, Rect, Window};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TilingError {
    #[error("window too small: axis {axis} of length {len} cannot be split within eps of {target}")]
    WindowTooSmall { axis: usize, len: String, target: String },
    #[error("tiles too small: uncovered fraction {frac} exceeds eps in some tile")]
    TilesTooSmall { frac: String },
    #[error("side {0} is not a positive integer multiple of 1+α")]
    NotMultiple(String),
    #[error("partition audit failed: {0}")]
    NotPartition(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Diophantine(#[from] DiophantineError),
}

/// One tile: a half-open box anchored at its bottom-left corner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub anchor: Point,
    pub sizes: Vec<QuadNum>,
}

impl Tile {
    pub fn rect(&self) -> Rect {
        Rect::anchored(&self.anchor, &self.sizes)
    }

    pub fn center(&self) -> Point {
        let half = QuadNum::from_ratio(1, 2);
        Point(
            self.anchor
                .0
                .iter()
                .zip(&self.sizes)
                .map(|(a, s)| a + &(s * &half))
                .collect(),
        )
    }
}

/// A finite rectangular tiling: `tiles` partition `region` (a disjoint
/// union of boxes inside the window) exactly.
#[derive(Clone, Debug, Serialize)]
pub struct RectTiling {
    pub window: Window,
    pub region: Vec<Rect>,
    pub tiles: Vec<Tile>,
}

impl RectTiling {
    /// Exact partition audit: tiles are pairwise disjoint, lie inside
    /// the region, and their volumes sum to the region volume. For
    /// half-open boxes the three together force a pointwise partition.
    pub fn audit(&self) -> Result<(), TilingError> {
        audit_partition(
            &self.region,
            &self.tiles.iter().map(Tile::rect).collect::<Vec<_>>(),
        )
    }

    pub fn min_max_sides(&self) -> Option<(QuadNum, QuadNum)> {
        let mut it = self.tiles.iter().flat_map(|t| t.sizes.iter().cloned());
        let first = it.next()?;
        let mut min = first.clone();
        let mut max = first;
        for s in it {
            if s < min {
                min = s.clone();
            } else if s > max {
                max = s;
            }
        }
        Some((min, max))
    }
}

/// One tile shape of a regular tiling: side length 1 or α per axis.
pub type TileType = Vec<SegLabel>;

/// All 2^d tile types in lexicographic order, ones before alphas.
pub fn all_tile_types(d: usize) -> Vec<TileType> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        let mut next = Vec::new();
        for t in &out {
            for l in [SegLabel::One, SegLabel::Alpha] {
                let mut t2 = t.clone();
                t2.push(l);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

pub fn type_sizes(t: &TileType) -> Vec<QuadNum> {
    t.iter().map(|l| l.length()).collect()
}

/// A tile of a regular tiling; the sides are determined by the type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularTile {
    pub anchor: Point,
    pub tile_type: TileType,
}

impl RegularTile {
    pub fn rect(&self) -> Rect {
        Rect::anchored(&self.anchor, &type_sizes(&self.tile_type))
    }
}

/// A rectangular tiling whose tiles all have sides in {1, α}.
#[derive(Clone, Debug, Serialize)]
pub struct RegularTiling {
    pub window: Window,
    pub region: Vec<Rect>,
    pub tiles: Vec<RegularTile>,
}

impl RegularTiling {
    pub fn audit(&self) -> Result<(), TilingError> {
        audit_partition(
            &self.region,
            &self.tiles.iter().map(RegularTile::rect).collect::<Vec<_>>(),
        )
    }

    /// Tile counts per type, in `all_tile_types` order.
    pub fn type_counts(&self) -> Vec<(TileType, usize)> {
        let d = self.window.dim();
        let types = all_tile_types(d);
        let mut counts = vec![0usize; types.len()];
        for tile in &self.tiles {
            let idx = types.iter().position(|t| *t == tile.tile_type).unwrap();
            counts[idx] += 1;
        }
        types.into_iter().zip(counts).collect()
    }

    /// Counts restricted to tiles fully inside `rect`.
    pub fn type_counts_in(&self, rect: &Rect) -> Vec<(TileType, usize)> {
        let d = self.window.dim();
        let types = all_tile_types(d);
        let mut counts = vec![0usize; types.len()];
        for tile in &self.tiles {
            if rect.contains_rect(&tile.rect()) {
                let idx = types.iter().position(|t| *t == tile.tile_type).unwrap();
                counts[idx] += 1;
            }
        }
        types.into_iter().zip(counts).collect()
    }
}

/// Tile the window with boxes whose every side is within `eps` of
/// `target`: per axis the length is split into n = round(len/target)
/// equal pieces.
pub fn tile_window_bounded_sides(
    window: &Window,
    target: &QuadNum,
    eps: &BigRational,
) -> Result<RectTiling, TilingError> {
    assert!(target.sign() == Ordering::Greater);
    let region = window.fundamental_domain();
    let eps_q = QuadNum::from_big_rational(eps.clone());
    let mut axis_cuts: Vec<Vec<QuadNum>> = Vec::new();
    let mut axis_sizes: Vec<QuadNum> = Vec::new();
    for axis in 0..window.dim() {
        let len = region.side(axis);
        let n = len.div(target).round_half_up().max(BigInt::from(1));
        let n_u = n.to_u64().expect("desk-scale tile count");
        let piece = len.div(&QuadNum::from_bigint(n));
        if (&piece - target).abs() >= eps_q {
            return Err(TilingError::WindowTooSmall {
                axis,
                len: len.to_string(),
                target: target.to_string(),
            });
        }
        let cuts = (0..n_u)
            .map(|j| &region.lo[axis] + &(QuadNum::from_int(j as i64) * &piece))
            .collect();
        axis_cuts.push(cuts);
        axis_sizes.push(piece);
    }
    let mut anchors = vec![Vec::new()];
    for cuts in &axis_cuts {
        let mut next = Vec::new();
        for prefix in &anchors {
            for c in cuts {
                let mut a: Vec<QuadNum> = prefix.clone();
                a.push(c.clone());
                next.push(a);
            }
        }
        anchors = next;
    }
    Ok(RectTiling {
        window: window.clone(),
        region: vec![region],
        tiles: anchors
            .into_iter()
            .map(|a| Tile {
                anchor: Point(a),
                sizes: axis_sizes.clone(),
            })
            .collect(),
    })
}

/// Inscribe congruent copies of the centered box `r` into every tile of
/// `tiling`, starting from the bottom-left corner, and return the copy
/// centers. Fails unless every tile is covered up to a fraction < eps.
pub fn inscribe_grid(
    tiling: &RectTiling,
    r: &Rect,
    eps: &BigRational,
) -> Result<CrossSection, TilingError> {
    let d = tiling.window.dim();
    assert!(r.is_symmetric(), "inscribed box must be centered");
    let sizes: Vec<QuadNum> = r.sides();
    let half = QuadNum::from_ratio(1, 2);
    let eps_q = QuadNum::from_big_rational(eps.clone());
    let one_minus = &QuadNum::one() - &eps_q;
    let mut centers = Vec::new();
    for tile in &tiling.tiles {
        let mut counts = Vec::with_capacity(d);
        let mut covered = QuadNum::one();
        for i in 0..d {
            let k = tile.sizes[i].div(&sizes[i]).floor_int();
            let k_u = k.to_u64().expect("desk-scale count");
            counts.push(k_u);
            covered *= &(QuadNum::from_int(k_u as i64) * &sizes[i]);
        }
        let frac = covered.div(&tile.rect().volume());
        if frac < one_minus {
            return Err(TilingError::TilesTooSmall {
                frac: (QuadNum::one() - frac).to_string(),
            });
        }
        let mut prefixes: Vec<Vec<QuadNum>> = vec![Vec::new()];
        for i in 0..d {
            let mut next = Vec::new();
            for prefix in &prefixes {
                for j in 0..counts[i] {
                    let mut p = prefix.clone();
                    let offset = (QuadNum::from_int(j as i64) + &half) * &sizes[i];
                    p.push(&tile.anchor.0[i] + &offset);
                    next.push(p);
                }
            }
            prefixes = next;
        }
        centers.extend(prefixes.into_iter().map(Point));
    }
    Ok(CrossSection::new(centers))
}

/// The canonical {1, α} tiling of a rectangle whose every side is a
/// positive multiple of 1+α: each axis is partitioned into alternating
/// segments of lengths 1 and α, and the tiling is the product.
pub fn canonical_tiling(window: &Window, rect: &Rect) -> Result<RegularTiling, TilingError> {
    let kappa = QuadNum::kappa();
    let d = rect.dim();
    let mut axis_segments: Vec<Vec<(QuadNum, SegLabel)>> = Vec::new();
    for axis in 0..d {
        let side = rect.side(axis);
        let ratio = side.div(&kappa);
        if !(ratio.is_rational() && ratio.rat().is_integer() && ratio.sign() == Ordering::Greater) {
            return Err(TilingError::NotMultiple(side.to_string()));
        }
        let part = partition_exact(&side)?;
        let mut segments = Vec::with_capacity(part.labels.len());
        let mut pos = rect.lo[axis].clone();
        for label in &part.labels {
            segments.push((pos.clone(), *label));
            pos += &label.length();
        }
        axis_segments.push(segments);
    }
    let mut tiles: Vec<(Vec<QuadNum>, TileType)> = vec![(Vec::new(), Vec::new())];
    for segments in &axis_segments {
        let mut next = Vec::new();
        for (anchor, ty) in &tiles {
            for (pos, label) in segments {
                let mut a = anchor.clone();
                a.push(pos.clone());
                let mut t = ty.clone();
                t.push(*label);
                next.push((a, t));
            }
        }
        tiles = next;
    }
    Ok(RegularTiling {
        window: window.clone(),
        region: vec![rect.clone()],
        tiles: tiles
            .into_iter()
            .map(|(anchor, tile_type)| RegularTile {
                anchor: Point(anchor),
                tile_type,
            })
            .collect(),
    })
}

/// An order-preserving integer encoding of box corners: exact
/// coordinates are ranked per axis, so half-open overlap and
/// containment reduce to integer comparisons without touching big
/// rationals again.
pub struct QuantizedBoxes {
    pub groups: Vec<Vec<(Vec<u32>, Vec<u32>)>>,
}

pub fn quantize_boxes(d: usize, groups: &[&[Rect]]) -> QuantizedBoxes {
    use std::collections::HashMap;
    let mut maps: Vec<HashMap<QuadNum, u32>> = vec![HashMap::new(); d];
    for group in groups {
        for r in group.iter() {
            for (axis, map) in maps.iter_mut().enumerate() {
                map.entry(r.lo[axis].clone()).or_insert(0);
                map.entry(r.hi[axis].clone()).or_insert(0);
            }
        }
    }
    for map in &mut maps {
        let mut keys: Vec<QuadNum> = map.keys().cloned().collect();
        keys.sort();
        for (rank, key) in keys.into_iter().enumerate() {
            map.insert(key, rank as u32);
        }
    }
    let encode = |r: &Rect| {
        let lo = (0..d).map(|i| maps[i][&r.lo[i]]).collect();
        let hi = (0..d).map(|i| maps[i][&r.hi[i]]).collect();
        (lo, hi)
    };
    QuantizedBoxes {
        groups: groups.iter().map(|g| g.iter().map(encode).collect()).collect(),
    }
}

fn int_contains(outer: &(Vec<u32>, Vec<u32>), inner: &(Vec<u32>, Vec<u32>)) -> bool {
    outer
        .0
        .iter()
        .zip(&inner.0)
        .all(|(o, i)| o <= i)
        && outer.1.iter().zip(&inner.1).all(|(o, i)| i <= o)
}

fn int_overlaps(a: &(Vec<u32>, Vec<u32>), b: &(Vec<u32>, Vec<u32>)) -> bool {
    a.0.iter()
        .zip(&b.1)
        .all(|(lo, hi)| lo < hi)
        && b.0.iter().zip(&a.1).all(|(lo, hi)| lo < hi)
}

/// Exact partition audit of `tiles` against `region` (disjoint boxes):
/// containment, pairwise disjointness by a lexicographic sweep, and the
/// volume identity. For half-open boxes the three together force an
/// exact pointwise partition.
pub fn audit_partition(region: &[Rect], tiles: &[Rect]) -> Result<(), TilingError> {
    let d = match region.first().or_else(|| tiles.first()) {
        Some(r) => r.dim(),
        None => return Ok(()),
    };
    let quantized = quantize_boxes(d, &[region, tiles]);
    let (regions_q, tiles_q) = (&quantized.groups[0], &quantized.groups[1]);
    for (t, tq) in tiles.iter().zip(tiles_q) {
        if !regions_q.iter().any(|r| int_contains(r, tq)) {
            return Err(TilingError::NotPartition(format!(
                "tile {:?} is not inside any region box",
                t
            )));
        }
    }
    for i in 0..regions_q.len() {
        for j in (i + 1)..regions_q.len() {
            if int_overlaps(&regions_q[i], &regions_q[j]) {
                return Err(TilingError::NotPartition("region boxes overlap".into()));
            }
        }
    }
    let mut order: Vec<usize> = (0..tiles_q.len()).collect();
    order.sort_by(|a, b| tiles_q[*a].0.cmp(&tiles_q[*b].0));
    for (pos, &i) in order.iter().enumerate() {
        for &j in order[(pos + 1)..].iter() {
            if tiles_q[j].0[0] >= tiles_q[i].1[0] {
                break;
            }
            if int_overlaps(&tiles_q[i], &tiles_q[j]) {
                return Err(TilingError::NotPartition(format!(
                    "tiles {:?} and {:?} overlap",
                    tiles[i], tiles[j]
                )));
            }
        }
    }
    let tile_total: QuadNum = tiles.iter().fold(QuadNum::zero(), |acc, t| acc + t.volume());
    let region_total: QuadNum = region.iter().fold(QuadNum::zero(), |acc, r| acc + r.volume());
    if tile_total != region_total {
        return Err(TilingError::NotPartition(format!(
            "volume mismatch: tiles {} vs region {}",
            tile_total, region_total
        )));
    }
    Ok(())
}
