//! Rokhlin tower hierarchies inside a finite window, and the regular
//! {1, α} tiling built on top of them: canonical-node window snapping,
//! ε-shift extension of inner tilings, the truncated limit tiling, and
//! the θ matchings between tile types.
//!
//! The hierarchy is built top-down (coarsest squares first), so the
//! containment of each level inside the shrunken next level holds by
//! construction and no orphan squares appear at window boundaries.

use crate::diophantine::{extend_interval, n_of_eps, DiophantineError, SegLabel};
use crate::exactnum::QuadNum;
use crate::geometry::{GeometryError, Point, Rect, Window};
use crate::tiling::{
    all_tile_types, canonical_tiling, RegularTile, RegularTiling, TileType, TilingError,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TowerError {
    #[error("window too small for the tower: needs side ≥ {needed}, got {got}")]
    WindowTooSmall { needed: String, got: String },
    #[error("snap conflict: {0}")]
    SnapConflict(String),
    #[error("audit failed: {0}")]
    AuditFailed(String),
    #[error("tower spec invalid: {0:?}")]
    SpecInvalid(Vec<String>),
    #[error(transparent)]
    Tiling(#[from] TilingError),
    #[error(transparent)]
    Diophantine(#[from] DiophantineError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Parameters of one tower level: margins and half-sides, all multiples
/// of κ = 1 + α.
#[derive(Clone, Debug, Serialize)]
pub struct TowerLevel {
    pub b: QuadNum,
    pub l: QuadNum,
    pub btilde: QuadNum,
    #[serde(serialize_with = "ser_ratio")]
    pub eps: BigRational,
}

fn ser_ratio<S: serde::Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    [r.numer().to_string(), r.denom().to_string()].serialize(s)
}

/// The sequences (b_k, l_k, ε_k, b̃_k) of a tower hierarchy; index 0 is
/// the finest level 1.
#[derive(Clone, Debug, Serialize)]
pub struct TowerSpec {
    pub dim: usize,
    pub levels: Vec<TowerLevel>,
}

impl TowerSpec {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &TowerLevel {
        &self.levels[k - 1]
    }

    /// Default schedule: ε_k = 2^{-k}, b_k the smallest κ-multiple at
    /// least N(ε_k) + 2κ plus `margin` extra κ, b̃_k the smallest
    /// κ-multiple ≥ b_k + 2l_{k−1}, and l_k large enough to hold
    /// `children_per_axis` child squares with snapping slack.
    pub fn with_defaults(dim: usize, depth: usize, margin: u64, children_per_axis: u64) -> TowerSpec {
        let kappa = QuadNum::kappa();
        let two_kappa = QuadNum::from_int(2) * &kappa;
        let mut levels: Vec<TowerLevel> = Vec::with_capacity(depth);
        let mut l_prev = QuadNum::zero();
        for k in 1..=depth {
            let eps = BigRational::new(BigInt::one(), BigInt::from(2u8).pow(k as u32).into());
            let b = (n_of_eps(&eps) + &two_kappa).ceil_multiple(&kappa)
                + QuadNum::from_int(margin as i64) * &kappa;
            let btilde = (&b + &(QuadNum::from_int(2) * &l_prev)).ceil_multiple(&kappa);
            let needed = &b
                + &(QuadNum::from_int(children_per_axis as i64 + 1) * &l_prev)
                + QuadNum::from_int(children_per_axis as i64) * &kappa;
            let l = btilde.clone().max(needed.ceil_multiple(&kappa));
            levels.push(TowerLevel { b, l: l.clone(), btilde, eps });
            l_prev = l;
        }
        TowerSpec { dim, levels }
    }

    /// R_k = [-l_k, l_k)^d.
    pub fn square(&self, k: usize) -> Rect {
        Rect::centered_cube(self.dim, self.level(k).l.clone())
    }
}

/// Check every structural constraint of a tower spec; empty result
/// means valid.
pub fn validate_spec(spec: &TowerSpec) -> Vec<String> {
    let kappa = QuadNum::kappa();
    let two_kappa = QuadNum::from_int(2) * &kappa;
    let mut violations = Vec::new();
    let mut l_prev = QuadNum::zero();
    let mut eps_prev: Option<BigRational> = None;
    let mut eps_sum = BigRational::zero();
    for (i, level) in spec.levels.iter().enumerate() {
        let k = i + 1;
        if !is_kappa_multiple(&level.b) {
            violations.push(format!("b_{} = {} is not a multiple of 1+α", k, level.b));
        }
        if level.b < n_of_eps(&level.eps) + &two_kappa {
            violations.push(format!("b_{} = {} < N(ε_{}) + 2(1+α)", k, level.b, k));
        }
        if !is_kappa_multiple(&level.l) {
            violations.push(format!("l_{} = {} is not a multiple of 1+α", k, level.l));
        }
        if level.l < level.btilde {
            violations.push(format!("l_{} = {} < b̃_{}", k, level.l, k));
        }
        if level.btilde < &level.b + &(QuadNum::from_int(2) * &l_prev) {
            violations.push(format!("b̃_{} = {} < b_{} + 2·l_{}", k, level.btilde, k, k - 1));
        }
        if let Some(prev) = &eps_prev {
            if &level.eps >= prev {
                violations.push(format!("ε_{} is not strictly below ε_{}", k, k - 1));
            }
        }
        eps_sum += &level.eps;
        eps_prev = Some(level.eps.clone());
        l_prev = level.l.clone();
    }
    if eps_sum >= BigRational::one() {
        violations.push(format!("Σ ε_k = {} is not below 1", eps_sum));
    }
    violations
}

fn is_kappa_multiple(x: &QuadNum) -> bool {
    let q = x.div(&QuadNum::kappa());
    q.is_rational() && q.rat().is_integer() && q.sign() != Ordering::Less
}

/// One square of the hierarchy, anchored by its center.
#[derive(Clone, Debug, Serialize)]
pub struct TowerSquare {
    pub level: usize,
    pub center: Point,
    pub parent: Option<usize>,
}

/// The nested family C_K ⊇ ... ⊇ C_1 of tower squares in a window.
#[derive(Clone, Debug, Serialize)]
pub struct TowerFamily {
    pub window: Window,
    pub spec: TowerSpec,
    pub squares: Vec<TowerSquare>,
}

impl TowerFamily {
    pub fn level_squares(&self, k: usize) -> Vec<usize> {
        (0..self.squares.len()).filter(|i| self.squares[*i].level == k).collect()
    }

    pub fn children_of(&self, idx: usize) -> Vec<usize> {
        (0..self.squares.len())
            .filter(|i| self.squares[*i].parent == Some(idx))
            .collect()
    }

    /// The full square c + R_k.
    pub fn square_rect(&self, idx: usize) -> Rect {
        let sq = &self.squares[idx];
        self.spec.square(sq.level).translate(&sq.center.0)
    }

    /// The tiled region c + R_k^{←b_k}.
    pub fn shrunk_rect(&self, idx: usize) -> Rect {
        let sq = &self.squares[idx];
        let level = self.spec.level(sq.level);
        self.spec
            .square(sq.level)
            .shrink(&level.b)
            .expect("b < l by spec validation")
            .translate(&sq.center.0)
    }

    /// Exact audit of the tower properties: per-level R_k-lacunarity,
    /// deep containment of every square in its parent's shrunken
    /// square, and at least one child per square above level 1.
    pub fn audit(&self) -> Result<(), TowerError> {
        let depth = self.spec.depth();
        for k in 1..=depth {
            let idxs = self.level_squares(k);
            let body = self.spec.square(k);
            for a in 0..idxs.len() {
                for b in (a + 1)..idxs.len() {
                    let ca = &self.squares[idxs[a]].center;
                    let cb = &self.squares[idxs[b]].center;
                    if self.window.translates_overlap(ca, cb, &body) {
                        return Err(TowerError::AuditFailed(format!(
                            "level {} squares at {:?} and {:?} are not R-lacunary",
                            k, ca, cb
                        )));
                    }
                }
            }
        }
        for idx in 0..self.squares.len() {
            let sq = &self.squares[idx];
            if let Some(parent) = sq.parent {
                let parent_level = self.spec.level(self.squares[parent].level);
                let region = self
                    .square_rect(parent)
                    .shrink(&parent_level.b)
                    .expect("spec margins");
                if !region.contains_rect(&self.square_rect(idx)) {
                    return Err(TowerError::AuditFailed(format!(
                        "square {} is not deep inside its parent", idx
                    )));
                }
            }
            if sq.level > 1 {
                let children = self.children_of(idx);
                if children.is_empty() {
                    return Err(TowerError::AuditFailed(format!(
                        "square {} at level {} has no child", idx, sq.level
                    )));
                }
                for child in children {
                    if !self.square_rect(idx).contains(&self.squares[child].center) {
                        return Err(TowerError::AuditFailed(format!(
                            "child {} center is outside parent square {}", child, idx
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Fraction of each parent's shrunken square covered by its child
    /// squares, as exact values in ℚ[√2].
    pub fn coverage_by_parent(&self) -> Vec<(usize, QuadNum)> {
        let mut out = Vec::new();
        for idx in 0..self.squares.len() {
            if self.squares[idx].level == 1 {
                continue;
            }
            let level = self.spec.level(self.squares[idx].level);
            let region = self.square_rect(idx).shrink(&level.b).expect("spec margins");
            let mut covered = QuadNum::zero();
            for child in self.children_of(idx) {
                covered += &self.square_rect(child).volume();
            }
            out.push((idx, covered.div(&region.volume())));
        }
        out
    }
}

/// Build the tower family top-down: level-K squares on a centered grid
/// in the window, then recursively children on centered grids deep
/// inside each parent's shrunken square (with κ slack per side so that
/// window snapping can never push a window out of the gridded region).
pub fn build_towers(window: &Window, spec: &TowerSpec) -> Result<TowerFamily, TowerError> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(TowerError::SpecInvalid(violations));
    }
    let depth = spec.depth();
    let mut family = TowerFamily {
        window: window.clone(),
        spec: spec.clone(),
        squares: Vec::new(),
    };
    if depth == 0 {
        return Ok(family);
    }
    let kappa = QuadNum::kappa();
    let region = window.fundamental_domain();
    let l_top = &spec.level(depth).l;
    let needed = QuadNum::from_int(4) * l_top;
    for axis in 0..spec.dim {
        if region.side(axis) < needed {
            return Err(TowerError::WindowTooSmall {
                needed: needed.to_string(),
                got: region.side(axis).to_string(),
            });
        }
    }
    for c in centered_grid(&region, l_top, &kappa) {
        family.squares.push(TowerSquare { level: depth, center: c, parent: None });
    }
    for k in (1..depth).rev() {
        let l_child = spec.level(k).l.clone();
        let parents = family.level_squares(k + 1);
        for parent in parents {
            let b_parent = spec.level(k + 1).b.clone();
            let center_region = family
                .square_rect(parent)
                .shrink(&(&b_parent + &kappa))
                .expect("spec margins");
            for c in centered_grid(&center_region, &l_child, &kappa) {
                family.squares.push(TowerSquare { level: k, center: c, parent: Some(parent) });
            }
        }
    }
    family.audit()?;
    Ok(family)
}

/// Centers of as many side-2l squares as fit in `region` with 2κ gaps
/// between them, the whole block centered.
fn centered_grid(region: &Rect, l: &QuadNum, kappa: &QuadNum) -> Vec<Point> {
    let d = region.dim();
    let two_l = QuadNum::from_int(2) * l;
    let spacing = &two_l + &(QuadNum::from_int(2) * kappa);
    let mut axis_centers: Vec<Vec<QuadNum>> = Vec::with_capacity(d);
    for axis in 0..d {
        let side = region.side(axis);
        let n = if side < two_l {
            0
        } else {
            ((&side - &two_l).div(&spacing)).floor_int().to_u64().unwrap() + 1
        };
        if n == 0 {
            return Vec::new();
        }
        let block = QuadNum::from_int(n as i64 - 1) * &spacing + &two_l;
        let margin = (&side - &block).div(&QuadNum::from_int(2));
        let centers = (0..n)
            .map(|j| &region.lo[axis] + &margin + l.clone() + QuadNum::from_int(j as i64) * &spacing)
            .collect();
        axis_centers.push(centers);
    }
    let mut out: Vec<Vec<QuadNum>> = vec![Vec::new()];
    for centers in &axis_centers {
        let mut next = Vec::new();
        for prefix in &out {
            for c in centers {
                let mut p = prefix.clone();
                p.push(c.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(Point).collect()
}

/// Result of snapping child squares to canonical grid nodes.
#[derive(Clone, Debug, Serialize)]
pub struct SnapReport {
    pub windows: Vec<Rect>,
    /// True when the deterministic push-to-next-node fallback fired.
    pub fallback_used: bool,
}

/// Choose, for every child square, a congruent "window" whose corners
/// lie on the canonical-tiling nodes of `region`, within 1+α of the
/// child per axis and pairwise disjoint.
///
/// Rule: round each corner to the nearest node with ties toward −∞;
/// on overlap, children are processed in lex order and later ones move
/// to the nearest free node tuple.
pub fn snap_windows(region: &Rect, children: &[Rect]) -> Result<SnapReport, TowerError> {
    let kappa = QuadNum::kappa();
    let d = region.dim();
    let mut order: Vec<usize> = (0..children.len()).collect();
    order.sort_by(|a, b| children[*a].lo.cmp(&children[*b].lo));
    let mut windows: Vec<Option<Rect>> = vec![None; children.len()];
    let mut fallback_used = false;
    for &ci in &order {
        let child = &children[ci];
        let sides = child.sides();
        let mut axis_candidates: Vec<Vec<QuadNum>> = Vec::with_capacity(d);
        for axis in 0..d {
            let rel = &child.lo[axis] - &region.lo[axis];
            let hi_limit = &region.side(axis) - &sides[axis];
            let mut nodes = nodes_near(&rel, &kappa);
            nodes.retain(|v| v.sign() != Ordering::Less && *v <= hi_limit);
            if nodes.is_empty() {
                return Err(TowerError::SnapConflict(format!(
                    "no admissible node for child {:?} on axis {}", child, axis
                )));
            }
            nodes.sort_by(|a, b| (a - &rel).abs().cmp(&(b - &rel).abs()).then(a.cmp(b)));
            axis_candidates.push(nodes);
        }
        let mut tuples: Vec<Vec<QuadNum>> = vec![Vec::new()];
        for cands in &axis_candidates {
            let mut next = Vec::new();
            for prefix in &tuples {
                for c in cands {
                    let mut p = prefix.clone();
                    p.push(c.clone());
                    next.push(p);
                }
            }
            tuples = next;
        }
        tuples.sort_by(|a, b| {
            let da = sup_dist_to(a, child, region);
            let db = sup_dist_to(b, child, region);
            da.cmp(&db).then(a.cmp(b))
        });
        let mut placed = false;
        for (rank, tuple) in tuples.iter().enumerate() {
            let dist = sup_dist_to(tuple, child, region);
            if dist > kappa {
                break;
            }
            let corner: Vec<QuadNum> = tuple
                .iter()
                .enumerate()
                .map(|(axis, v)| &region.lo[axis] + v)
                .collect();
            let candidate = Rect::anchored(&Point(corner), &sides);
            let clear = windows.iter().flatten().all(|w| !candidate.overlaps(w));
            if clear {
                if rank > 0 {
                    fallback_used = true;
                }
                windows[ci] = Some(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(TowerError::SnapConflict(format!(
                "no disjoint window within 1+α for child {:?}", child
            )));
        }
    }
    Ok(SnapReport {
        windows: windows.into_iter().map(Option::unwrap).collect(),
        fallback_used,
    })
}

fn sup_dist_to(tuple: &[QuadNum], child: &Rect, region: &Rect) -> QuadNum {
    let mut best = QuadNum::zero();
    for (axis, v) in tuple.iter().enumerate() {
        let rel = &child.lo[axis] - &region.lo[axis];
        let d = (v - &rel).abs();
        if d > best {
            best = d;
        }
    }
    best
}

/// Canonical nodes {jκ, jκ+1} near `x` (a coordinate relative to the
/// gridded region's corner).
fn nodes_near(x: &QuadNum, kappa: &QuadNum) -> Vec<QuadNum> {
    let j = x.div(kappa).floor_int();
    let mut out = Vec::new();
    for dj in -2i64..=2 {
        let base = QuadNum::from_bigint(&j + BigInt::from(dj)) * kappa;
        out.push(base.clone());
        out.push(base + QuadNum::one());
    }
    out.sort();
    out.dedup();
    out
}

/// Accumulated shift of every square, with the per-level increments
/// that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct ShiftLedger {
    /// Per square: accumulated shift vector.
    pub accumulated: Vec<Vec<QuadNum>>,
    /// (square, extension level k, increment vector), in build order.
    pub increments: Vec<(usize, usize, Vec<QuadNum>)>,
}

impl ShiftLedger {
    fn new(squares: usize, dim: usize) -> Self {
        ShiftLedger {
            accumulated: vec![vec![QuadNum::zero(); dim]; squares],
            increments: Vec::new(),
        }
    }

    fn record(&mut self, square: usize, level: usize, delta: &[QuadNum]) {
        for (acc, d) in self.accumulated[square].iter_mut().zip(delta) {
            *acc += d;
        }
        self.increments.push((square, level, delta.to_vec()));
    }

    pub fn sup_norm(v: &[QuadNum]) -> QuadNum {
        v.iter().fold(QuadNum::zero(), |best, x| best.max(x.abs()))
    }

    /// Every increment at level k is bounded by ε_k and every
    /// accumulated shift by Σ ε_k.
    pub fn check_bounds(&self, spec: &TowerSpec) -> Result<(), TowerError> {
        for (square, level, delta) in &self.increments {
            let eps = QuadNum::from_big_rational(spec.level(*level).eps.clone());
            if Self::sup_norm(delta) > eps {
                return Err(TowerError::AuditFailed(format!(
                    "shift increment of square {} at level {} exceeds ε", square, level
                )));
            }
        }
        let total: BigRational = spec
            .levels
            .iter()
            .fold(BigRational::zero(), |acc, l| acc + &l.eps);
        let bound = QuadNum::from_big_rational(total);
        for (square, acc) in self.accumulated.iter().enumerate() {
            if Self::sup_norm(acc) > bound {
                return Err(TowerError::AuditFailed(format!(
                    "accumulated shift of square {} exceeds Σ ε_k", square
                )));
            }
        }
        Ok(())
    }
}

/// Bijections from 1⃗-tiles onto ā-tiles, one per type, as index pairs
/// into the tiling's tile list. The unit-type entry is the identity.
#[derive(Clone, Debug, Serialize)]
pub struct ThetaMatching {
    pub types: Vec<TileType>,
    pub pairs: Vec<Vec<(usize, usize)>>,
}

impl ThetaMatching {
    pub fn theta(&self, type_idx: usize, one_tile: usize) -> Option<usize> {
        self.pairs[type_idx]
            .iter()
            .find(|(o, _)| *o == one_tile)
            .map(|(_, t)| *t)
    }
}

/// Everything the truncated limit produces.
#[derive(Debug, Serialize)]
pub struct LimitTiling {
    pub tiling: RegularTiling,
    pub theta: ThetaMatching,
    pub ledger: ShiftLedger,
    /// Owner square of every tile (index into the family).
    pub tile_owner: Vec<usize>,
    /// Bound on the shifts a deeper hierarchy would still apply; equals
    /// Σ_{k>K} ε_k for the default geometric schedule.
    #[serde(serialize_with = "ser_ratio")]
    pub residual_shift_bound: BigRational,
    /// True when window snapping ever used the push-to-next-node rule.
    pub snap_fallback_used: bool,
}

/// Mutable state threaded through the level extensions.
pub struct BuildState {
    tiles: Vec<RegularTile>,
    owner: Vec<usize>,
    square_tiles: Vec<Vec<usize>>,
    ledger: ShiftLedger,
    theta: ThetaMatching,
    snap_fallback_used: bool,
}

impl BuildState {
    fn push_tile(&mut self, tile: RegularTile, square: usize) -> usize {
        let id = self.tiles.len();
        self.tiles.push(tile);
        self.owner.push(square);
        self.square_tiles[square].push(id);
        id
    }

    /// Translate a square's subtree of tiles and record the increments.
    fn shift_subtree(&mut self, family: &TowerFamily, square: usize, level: usize, delta: &[QuadNum]) {
        let mut stack = vec![square];
        while let Some(s) = stack.pop() {
            for id in &self.square_tiles[s] {
                let anchor = &mut self.tiles[*id].anchor;
                *anchor = anchor.translate(delta);
            }
            self.ledger.record(s, level, delta);
            stack.extend(family.children_of(s));
        }
    }

    /// Match new 1⃗-tiles against new ā-tiles, lex order on anchors.
    fn extend_theta(&mut self, new_tiles: &[usize]) {
        let types = self.theta.types.clone();
        let mut ones: Vec<usize> = new_tiles
            .iter()
            .copied()
            .filter(|id| self.tiles[*id].tile_type.iter().all(|l| *l == SegLabel::One))
            .collect();
        ones.sort_by(|a, b| self.tiles[*a].anchor.cmp(&self.tiles[*b].anchor));
        for (ti, ty) in types.iter().enumerate() {
            if ty.iter().all(|l| *l == SegLabel::One) {
                for id in &ones {
                    self.theta.pairs[ti].push((*id, *id));
                }
                continue;
            }
            let mut targets: Vec<usize> = new_tiles
                .iter()
                .copied()
                .filter(|id| self.tiles[*id].tile_type == *ty)
                .collect();
            targets.sort_by(|a, b| self.tiles[*a].anchor.cmp(&self.tiles[*b].anchor));
            assert_eq!(ones.len(), targets.len(), "type counts must be equal");
            for (o, t) in ones.iter().zip(targets) {
                self.theta.pairs[ti].push((*o, t));
            }
        }
    }
}

/// Tile the base level: each level-1 square's shrunken interior gets
/// the canonical tiling, with zero shift.
fn base_level(family: &TowerFamily, state: &mut BuildState) -> Result<(), TowerError> {
    for idx in family.level_squares(1) {
        let region = family.shrunk_rect(idx);
        let tiling = canonical_tiling(&family.window, &region)?;
        let mut new_tiles = Vec::new();
        for tile in tiling.tiles {
            new_tiles.push(state.push_tile(tile, idx));
        }
        state.extend_theta(&new_tiles);
    }
    Ok(())
}

/// Extend the tilings of level-k shrunken squares to every level-(k+1)
/// shrunken square: snap windows around the children, shift each
/// child's content by ≤ ε_k so its tiling extends to its window, and
/// fill the remaining canonical cells of the parent grid.
pub fn extend_level(
    family: &TowerFamily,
    state: &mut BuildState,
    k: usize,
) -> Result<(), TowerError> {
    let spec = &family.spec;
    let d = spec.dim;
    let eps = &spec.level(k).eps;
    let level = spec.level(k);
    let inner_len = QuadNum::from_int(2) * &(&level.l - &level.b);
    let window_len = QuadNum::from_int(2) * &level.l;
    for parent in family.level_squares(k + 1) {
        let b_parent = &spec.level(k + 1).b;
        let region = family.square_rect(parent).shrink(b_parent)?;
        let children = family.children_of(parent);
        let child_rects: Vec<Rect> = children.iter().map(|c| family.square_rect(*c)).collect();
        let snap = snap_windows(&region, &child_rects)?;
        state.snap_fallback_used |= snap.fallback_used;
        let mut new_tiles: Vec<usize> = Vec::new();
        for (pos, &child) in children.iter().enumerate() {
            let window_rect = &snap.windows[pos];
            let inner = family.shrunk_rect(child);
            let mut delta = Vec::with_capacity(d);
            let mut axis_segments: Vec<Vec<(QuadNum, SegLabel, bool)>> = Vec::with_capacity(d);
            for axis in 0..d {
                let a = &inner.lo[axis] - &window_rect.lo[axis];
                let ext = extend_interval(&a, &inner_len, &window_len, eps)?;
                delta.push(ext.delta.clone());
                let mut segments = Vec::new();
                for (part, is_middle) in
                    [(&ext.before, false), (&ext.middle, true), (&ext.after, false)]
                {
                    let mut pos_abs = &window_rect.lo[axis] + &part.start;
                    for label in &part.labels {
                        segments.push((pos_abs.clone(), *label, is_middle));
                        pos_abs += &label.length();
                    }
                }
                axis_segments.push(segments);
            }
            state.shift_subtree(family, child, k, &delta);
            let mut cells: Vec<(Vec<QuadNum>, TileType, bool)> =
                vec![(Vec::new(), Vec::new(), true)];
            for segments in &axis_segments {
                let mut next = Vec::new();
                for (anchor, ty, all_middle) in &cells {
                    for (pos_abs, label, is_middle) in segments {
                        let mut a = anchor.clone();
                        a.push(pos_abs.clone());
                        let mut t = ty.clone();
                        t.push(*label);
                        next.push((a, t, *all_middle && *is_middle));
                    }
                }
                cells = next;
            }
            for (anchor, tile_type, all_middle) in cells {
                if all_middle {
                    continue;
                }
                let id = state.push_tile(RegularTile { anchor: Point(anchor), tile_type }, parent);
                new_tiles.push(id);
            }
        }
        // fill: canonical cells of the parent grid not inside any window
        let grid = canonical_tiling(&family.window, &region)?;
        for cell in grid.tiles {
            let rect = cell.rect();
            if snap.windows.iter().any(|w| w.contains_rect(&rect)) {
                continue;
            }
            let id = state.push_tile(cell, parent);
            new_tiles.push(id);
        }
        state.extend_theta(&new_tiles);
    }
    Ok(())
}

/// Run the whole construction: base canonical tilings, K−1 extension
/// steps, and the θ matchings, returning the truncated limit tiling of
/// the top-level shrunken squares with the shift ledger attached.
pub fn limit_tiling(family: &TowerFamily) -> Result<LimitTiling, TowerError> {
    let depth = family.spec.depth();
    let d = family.spec.dim;
    let mut state = BuildState {
        tiles: Vec::new(),
        owner: Vec::new(),
        square_tiles: vec![Vec::new(); family.squares.len()],
        ledger: ShiftLedger::new(family.squares.len(), d),
        theta: ThetaMatching {
            types: all_tile_types(d),
            pairs: vec![Vec::new(); 1 << d],
        },
        snap_fallback_used: false,
    };
    if depth > 0 {
        base_level(family, &mut state)?;
        for k in 1..depth {
            extend_level(family, &mut state, k)?;
        }
    }
    let region: Vec<Rect> = family
        .level_squares(depth)
        .into_iter()
        .map(|idx| family.shrunk_rect(idx))
        .collect();
    let tiling = RegularTiling {
        window: family.window.clone(),
        region,
        tiles: state.tiles,
    };
    let residual = family
        .spec
        .levels
        .last()
        .map(|l| l.eps.clone())
        .unwrap_or_else(BigRational::zero);
    Ok(LimitTiling {
        tiling,
        theta: state.theta,
        ledger: state.ledger,
        tile_owner: state.owner,
        residual_shift_bound: residual,
        snap_fallback_used: state.snap_fallback_used,
    })
}

/// Audit a finished limit tiling: exact partition of the top shrunken
/// squares, per-region equal type counts, θ bijectivity with correct
/// types inside one fragment, and ledger bounds.
pub fn audit_limit(family: &TowerFamily, limit: &LimitTiling) -> Result<(), TowerError> {
    limit.tiling.audit()?;
    limit.ledger.check_bounds(&family.spec)?;
    // per-square type counts on the integer-ranked boxes
    let tile_rects: Vec<Rect> = limit.tiling.tiles.iter().map(RegularTile::rect).collect();
    let square_rects: Vec<Rect> = (0..family.squares.len())
        .map(|idx| {
            family
                .shrunk_rect(idx)
                .translate(&limit.ledger.accumulated[idx])
        })
        .collect();
    let quantized = crate::tiling::quantize_boxes(family.spec.dim, &[&tile_rects, &square_rects]);
    let (tiles_q, squares_q) = (&quantized.groups[0], &quantized.groups[1]);
    let types = all_tile_types(family.spec.dim);
    let type_of: Vec<usize> = limit
        .tiling
        .tiles
        .iter()
        .map(|t| types.iter().position(|ty| *ty == t.tile_type).unwrap())
        .collect();
    for (idx, square) in squares_q.iter().enumerate() {
        let mut counts = vec![0usize; types.len()];
        for (tq, ty) in tiles_q.iter().zip(&type_of) {
            let inside = square
                .0
                .iter()
                .zip(&tq.0)
                .all(|(s, t)| s <= t)
                && square.1.iter().zip(&tq.1).all(|(s, t)| t <= s);
            if inside {
                counts[*ty] += 1;
            }
        }
        let first = counts[0];
        if counts.iter().any(|n| *n != first) {
            return Err(TowerError::AuditFailed(format!(
                "unequal type counts {:?} inside square {}", counts, idx
            )));
        }
        if first == 0 {
            return Err(TowerError::AuditFailed(format!(
                "square {} contains no tiles", idx
            )));
        }
    }
    for (ti, pairs) in limit.theta.pairs.iter().enumerate() {
        let ty = &limit.theta.types[ti];
        let mut sources: Vec<usize> = pairs.iter().map(|(o, _)| *o).collect();
        let mut targets: Vec<usize> = pairs.iter().map(|(_, t)| *t).collect();
        sources.sort_unstable();
        targets.sort_unstable();
        sources.dedup();
        targets.dedup();
        if sources.len() != pairs.len() || targets.len() != pairs.len() {
            return Err(TowerError::AuditFailed("θ is not injective".into()));
        }
        for (o, t) in pairs {
            let one = &limit.tiling.tiles[*o];
            let tgt = &limit.tiling.tiles[*t];
            if !one.tile_type.iter().all(|l| *l == SegLabel::One) || tgt.tile_type != *ty {
                return Err(TowerError::AuditFailed("θ pairs wrong tile types".into()));
            }
            if top_ancestor(family, limit.tile_owner[*o])
                != top_ancestor(family, limit.tile_owner[*t])
            {
                return Err(TowerError::AuditFailed(
                    "θ pairs tiles from different fragments".into(),
                ));
            }
        }
    }
    Ok(())
}

fn top_ancestor(family: &TowerFamily, mut square: usize) -> usize {
    while let Some(p) = family.squares[square].parent {
        square = p;
    }
    square
}

/// Fraction of the window volume covered by the top-level squares and
/// by the tiled (shrunken) region.
#[derive(Debug, Serialize)]
pub struct CoverageReport {
    pub top_squares: QuadNum,
    pub tiled_region: QuadNum,
}

pub fn coverage_report(family: &TowerFamily) -> CoverageReport {
    let depth = family.spec.depth();
    let window_vol = family.window.volume();
    let mut top = QuadNum::zero();
    let mut tiled = QuadNum::zero();
    if depth > 0 {
        for idx in family.level_squares(depth) {
            top += &family.square_rect(idx).volume();
            tiled += &family.shrunk_rect(idx).volume();
        }
    }
    CoverageReport {
        top_squares: top.div(&window_vol),
        tiled_region: tiled.div(&window_vol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_window(d: usize, side: QuadNum) -> Window {
        Window::Box {
            rect: Rect::new(vec![QuadNum::zero(); d], vec![side; d]),
        }
    }

    fn kappa_times(n: i64) -> QuadNum {
        QuadNum::from_int(n) * QuadNum::kappa()
    }

    #[test]
    fn default_spec_is_valid() {
        for (d, depth) in [(1, 3), (2, 2), (2, 3), (3, 2)] {
            let spec = TowerSpec::with_defaults(d, depth, 1, 2);
            let violations = validate_spec(&spec);
            assert!(violations.is_empty(), "{:?}", violations);
        }
    }

    #[test]
    fn validate_reports_violations() {
        let mut spec = TowerSpec::with_defaults(2, 2, 1, 2);
        spec.levels[0].b = QuadNum::from_int(7);
        let v = validate_spec(&spec);
        assert!(v.iter().any(|s| s.contains("not a multiple")));

        let mut spec = TowerSpec::with_defaults(2, 2, 1, 2);
        spec.levels[1].btilde = kappa_times(1);
        spec.levels[1].l = kappa_times(1);
        let v = validate_spec(&spec);
        assert!(!v.is_empty());
    }

    #[test]
    fn build_one_level_family() {
        let spec = TowerSpec::with_defaults(1, 1, 1, 2);
        let window = box_window(1, QuadNum::from_int(8) * &spec.levels[0].l);
        let family = build_towers(&window, &spec).unwrap();
        assert!(!family.squares.is_empty());
        assert!(family.squares.iter().all(|s| s.level == 1));
        family.audit().unwrap();
    }

    #[test]
    fn build_rejects_small_window() {
        let spec = TowerSpec::with_defaults(2, 2, 1, 2);
        let window = box_window(2, spec.levels[1].l.clone());
        assert!(matches!(
            build_towers(&window, &spec),
            Err(TowerError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn build_two_levels_d1_and_audit() {
        let spec = TowerSpec::with_defaults(1, 2, 1, 2);
        let window = box_window(1, QuadNum::from_int(5) * &spec.levels[1].l);
        let family = build_towers(&window, &spec).unwrap();
        family.audit().unwrap();
        for idx in family.level_squares(1) {
            let parent = family.squares[idx].parent.unwrap();
            let shrunk = family
                .square_rect(parent)
                .shrink(&family.spec.levels[1].b)
                .unwrap();
            assert!(shrunk.contains_rect(&family.square_rect(idx)));
        }
    }

    #[test]
    fn empty_spec_gives_empty_family() {
        let spec = TowerSpec { dim: 1, levels: Vec::new() };
        let window = box_window(1, QuadNum::from_int(10));
        let family = build_towers(&window, &spec).unwrap();
        assert!(family.squares.is_empty());
        let limit = limit_tiling(&family).unwrap();
        assert!(limit.tiling.tiles.is_empty());
    }

    #[test]
    fn snap_examples() {
        let kappa = QuadNum::kappa();
        let region = Rect::new(vec![QuadNum::zero(); 2], vec![kappa_times(10); 2]);
        // child already on grid nodes: unchanged
        let on_grid = Rect::anchored(
            &Point(vec![kappa_times(2), &kappa_times(3) + &QuadNum::one()]),
            &[kappa_times(2), kappa_times(2)],
        );
        let snap = snap_windows(&region, &[on_grid.clone()]).unwrap();
        assert_eq!(snap.windows[0], on_grid);
        assert!(!snap.fallback_used);

        // generic child: nearest-node snap within (1+α)/2 per axis
        let child = Rect::anchored(
            &Point(vec![QuadNum::from_ratio(9, 2), QuadNum::from_ratio(21, 4)]),
            &[kappa_times(2), kappa_times(2)],
        );
        let snap = snap_windows(&region, &[child.clone()]).unwrap();
        for axis in 0..2 {
            let moved = (&snap.windows[0].lo[axis] - &child.lo[axis]).abs();
            assert!(moved <= kappa.div(&QuadNum::from_int(2)));
        }

        // two children far apart: both snapped, disjoint
        let c1 = Rect::anchored(
            &Point(vec![QuadNum::from_ratio(1, 3); 2]),
            &[kappa_times(2), kappa_times(2)],
        );
        let c2 = Rect::anchored(
            &Point(vec![kappa_times(6); 2]),
            &[kappa_times(2), kappa_times(2)],
        );
        let snap = snap_windows(&region, &[c1, c2]).unwrap();
        assert!(!snap.windows[0].overlaps(&snap.windows[1]));
    }

    #[test]
    fn snap_fallback_keeps_disjoint() {
        let kappa = QuadNum::kappa();
        let region = Rect::new(vec![QuadNum::zero()], vec![kappa_times(12)]);
        // adjacent children whose nearest nodes collide
        let c1 = Rect::anchored(&Point(vec![&kappa_times(2) + &QuadNum::from_ratio(1, 3)]), &[kappa_times(2)]);
        let c2 = Rect::anchored(&Point(vec![&kappa_times(4) + &QuadNum::from_ratio(1, 4)]), &[kappa_times(2)]);
        let snap = snap_windows(&region, &[c1.clone(), c2.clone()]).unwrap();
        assert!(!snap.windows[0].overlaps(&snap.windows[1]));
        for (w, c) in snap.windows.iter().zip([&c1, &c2]) {
            let moved = (&w.lo[0] - &c.lo[0]).abs();
            assert!(moved <= kappa);
        }
    }

    #[test]
    fn limit_tiling_d1_two_levels() {
        let spec = TowerSpec::with_defaults(1, 2, 1, 2);
        let window = box_window(1, QuadNum::from_int(5) * &spec.levels[1].l);
        let family = build_towers(&window, &spec).unwrap();
        let limit = limit_tiling(&family).unwrap();
        audit_limit(&family, &limit).unwrap();
        let counts = limit.tiling.type_counts();
        assert_eq!(counts[0].1, counts[1].1);
        assert!(counts[0].1 > 0);
    }

    #[test]
    fn limit_tiling_d2_two_levels() {
        let spec = TowerSpec::with_defaults(2, 2, 1, 2);
        let window = box_window(2, QuadNum::from_int(5) * &spec.levels[1].l);
        let family = build_towers(&window, &spec).unwrap();
        let limit = limit_tiling(&family).unwrap();
        audit_limit(&family, &limit).unwrap();
        let counts = limit.tiling.type_counts();
        let first = counts[0].1;
        assert!(first > 0);
        for (_, n) in &counts {
            assert_eq!(*n, first);
        }
        // θ_a followed by its inverse is the identity on 1⃗-tiles
        for pairs in &limit.theta.pairs {
            for (o, t) in pairs {
                let back = pairs.iter().find(|(_, t2)| t2 == t).unwrap().0;
                assert_eq!(back, *o);
            }
        }
    }

    #[test]
    fn coverage_report_is_exact() {
        let spec = TowerSpec::with_defaults(1, 1, 1, 2);
        let window = box_window(1, QuadNum::from_int(8) * &spec.levels[0].l);
        let family = build_towers(&window, &spec).unwrap();
        let report = coverage_report(&family);
        let n = family.squares.len() as i64;
        let expected = (QuadNum::from_int(2 * n) * &spec.levels[0].l)
            .div(&(QuadNum::from_int(8) * &spec.levels[0].l));
        assert_eq!(report.top_squares, expected);
    }
}
