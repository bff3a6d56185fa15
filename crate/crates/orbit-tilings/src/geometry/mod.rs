//! Half-open rectangles, windows (boxes and flat tori standing in for
//! orbit fragments), the shrink operator, lacunarity and cocompactness
//! predicates, and Voronoi tessellation with order tie-breaking.
//!
//! The metric is the sup-metric throughout (box-shaped balls), with
//! per-axis wraparound on torus windows, so every predicate here is
//! decidable by exact rectangle arithmetic in ℚ[√2].

mod voronoi;

pub use voronoi::{voronoi_areas_in_rect, voronoi_lengths_in_interval};

use crate::exactnum::QuadNum;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("shrink by {0} degenerates the rectangle")]
    DegenerateShrink(String),
    #[error("operation requires dimension {expected}, got {got}")]
    UnsupportedDim { expected: usize, got: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cross section is empty")]
    EmptySection,
    #[error("lacunarity body must be symmetric about the origin")]
    AsymmetricBody,
    #[error("point is not in the cross section")]
    NotInSection,
}

/// A point of ℝ^d with coordinates in ℚ[√2].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point(pub Vec<QuadNum>);

impl Point {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn origin(d: usize) -> Self {
        Point(vec![QuadNum::zero(); d])
    }

    pub fn coords(&self) -> &[QuadNum] {
        &self.0
    }

    pub fn translate(&self, v: &[QuadNum]) -> Point {
        Point(self.0.iter().zip(v).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Vec<QuadNum> {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", c)?;
        }
        write!(f, ")")
    }
}

/// The half-open product ∏ᵢ [loᵢ, hiᵢ).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Vec<QuadNum>,
    pub hi: Vec<QuadNum>,
}

impl Rect {
    /// Panics if `lo[i] >= hi[i]` for some axis; rectangles are nonempty.
    pub fn new(lo: Vec<QuadNum>, hi: Vec<QuadNum>) -> Self {
        assert_eq!(lo.len(), hi.len());
        for (l, h) in lo.iter().zip(&hi) {
            assert!(l < h, "empty rectangle: [{}, {})", l, h);
        }
        Rect { lo, hi }
    }

    /// The cube [-h, h)^d.
    pub fn centered_cube(d: usize, h: QuadNum) -> Self {
        Rect::new(vec![-h.clone(); d], vec![h; d])
    }

    /// The box [lo, lo + size) anchored at its bottom-left corner.
    pub fn anchored(corner: &Point, sizes: &[QuadNum]) -> Self {
        Rect::new(
            corner.0.clone(),
            corner.0.iter().zip(sizes).map(|(c, s)| c + s).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, axis: usize) -> QuadNum {
        &self.hi[axis] - &self.lo[axis]
    }

    pub fn sides(&self) -> Vec<QuadNum> {
        (0..self.dim()).map(|i| self.side(i)).collect()
    }

    pub fn volume(&self) -> QuadNum {
        let mut v = QuadNum::one();
        for i in 0..self.dim() {
            v *= &self.side(i);
        }
        v
    }

    pub fn corner(&self) -> Point {
        Point(self.lo.clone())
    }

    pub fn center(&self) -> Point {
        let half = QuadNum::from_ratio(1, 2);
        Point(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| (l + h) * &half)
                .collect(),
        )
    }

    /// Membership with the lower-closed, upper-open convention.
    pub fn contains(&self, p: &Point) -> bool {
        p.0.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| l <= x && x < h)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    pub fn translate(&self, v: &[QuadNum]) -> Rect {
        Rect {
            lo: self.lo.iter().zip(v).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(v).map(|(a, b)| a + b).collect(),
        }
    }

    /// Intersection, or None when empty.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let l = self.lo[i].clone().max(other.lo[i].clone());
            let h = self.hi[i].clone().min(other.hi[i].clone());
            if l >= h {
                return None;
            }
            lo.push(l);
            hi.push(h);
        }
        Some(Rect { lo, hi })
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        (0..self.dim()).all(|i| self.lo[i] < other.hi[i] && other.lo[i] < self.hi[i])
    }

    /// R^{←b}: every edge shrunk by `b` at both ends.
    pub fn shrink(&self, b: &QuadNum) -> Result<Rect, GeometryError> {
        assert!(b.sign() != Ordering::Less, "shrink amount must be nonnegative");
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let l = &self.lo[i] + b;
            let h = &self.hi[i] - b;
            if l >= h {
                return Err(GeometryError::DegenerateShrink(b.to_string()));
            }
            lo.push(l);
            hi.push(h);
        }
        Ok(Rect { lo, hi })
    }

    /// Minkowski sum of half-open boxes: [a,b) ⊕ [c,d) = [a+c, b+d).
    pub fn minkowski_sum(&self, other: &Rect) -> Rect {
        Rect {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a + b).collect(),
        }
    }

    /// True when lo = -hi on every axis.
    pub fn is_symmetric(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| *l == -h)
    }
}

/// A finite fragment of one orbit: either a box in ℝ^d or a flat torus
/// (ℝ/L₁ℤ) × ⋯ × (ℝ/L_dℤ) whose fundamental domain is [0, Lᵢ) per axis.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    Box { rect: Rect },
    Torus { periods: Vec<QuadNum> },
}

impl Window {
    pub fn torus(periods: Vec<QuadNum>) -> Self {
        for p in &periods {
            assert!(p.sign() == Ordering::Greater, "torus periods must be positive");
        }
        Window::Torus { periods }
    }

    pub fn square_torus(d: usize, period: QuadNum) -> Self {
        Window::torus(vec![period; d])
    }

    pub fn dim(&self) -> usize {
        match self {
            Window::Box { rect } => rect.dim(),
            Window::Torus { periods } => periods.len(),
        }
    }

    /// The region carrying the geometry: the box itself, or the
    /// fundamental domain [0, L)^d of the torus.
    pub fn fundamental_domain(&self) -> Rect {
        match self {
            Window::Box { rect } => rect.clone(),
            Window::Torus { periods } => Rect::new(
                vec![QuadNum::zero(); periods.len()],
                periods.clone(),
            ),
        }
    }

    pub fn volume(&self) -> QuadNum {
        self.fundamental_domain().volume()
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Window::Box { rect } => rect.contains(p),
            Window::Torus { .. } => true,
        }
    }

    /// Canonical representative with every torus coordinate wrapped into
    /// [0, Lᵢ); the identity on box windows.
    pub fn wrap(&self, p: &Point) -> Point {
        match self {
            Window::Box { .. } => p.clone(),
            Window::Torus { periods } => Point(
                p.0.iter()
                    .zip(periods)
                    .map(|(x, period)| x.rem_euclid(period))
                    .collect(),
            ),
        }
    }

    /// Per-axis displacement distance: |Δ| on a box, min-lift |Δ + kL| on
    /// a torus.
    pub fn axis_dist(&self, delta: &QuadNum, axis: usize) -> QuadNum {
        match self {
            Window::Box { .. } => delta.abs(),
            Window::Torus { periods } => {
                let period = &periods[axis];
                let r = delta.rem_euclid(period);
                let other = period - &r;
                r.min(other)
            }
        }
    }

    /// Sup-metric displacement distance between two points.
    pub fn dist(&self, x: &Point, y: &Point) -> QuadNum {
        let mut best = QuadNum::zero();
        for (axis, d) in y.sub(x).iter().enumerate() {
            let a = self.axis_dist(d, axis);
            if a > best {
                best = a;
            }
        }
        best
    }

    /// Whether `delta` lies in [lo, hi) on `axis`, allowing torus lifts.
    pub fn axis_in_interval(&self, delta: &QuadNum, lo: &QuadNum, hi: &QuadNum, axis: usize) -> bool {
        match self {
            Window::Box { .. } => lo <= delta && delta < hi,
            Window::Torus { periods } => {
                let len = hi - lo;
                if len >= periods[axis] {
                    return true;
                }
                (delta - lo).rem_euclid(&periods[axis]) < len
            }
        }
    }

    /// Whether `x ∈ c + body` in this window.
    pub fn translate_contains(&self, c: &Point, body: &Rect, x: &Point) -> bool {
        let delta = x.sub(c);
        (0..self.dim()).all(|i| self.axis_in_interval(&delta[i], &body.lo[i], &body.hi[i], i))
    }

    /// Whether the translates `a + body` and `b + body` intersect.
    ///
    /// Two translates of the same half-open box overlap iff the (lifted)
    /// displacement is smaller than the side on every axis.
    pub fn translates_overlap(&self, a: &Point, b: &Point, body: &Rect) -> bool {
        let delta = b.sub(a);
        (0..self.dim()).all(|i| self.axis_dist(&delta[i], i) < body.side(i))
    }

    /// Decompose `c + body` into non-wrapping boxes inside the fundamental
    /// domain (at most 2^d pieces on a torus; clipped to the box otherwise).
    pub fn translate_pieces(&self, c: &Point, body: &Rect) -> Vec<Rect> {
        let abs = body.translate(&c.0);
        match self {
            Window::Box { rect } => abs.intersect(rect).into_iter().collect(),
            Window::Torus { periods } => {
                // Per-axis split of [lo, hi) mod L into intervals of [0, L).
                let mut axis_parts: Vec<Vec<(QuadNum, QuadNum)>> = Vec::new();
                for i in 0..self.dim() {
                    let period = &periods[i];
                    let len = abs.side(i);
                    if len >= *period {
                        axis_parts.push(vec![(QuadNum::zero(), period.clone())]);
                        continue;
                    }
                    let start = abs.lo[i].rem_euclid(period);
                    let end = &start + &len;
                    if end <= *period {
                        axis_parts.push(vec![(start, end)]);
                    } else {
                        axis_parts.push(vec![
                            (QuadNum::zero(), &end - period),
                            (start, period.clone()),
                        ]);
                    }
                }
                let mut pieces = vec![Rect {
                    lo: Vec::new(),
                    hi: Vec::new(),
                }];
                for parts in axis_parts {
                    let mut next = Vec::new();
                    for piece in &pieces {
                        for (l, h) in &parts {
                            let mut lo = piece.lo.clone();
                            let mut hi = piece.hi.clone();
                            lo.push(l.clone());
                            hi.push(h.clone());
                            next.push(Rect { lo, hi });
                        }
                    }
                    pieces = next;
                }
                pieces
            }
        }
    }
}

/// A finite set of distinct points in a window, linearly ordered.
///
/// The default order is lexicographic on coordinates; operations that
/// break ties accept an explicit comparator instead when tests need one.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CrossSection {
    pub points: Vec<Point>,
}

impl CrossSection {
    /// Panics on duplicate points; cross-section points are pairwise
    /// distinct by definition.
    pub fn new(points: Vec<Point>) -> Self {
        let mut sorted = points.clone();
        sorted.sort();
        for w in sorted.windows(2) {
            assert!(w[0] != w[1], "cross section points must be distinct");
        }
        CrossSection { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.points.iter()
    }
}

/// An assignment of query points to their owning cross-section points.
#[derive(Clone, Debug, Serialize)]
pub struct VoronoiCellAssignment {
    pub owners: Vec<(Point, Point)>,
}

/// True iff the translates c + U are pairwise disjoint in the window
/// metric. `U` must be symmetric about the origin.
pub fn is_lacunary(window: &Window, section: &CrossSection, body: &Rect) -> Result<bool, GeometryError> {
    if !body.is_symmetric() {
        return Err(GeometryError::AsymmetricBody);
    }
    for i in 0..section.len() {
        for j in (i + 1)..section.len() {
            if window.translates_overlap(&section.points[i], &section.points[j], body) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// True iff every window point lies in some c + V, decided exactly by
/// rectangle-cover analysis of the fundamental domain.
pub fn is_cocompact(window: &Window, section: &CrossSection, body: &Rect) -> bool {
    if section.is_empty() {
        return false;
    }
    let region = window.fundamental_domain();
    let mut pieces = Vec::new();
    for c in section.iter() {
        for piece in window.translate_pieces(c, body) {
            if let Some(clipped) = piece.intersect(&region) {
                pieces.push(clipped);
            }
        }
    }
    rects_cover_region(&region, &pieces)
}

/// Exact cover check: do `pieces` (half-open boxes inside `region`)
/// jointly cover every point of `region`?
///
/// The grid generated by all piece bounds refines every piece, so a grid
/// cell is covered iff its lower corner is.
pub fn rects_cover_region(region: &Rect, pieces: &[Rect]) -> bool {
    let d = region.dim();
    let mut axes: Vec<Vec<QuadNum>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut coords = vec![region.lo[i].clone(), region.hi[i].clone()];
        for p in pieces {
            for v in [&p.lo[i], &p.hi[i]] {
                if *v > region.lo[i] && *v < region.hi[i] {
                    coords.push(v.clone());
                }
            }
        }
        coords.sort();
        coords.dedup();
        axes.push(coords);
    }
    let mut idx = vec![0usize; d];
    loop {
        let corner = Point((0..d).map(|i| axes[i][idx[i]].clone()).collect());
        if !pieces.iter().any(|p| p.contains(&corner)) {
            return false;
        }
        // advance the mixed-radix counter over grid cells
        let mut axis = 0;
        loop {
            if axis == d {
                return true;
            }
            idx[axis] += 1;
            if idx[axis] + 1 < axes[axis].len() {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Exact disjointness audit for a family of non-wrapping boxes.
pub fn rects_pairwise_disjoint(pieces: &[Rect]) -> bool {
    for i in 0..pieces.len() {
        for j in (i + 1)..pieces.len() {
            if pieces[i].overlaps(&pieces[j]) {
                return false;
            }
        }
    }
    true
}

/// The owning cross-section point of `x`: the closest one in the window
/// sup-metric, ties resolved by the lexicographic order on coordinates.
pub fn voronoi_owner(window: &Window, section: &CrossSection, x: &Point) -> Result<Point, GeometryError> {
    voronoi_owner_with(window, section, x, &|a, b| a.cmp(b))
}

/// As [`voronoi_owner`] with an injected tie-break order.
pub fn voronoi_owner_with(
    window: &Window,
    section: &CrossSection,
    x: &Point,
    order: &dyn Fn(&Point, &Point) -> Ordering,
) -> Result<Point, GeometryError> {
    if section.is_empty() {
        return Err(GeometryError::EmptySection);
    }
    let idx = voronoi_owner_index_with(window, section, x, order);
    Ok(section.points[idx].clone())
}

/// Index into `section.points` of the owner of `x`. The section must be
/// nonempty.
pub(crate) fn voronoi_owner_index_with(
    window: &Window,
    section: &CrossSection,
    x: &Point,
    order: &dyn Fn(&Point, &Point) -> Ordering,
) -> usize {
    let mut best: Option<(QuadNum, usize)> = None;
    for (i, c) in section.iter().enumerate() {
        let d = window.dist(x, c);
        best = match best {
            None => Some((d, i)),
            Some((bd, bi)) => match d.cmp(&bd) {
                Ordering::Less => Some((d, i)),
                Ordering::Equal if order(c, &section.points[bi]) == Ordering::Less => Some((d, i)),
                _ => Some((bd, bi)),
            },
        };
    }
    best.unwrap().1
}

/// Owner assignment for a batch of query points.
pub fn voronoi_assignment(
    window: &Window,
    section: &CrossSection,
    queries: &[Point],
) -> Result<VoronoiCellAssignment, GeometryError> {
    let owners = queries
        .iter()
        .map(|q| voronoi_owner(window, section, q).map(|o| (q.clone(), o)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VoronoiCellAssignment { owners })
}

/// How a Voronoi cell measure is computed.
#[derive(Clone, Copy, Debug)]
pub enum MeasureMode {
    /// Exact area by slab decomposition; d = 2 only.
    Exact2d,
    /// Seeded Monte-Carlo estimate with the given sample count.
    MonteCarlo { samples: u32, seed: u64 },
}

/// Result of a cell measure computation.
#[derive(Clone, Debug, Serialize)]
pub struct CellMeasure {
    pub value: QuadNum,
    pub exact: bool,
    pub samples: Option<u32>,
}

/// Measure of the Voronoi cell of `c`, exactly (d = 2) or by Monte-Carlo.
pub fn voronoi_cell_measure(
    window: &Window,
    section: &CrossSection,
    c: &Point,
    mode: MeasureMode,
) -> Result<CellMeasure, GeometryError> {
    if !section.points.contains(c) {
        return Err(GeometryError::NotInSection);
    }
    match mode {
        MeasureMode::Exact2d => {
            if window.dim() != 2 {
                return Err(GeometryError::UnsupportedDim {
                    expected: 2,
                    got: window.dim(),
                });
            }
            let region = window.fundamental_domain();
            let areas = voronoi_areas_in_rect(window, section, &region);
            let idx = section.points.iter().position(|p| p == c).unwrap();
            Ok(CellMeasure {
                value: areas[idx].clone(),
                exact: true,
                samples: None,
            })
        }
        MeasureMode::MonteCarlo { samples, seed } => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let region = window.fundamental_domain();
            let mut hits = 0u64;
            for _ in 0..samples {
                let p = Point(
                    (0..window.dim())
                        .map(|i| {
                            let t = QuadNum::from_ratio(rng.gen_range(0..1u64 << 32) as i64, 1)
                                * QuadNum::from_ratio(1, 1i64 << 32);
                            &region.lo[i] + &(t * region.side(i))
                        })
                        .collect(),
                );
                if voronoi_owner(window, section, &p)? == *c {
                    hits += 1;
                }
            }
            let frac = QuadNum::from_ratio(hits as i64, samples.max(1) as i64);
            Ok(CellMeasure {
                value: frac * window.volume(),
                exact: false,
                samples: Some(samples),
            })
        }
    }
}
