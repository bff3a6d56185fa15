//! Greedy construction of maximal U-lacunary cross-sections on a
//! window, plus the independence partition used to schedule enlargement.
//!
//! The countable dense family of the infinite construction becomes a
//! deterministic candidate stream: a grid whose mesh halves every round
//! (optionally jittered from a seed), or an explicit point list for
//! tests. A candidate is accepted exactly when adding it keeps the
//! section U-lacunary, so the output is maximal along the stream and,
//! once the mesh is fine enough, U²-cocompact on the window.

use crate::exactnum::QuadNum;
use crate::geometry::{is_cocompact, is_lacunary, CrossSection, GeometryError, Point, Rect, Window};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CrossSectionError {
    #[error("input cross section is not lacunary for the given body")]
    NotLacunaryInput,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Deterministic dense enumeration of window points.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateStream {
    /// Row-major grid over the fundamental domain; the mesh halves each
    /// round. With `jitter_seed` the grid origin is offset by a seeded
    /// rational in [0, mesh) per axis, freshly drawn every round.
    Grid {
        base_mesh: QuadNum,
        jitter_seed: Option<u64>,
    },
    /// A fixed list of candidates, visited once in order.
    Explicit { points: Vec<Point> },
}

/// Configuration of the greedy enlargement.
#[derive(Clone, Debug, Serialize)]
pub struct LacunaryConfig {
    /// Symmetric lacunarity body U.
    pub body: Rect,
    /// Candidate enumeration.
    pub stream: CandidateStream,
}

/// Assignment of section points to color classes with no W-edge inside
/// any class.
#[derive(Clone, Debug, Serialize)]
pub struct IndependencePartition {
    pub classes: Vec<Vec<Point>>,
}

impl IndependencePartition {
    pub fn class_of(&self, p: &Point) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(p))
    }
}

/// Greedy coloring of the proximity graph F_W = {(x, y) : y ∈ x + W}:
/// each point takes the smallest color absent among its already-colored
/// W-neighbors, so the class count is at most maxdegree + 1.
pub fn independent_partition(
    window: &Window,
    section: &CrossSection,
    w: &Rect,
) -> Result<IndependencePartition, CrossSectionError> {
    if !w.is_symmetric() {
        return Err(CrossSectionError::Geometry(GeometryError::AsymmetricBody));
    }
    let mut colors: Vec<usize> = Vec::with_capacity(section.len());
    let mut n_colors = 0usize;
    for (i, p) in section.iter().enumerate() {
        let mut used = vec![false; n_colors];
        for (j, other) in section.iter().enumerate().take(i) {
            let delta = other.sub(p);
            let neighbor =
                (0..window.dim()).all(|ax| window.axis_in_interval(&delta[ax], &w.lo[ax], &w.hi[ax], ax));
            if neighbor {
                used[colors[j]] = true;
            }
        }
        let color = used.iter().position(|u| !u).unwrap_or(n_colors);
        if color == n_colors {
            n_colors += 1;
        }
        colors.push(color);
    }
    let mut classes = vec![Vec::new(); n_colors];
    for (i, p) in section.iter().enumerate() {
        classes[colors[i]].push(p.clone());
    }
    Ok(IndependencePartition { classes })
}

/// Outcome of [`extend_to_maximal`], with the cocompactness certificate
/// for the doubled body.
#[derive(Clone, Debug, Serialize)]
pub struct ExtensionReport {
    pub section: CrossSection,
    pub accepted: usize,
    pub rounds: u32,
    /// Whether U² = U ⊕ U covers the window from the result.
    pub u2_cocompact: bool,
}

/// Enlarge a U-lacunary cross section by greedily accepting stream
/// candidates that keep U-lacunarity. Deterministic given the stream.
pub fn extend_to_maximal(
    window: &Window,
    section: &CrossSection,
    cfg: &LacunaryConfig,
    rounds: u32,
) -> Result<ExtensionReport, CrossSectionError> {
    if !is_lacunary(window, section, &cfg.body)? {
        return Err(CrossSectionError::NotLacunaryInput);
    }
    let mut points = section.points.clone();
    let mut accepted = 0usize;
    let consider = |points: &mut Vec<Point>, candidate: Point, accepted: &mut usize| {
        if !window.contains(&candidate) {
            return;
        }
        let candidate = window.wrap(&candidate);
        if points.contains(&candidate) {
            return;
        }
        let clear = points
            .iter()
            .all(|p| !window.translates_overlap(p, &candidate, &cfg.body));
        if clear {
            points.push(candidate);
            *accepted += 1;
        }
    };
    let rounds_run = match &cfg.stream {
        CandidateStream::Explicit { points: cands } => {
            for c in cands {
                consider(&mut points, c.clone(), &mut accepted);
            }
            1
        }
        CandidateStream::Grid { base_mesh, jitter_seed } => {
            for round in 0..rounds {
                let mesh = base_mesh.div(&QuadNum::from_bigint(num_bigint::BigInt::from(2u8).pow(round)));
                let offsets: Vec<QuadNum> = match jitter_seed {
                    None => vec![QuadNum::zero(); window.dim()],
                    Some(seed) => {
                        let mut rng =
                            rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(round as u64));
                        (0..window.dim())
                            .map(|_| {
                                QuadNum::from_ratio(rng.gen_range(0..1024i64), 1024) * &mesh
                            })
                            .collect()
                    }
                };
                for candidate in grid_points(window, &mesh, &offsets) {
                    consider(&mut points, candidate, &mut accepted);
                }
            }
            rounds
        }
    };
    let result = CrossSection::new(points);
    let u2 = cfg.body.minkowski_sum(&cfg.body);
    let u2_cocompact = is_cocompact(window, &result, &u2);
    Ok(ExtensionReport {
        section: result,
        accepted,
        rounds: rounds_run,
        u2_cocompact,
    })
}

/// Row-major grid over the fundamental domain.
fn grid_points(window: &Window, mesh: &QuadNum, offsets: &[QuadNum]) -> Vec<Point> {
    let region = window.fundamental_domain();
    let d = window.dim();
    let mut axis_coords: Vec<Vec<QuadNum>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut coords = Vec::new();
        let count = region.side(i).div(mesh).floor_int().to_u64().unwrap_or(0);
        for j in 0..=count {
            let x = &region.lo[i] + &(QuadNum::from_int(j as i64) * mesh) + offsets[i].clone();
            if x < region.hi[i] {
                coords.push(x);
            }
        }
        axis_coords.push(coords);
    }
    let mut pts: Vec<Vec<QuadNum>> = vec![Vec::new()];
    for coords in &axis_coords {
        let mut next = Vec::new();
        for prefix in &pts {
            for c in coords {
                let mut p = prefix.clone();
                p.push(c.clone());
                next.push(p);
            }
        }
        pts = next;
    }
    pts.into_iter().map(Point).collect()
}
