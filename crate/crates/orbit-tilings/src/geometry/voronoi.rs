//! Exact Lebesgue measure of sup-metric Voronoi cells.
//!
//! Under the sup-metric every ownership boundary lies on a line of slope
//! 0, ±1 or ∞ whose constant is in ℚ[√2]: the per-axis absolute values
//! branch on axis lines through each (lifted) section point, and every
//! pairwise comparison of branch functions equates two affine maps. The
//! d = 2 routine therefore decomposes the query rectangle into vertical
//! slabs cut at all pairwise line crossings; inside a slab the surviving
//! lines are non-crossing, each trapezoid between consecutive lines has
//! a constant owner, and its area is a polynomial in the corner
//! coordinates. Everything stays in exact arithmetic.

use super::{voronoi_owner_index_with, CrossSection, Point, Rect, Window};
use crate::exactnum::QuadNum;
use std::cmp::Ordering;

/// Exact areas of `cell(c) ∩ query` for every section point, d = 2.
///
/// The query rectangle may wrap on a torus; it is decomposed into
/// fundamental-domain pieces first.
pub fn voronoi_areas_in_rect(window: &Window, section: &CrossSection, query: &Rect) -> Vec<QuadNum> {
    assert_eq!(window.dim(), 2, "slab decomposition is d=2 only");
    assert!(!section.is_empty());
    let mut areas = vec![QuadNum::zero(); section.len()];
    let origin = Point::origin(2);
    for piece in window.translate_pieces(&origin, query) {
        slab_areas(window, section, &piece, &mut areas);
    }
    areas
}

/// Exact lengths of `cell(c) ∩ query` for every section point, d = 1.
pub fn voronoi_lengths_in_interval(
    window: &Window,
    section: &CrossSection,
    query: &Rect,
) -> Vec<QuadNum> {
    assert_eq!(window.dim(), 1, "interval arithmetic is d=1 only");
    assert!(!section.is_empty());
    let cells = cell_intervals_1d(window, section);
    let origin = Point::origin(1);
    let mut out = vec![QuadNum::zero(); section.len()];
    for piece in window.translate_pieces(&origin, query) {
        for (idx, segments) in &cells {
            for (a, b) in segments {
                let lo = a.clone().max(piece.lo[0].clone());
                let hi = b.clone().min(piece.hi[0].clone());
                if lo < hi {
                    out[*idx] += &(hi - lo);
                }
            }
        }
    }
    out
}

/// Per section point, the cell as segments of the fundamental domain.
/// Boundary midpoints are measure zero, so the tie-break order does not
/// affect the lengths.
fn cell_intervals_1d(window: &Window, section: &CrossSection) -> Vec<(usize, Vec<(QuadNum, QuadNum)>)> {
    let region = window.fundamental_domain();
    let half = QuadNum::from_ratio(1, 2);
    let mut indexed: Vec<(QuadNum, usize)> = section
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (window.wrap(p).0[0].clone(), i))
        .collect();
    indexed.sort_by(|a, b| a.0.cmp(&b.0));
    let n = indexed.len();
    let mut cells = Vec::with_capacity(n);
    match window {
        Window::Box { .. } => {
            for i in 0..n {
                let lo = if i == 0 {
                    region.lo[0].clone()
                } else {
                    (&indexed[i - 1].0 + &indexed[i].0) * &half
                };
                let hi = if i + 1 == n {
                    region.hi[0].clone()
                } else {
                    (&indexed[i].0 + &indexed[i + 1].0) * &half
                };
                cells.push((indexed[i].1, vec![(lo, hi)]));
            }
        }
        Window::Torus { periods } => {
            let period = &periods[0];
            if n == 1 {
                cells.push((indexed[0].1, vec![(region.lo[0].clone(), region.hi[0].clone())]));
            } else {
                for i in 0..n {
                    let prev = if i == 0 { n - 1 } else { i - 1 };
                    let next = (i + 1) % n;
                    // midpoint toward the previous point, wrapping below 0
                    let lo = if i == 0 {
                        (&indexed[prev].0 - period + &indexed[0].0) * &half
                    } else {
                        (&indexed[prev].0 + &indexed[i].0) * &half
                    };
                    // midpoint toward the next point, wrapping past the period
                    let hi = if i + 1 == n {
                        (&indexed[i].0 + period + &indexed[next].0) * &half
                    } else {
                        (&indexed[i].0 + &indexed[next].0) * &half
                    };
                    let mut segments = Vec::new();
                    if lo.sign() == Ordering::Less {
                        segments.push((&lo + period, period.clone()));
                        segments.push((QuadNum::zero(), hi.clone()));
                    } else if hi > *period {
                        segments.push((lo.clone(), period.clone()));
                        segments.push((QuadNum::zero(), &hi - period));
                    } else {
                        segments.push((lo.clone(), hi.clone()));
                    }
                    cells.push((indexed[i].1, segments));
                }
            }
        }
    }
    cells
}

/// A non-vertical boundary candidate y = slope·x + intercept.
#[derive(Clone, PartialEq, Eq)]
struct Line {
    slope: i8, // -1, 0, or 1
    intercept: QuadNum,
}

impl Line {
    fn eval(&self, x: &QuadNum) -> QuadNum {
        match self.slope {
            0 => self.intercept.clone(),
            1 => x + &self.intercept,
            -1 => &self.intercept - x,
            _ => unreachable!(),
        }
    }
}

fn lifts(window: &Window, section: &CrossSection) -> Vec<Point> {
    match window {
        Window::Box { .. } => section.points.clone(),
        Window::Torus { periods } => {
            let mut out = Vec::new();
            for p in &section.points {
                let w = window.wrap(p);
                for k0 in -1i64..=1 {
                    for k1 in -1i64..=1 {
                        out.push(Point(vec![
                            &w.0[0] + &(QuadNum::from_int(k0) * periods[0].clone()),
                            &w.0[1] + &(QuadNum::from_int(k1) * periods[1].clone()),
                        ]));
                    }
                }
            }
            out
        }
    }
}

fn slab_areas(window: &Window, section: &CrossSection, piece: &Rect, areas: &mut [QuadNum]) {
    let half = QuadNum::from_ratio(1, 2);
    let lifted = lifts(window, section);

    let mut verticals: Vec<QuadNum> = vec![piece.lo[0].clone(), piece.hi[0].clone()];
    let mut lines: Vec<Line> = vec![
        Line { slope: 0, intercept: piece.lo[1].clone() },
        Line { slope: 0, intercept: piece.hi[1].clone() },
    ];

    let push_line = |lines: &mut Vec<Line>, slope: i8, intercept: QuadNum| {
        lines.push(Line { slope, intercept });
    };

    for q in &lifted {
        verticals.push(q.0[0].clone());
        push_line(&mut lines, 0, q.0[1].clone());
        push_line(&mut lines, 1, &q.0[1] - &q.0[0]);
        push_line(&mut lines, -1, &q.0[0] + &q.0[1]);
    }
    for i in 0..lifted.len() {
        for j in (i + 1)..lifted.len() {
            let (q, r) = (&lifted[i], &lifted[j]);
            if q.0[0] != r.0[0] {
                verticals.push((&q.0[0] + &r.0[0]) * &half);
            }
            if q.0[1] != r.0[1] {
                push_line(&mut lines, 0, (&q.0[1] + &r.0[1]) * &half);
            }
            push_line(&mut lines, 1, &r.0[1] - &q.0[0]);
            push_line(&mut lines, -1, &q.0[0] + &r.0[1]);
            push_line(&mut lines, 1, &q.0[1] - &r.0[0]);
            push_line(&mut lines, -1, &r.0[0] + &q.0[1]);
        }
    }

    lines.sort_by(|a, b| a.slope.cmp(&b.slope).then(a.intercept.cmp(&b.intercept)));
    lines.dedup();

    // Clip verticals to the piece and add every crossing of two
    // non-parallel lines; between consecutive verticals nothing crosses.
    verticals.retain(|v| *v >= piece.lo[0] && *v <= piece.hi[0]);
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (a, b) = (&lines[i], &lines[j]);
            if a.slope == b.slope {
                continue;
            }
            let dm = QuadNum::from_int(a.slope as i64) - QuadNum::from_int(b.slope as i64);
            let x = (&b.intercept - &a.intercept).div(&dm);
            if x > piece.lo[0] && x < piece.hi[0] {
                verticals.push(x);
            }
        }
    }
    verticals.sort();
    verticals.dedup();

    for w in 0..verticals.len().saturating_sub(1) {
        let (xl, xr) = (&verticals[w], &verticals[w + 1]);
        if xl >= xr {
            continue;
        }
        let xm = (xl + xr) * &half;
        // lines present in this slab, ordered by height at the midpoint
        let mut present: Vec<(QuadNum, &Line)> = lines
            .iter()
            .map(|l| (l.eval(&xm), l))
            .filter(|(y, _)| *y >= piece.lo[1] && *y <= piece.hi[1])
            .collect();
        present.sort_by(|a, b| a.0.cmp(&b.0));
        present.dedup_by(|a, b| a.0 == b.0);
        let width = xr - xl;
        for t in 0..present.len().saturating_sub(1) {
            let (ym_lo, lo_line) = (&present[t].0, present[t].1);
            let (ym_hi, hi_line) = (&present[t + 1].0, present[t + 1].1);
            if ym_lo >= ym_hi {
                continue;
            }
            let gap_l = &hi_line.eval(xl) - &lo_line.eval(xl);
            let gap_r = &hi_line.eval(xr) - &lo_line.eval(xr);
            let area = &width * &((&gap_l + &gap_r) * &half);
            let sample = Point(vec![xm.clone(), (ym_lo + ym_hi) * &half]);
            let idx = voronoi_owner_index_with(window, section, &sample, &|a, b| a.cmp(b));
            areas[idx] += &area;
        }
    }
}
