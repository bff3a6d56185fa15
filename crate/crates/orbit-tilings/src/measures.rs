//! Exact measure transfer between a window and a cross-section: the
//! domain measure ξ(A, c), the lift ν ↦ μ_ν, the pull μ ↦ ν_μ, and the
//! product identities that make the two inverse to each other.
//!
//! Measures are exact rational objects evaluated against rectangle
//! queries, so the transfer identities are asserted as equalities.

use crate::exactnum::QuadNum;
use crate::geometry::{
    is_lacunary, voronoi_areas_in_rect, voronoi_lengths_in_interval, voronoi_owner, CrossSection,
    GeometryError, Point, Rect, Window,
};
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MeasureError {
    #[error("anchor {0} is not part of the tiling's cross section")]
    UnknownAnchor(String),
    #[error("cross section is not lacunary for the given body")]
    NotLacunary,
    #[error("tiling domain of {anchor} does not contain its U-translate (ξ = {got}, λ(U) = {expected})")]
    AdmissibilityViolated { anchor: String, got: String, expected: String },
    #[error("section measure support is not contained in the tiling cross section")]
    SupportMismatch,
    #[error("section weights must be nonnegative")]
    NegativeWeight,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Sample count for the Monte-Carlo fallback (Voronoi domains, d ≥ 3).
pub const XI_MC_SAMPLES: u32 = 20_000;
const XI_MC_SEED: u64 = 0x9e3779b9;

/// A finite measure on a cross section: nonnegative rational weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionMeasure {
    pub weights: BTreeMap<Point, BigRational>,
}

impl Serialize for SectionMeasure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            point: &'a Point,
            weight: [String; 2],
        }
        let entries: Vec<Entry> = self
            .weights
            .iter()
            .map(|(point, w)| Entry {
                point,
                weight: [w.numer().to_string(), w.denom().to_string()],
            })
            .collect();
        entries.serialize(serializer)
    }
}

impl SectionMeasure {
    pub fn new(weights: BTreeMap<Point, BigRational>) -> Result<Self, MeasureError> {
        for w in weights.values() {
            if w < &BigRational::zero() {
                return Err(MeasureError::NegativeWeight);
            }
        }
        Ok(SectionMeasure { weights })
    }

    pub fn zero_on(section: &CrossSection) -> Self {
        SectionMeasure {
            weights: section
                .points
                .iter()
                .map(|p| (p.clone(), BigRational::zero()))
                .collect(),
        }
    }

    pub fn uniform_on(section: &CrossSection, weight: BigRational) -> Result<Self, MeasureError> {
        SectionMeasure::new(
            section
                .points
                .iter()
                .map(|p| (p.clone(), weight.clone()))
                .collect(),
        )
    }

    pub fn weight(&self, p: &Point) -> BigRational {
        self.weights.get(p).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn total_mass(&self) -> BigRational {
        self.weights.values().fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn translate(&self, v: &[QuadNum]) -> SectionMeasure {
        SectionMeasure {
            weights: self
                .weights
                .iter()
                .map(|(p, w)| (p.translate(v), w.clone()))
                .collect(),
        }
    }
}

/// A bounded tiling of the window: every point belongs to the domain
/// of exactly one cross-section point, and domains are uniformly
/// bounded around their anchors.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundedTiling {
    /// Explicit rectangular domains, each given relative to its anchor.
    Rectangular { window: Window, pieces: Vec<(Point, Rect)> },
    /// The Voronoi tessellation of the cross section.
    Voronoi { window: Window, section: CrossSection },
}

impl BoundedTiling {
    pub fn window(&self) -> &Window {
        match self {
            BoundedTiling::Rectangular { window, .. } => window,
            BoundedTiling::Voronoi { window, .. } => window,
        }
    }

    pub fn anchors(&self) -> Vec<Point> {
        match self {
            BoundedTiling::Rectangular { pieces, .. } => {
                pieces.iter().map(|(p, _)| p.clone()).collect()
            }
            BoundedTiling::Voronoi { section, .. } => section.points.clone(),
        }
    }

    pub fn anchor_index(&self, c: &Point) -> Option<usize> {
        self.anchors().iter().position(|p| p == c)
    }

    /// λ(W_c ∩ query) for every anchor at once. Exact except for
    /// Voronoi domains in d ≥ 3, which fall back to seeded Monte-Carlo
    /// with [`XI_MC_SAMPLES`] samples.
    pub fn xi_vector(&self, query: &Rect) -> Vec<QuadNum> {
        match self {
            BoundedTiling::Rectangular { window, pieces } => {
                let origin = Point::origin(window.dim());
                let query_pieces = window.translate_pieces(&origin, query);
                pieces
                    .iter()
                    .map(|(anchor, rel)| {
                        let mut total = QuadNum::zero();
                        for dom in window.translate_pieces(anchor, rel) {
                            for qp in &query_pieces {
                                if let Some(cap) = dom.intersect(qp) {
                                    total += &cap.volume();
                                }
                            }
                        }
                        total
                    })
                    .collect()
            }
            BoundedTiling::Voronoi { window, section } => match window.dim() {
                1 => voronoi_lengths_in_interval(window, section, query),
                2 => voronoi_areas_in_rect(window, section, query),
                _ => xi_monte_carlo(window, section, query),
            },
        }
    }

    /// Exact partition audit of the domains against the window.
    pub fn audit_partition(&self) -> Result<(), MeasureError> {
        match self {
            BoundedTiling::Rectangular { window, pieces } => {
                let region = window.fundamental_domain();
                let mut fragments = Vec::new();
                for (anchor, rel) in pieces {
                    fragments.extend(window.translate_pieces(anchor, rel));
                }
                crate::tiling::audit_partition(&[region], &fragments)
                    .map_err(|e| MeasureError::AdmissibilityViolated {
                        anchor: "partition".into(),
                        got: e.to_string(),
                        expected: "exact partition".into(),
                    })?;
                Ok(())
            }
            // the owner function assigns every point to exactly one cell
            BoundedTiling::Voronoi { .. } => Ok(()),
        }
    }

    /// Def 4.1(iv) at measure level: ξ(c + U, c) = λ(U) for every anchor,
    /// i.e. each domain contains its anchor's U-translate up to null sets.
    pub fn check_admissible(&self, u: &Rect) -> Result<(), MeasureError> {
        let lambda_u = u.volume();
        for (idx, c) in self.anchors().iter().enumerate() {
            let query = u.translate(&c.0);
            let xi = &self.xi_vector(&query)[idx];
            if *xi != lambda_u {
                return Err(MeasureError::AdmissibilityViolated {
                    anchor: format!("{:?}", c),
                    got: xi.to_string(),
                    expected: lambda_u.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn translate(&self, v: &[QuadNum]) -> BoundedTiling {
        match self {
            BoundedTiling::Rectangular { window, pieces } => BoundedTiling::Rectangular {
                window: window.clone(),
                pieces: pieces
                    .iter()
                    .map(|(p, r)| (p.translate(v), r.clone()))
                    .collect(),
            },
            BoundedTiling::Voronoi { window, section } => BoundedTiling::Voronoi {
                window: window.clone(),
                section: CrossSection::new(
                    section.points.iter().map(|p| p.translate(v)).collect(),
                ),
            },
        }
    }
}

fn xi_monte_carlo(window: &Window, section: &CrossSection, query: &Rect) -> Vec<QuadNum> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(XI_MC_SEED);
    let d = window.dim();
    let mut hits = vec![0u64; section.len()];
    for _ in 0..XI_MC_SAMPLES {
        let p = Point(
            (0..d)
                .map(|i| {
                    let t = QuadNum::from_ratio(rng.gen_range(0..1u64 << 32) as i64, 1)
                        * QuadNum::from_ratio(1, 1i64 << 32);
                    &query.lo[i] + &(t * query.side(i))
                })
                .collect(),
        );
        let wrapped = window.wrap(&p);
        let owner = voronoi_owner(window, section, &wrapped).expect("nonempty section");
        let idx = section.points.iter().position(|c| *c == owner).unwrap();
        hits[idx] += 1;
    }
    let vol = query.volume();
    hits.into_iter()
        .map(|h| QuadNum::from_ratio(h as i64, XI_MC_SAMPLES as i64) * &vol)
        .collect()
}

/// A finite measure on the window represented as weighted Lebesgue over
/// a bounded tiling: μ(A) = Σ_c density(c)·λ(W_c ∩ A).
#[derive(Clone, Debug)]
pub struct PhaseMeasure {
    pub tiling: BoundedTiling,
    pub densities: BTreeMap<Point, BigRational>,
}

impl Serialize for PhaseMeasure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            tiling: &'a BoundedTiling,
            densities: Vec<(&'a Point, [String; 2])>,
        }
        Repr {
            tiling: &self.tiling,
            densities: self
                .densities
                .iter()
                .map(|(p, w)| (p, [w.numer().to_string(), w.denom().to_string()]))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl PhaseMeasure {
    /// The globally uniform measure density·λ on the window.
    pub fn uniform(window: &Window, density: BigRational) -> PhaseMeasure {
        let region = window.fundamental_domain();
        let origin = Point::origin(window.dim());
        let mut densities = BTreeMap::new();
        densities.insert(origin.clone(), density);
        PhaseMeasure {
            tiling: BoundedTiling::Rectangular {
                window: window.clone(),
                pieces: vec![(origin, region)],
            },
            densities,
        }
    }

    pub fn measure(&self, query: &Rect) -> QuadNum {
        let xi = self.tiling.xi_vector(query);
        let anchors = self.tiling.anchors();
        let mut total = QuadNum::zero();
        for (idx, c) in anchors.iter().enumerate() {
            if let Some(dens) = self.densities.get(c) {
                if !dens.is_zero() {
                    total += &(QuadNum::from_big_rational(dens.clone()) * &xi[idx]);
                }
            }
        }
        total
    }

    pub fn total(&self) -> QuadNum {
        self.measure(&self.tiling.window().fundamental_domain())
    }

    pub fn translate(&self, v: &[QuadNum]) -> PhaseMeasure {
        PhaseMeasure {
            tiling: self.tiling.translate(v),
            densities: self
                .densities
                .iter()
                .map(|(p, w)| (p.translate(v), w.clone()))
                .collect(),
        }
    }
}

/// ξ(A, c) = λ(W_c ∩ A), the Lebesgue mass the domain of `c` gives to A.
pub fn xi(tiling: &BoundedTiling, query: &Rect, c: &Point) -> Result<QuadNum, MeasureError> {
    let idx = tiling
        .anchor_index(c)
        .ok_or_else(|| MeasureError::UnknownAnchor(format!("{:?}", c)))?;
    Ok(tiling.xi_vector(query).swap_remove(idx))
}

/// Lift a section measure through a bounded tiling:
/// μ_ν(A) = Σ_c ν(c)·ξ(A, c).
pub fn lift(nu: &SectionMeasure, tiling: &BoundedTiling) -> Result<PhaseMeasure, MeasureError> {
    let anchors = tiling.anchors();
    for p in nu.weights.keys() {
        if !anchors.contains(p) {
            return Err(MeasureError::SupportMismatch);
        }
    }
    Ok(PhaseMeasure {
        tiling: tiling.clone(),
        densities: nu.weights.clone(),
    })
}

/// Pull a phase measure back to a U-lacunary cross section:
/// ν_μ({c}) = μ(c + U)/λ(U).
pub fn pull(
    mu: &PhaseMeasure,
    section: &CrossSection,
    u: &Rect,
) -> Result<SectionMeasure, MeasureError> {
    let window = mu.tiling.window();
    if !is_lacunary(window, section, u)? {
        return Err(MeasureError::NotLacunary);
    }
    let lambda_u = u.volume();
    let mut weights = BTreeMap::new();
    for c in section.iter() {
        let query = u.translate(&c.0);
        let mass = mu.measure(&query).div(&lambda_u);
        assert!(
            mass.is_rational(),
            "pull of a rational measure must be rational"
        );
        let w = mass.rat().clone();
        if w < BigRational::zero() {
            return Err(MeasureError::NegativeWeight);
        }
        weights.insert(c.clone(), w);
    }
    Ok(SectionMeasure { weights })
}

/// The pull ν_μ({c}) = μ(c+U)/λ(U) precomputed as exact coefficients
/// over the tiling anchors, so many section measures can be pulled
/// through the same (tiling, section, U) triple without repeating the
/// domain-measure computations.
pub struct PullOperator {
    section: CrossSection,
    anchors: Vec<Point>,
    /// coefficients[i][j] = ξ(cᵢ + U, anchorⱼ)/λ(U)
    coefficients: Vec<Vec<QuadNum>>,
}

impl PullOperator {
    pub fn new(
        tiling: &BoundedTiling,
        section: &CrossSection,
        u: &Rect,
    ) -> Result<PullOperator, MeasureError> {
        let window = tiling.window();
        if !is_lacunary(window, section, u)? {
            return Err(MeasureError::NotLacunary);
        }
        let lambda_u = u.volume();
        let coefficients = section
            .iter()
            .map(|c| {
                tiling
                    .xi_vector(&u.translate(&c.0))
                    .into_iter()
                    .map(|x| x.div(&lambda_u))
                    .collect()
            })
            .collect();
        Ok(PullOperator {
            section: section.clone(),
            anchors: tiling.anchors(),
            coefficients,
        })
    }

    /// Pull the lift of `nu` back to the section: exact and linear in ν.
    pub fn apply(&self, nu: &SectionMeasure) -> Result<SectionMeasure, MeasureError> {
        let mut weights = BTreeMap::new();
        for (c, coeff) in self.section.iter().zip(&self.coefficients) {
            let mut mass = QuadNum::zero();
            for (anchor, x) in self.anchors.iter().zip(coeff) {
                let w = nu.weight(anchor);
                if !w.is_zero() {
                    mass += &(QuadNum::from_big_rational(w) * x);
                }
            }
            assert!(mass.is_rational(), "pull of a rational measure must be rational");
            if mass.rat() < &BigRational::zero() {
                return Err(MeasureError::NegativeWeight);
            }
            weights.insert(c.clone(), mass.rat().clone());
        }
        Ok(SectionMeasure { weights })
    }
}

/// Check the product identity μ_ν|_{U·C} = λ|_U × ν on a basis of
/// product rectangles: for each anchor c and each basis rectangle
/// A ⊆ U, the lifted measure of c + A must factor as λ(A)·ν(c).
///
/// Errors when the tiling is not admissible for U (a domain does not
/// contain its anchor's U-translate).
pub fn product_identity_check(
    nu: &SectionMeasure,
    tiling: &BoundedTiling,
    u: &Rect,
    basis_seed: u64,
) -> Result<bool, MeasureError> {
    tiling.check_admissible(u)?;
    let mu = lift(nu, tiling)?;
    let basis = product_basis(u, basis_seed);
    for c in tiling.anchors() {
        let nu_c = QuadNum::from_big_rational(nu.weight(&c));
        for a in &basis {
            let query = a.translate(&c.0);
            let lhs = mu.measure(&query);
            let rhs = a.volume() * &nu_c;
            if lhs != rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// U itself, its dyadic quarters, and a few seeded rational sub-boxes.
fn product_basis(u: &Rect, seed: u64) -> Vec<Rect> {
    let d = u.dim();
    let half = QuadNum::from_ratio(1, 2);
    let mut basis = vec![u.clone()];
    // dyadic halves per axis combination
    let mut prefixes: Vec<(Vec<QuadNum>, Vec<QuadNum>)> = vec![(Vec::new(), Vec::new())];
    for i in 0..d {
        let mid = (&u.lo[i] + &u.hi[i]) * &half;
        let mut next = Vec::new();
        for (lo, hi) in &prefixes {
            let mut a = (lo.clone(), hi.clone());
            a.0.push(u.lo[i].clone());
            a.1.push(mid.clone());
            next.push(a);
            let mut b = (lo.clone(), hi.clone());
            b.0.push(mid.clone());
            b.1.push(u.hi[i].clone());
            next.push(b);
        }
        prefixes = next;
    }
    basis.extend(prefixes.into_iter().map(|(lo, hi)| Rect::new(lo, hi)));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..3 {
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for i in 0..d {
            let mut a = rng.gen_range(0..64i64);
            let mut b = rng.gen_range(0..64i64);
            if a == b {
                b = (b + 1) % 64;
            }
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let side = u.side(i);
            lo.push(&u.lo[i] + &(QuadNum::from_ratio(a, 64) * &side));
            hi.push(&u.lo[i] + &(QuadNum::from_ratio(b, 64) * &side));
        }
        basis.push(Rect::new(lo, hi));
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> QuadNum {
        QuadNum::from_ratio(n, d)
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn pt1(n: i64, d: i64) -> Point {
        Point(vec![q(n, d)])
    }

    fn torus2() -> Window {
        Window::square_torus(1, q(2, 1))
    }

    fn half_open(lo: (i64, i64), hi: (i64, i64)) -> Rect {
        Rect::new(vec![q(lo.0, lo.1)], vec![q(hi.0, hi.1)])
    }

    fn rect_tiling_on_torus2() -> BoundedTiling {
        BoundedTiling::Rectangular {
            window: torus2(),
            pieces: vec![
                (pt1(0, 1), half_open((-1, 2), (1, 2))),
                (pt1(1, 1), half_open((-1, 2), (1, 2))),
            ],
        }
    }

    fn voronoi_tiling_on_torus2() -> BoundedTiling {
        BoundedTiling::Voronoi {
            window: torus2(),
            section: CrossSection::new(vec![pt1(0, 1), pt1(1, 1)]),
        }
    }

    #[test]
    fn xi_interval_examples() {
        let t = rect_tiling_on_torus2();
        // A = [0, 1/4) inside the domain of 0
        let a = half_open((0, 1), (1, 4));
        assert_eq!(xi(&t, &a, &pt1(0, 1)).unwrap(), q(1, 4));
        // A disjoint from W_0
        let a = half_open((1, 2), (3, 4));
        assert_eq!(xi(&t, &a, &pt1(0, 1)).unwrap(), q(0, 1));
        // A ⊇ W_0 of length 1
        let a = half_open((-1, 2), (1, 2));
        assert_eq!(xi(&t, &a, &pt1(0, 1)).unwrap(), q(1, 1));
        // unknown anchor
        assert!(matches!(
            xi(&t, &a, &pt1(1, 2)),
            Err(MeasureError::UnknownAnchor(_))
        ));
    }

    #[test]
    fn lift_examples() {
        let t = voronoi_tiling_on_torus2();
        let section = CrossSection::new(vec![pt1(0, 1), pt1(1, 1)]);
        let nu = SectionMeasure::uniform_on(&section, rat(1, 2)).unwrap();
        let mu = lift(&nu, &t).unwrap();
        // μ_ν([0, 1/4)) = ν(0)·ξ = 1/2 · 1/4 = 1/8
        assert_eq!(mu.measure(&half_open((0, 1), (1, 4))), q(1, 8));
        // zero measure lifts to zero
        let zero = SectionMeasure::zero_on(&section);
        let mu0 = lift(&zero, &t).unwrap();
        assert_eq!(mu0.total(), QuadNum::zero());
        // total mass: μ_ν(window) = Σ ν(c)·λ(W_c) = 1/2 + 1/2
        assert_eq!(mu.total(), q(1, 1));
    }

    #[test]
    fn pull_examples() {
        let window = torus2();
        let section = CrossSection::new(vec![pt1(0, 1), pt1(1, 1)]);
        let u = Rect::centered_cube(1, q(1, 4));
        // Lebesgue/2 is a probability measure on the 2-torus
        let mu = PhaseMeasure::uniform(&window, rat(1, 2));
        let nu = pull(&mu, &section, &u).unwrap();
        assert_eq!(nu.weight(&pt1(0, 1)), rat(1, 2));
        assert_eq!(nu.weight(&pt1(1, 1)), rat(1, 2));
        // zero phase measure pulls to zero weights
        let mu0 = PhaseMeasure::uniform(&window, rat(0, 1));
        let nu0 = pull(&mu0, &section, &u).unwrap();
        assert_eq!(nu0.total_mass(), rat(0, 1));
        // non-lacunary body is rejected
        let too_big = Rect::centered_cube(1, q(1, 1));
        assert!(matches!(
            pull(&mu, &section, &too_big),
            Err(MeasureError::NotLacunary)
        ));
    }

    #[test]
    fn round_trip_identity() {
        let section = CrossSection::new(vec![pt1(0, 1), pt1(1, 1)]);
        let u = Rect::centered_cube(1, q(1, 4));
        for tiling in [voronoi_tiling_on_torus2(), rect_tiling_on_torus2()] {
            for weights in [(rat(1, 2), rat(1, 2)), (rat(3, 4), rat(1, 4)), (rat(2, 7), rat(5, 3))] {
                let mut m = BTreeMap::new();
                m.insert(pt1(0, 1), weights.0.clone());
                m.insert(pt1(1, 1), weights.1.clone());
                let nu = SectionMeasure::new(m).unwrap();
                let mu = lift(&nu, &tiling).unwrap();
                let back = pull(&mu, &section, &u).unwrap();
                assert_eq!(back, nu);
            }
        }
    }

    #[test]
    fn pull_is_independent_of_admissible_body() {
        let section = CrossSection::new(vec![pt1(0, 1), pt1(1, 1)]);
        let tiling = voronoi_tiling_on_torus2();
        let nu = SectionMeasure::uniform_on(&section, rat(2, 3)).unwrap();
        let mu = lift(&nu, &tiling).unwrap();
        let u1 = Rect::centered_cube(1, q(1, 4));
        let u2 = Rect::centered_cube(1, q(2, 5));
        let p1 = pull(&mu, &section, &u1).unwrap();
        let p2 = pull(&mu, &section, &u2).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn product_identity_examples() {
        let section = CrossSection::new(vec![pt1(0, 1), pt1(1, 1)]);
        let u = Rect::centered_cube(1, q(1, 4));
        let tiling = voronoi_tiling_on_torus2();
        let nu = SectionMeasure::uniform_on(&section, rat(1, 2)).unwrap();
        assert!(product_identity_check(&nu, &tiling, &u, 3).unwrap());
        // the identity holds regardless of the weights
        let mut m = BTreeMap::new();
        m.insert(pt1(0, 1), rat(3, 4));
        m.insert(pt1(1, 1), rat(1, 4));
        let nu2 = SectionMeasure::new(m).unwrap();
        assert!(product_identity_check(&nu2, &tiling, &u, 3).unwrap());
        // a corrupted tiling whose domain misses part of c + U
        let corrupted = BoundedTiling::Rectangular {
            window: torus2(),
            pieces: vec![
                (pt1(0, 1), half_open((-1, 10), (9, 10))),
                (pt1(1, 1), half_open((-1, 10), (9, 10))),
            ],
        };
        corrupted.audit_partition().unwrap();
        assert!(matches!(
            product_identity_check(&nu, &corrupted, &u, 3),
            Err(MeasureError::AdmissibilityViolated { .. })
        ));
    }

    #[test]
    fn lift_independent_of_tiling_for_uniform_weights() {
        // with equal weights the lift is density·λ whatever the
        // bounded tiling, so the two lifts agree on every query box
        let section = CrossSection::new(vec![pt1(0, 1), pt1(1, 1)]);
        let nu = SectionMeasure::uniform_on(&section, rat(5, 7)).unwrap();
        let mu_v = lift(&nu, &voronoi_tiling_on_torus2()).unwrap();
        let mu_r = lift(&nu, &rect_tiling_on_torus2()).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let a = rng.gen_range(0..200i64);
            let b = rng.gen_range(1..40i64);
            let query = Rect::new(vec![q(a, 100)], vec![q(a, 100) + q(b, 100)]);
            assert_eq!(mu_v.measure(&query), mu_r.measure(&query));
        }
    }

    #[test]
    fn translation_invariance_on_torus() {
        let mut m = BTreeMap::new();
        m.insert(pt1(0, 1), rat(1, 3));
        m.insert(pt1(1, 1), rat(2, 3));
        let nu = SectionMeasure::new(m).unwrap();
        let mu = lift(&nu, &voronoi_tiling_on_torus2()).unwrap();
        let t = vec![q(3, 10)];
        let mu_t = mu.translate(&t);
        for (a, b) in [((0i64, 1i64), (1i64, 4i64)), ((1, 2), (9, 10)), ((3, 4), (3, 2))] {
            let query = Rect::new(vec![q(a.0, a.1)], vec![q(b.0, b.1)]);
            let shifted = query.translate(&t);
            assert_eq!(mu_t.measure(&shifted), mu.measure(&query));
        }
    }

    #[test]
    fn round_trip_2d_voronoi() {
        let window = Window::square_torus(2, q(4, 1));
        let section = CrossSection::new(vec![
            Point(vec![q(0, 1), q(0, 1)]),
            Point(vec![q(2, 1), q(1, 1)]),
        ]);
        let tiling = BoundedTiling::Voronoi {
            window: window.clone(),
            section: section.clone(),
        };
        let u = Rect::centered_cube(2, q(1, 4));
        let mut m = BTreeMap::new();
        m.insert(section.points[0].clone(), rat(3, 5));
        m.insert(section.points[1].clone(), rat(7, 11));
        let nu = SectionMeasure::new(m).unwrap();
        let mu = lift(&nu, &tiling).unwrap();
        let back = pull(&mu, &section, &u).unwrap();
        assert_eq!(back, nu);
        assert!(product_identity_check(&nu, &tiling, &u, 11).unwrap());
    }
}
