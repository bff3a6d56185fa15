//! Two-term approximation by ℕ + ℕα with α = √2, threshold
//! certification, and partitions of intervals into segments of lengths
//! 1 and α.
//!
//! The point set S = {m₁ + m₂α : m₁, m₂ ∈ ℕ} is asymptotically dense:
//! past a computable threshold N(ε) every real is strictly within ε of
//! S. [`n_of_eps`] certifies the threshold by an exhaustive scan of the
//! gap structure of S, and the scan itself is bounded by the maximal
//! circular gap of the fractional parts {mα mod 1 : m ≤ M}, which is
//! exact arithmetic all the way down.

use crate::exactnum::QuadNum;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiophantineError {
    #[error("x = {x} is below the certified threshold N(eps) = {threshold}")]
    BelowThreshold { x: String, threshold: String },
    #[error("length is not of the form m1 + m2*alpha with m1, m2 in N: {0}")]
    NotRepresentable(String),
    #[error("no (m1, m2) satisfies the error bound and the remainder caps")]
    NoAdmissiblePair,
}

/// Grid resolution divisor for threshold certification: thresholds are
/// reported on the grid of multiples of eps/4.
pub const THRESHOLD_GRID_DIVISOR: u32 = 4;

static N_OF_EPS_MEMO: Mutex<BTreeMap<(BigInt, BigInt), QuadNum>> = Mutex::new(BTreeMap::new());

/// Certified threshold N(ε): for every x ≥ N(ε) there are m₁, m₂ ∈ ℕ
/// with |x − (m₁ + m₂α)| < ε strictly.
///
/// A maximal gap [s₁, s₂] of S is *bad* when its length is ≥ 2ε (its
/// midpoint then fails strictness). N is the right endpoint of the last
/// bad gap, rounded up to the ε/4 grid. Beyond the horizon √2·M* + 2,
/// where M* is minimal with max-gap({mα mod 1 : m ≤ M*}) < 2ε, no gap
/// can be bad, so the scan is exhaustive.
pub fn n_of_eps(eps: &BigRational) -> QuadNum {
    assert!(eps.is_positive(), "eps must be positive");
    let key = (eps.numer().clone(), eps.denom().clone());
    if let Some(hit) = N_OF_EPS_MEMO.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let result = n_of_eps_uncached(eps);
    N_OF_EPS_MEMO.lock().unwrap().insert(key, result.clone());
    result
}

fn n_of_eps_uncached(eps: &BigRational) -> QuadNum {
    let alpha = QuadNum::alpha();
    let two_eps = QuadNum::from_big_rational(eps + eps);

    // minimal M with circular max-gap of {mα mod 1 : m ≤ M} < 2ε
    let mut m_star = 0u64;
    while frac_parts_max_gap(m_star) >= two_eps {
        m_star += 1;
    }

    let horizon = QuadNum::from_int(m_star as i64) * &alpha + QuadNum::from_int(2);
    let points = enumerate_lattice(&horizon);

    let mut last_bad_end = QuadNum::zero();
    for w in points.windows(2) {
        let gap = &w[1] - &w[0];
        if gap >= two_eps && w[1] > last_bad_end {
            last_bad_end = w[1].clone();
        }
    }
    let grid = QuadNum::from_big_rational(
        eps / BigRational::from_integer(BigInt::from(THRESHOLD_GRID_DIVISOR)),
    );
    if last_bad_end.is_zero() {
        QuadNum::zero()
    } else {
        last_bad_end.ceil_multiple(&grid)
    }
}

/// Max circular gap of the fractional parts of 0, α, 2α, …, Mα.
fn frac_parts_max_gap(m: u64) -> QuadNum {
    let alpha = QuadNum::alpha();
    let mut fracs: Vec<QuadNum> = (0..=m)
        .map(|k| {
            let v = QuadNum::from_int(k as i64) * &alpha;
            &v - &QuadNum::from_bigint(v.floor_int())
        })
        .collect();
    fracs.sort();
    fracs.dedup();
    let mut max_gap = &QuadNum::one() - fracs.last().unwrap() + fracs[0].clone();
    for w in fracs.windows(2) {
        let gap = &w[1] - &w[0];
        if gap > max_gap {
            max_gap = gap;
        }
    }
    max_gap
}

/// All points of S up to `horizon`, sorted and deduplicated.
fn enumerate_lattice(horizon: &QuadNum) -> Vec<QuadNum> {
    let alpha = QuadNum::alpha();
    let mut points = Vec::new();
    let m2_max = (horizon.div(&alpha)).floor_int().to_u64().expect("desk-scale horizon");
    for m2 in 0..=m2_max {
        let base = QuadNum::from_int(m2 as i64) * &alpha;
        let m1_max = (horizon - &base).floor_int();
        let m1_max = m1_max.to_u64().expect("desk-scale horizon");
        for m1 in 0..=m1_max {
            points.push(&base + &QuadNum::from_int(m1 as i64));
        }
    }
    points.sort();
    points.dedup();
    points
}

/// A two-term approximation `x ≈ m1 + m2·α` with its signed error.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub m1: u64,
    pub m2: u64,
    pub err: QuadNum,
}

impl ApproxResult {
    pub fn value(&self) -> QuadNum {
        QuadNum::from_int(self.m1 as i64) + QuadNum::from_int(self.m2 as i64) * QuadNum::alpha()
    }
}

/// Approximate `x` by `m1 + m2·α` with error strictly below ε. Succeeds
/// for every x ≥ N(ε); below the threshold it succeeds exactly when an
/// admissible pair happens to exist (e.g. x ∈ ℕ + ℕα is always
/// reproduced exactly) and reports `BelowThreshold` otherwise.
///
/// Deterministic selection: scan m₂ downward from ⌊x/α⌋ with m₁ the
/// nearest nonnegative integer to x − m₂α, and take the first admissible
/// pair. If the downward scan finds nothing, the pure-α overshoots
/// m₂ ∈ (⌊x/α⌋, ⌊(x+ε)/α⌋] with m₁ = 0 are tried before giving up.
pub fn approx(x: &QuadNum, eps: &BigRational) -> Result<ApproxResult, DiophantineError> {
    if x.sign() == Ordering::Less {
        return Err(DiophantineError::BelowThreshold {
            x: x.to_string(),
            threshold: n_of_eps(eps).to_string(),
        });
    }
    let alpha = QuadNum::alpha();
    let eps_q = QuadNum::from_big_rational(eps.clone());
    let m2_hi = x.div(&alpha).floor_int().to_u64().expect("desk-scale x");
    for m2 in (0..=m2_hi).rev() {
        let r = x - &(QuadNum::from_int(m2 as i64) * &alpha);
        let m1 = r.round_half_up();
        if m1 < BigInt::zero() {
            continue;
        }
        let err = QuadNum::from_bigint(m1.clone()) + QuadNum::from_int(m2 as i64) * &alpha - x.clone();
        if err.abs() < eps_q {
            return Ok(ApproxResult {
                m1: m1.to_u64().expect("desk-scale m1"),
                m2,
                err,
            });
        }
    }
    let m2_over = (x + &eps_q)
        .div(&alpha)
        .floor_int()
        .to_u64()
        .expect("desk-scale x");
    for m2 in (m2_hi + 1)..=m2_over {
        let err = QuadNum::from_int(m2 as i64) * &alpha - x.clone();
        if err.abs() < eps_q {
            return Ok(ApproxResult { m1: 0, m2, err });
        }
    }
    let threshold = n_of_eps(eps);
    if *x < threshold {
        Err(DiophantineError::BelowThreshold {
            x: x.to_string(),
            threshold: threshold.to_string(),
        })
    } else {
        Err(DiophantineError::NoAdmissiblePair)
    }
}

/// A segment of length 1 or α.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegLabel {
    One,
    Alpha,
}

impl SegLabel {
    pub fn length(self) -> QuadNum {
        match self {
            SegLabel::One => QuadNum::one(),
            SegLabel::Alpha => QuadNum::alpha(),
        }
    }
}

/// An ordered partition of `[start, start + Σ lengths)` into segments of
/// lengths 1 and α.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPartition {
    pub start: QuadNum,
    pub labels: Vec<SegLabel>,
}

impl SegmentPartition {
    pub fn total_length(&self) -> QuadNum {
        let ones = self.labels.iter().filter(|l| **l == SegLabel::One).count();
        let alphas = self.labels.len() - ones;
        QuadNum::from_int(ones as i64) + QuadNum::from_int(alphas as i64) * QuadNum::alpha()
    }

    /// Segment boundaries including both endpoints.
    pub fn boundaries(&self) -> Vec<QuadNum> {
        let mut out = Vec::with_capacity(self.labels.len() + 1);
        let mut pos = self.start.clone();
        out.push(pos.clone());
        for l in &self.labels {
            pos += &l.length();
            out.push(pos.clone());
        }
        out
    }

    pub fn count(&self, label: SegLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }
}

/// Split a length `m1 + m2·α` (nonnegative integer components) into the
/// canonical segment sequence: alternate 1, α while both remain, then
/// the leftover kind.
pub fn partition_exact(len: &QuadNum) -> Result<SegmentPartition, DiophantineError> {
    let (m1, m2) = nonneg_integer_components(len)
        .ok_or_else(|| DiophantineError::NotRepresentable(len.to_string()))?;
    Ok(SegmentPartition {
        start: QuadNum::zero(),
        labels: canonical_labels(m1, m2),
    })
}

fn canonical_labels(mut ones: u64, mut alphas: u64) -> Vec<SegLabel> {
    let mut labels = Vec::with_capacity((ones + alphas) as usize);
    while ones > 0 && alphas > 0 {
        labels.push(SegLabel::One);
        labels.push(SegLabel::Alpha);
        ones -= 1;
        alphas -= 1;
    }
    labels.extend(std::iter::repeat(SegLabel::One).take(ones as usize));
    labels.extend(std::iter::repeat(SegLabel::Alpha).take(alphas as usize));
    labels
}

fn nonneg_integer_components(len: &QuadNum) -> Option<(u64, u64)> {
    if !len.rat().is_integer() || !len.irr().is_integer() {
        return None;
    }
    let m1 = len.rat().to_integer().to_u64()?;
    let m2 = len.irr().to_integer().to_u64()?;
    Some((m1, m2))
}

/// Result of extending the tiled inner interval to the outer one: the
/// inner interval moves by `delta` and the three parts then partition
/// [0, K'(1+α)) exactly.
#[derive(Clone, Debug, Serialize)]
pub struct ExtendResult {
    pub delta: QuadNum,
    pub before: SegmentPartition,
    pub middle: SegmentPartition,
    pub after: SegmentPartition,
}

/// Shift `[a, a + K(1+α))` by `|δ| ≤ ε` so that its endpoints land in
/// ℕ + ℕα and the complementary intervals of `[0, K'(1+α))` are exactly
/// partitionable.
///
/// Deterministic selection: minimal m₂, then minimal m₁, both capped by
/// K' − K so the trailing remainder keeps nonnegative components.
pub fn extend_interval(
    inner_lo: &QuadNum,
    inner_len: &QuadNum,
    outer_len: &QuadNum,
    eps: &BigRational,
) -> Result<ExtendResult, DiophantineError> {
    let kappa = QuadNum::kappa();
    let k_inner = exact_multiple(inner_len, &kappa)
        .ok_or_else(|| DiophantineError::NotRepresentable(inner_len.to_string()))?;
    let k_outer = exact_multiple(outer_len, &kappa)
        .ok_or_else(|| DiophantineError::NotRepresentable(outer_len.to_string()))?;
    assert!(k_outer > k_inner, "outer interval must strictly contain the inner one");

    let threshold = n_of_eps(eps);
    let inner_hi = inner_lo + inner_len;
    if *inner_lo < threshold || &inner_hi + &threshold > *outer_len {
        return Err(DiophantineError::BelowThreshold {
            x: inner_lo.to_string(),
            threshold: threshold.to_string(),
        });
    }

    let cap = k_outer - k_inner;
    let alpha = QuadNum::alpha();
    let eps_q = QuadNum::from_big_rational(eps.clone());
    for m2 in 0..=cap {
        let r = inner_lo - &(QuadNum::from_int(m2 as i64) * &alpha);
        // minimal admissible m1: the least integer in [r − ε, r + ε] ∩ [0, cap]
        let lo = {
            let bound = &r - &eps_q;
            let mut c = bound.floor_int();
            if QuadNum::from_bigint(c.clone()) < bound {
                c += 1;
            }
            c.max(BigInt::zero())
        };
        if QuadNum::from_bigint(lo.clone()) > &r + &eps_q || lo > BigInt::from(cap) {
            continue;
        }
        let m1 = lo.to_u64().expect("capped m1");
        let delta = QuadNum::from_int(m1 as i64) + QuadNum::from_int(m2 as i64) * &alpha - inner_lo.clone();
        debug_assert!(delta.abs() <= eps_q);
        let before = SegmentPartition {
            start: QuadNum::zero(),
            labels: canonical_labels(m1, m2),
        };
        let middle = SegmentPartition {
            start: inner_lo + &delta,
            labels: canonical_labels(k_inner, k_inner),
        };
        let after = SegmentPartition {
            start: &middle.start + inner_len,
            labels: canonical_labels(cap - m1, cap - m2),
        };
        return Ok(ExtendResult { delta, before, middle, after });
    }
    Err(DiophantineError::NoAdmissiblePair)
}

/// `value / unit` when it is a positive integer.
fn exact_multiple(value: &QuadNum, unit: &QuadNum) -> Option<u64> {
    let q = value.div(unit);
    if q.is_rational() && q.rat().is_integer() && q.sign() == Ordering::Greater {
        q.rat().to_integer().to_u64()
    } else {
        None
    }
}
