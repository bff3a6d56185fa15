//! Exact arithmetic in the quadratic field ℚ[√2].
//!
//! Every coordinate in this crate is a [`QuadNum`], a pair of arbitrary
//! precision rationals `rat + irr·√2`. The representation is canonical
//! (both components are reduced fractions), so structural equality is
//! numeric equality and ordering is decided by exact sign analysis,
//! never by floating point.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

pub const SQRT2_F64: f64 = std::f64::consts::SQRT_2;

/// An element `rat + irr·√2` of ℚ[√2].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadNum {
    rat: BigRational,
    irr: BigRational,
}

impl QuadNum {
    pub fn new(rat: BigRational, irr: BigRational) -> Self {
        QuadNum { rat, irr }
    }

    pub fn zero() -> Self {
        QuadNum::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        QuadNum::new(BigRational::one(), BigRational::zero())
    }

    /// √2, the irrational side length used by every regular tiling.
    pub fn alpha() -> Self {
        QuadNum::new(BigRational::zero(), BigRational::one())
    }

    /// 1 + √2, the canonical tile period κ.
    pub fn kappa() -> Self {
        QuadNum::new(BigRational::one(), BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        QuadNum::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
    }

    /// Rational `num/den`. Panics if `den == 0`.
    pub fn from_ratio(num: i64, den: i64) -> Self {
        QuadNum::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::zero(),
        )
    }

    /// `num/den + inum/iden·√2`.
    pub fn from_parts(num: i64, den: i64, inum: i64, iden: i64) -> Self {
        QuadNum::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::new(BigInt::from(inum), BigInt::from(iden)),
        )
    }

    /// The dyadic rational 2^{-k}.
    pub fn dyadic(k: u32) -> Self {
        QuadNum::new(
            BigRational::new(BigInt::one(), BigInt::from(2u8).pow(k)),
            BigRational::zero(),
        )
    }

    pub fn rat(&self) -> &BigRational {
        &self.rat
    }

    pub fn irr(&self) -> &BigRational {
        &self.irr
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.irr.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.irr.is_zero()
    }

    /// Sign of `rat + irr·√2`, decided by rational squaring.
    ///
    /// When the components have mixed signs, `rat + irr·√2 > 0` reduces to
    /// comparing `rat²` against `2·irr²` on the side of the larger term.
    pub fn sign(&self) -> Ordering {
        let rs = self.rat.signum();
        let is = self.irr.signum();
        match (sign_i(&rs), sign_i(&is)) {
            (0, 0) => Ordering::Equal,
            (r, 0) => int_sign(r),
            (0, i) => int_sign(i),
            (1, 1) => Ordering::Greater,
            (-1, -1) => Ordering::Less,
            (1, -1) => {
                // rat > 0 > irr·√2: positive iff rat² > 2·irr².
                cmp_sq(&self.rat, &self.irr)
            }
            (-1, 1) => {
                // irr·√2 > 0 > rat: positive iff 2·irr² > rat².
                cmp_sq_rev(&self.rat, &self.irr)
            }
            _ => unreachable!(),
        }
    }

    pub fn abs(&self) -> Self {
        if self.sign() == Ordering::Less {
            -self
        } else {
            self.clone()
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Nearest f64; used only for rendering, never in logic.
    pub fn to_f64(&self) -> f64 {
        self.rat.to_f64().unwrap_or(f64::NAN) + self.irr.to_f64().unwrap_or(f64::NAN) * SQRT2_F64
    }

    /// Exact floor to a BigInt.
    ///
    /// Starts from the f64 estimate and fixes it up with exact comparisons,
    /// so the float error cannot leak into the result.
    pub fn floor_int(&self) -> BigInt {
        if self.irr.is_zero() {
            return self.rat.floor().to_integer();
        }
        let mut n = BigInt::from(self.to_f64().floor() as i64);
        while Self::from_bigint(&n + 1) <= *self {
            n += 1;
        }
        while Self::from_bigint(n.clone()) > *self {
            n -= 1;
        }
        n
    }

    pub fn from_bigint(n: BigInt) -> Self {
        QuadNum::new(BigRational::from_integer(n), BigRational::zero())
    }

    pub fn from_big_rational(r: BigRational) -> Self {
        QuadNum::new(r, BigRational::zero())
    }

    /// Nearest integer, halves rounded up.
    pub fn round_half_up(&self) -> BigInt {
        (self + &QuadNum::from_ratio(1, 2)).floor_int()
    }

    /// Exact `self mod m` in `[0, m)` for `m > 0`.
    pub fn rem_euclid(&self, m: &QuadNum) -> QuadNum {
        debug_assert!(m.sign() == Ordering::Greater);
        let q = (&(self / m)).floor_int();
        self - &(m * &QuadNum::from_bigint(q))
    }

    /// Smallest multiple of `m > 0` that is `>= self`.
    pub fn ceil_multiple(&self, m: &QuadNum) -> QuadNum {
        let r = self.rem_euclid(m);
        if r.is_zero() {
            self.clone()
        } else {
            self - &r + m.clone()
        }
    }

    /// Exact division; only valid when the divisor is nonzero.
    pub fn div(&self, rhs: &QuadNum) -> QuadNum {
        // 1/(a + b√2) = (a - b√2) / (a² - 2b²).
        let denom = &rhs.rat * &rhs.rat - BigRational::from_integer(BigInt::from(2)) * &rhs.irr * &rhs.irr;
        assert!(!denom.is_zero(), "division by zero QuadNum");
        let conj = QuadNum::new(rhs.rat.clone(), -rhs.irr.clone());
        let num = self * &conj;
        QuadNum::new(num.rat / denom.clone(), num.irr / denom)
    }
}

fn sign_i(r: &BigRational) -> i8 {
    match r.numer().sign() {
        Sign::Plus => 1,
        Sign::NoSign => 0,
        Sign::Minus => -1,
    }
}

fn int_sign(s: i8) -> Ordering {
    match s {
        1 => Ordering::Greater,
        -1 => Ordering::Less,
        _ => Ordering::Equal,
    }
}

// rat > 0 > irr: sign is that of rat² - 2·irr².
fn cmp_sq(rat: &BigRational, irr: &BigRational) -> Ordering {
    let lhs = rat * rat;
    let rhs = BigRational::from_integer(BigInt::from(2)) * irr * irr;
    lhs.cmp(&rhs)
}

// irr > 0 > rat: sign is that of 2·irr² - rat².
fn cmp_sq_rev(rat: &BigRational, irr: &BigRational) -> Ordering {
    cmp_sq(rat, irr).reverse()
}

impl PartialOrd for QuadNum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuadNum {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).sign()
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, |$a:ident, $b:ident| $body:expr) => {
        impl $trait<&QuadNum> for &QuadNum {
            type Output = QuadNum;
            fn $method(self, rhs: &QuadNum) -> QuadNum {
                let ($a, $b) = (self, rhs);
                $body
            }
        }
        impl $trait for QuadNum {
            type Output = QuadNum;
            fn $method(self, rhs: QuadNum) -> QuadNum {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&QuadNum> for QuadNum {
            type Output = QuadNum;
            fn $method(self, rhs: &QuadNum) -> QuadNum {
                (&self).$method(rhs)
            }
        }
        impl $trait<QuadNum> for &QuadNum {
            type Output = QuadNum;
            fn $method(self, rhs: QuadNum) -> QuadNum {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| QuadNum::new(&a.rat + &b.rat, &a.irr + &b.irr));
forward_binop!(Sub, sub, |a, b| QuadNum::new(&a.rat - &b.rat, &a.irr - &b.irr));
forward_binop!(Mul, mul, |a, b| {
    // (a + b√2)(c + d√2) = ac + 2bd + (ad + bc)√2
    let two = BigRational::from_integer(BigInt::from(2));
    QuadNum::new(
        &a.rat * &b.rat + two * &a.irr * &b.irr,
        &a.rat * &b.irr + &a.irr * &b.rat,
    )
});

impl std::ops::Div<&QuadNum> for &QuadNum {
    type Output = QuadNum;
    fn div(self, rhs: &QuadNum) -> QuadNum {
        QuadNum::div(self, rhs)
    }
}

impl Neg for &QuadNum {
    type Output = QuadNum;
    fn neg(self) -> QuadNum {
        QuadNum::new(-self.rat.clone(), -self.irr.clone())
    }
}

impl Neg for QuadNum {
    type Output = QuadNum;
    fn neg(self) -> QuadNum {
        QuadNum::new(-self.rat, -self.irr)
    }
}

impl AddAssign<&QuadNum> for QuadNum {
    fn add_assign(&mut self, rhs: &QuadNum) {
        self.rat += &rhs.rat;
        self.irr += &rhs.irr;
    }
}

impl SubAssign<&QuadNum> for QuadNum {
    fn sub_assign(&mut self, rhs: &QuadNum) {
        self.rat -= &rhs.rat;
        self.irr -= &rhs.irr;
    }
}

impl MulAssign<&QuadNum> for QuadNum {
    fn mul_assign(&mut self, rhs: &QuadNum) {
        *self = &*self * rhs;
    }
}

impl fmt::Debug for QuadNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for QuadNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.irr.is_zero() {
            write!(f, "{}", self.rat)
        } else if self.rat.is_zero() {
            write!(f, "{}√2", self.irr)
        } else if self.irr.is_negative() {
            write!(f, "{}{}√2", self.rat, self.irr)
        } else {
            write!(f, "{}+{}√2", self.rat, self.irr)
        }
    }
}

// JSON form: {"rat":[num,den],"irr":[num,den]} with decimal-string integers.
impl Serialize for QuadNum {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            rat: [String; 2],
            irr: [String; 2],
        }
        Repr {
            rat: [self.rat.numer().to_string(), self.rat.denom().to_string()],
            irr: [self.irr.numer().to_string(), self.irr.denom().to_string()],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuadNum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            rat: [String; 2],
            irr: [String; 2],
        }
        let repr = Repr::deserialize(deserializer)?;
        let parse = |s: &str| s.parse::<BigInt>().map_err(D::Error::custom);
        let rat = BigRational::new(parse(&repr.rat[0])?, parse(&repr.rat[1])?);
        let irr = BigRational::new(parse(&repr.irr[0])?, parse(&repr.irr[1])?);
        Ok(QuadNum::new(rat, irr))
    }
}
