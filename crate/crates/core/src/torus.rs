//! Exact arithmetic on the circle 𝕋 = ℝ/ℤ and on tori 𝕋^d.
//!
//! A [`Frac`] stores a point of the circle as a 128-bit binary fraction
//! `bits / 2^128`. Addition wraps modulo `2^128`, which is exactly addition
//! modulo 1 on the represented values, so orbits of affine maps built from
//! additions and integer multiples never drift. Real parameters are rounded
//! once, when they are ingested (nearest, ties to even).

use std::fmt;
use std::ops::{Add, AddAssign, Index, Neg, Sub, SubAssign};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of fraction bits carried by a [`Frac`].
pub const FRAC_BITS: u32 = 128;

/// Maximum number of fractional digits accepted by [`Frac::from_decimal`].
pub const MAX_DECIMAL_DIGITS: usize = 50;

/// 2^-128 as an `f64` (exact).
pub(crate) const TWO_POW_NEG_128: f64 = f64::from_bits((1023 - 128) << 52);

/// A point of 𝕋 as the exact dyadic fraction `bits / 2^128`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frac(u128);

impl Frac {
    pub const ZERO: Frac = Frac(0);
    pub const HALF: Frac = Frac(1 << 127);

    pub const fn from_bits(bits: u128) -> Frac {
        Frac(bits)
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    /// Parses a decimal in `[0, 1)` with at most 50 fractional digits.
    ///
    /// Accepted forms: `0`, `0.25`, `.25`, `0.250000`. Rounding to the
    /// nearest 128-bit fraction happens exactly once, ties to even.
    pub fn from_decimal(s: &str) -> Result<Frac> {
        let t = s.trim();
        let malformed = || Error::Malformed(s.to_string());
        if t.is_empty() {
            return Err(malformed());
        }
        if let Some(rest) = t.strip_prefix('-') {
            // "-0" and "-0.000" are still zero; anything else is negative
            let parsed = Frac::from_decimal(rest).map_err(|_| malformed())?;
            return if parsed == Frac::ZERO {
                Ok(Frac::ZERO)
            } else {
                Err(Error::OutOfRange(s.to_string()))
            };
        }
        let t = t.strip_prefix('+').unwrap_or(t);
        let (int_part, frac_part) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(malformed());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(malformed());
        }
        if frac_part.len() > MAX_DECIMAL_DIGITS {
            return Err(malformed());
        }
        if int_part.bytes().any(|b| b != b'0') {
            return Err(Error::OutOfRange(s.to_string()));
        }
        if frac_part.is_empty() {
            return Ok(Frac::ZERO);
        }
        let numerator = BigUint::parse_bytes(frac_part.as_bytes(), 10).ok_or_else(malformed)?;
        let denominator = BigUint::from(10u32).pow(frac_part.len() as u32);
        Frac::from_big_rational(&numerator, &denominator)
    }

    /// Nearest 128-bit fraction to `p / q`, ties to even. Exact whenever
    /// `q` divides `2^128`.
    pub fn from_rational(p: i128, q: i128) -> Result<Frac> {
        if q == 0 {
            return Err(Error::ZeroDenominator);
        }
        if q < 0 || p < 0 || p >= q {
            return Err(Error::OutOfRange(format!("{p}/{q}")));
        }
        Frac::from_big_rational(&BigUint::from(p as u128), &BigUint::from(q as u128))
    }

    /// Big-integer form of [`Frac::from_rational`].
    pub fn from_big_rational(p: &BigUint, q: &BigUint) -> Result<Frac> {
        if q.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if p >= q {
            return Err(Error::OutOfRange(format!("{p}/{q}")));
        }
        let scaled: BigUint = p << FRAC_BITS;
        let mut quotient = &scaled / q;
        let remainder = &scaled % q;
        let twice = &remainder << 1u32;
        let round_up = match twice.cmp(q) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => quotient.bit(0),
        };
        if round_up {
            quotient += BigUint::one();
        }
        // p/q within 2^-129 of 1 rounds to 2^128, which is 0 on the circle
        let modulus = BigUint::one() << FRAC_BITS;
        let bits = (quotient % modulus).to_u128().expect("reduced below 2^128");
        Ok(Frac(bits))
    }

    /// Reduces a finite real modulo 1 and rounds it to the nearest fraction
    /// (ties to even). The reduction is exact; only the final rounding loses
    /// information. Non-finite input maps to zero.
    pub fn from_real_wrapping(r: f64) -> Frac {
        if !r.is_finite() || r == 0.0 {
            return Frac::ZERO;
        }
        let raw = r.to_bits();
        let negative = raw >> 63 == 1;
        let exp_bits = ((raw >> 52) & 0x7ff) as i32;
        let mantissa_bits = raw & ((1u64 << 52) - 1);
        let (mantissa, exponent) = if exp_bits == 0 {
            (mantissa_bits, -1074)
        } else {
            (mantissa_bits | (1u64 << 52), exp_bits - 1075)
        };
        // |r| = mantissa * 2^exponent; target mantissa * 2^(exponent + 128) mod 2^128
        let shift = exponent + FRAC_BITS as i32;
        let magnitude: u128 = if shift >= 0 {
            if shift >= FRAC_BITS as i32 {
                0
            } else {
                (mantissa as u128) << shift
            }
        } else {
            let down = (-shift) as u32;
            if down > 64 {
                0
            } else {
                let m = mantissa as u128;
                let q = m >> down;
                let rem = m & ((1u128 << down) - 1);
                let half = 1u128 << (down - 1);
                if rem > half || (rem == half && q & 1 == 1) {
                    q + 1
                } else {
                    q
                }
            }
        };
        if negative {
            Frac(magnitude.wrapping_neg())
        } else {
            Frac(magnitude)
        }
    }

    /// Exact integer multiple `n · a` on the circle (signed wrap-around).
    #[inline]
    pub fn int_mul(self, n: i64) -> Frac {
        Frac(self.0.wrapping_mul(n as i128 as u128))
    }

    /// Circle distance `min(|a-b|, 1-|a-b|)` in `[0, 1/2]`.
    pub fn dist(self, other: Frac) -> f64 {
        let d = self.0.wrapping_sub(other.0);
        let d = d.min(d.wrapping_neg());
        d as f64 * TWO_POW_NEG_128
    }

    /// `bits / 2^128` rounded to the nearest double.
    #[inline]
    pub fn to_real(self) -> f64 {
        self.0 as f64 * TWO_POW_NEG_128
    }

    /// `floor(n · a)` where `a ∈ [0, 1)` is the representative of `self`.
    pub fn floor_mul(self, n: i64) -> i128 {
        let (hi, lo) = widening_mul(self.0, n.unsigned_abs() as u128);
        if n >= 0 {
            hi as i128
        } else {
            -(hi as i128) - i128::from(lo != 0)
        }
    }

    /// Product of the `[0, 1)` representatives, divided by `2^extra_shift`,
    /// rounded to the nearest fraction (ties to even).
    pub fn representative_product(self, other: Frac, extra_shift: u32) -> Frac {
        assert!(extra_shift < FRAC_BITS, "shift out of range");
        let s = extra_shift;
        // value = (hi·2^128 + lo) / 2^(256 + s); the product of two
        // representatives is below 1, so no integer part is discarded
        let (hi, lo) = widening_mul(self.0, other.0);
        let kept = hi >> s;
        let dropped_hi = if s == 0 { 0 } else { hi & ((1u128 << s) - 1) };
        let half = if s == 0 { (0, 1u128 << 127) } else { (1u128 << (s - 1), 0) };
        let round_up = match (dropped_hi, lo).cmp(&half) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => kept & 1 == 1,
        };
        Frac(if round_up { kept.wrapping_add(1) } else { kept })
    }

    /// Cell index `floor(a · cells)` of the equal partition of `[0, 1)`.
    pub fn cell(self, cells: u64) -> u64 {
        widening_mul(self.0, cells as u128).0 as u64
    }
}

/// Full 256-bit product of two 128-bit words as `(high, low)`.
pub(crate) fn widening_mul(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a_hi, a_lo) = (a >> 64, a & MASK);
    let (b_hi, b_lo) = (b >> 64, b & MASK);
    let ll = a_lo * b_lo;
    let lh = a_lo * b_hi;
    let hl = a_hi * b_lo;
    let hh = a_hi * b_hi;
    let mid = (ll >> 64) + (lh & MASK) + (hl & MASK);
    let lo = (ll & MASK) | (mid << 64);
    let hi = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (hi, lo)
}

/// Searches for a small integer relation `a·x + b·y ≡ 0 (mod 1)` with
/// `(a, b) ≠ (0, 0)` and `|a|, |b| ≤ bound`. Only meaningful as a heuristic:
/// every represented fraction is rational, so some relation always exists
/// for a large enough bound.
pub fn small_integer_relation(x: Frac, y: Frac, bound: i64) -> Option<(i64, i64)> {
    for a in 0..=bound {
        for b in -bound..=bound {
            if a == 0 && b <= 0 {
                continue;
            }
            if x.int_mul(a) + y.int_mul(b) == Frac::ZERO {
                return Some((a, b));
            }
        }
    }
    None
}

impl Add for Frac {
    type Output = Frac;
    #[inline]
    fn add(self, rhs: Frac) -> Frac {
        Frac(self.0.wrapping_add(rhs.0))
    }
}

impl AddAssign for Frac {
    #[inline]
    fn add_assign(&mut self, rhs: Frac) {
        self.0 = self.0.wrapping_add(rhs.0);
    }
}

impl Sub for Frac {
    type Output = Frac;
    #[inline]
    fn sub(self, rhs: Frac) -> Frac {
        Frac(self.0.wrapping_sub(rhs.0))
    }
}

impl SubAssign for Frac {
    #[inline]
    fn sub_assign(&mut self, rhs: Frac) {
        self.0 = self.0.wrapping_sub(rhs.0);
    }
}

impl Neg for Frac {
    type Output = Frac;
    #[inline]
    fn neg(self) -> Frac {
        Frac(self.0.wrapping_neg())
    }
}

impl fmt::Debug for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Frac({:#034x} ≈ {})", self.0, self.to_real())
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_real())
    }
}

/// Lowest-terms dyadic form `(p, log2 q)` of a fraction.
fn reduced_dyadic(bits: u128) -> (u128, u32) {
    if bits == 0 {
        return (0, 0);
    }
    let tz = bits.trailing_zeros();
    (bits >> tz, FRAC_BITS - tz)
}

impl Serialize for Frac {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let (p, log_q) = reduced_dyadic(self.0);
        let q = BigUint::one() << log_q;
        let mut st = serializer.serialize_struct("Frac", 2)?;
        st.serialize_field("p", &p.to_string())?;
        st.serialize_field("q", &q.to_string())?;
        st.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntRepr {
    Int(u64),
    Text(String),
}

impl IntRepr {
    fn to_big(&self) -> Option<BigUint> {
        match self {
            IntRepr::Int(v) => Some(BigUint::from(*v)),
            IntRepr::Text(s) => BigUint::parse_bytes(s.trim().as_bytes(), 10),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FracRepr {
    Decimal(String),
    Rational { p: IntRepr, q: IntRepr },
}

impl<'de> Deserialize<'de> for Frac {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Frac, D::Error> {
        let repr = FracRepr::deserialize(deserializer).map_err(|_| {
            D::Error::custom("expected a decimal string or an {\"p\", \"q\"} rational")
        })?;
        match repr {
            FracRepr::Decimal(s) => Frac::from_decimal(&s).map_err(D::Error::custom),
            FracRepr::Rational { p, q } => {
                let p = p.to_big().ok_or_else(|| D::Error::custom("malformed numerator"))?;
                let q = q.to_big().ok_or_else(|| D::Error::custom("malformed denominator"))?;
                Frac::from_big_rational(&p, &q).map_err(D::Error::custom)
            }
        }
    }
}

/// A point of 𝕋^d.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint {
    coords: Vec<Frac>,
}

impl TorusPoint {
    pub fn new(coords: Vec<Frac>) -> TorusPoint {
        TorusPoint { coords }
    }

    pub fn zeros(dim: usize) -> TorusPoint {
        TorusPoint { coords: vec![Frac::ZERO; dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Frac] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [Frac] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<Frac> {
        self.coords
    }

    pub fn to_reals(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.to_real()).collect()
    }

    /// Componentwise sum; panics on dimension mismatch.
    pub fn translate(&self, delta: &TorusPoint) -> TorusPoint {
        assert_eq!(self.dim(), delta.dim(), "dimension mismatch");
        TorusPoint::new(self.coords.iter().zip(&delta.coords).map(|(a, b)| *a + *b).collect())
    }
}

impl Index<usize> for TorusPoint {
    type Output = Frac;
    fn index(&self, i: usize) -> &Frac {
        &self.coords[i]
    }
}

impl From<Vec<Frac>> for TorusPoint {
    fn from(coords: Vec<Frac>) -> Self {
        TorusPoint::new(coords)
    }
}
