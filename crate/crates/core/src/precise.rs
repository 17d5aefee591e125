//! Double-double arithmetic and trigonometry of exact circle points.
//!
//! Values are unevaluated sums `hi + lo` with `|lo| ≤ ulp(hi)/2`, giving
//! roughly 106 bits of significand. Angles are supplied as [`Frac`] turns so
//! the reduction modulo 2π is exact and only the kernel evaluation rounds.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::torus::{Frac, TWO_POW_NEG_128};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };
    pub const TWO_PI: DoubleDouble = DoubleDouble {
        hi: std::f64::consts::TAU,
        lo: 2.4492935982947064e-16,
    };

    pub const fn from_f64(x: f64) -> DoubleDouble {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    /// Nearest double-double to a signed count of `2^-128` units
    /// (relative error about `2^-106`, like any double-double rounding).
    pub fn from_scaled_i128(units: i128) -> DoubleDouble {
        let hi = units as f64;
        let residue = units.wrapping_sub(hi as i128);
        DoubleDouble {
            hi: hi * TWO_POW_NEG_128,
            lo: residue as f64 * TWO_POW_NEG_128,
        }
        .renormalized()
    }

    fn renormalized(self) -> DoubleDouble {
        let (hi, lo) = quick_two_sum(self.hi, self.lo);
        DoubleDouble { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> DoubleDouble {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn mul_f64(self, b: f64) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> DoubleDouble {
        let q1 = self.hi / b;
        let (p1, p2) = two_prod(q1, b);
        let (s, e) = two_sum(self.hi, -p1);
        let e = e - p2 + self.lo;
        let q2 = (s + e) / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo }
    }

    /// Reduces the value modulo 1 onto the circle, rounding once.
    pub fn to_frac_wrapping(self) -> Frac {
        Frac::from_real_wrapping(self.hi) + Frac::from_real_wrapping(self.lo)
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, b: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let e = e + t;
        let (s, e) = quick_two_sum(s, e);
        let e = e + f;
        let (hi, lo) = quick_two_sum(s, e);
        DoubleDouble { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, b: DoubleDouble) -> DoubleDouble {
        self + (-b)
    }
}

impl Neg for DoubleDouble {
    type Output = DoubleDouble;
    fn neg(self) -> DoubleDouble {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, b: DoubleDouble) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

const SERIES_CUTOFF: f64 = 1e-36;

/// `(sin θ, cos θ)` for `|θ| ≤ π/4` by Taylor series in double-double.
fn sin_cos_series(theta: DoubleDouble) -> (DoubleDouble, DoubleDouble) {
    let x2 = theta * theta;

    let mut term = theta;
    let mut sin = theta;
    let mut k = 1.0;
    while term.hi.abs() > SERIES_CUTOFF {
        term = -(term * x2).div_f64((2.0 * k) * (2.0 * k + 1.0));
        sin = sin + term;
        k += 1.0;
    }

    let mut term = DoubleDouble::ONE;
    let mut cos = DoubleDouble::ONE;
    let mut k = 1.0;
    while term.hi.abs() > SERIES_CUTOFF {
        term = -(term * x2).div_f64((2.0 * k - 1.0) * (2.0 * k));
        cos = cos + term;
        k += 1.0;
    }
    (sin, cos)
}

/// Exact quadrant reduction followed by the series.
fn sin_cos_turns_series(bits: u128) -> (DoubleDouble, DoubleDouble) {
    let quadrant = (bits.wrapping_add(1u128 << 125) >> 126) & 3;
    let residual = bits.wrapping_sub(quadrant << 126) as i128;
    let theta = DoubleDouble::from_scaled_i128(residual) * DoubleDouble::TWO_PI;
    let (s, c) = sin_cos_series(theta);
    match quadrant {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

const TABLE_BITS: u32 = 8;
const TABLE_SHIFT: u32 = 128 - TABLE_BITS;
/// Terms of the short polynomials; `|θ| ≤ 2π/512` makes the next term `< 1e-34`.
const POLY_TERMS: usize = 7;

struct TrigTables {
    /// `(sin, cos)` of `2πj/256`.
    nodes: Vec<(DoubleDouble, DoubleDouble)>,
    /// `(-1)^k / (2k+1)!`
    sin_coeffs: [DoubleDouble; POLY_TERMS],
    /// `(-1)^k / (2k)!`
    cos_coeffs: [DoubleDouble; POLY_TERMS],
}

fn tables() -> &'static TrigTables {
    static TABLES: OnceLock<TrigTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let nodes = (0..1u128 << TABLE_BITS).map(|j| sin_cos_turns_series(j << TABLE_SHIFT)).collect();
        let mut sin_coeffs = [DoubleDouble::ZERO; POLY_TERMS];
        let mut cos_coeffs = [DoubleDouble::ZERO; POLY_TERMS];
        let mut inv_fact = DoubleDouble::ONE;
        for n in 0..2 * POLY_TERMS {
            if n > 0 {
                inv_fact = inv_fact.div_f64(n as f64);
            }
            let signed = if (n / 2) % 2 == 0 { inv_fact } else { -inv_fact };
            if n % 2 == 0 {
                cos_coeffs[n / 2] = signed;
            } else {
                sin_coeffs[n / 2] = signed;
            }
        }
        TrigTables { nodes, sin_coeffs, cos_coeffs }
    })
}

/// `(sin 2πu, cos 2πu)` for a circle point `u`, in double-double.
///
/// The nearest multiple of `1/256` turn is split off exactly from the bits of
/// `u`; the residual (at most `1/512` turn) goes through short polynomials
/// and is recombined with tabulated values by the addition formulas.
pub fn sin_cos_turns(u: Frac) -> (DoubleDouble, DoubleDouble) {
    let t = tables();
    let bits = u.bits();
    let index = bits.wrapping_add(1u128 << (TABLE_SHIFT - 1)) >> TABLE_SHIFT;
    let residual = bits.wrapping_sub(index << TABLE_SHIFT) as i128;
    let theta = DoubleDouble::from_scaled_i128(residual) * DoubleDouble::TWO_PI;
    let x2 = theta * theta;
    let mut ps = t.sin_coeffs[POLY_TERMS - 1];
    let mut pc = t.cos_coeffs[POLY_TERMS - 1];
    for k in (0..POLY_TERMS - 1).rev() {
        ps = ps * x2 + t.sin_coeffs[k];
        pc = pc * x2 + t.cos_coeffs[k];
    }
    let (s, c) = (ps * theta, pc);
    let (sa, ca) = t.nodes[index as usize];
    (sa * c + ca * s, ca * c - sa * s)
}

/// `cos 2πu` in double-double.
pub fn cos_turns(u: Frac) -> DoubleDouble {
    sin_cos_turns(u).1
}

/// Plain double `(sin 2πu, cos 2πu)` using the exact quadrant reduction.
#[inline]
pub fn sin_cos_turns_f64(u: Frac) -> (f64, f64) {
    let bits = u.bits();
    let quadrant = (bits.wrapping_add(1u128 << 125) >> 126) & 3;
    let residual = bits.wrapping_sub(quadrant << 126) as i128;
    let theta = residual as f64 * TWO_POW_NEG_128 * std::f64::consts::TAU;
    let (s, c) = theta.sin_cos();
    match quadrant {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dd_close(a: DoubleDouble, b: f64, tol: f64) -> bool {
        (a - DoubleDouble::from_f64(b)).to_f64().abs() <= tol
    }

    #[test]
    fn exact_angles() {
        let q = |p, r| Frac::from_rational(p, r).unwrap();
        let (s, c) = sin_cos_turns(Frac::ZERO);
        assert_eq!((s.to_f64(), c.to_f64()), (0.0, 1.0));
        let (s, c) = sin_cos_turns(q(1, 4));
        assert_eq!((s.to_f64(), c.to_f64()), (1.0, 0.0));
        let (s, c) = sin_cos_turns(Frac::HALF);
        assert_eq!((s.to_f64(), c.to_f64()), (0.0, -1.0));
        let (s, c) = sin_cos_turns(q(3, 4));
        assert_eq!((s.to_f64(), c.to_f64()), (-1.0, 0.0));
    }

    #[test]
    fn double_double_accuracy_beyond_f64() {
        // sin(π/6) = 1/2; the turn 1/12 is rounded at 2^-129, far below 1e-30
        let (s, _) = sin_cos_turns(Frac::from_rational(1, 12).unwrap());
        assert!(dd_close(s, 0.5, 1e-30), "{s:?}");
        // cos(π/4)² = 1/2
        let (_, c) = sin_cos_turns(Frac::from_rational(1, 8).unwrap());
        assert!(dd_close(c * c, 0.5, 1e-30));
        // cos(π/3) = 1/2 from the other side of the quadrant boundary
        let (_, c) = sin_cos_turns(Frac::from_rational(1, 6).unwrap());
        assert!(dd_close(c, 0.5, 1e-30));
    }

    #[test]
    fn arithmetic() {
        let third = DoubleDouble::ONE.div_f64(3.0);
        assert!(dd_close(third.mul_f64(3.0), 1.0, 1e-31));
        let x = DoubleDouble::from_f64(1.0) + DoubleDouble::from_f64(1e-20);
        assert_eq!(x.hi, 1.0);
        assert_eq!(x.lo, 1e-20);
        assert!(dd_close((x - DoubleDouble::ONE).mul_f64(1e20), 1.0, 1e-15));
    }

    #[test]
    fn scaled_conversion_of_short_values_is_exact() {
        let units: i128 = (1i128 << 100) + 12345;
        let d = DoubleDouble::from_scaled_i128(units);
        assert_eq!(d.hi, 2f64.powi(-28));
        assert_eq!(d.lo, 12345.0 * TWO_POW_NEG_128);
        assert_eq!(d.to_frac_wrapping(), Frac::from_bits(units as u128));
    }

    proptest! {
        #[test]
        fn agrees_with_libm_and_pythagoras(bits in any::<u128>()) {
            let u = Frac::from_bits(bits);
            let (s, c) = sin_cos_turns(u);
            let angle = u.to_real() * std::f64::consts::TAU;
            prop_assert!((s.to_f64() - angle.sin()).abs() < 4e-15);
            prop_assert!((c.to_f64() - angle.cos()).abs() < 4e-15);
            let one = s * s + c * c;
            prop_assert!((one - DoubleDouble::ONE).to_f64().abs() < 1e-30);
            let (sf, cf) = sin_cos_turns_f64(u);
            prop_assert!((sf - s.to_f64()).abs() < 1e-15);
            prop_assert!((cf - c.to_f64()).abs() < 1e-15);
        }

        #[test]
        fn table_path_matches_series(bits in any::<u128>()) {
            let (s, c) = sin_cos_turns(Frac::from_bits(bits));
            let (s2, c2) = sin_cos_turns_series(bits);
            prop_assert!((s - s2).to_f64().abs() < 1e-31);
            prop_assert!((c - c2).to_f64().abs() < 1e-31);
        }

        #[test]
        fn odd_and_even(bits in any::<u128>()) {
            let u = Frac::from_bits(bits);
            let (s, c) = sin_cos_turns(u);
            let (sn, cn) = sin_cos_turns(-u);
            prop_assert!((s + sn).to_f64().abs() < 1e-30);
            prop_assert!((c - cn).to_f64().abs() < 1e-30);
        }
    }
}
