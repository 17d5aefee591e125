//! Furstenberg's lacunary cocycle family.
//!
//! The frequencies are `n_k = 2^{v_k}` with `v_1 = 1`, `v_{k+1} = 2^{v_k} + v_k + 1`,
//! extended symmetrically by `n_{-k} = -n_k`, and the rotation number is the
//! truncated sum `α = Σ_{k ≤ K} 1/n_k`. On top of that sequence sit
//!
//! * the transfer function `H(x) = Σ_{k≠0} c_k e^{2πi n_k x}`,
//! * the cocycle core `h(x) = Σ_{k≠0} c_k (e^{2πi n_k α} - 1) e^{2πi n_k x}`,
//!   which satisfies `h(x) = H(x + α) - H(x)` term by term,
//! * the fiber cocycle `φ(x) = t·h(x) + β` and the conjugacy `J(x, y) = (x, y + tH(x))`.
//!
//! `n_4` has about 631 000 decimal digits, so the sequence is truncated at
//! `K ≤ 3`; every statement here holds "at truncation K".
//!
//! Each term pairs `k` with `-k`, so all sums are real. They are evaluated in
//! double-double with the phases `n_k x` reduced exactly on the circle.

use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precise::{cos_turns, sin_cos_turns, DoubleDouble};
use crate::torus::{Frac, TorusPoint};

/// Largest supported truncation level.
pub const MAX_LEVEL: usize = 3;

/// The truncated sequences `v_k`, `n_k` and the rotation number `α`.
#[derive(Clone, Debug, PartialEq)]
pub struct LacunarySeq {
    v: Vec<u64>,
    n: Vec<u64>,
    alpha_exact: Ratio<u64>,
    alpha: Frac,
}

/// Builds the sequence up to level `K ∈ 1..=3`.
pub fn furstenberg_sequence(level: usize) -> Result<LacunarySeq> {
    if level == 0 || level > MAX_LEVEL {
        return Err(Error::Precondition(format!(
            "truncation level must lie in 1..={MAX_LEVEL}, got {level}"
        )));
    }
    let mut v = vec![1u64];
    while v.len() < level {
        let last = *v.last().unwrap();
        v.push((1u64 << last) + last + 1);
    }
    let n: Vec<u64> = v.iter().map(|&vk| 1u64 << vk).collect();
    let alpha_exact = n
        .iter()
        .fold(Ratio::from_integer(0u64), |acc, &nk| acc + Ratio::new(1, nk));
    let alpha = Frac::from_rational(*alpha_exact.numer() as i128, *alpha_exact.denom() as i128)?;
    Ok(LacunarySeq { v, n, alpha_exact, alpha })
}

impl LacunarySeq {
    pub fn level(&self) -> usize {
        self.n.len()
    }

    pub fn v(&self) -> &[u64] {
        &self.v
    }

    pub fn n(&self) -> &[u64] {
        &self.n
    }

    /// `Σ_{k ≤ K} 1/n_k` as a reduced rational.
    pub fn alpha_exact(&self) -> Ratio<u64> {
        self.alpha_exact
    }

    /// The same number on the circle (exact: the denominator is `2^{v_K}`).
    pub fn alpha(&self) -> Frac {
        self.alpha
    }

    /// Frequency `n_k` for `1 ≤ |k| ≤ K`, signed.
    pub fn frequency(&self, k: i64) -> i64 {
        let nk = self.n[k.unsigned_abs() as usize - 1] as i64;
        if k < 0 {
            -nk
        } else {
            nk
        }
    }
}

/// Fractional part of `n_k · α_K` as an exact rational.
///
/// This is the quantity bounded by `2^{-n_k}` in Furstenberg's small-divisor
/// estimate; it requires a tail term beyond `k`, hence `k < K`.
pub fn small_divisor_gap(seq: &LacunarySeq, k: usize) -> Result<Ratio<u64>> {
    if k == 0 || k >= seq.level() {
        return Err(Error::Precondition(format!(
            "gap index must satisfy 1 ≤ k < K = {}, got {k}",
            seq.level()
        )));
    }
    let alpha = seq.alpha_exact;
    let nk = seq.n[k - 1];
    let numer = (*alpha.numer() as u128 * nk as u128) % *alpha.denom() as u128;
    Ok(Ratio::new(numer as u64, *alpha.denom()))
}

/// The bound `2^{-n_k}` as an exact rational (`n_k < 64` required).
pub fn small_divisor_bound(seq: &LacunarySeq, k: usize) -> Result<Ratio<u64>> {
    let nk = *seq
        .n
        .get(k.wrapping_sub(1))
        .ok_or_else(|| Error::Precondition(format!("no frequency with index {k}")))?;
    if nk >= 64 {
        return Err(Error::Overflow(format!("2^-{nk} is not representable")));
    }
    Ok(Ratio::new(1, 1u64 << nk))
}

/// Coefficient family `c_k` (symmetric in `k`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    /// `c_k = 1`
    Unit,
    /// `c_k = 1 + 1/|k|`
    OnePlusInv,
    /// `c_k = 1/|k|`
    #[default]
    Inv,
}

impl Weights {
    pub fn coefficient(self, k: i64) -> DoubleDouble {
        let inv = DoubleDouble::ONE.div_f64(k.unsigned_abs() as f64);
        match self {
            Weights::Unit => DoubleDouble::ONE,
            Weights::OnePlusInv => DoubleDouble::ONE + inv,
            Weights::Inv => inv,
        }
    }
}

/// Parameters of the cocycle `φ = t·h + β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLacunaryParams", into = "RawLacunaryParams")]
pub struct LacunaryParams {
    pub seq: LacunarySeq,
    pub weights: Weights,
    pub t: f64,
    pub beta: Frac,
}

#[derive(Serialize, Deserialize)]
struct RawLacunaryParams {
    #[serde(rename = "K")]
    level: usize,
    #[serde(default)]
    weights: Weights,
    #[serde(default = "default_t")]
    t: String,
    beta: Frac,
}

fn default_t() -> String {
    "1.0".to_string()
}

impl TryFrom<RawLacunaryParams> for LacunaryParams {
    type Error = Error;
    fn try_from(raw: RawLacunaryParams) -> Result<Self> {
        let t: f64 = raw.t.trim().parse().map_err(|_| Error::Malformed(raw.t.clone()))?;
        if !t.is_finite() {
            return Err(Error::Malformed(raw.t));
        }
        Ok(LacunaryParams {
            seq: furstenberg_sequence(raw.level)?,
            weights: raw.weights,
            t,
            beta: raw.beta,
        })
    }
}

impl From<LacunaryParams> for RawLacunaryParams {
    fn from(p: LacunaryParams) -> Self {
        RawLacunaryParams {
            level: p.seq.level(),
            weights: p.weights,
            t: format!("{:?}", p.t),
            beta: p.beta,
        }
    }
}

impl LacunaryParams {
    pub fn new(level: usize, weights: Weights, t: f64, beta: Frac) -> Result<LacunaryParams> {
        Ok(LacunaryParams { seq: furstenberg_sequence(level)?, weights, t, beta })
    }

    /// Same parameters with another coupling `t`.
    pub fn with_t(&self, t: f64) -> LacunaryParams {
        LacunaryParams { t, ..self.clone() }
    }

    pub fn alpha(&self) -> Frac {
        self.seq.alpha()
    }

    /// `h(x)` in double-double.
    pub fn h_precise(&self, x: Frac) -> DoubleDouble {
        let shifted = x + self.seq.alpha();
        let mut acc = DoubleDouble::ZERO;
        for k in 1..=self.seq.level() as i64 {
            let nk = self.seq.frequency(k);
            let diff = cos_turns(shifted.int_mul(nk)) - cos_turns(x.int_mul(nk));
            acc = acc + (self.weights.coefficient(k) * diff).mul_f64(2.0);
        }
        acc
    }

    /// `H(x)` in double-double.
    pub fn transfer_precise(&self, x: Frac) -> DoubleDouble {
        let mut acc = DoubleDouble::ZERO;
        for k in 1..=self.seq.level() as i64 {
            let c = cos_turns(x.int_mul(self.seq.frequency(k)));
            acc = acc + (self.weights.coefficient(k) * c).mul_f64(2.0);
        }
        acc
    }

    /// The cocycle core `h(x)`, real by conjugate-pair symmetry.
    pub fn h_eval(&self, x: Frac) -> f64 {
        self.h_precise(x).to_f64()
    }

    /// The transfer function `H(x)`.
    pub fn transfer_eval(&self, x: Frac) -> f64 {
        self.transfer_precise(x).to_f64()
    }

    /// `h(x)` summed over `k = ±1 … ±K` as complex terms, before projecting
    /// to the real line. The imaginary part cancels pairwise.
    pub fn h_complex(&self, x: Frac) -> Complex64 {
        let shifted = x + self.seq.alpha();
        let mut re = DoubleDouble::ZERO;
        let mut im = DoubleDouble::ZERO;
        for k in (1..=self.seq.level() as i64).flat_map(|k| [k, -k]) {
            let nk = self.seq.frequency(k);
            let c = self.weights.coefficient(k);
            // (e^{2πi n_k α} - 1) e^{2πi n_k x} = e^{2πi n_k (x+α)} - e^{2πi n_k x}
            let (s1, c1) = sin_cos_turns(shifted.int_mul(nk));
            let (s0, c0) = sin_cos_turns(x.int_mul(nk));
            re = re + c * (c1 - c0);
            im = im + c * (s1 - s0);
        }
        Complex64::new(re.to_f64(), im.to_f64())
    }

    /// The fiber increment `φ(x) = t·h(x) + β` on the circle, rounded once.
    pub fn phi_frac(&self, x: Frac) -> Frac {
        self.h_precise(x).mul_f64(self.t).to_frac_wrapping() + self.beta
    }

    /// `φ(x)` as a real in `[0, 1)`.
    pub fn phi_eval(&self, x: Frac) -> f64 {
        self.phi_frac(x).to_real()
    }

    /// Fiber shift `t·H(x)` on the circle, rounded once.
    pub fn transfer_shift(&self, x: Frac) -> Frac {
        self.transfer_precise(x).mul_f64(self.t).to_frac_wrapping()
    }

    /// The conjugacy `J(x, y) = (x, y + tH(x))` between the rotation pair
    /// `R_{α,β}` and the skew product `T_φ`.
    pub fn j_map(&self, p: &TorusPoint) -> Result<TorusPoint> {
        if p.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: p.dim() });
        }
        let (x, y) = (p[0], p[1]);
        Ok(TorusPoint::new(vec![x, y + self.transfer_shift(x)]))
    }

    /// One step of the skew product `T_φ(x, y) = (x + α, y + φ(x))`.
    pub fn skew_step(&self, alpha: Frac, x: Frac, y: Frac) -> (Frac, Frac) {
        (x + alpha, y + self.phi_frac(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn params(level: usize, weights: Weights) -> LacunaryParams {
        let beta = Frac::from_decimal("0.41421356237309504880168872420969807856967187537694").unwrap();
        LacunaryParams::new(level, weights, 1.0, beta).unwrap()
    }

    /// Independent oracle: direct complex summation in plain doubles with the
    /// huge frequencies reduced modulo 1 in exact integer arithmetic.
    fn h_oracle(p: &LacunaryParams, x: Frac) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 1..=p.seq.level() as i64 {
            for sign in [1i64, -1] {
                let nk = sign * p.seq.frequency(k);
                let c = match p.weights {
                    Weights::Unit => 1.0,
                    Weights::OnePlusInv => 1.0 + 1.0 / k as f64,
                    Weights::Inv => 1.0 / k as f64,
                };
                let a = Frac::from_bits(p.alpha().bits().wrapping_mul(nk as i128 as u128)).to_real();
                let b = Frac::from_bits(x.bits().wrapping_mul(nk as i128 as u128)).to_real();
                let rot = Complex64::from_polar(1.0, TAU * a) - 1.0;
                sum += c * rot * Complex64::from_polar(1.0, TAU * b);
            }
        }
        sum
    }

    #[test]
    fn sequence_values() {
        let s = furstenberg_sequence(3).unwrap();
        assert_eq!(s.v(), &[1, 4, 21]);
        assert_eq!(s.n(), &[2, 16, 2097152]);
        assert_eq!(s.alpha_exact(), Ratio::new(1179649, 2097152));
        assert_eq!(s.alpha(), Frac::from_rational(1179649, 2097152).unwrap());
        assert_eq!(furstenberg_sequence(1).unwrap().alpha_exact(), Ratio::new(1, 2));
        assert!(matches!(furstenberg_sequence(4), Err(Error::Precondition(_))));
        assert!(matches!(furstenberg_sequence(0), Err(Error::Precondition(_))));
    }

    #[test]
    fn gaps_satisfy_the_small_divisor_bound() {
        let s = furstenberg_sequence(3).unwrap();
        let g1 = small_divisor_gap(&s, 1).unwrap();
        assert_eq!(g1, Ratio::new(131073, 1048576));
        assert!(g1 < small_divisor_bound(&s, 1).unwrap());
        assert_eq!(small_divisor_bound(&s, 1).unwrap(), Ratio::new(1, 4));
        let g2 = small_divisor_gap(&s, 2).unwrap();
        assert_eq!(g2, Ratio::new(1, 131072));
        assert!(g2 < small_divisor_bound(&s, 2).unwrap());
        assert_eq!(small_divisor_bound(&s, 2).unwrap(), Ratio::new(1, 65536));
        assert!(small_divisor_gap(&s, 3).is_err());
        assert!(small_divisor_bound(&s, 3).is_err());
        let s1 = furstenberg_sequence(1).unwrap();
        assert!(matches!(small_divisor_gap(&s1, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn transfer_at_zero() {
        let p = params(3, Weights::Inv);
        // all cosines are 1: 2·(1 + 1/2 + 1/3)
        assert!((p.transfer_eval(Frac::ZERO) - 11.0 / 3.0).abs() < 1e-15);
        assert!((params(3, Weights::Unit).transfer_eval(Frac::ZERO) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_pair_formula() {
        let p = params(1, Weights::Inv);
        let a = p.alpha().to_real();
        let expected = 2.0 * ((TAU * 2.0 * a).cos() - 1.0);
        assert!((p.h_eval(Frac::ZERO) - expected).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = Frac::from_bits(rng.gen());
            assert!((p.h_eval(x) - h_oracle(&p, x).re).abs() < 1e-13);
        }
    }

    #[test]
    fn agrees_with_direct_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for w in [Weights::Unit, Weights::OnePlusInv, Weights::Inv] {
            for level in 1..=3 {
                let p = params(level, w);
                for _ in 0..200 {
                    let x = Frac::from_bits(rng.gen());
                    let oracle = h_oracle(&p, x);
                    assert!(oracle.im.abs() < 1e-13);
                    assert!((p.h_eval(x) - oracle.re).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn conjugate_pairs_cancel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params(3, Weights::OnePlusInv);
        for _ in 0..10_000 {
            let x = Frac::from_bits(rng.gen());
            let z = p.h_complex(x);
            assert!(z.im.abs() <= 1e-15);
            assert!((z.re - p.h_eval(x)).abs() <= 1e-14);
        }
    }

    #[test]
    fn coboundary_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for w in [Weights::Unit, Weights::OnePlusInv, Weights::Inv] {
            let p = params(3, w);
            for _ in 0..2000 {
                let x = Frac::from_bits(rng.gen());
                let lhs = p.h_eval(x);
                let rhs = p.transfer_eval(x + p.alpha()) - p.transfer_eval(x);
                assert!((lhs - rhs).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn transfer_is_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = params(3, Weights::Inv);
        for _ in 0..1000 {
            let x = Frac::from_bits(rng.gen());
            assert!((p.transfer_eval(x) - p.transfer_eval(-x)).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_families_are_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (u, g, f) = (params(3, Weights::Unit), params(3, Weights::OnePlusInv), params(3, Weights::Inv));
        for _ in 0..1000 {
            let x = Frac::from_bits(rng.gen());
            assert!((g.h_eval(x) - u.h_eval(x) - f.h_eval(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_coupling() {
        let p = params(3, Weights::Inv).with_t(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = Frac::from_bits(rng.gen());
            assert_eq!(p.phi_frac(x), p.beta);
            let pt = TorusPoint::new(vec![x, Frac::from_bits(rng.gen())]);
            assert_eq!(p.j_map(&pt).unwrap(), pt);
        }
    }

    #[test]
    fn j_inverse_by_negated_coupling() {
        let p = params(3, Weights::Inv);
        let q = p.with_t(-1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let pt = TorusPoint::new(vec![Frac::from_bits(rng.gen()), Frac::from_bits(rng.gen())]);
            let back = q.j_map(&p.j_map(&pt).unwrap()).unwrap();
            assert_eq!(back[0], pt[0]);
            assert!(back[1].dist(pt[1]) <= 1e-12);
        }
        assert!(p.j_map(&TorusPoint::zeros(3)).is_err());
    }

    #[test]
    fn conjugacy_one_step() {
        let p = params(3, Weights::Inv);
        let alpha = p.alpha();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..1000 {
            let (x, y) = (Frac::from_bits(rng.gen()), Frac::from_bits(rng.gen()));
            let lhs = p.j_map(&TorusPoint::new(vec![x + alpha, y + p.beta])).unwrap();
            let jp = p.j_map(&TorusPoint::new(vec![x, y])).unwrap();
            let (rx, ry) = p.skew_step(alpha, jp[0], jp[1]);
            assert_eq!(lhs[0], rx);
            assert!(lhs[1].dist(ry) <= 1e-25);
        }
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"K": 3, "weights": "one_plus_inv", "t": "0.5", "beta": "0.25"}"#;
        let p: LacunaryParams = serde_json::from_str(json).unwrap();
        assert_eq!(p.seq.level(), 3);
        assert_eq!(p.weights, Weights::OnePlusInv);
        assert_eq!(p.t, 0.5);
        let again: LacunaryParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(again, p);
        assert!(serde_json::from_str::<LacunaryParams>(r#"{"K": 4, "beta": "0.1"}"#).is_err());
        assert!(serde_json::from_str::<LacunaryParams>(r#"{"K": 2, "t": "x", "beta": "0.1"}"#).is_err());
    }
}
