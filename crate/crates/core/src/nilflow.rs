//! The Heisenberg nilmanifold `N/Γ` and its Θ-function observable.
//!
//! `N` is the group of upper unitriangular matrices `(1 x z; 0 1 y; 0 0 1)`,
//! written `(x, y, z)`, and `Γ` its integer points. The nil-translation acts
//! by left multiplication with `T = (α, β, γ + αβ/2)` on cosets `gΓ`.
//!
//! Points are real-valued because the group law `z + z' + x·y'` mixes
//! coordinates multiplicatively. The closed-form sequence [`nil_function`]
//! reduces its phases exactly in [`Frac`] instead.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::torus::Frac;

/// Default truncation tolerance of the Θ series.
pub const DEFAULT_THETA_TOL: f64 = 1e-12;

/// Largest accepted Θ tolerance.
pub const MAX_THETA_TOL: f64 = 1e-3;

/// Largest `|n|` accepted by [`nil_function`].
pub const MAX_NIL_INDEX: i64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct HeisPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HeisPoint {
    pub const IDENTITY: HeisPoint = HeisPoint { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> HeisPoint {
        HeisPoint { x, y, z }
    }

    pub fn is_reduced(&self) -> bool {
        [self.x, self.y, self.z].iter().all(|v| (0.0..1.0).contains(v))
    }
}

/// Matrix product `(x+x', y+y', z+z'+x·y')`.
pub fn heis_mul(g: HeisPoint, h: HeisPoint) -> HeisPoint {
    HeisPoint { x: g.x + h.x, y: g.y + h.y, z: g.z + h.z + g.x * h.y }
}

/// Group inverse `(-x, -y, xy - z)`.
pub fn heis_inv(g: HeisPoint) -> HeisPoint {
    HeisPoint { x: -g.x, y: -g.y, z: g.x * g.y - g.z }
}

fn unit_interval(v: f64) -> f64 {
    let f = v - v.floor();
    // a tiny negative input rounds up to exactly 1
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Canonical representative of `gΓ` in `[0, 1)^3`.
///
/// Right multiplication by `(p, q, r) ∈ Γ` sends `(x, y, z)` to
/// `(x+p, y+q, z+r+x·q)`; the integers are chosen in the order `q` from `y`,
/// `p` from `x`, then `r` from the shifted `z`.
pub fn reduce_mod_lattice(g: HeisPoint) -> HeisPoint {
    let q = -g.y.floor();
    let z = g.z + g.x * q;
    HeisPoint { x: unit_interval(g.x), y: unit_interval(g.y), z: unit_interval(z) }
}

/// Parameters of the nil-translation and the Θ truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNilParams", into = "RawNilParams")]
pub struct NilParams {
    pub alpha: Frac,
    pub beta: Frac,
    pub gamma: Frac,
    pub theta_tol: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNilParams {
    alpha: Frac,
    beta: Frac,
    gamma: Frac,
    #[serde(default)]
    theta_tol: Option<String>,
}

impl TryFrom<RawNilParams> for NilParams {
    type Error = Error;
    fn try_from(raw: RawNilParams) -> Result<Self> {
        let theta_tol = match raw.theta_tol {
            None => DEFAULT_THETA_TOL,
            Some(s) => s.trim().parse().map_err(|_| Error::Malformed(s.clone()))?,
        };
        NilParams::new(raw.alpha, raw.beta, raw.gamma, theta_tol)
    }
}

impl From<NilParams> for RawNilParams {
    fn from(p: NilParams) -> Self {
        RawNilParams {
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            theta_tol: Some(format!("{:e}", p.theta_tol)),
        }
    }
}

impl NilParams {
    pub fn new(alpha: Frac, beta: Frac, gamma: Frac, theta_tol: f64) -> Result<NilParams> {
        check_tol(theta_tol)?;
        Ok(NilParams { alpha, beta, gamma, theta_tol })
    }

    /// `αβ/2` of the `[0, 1)` representatives, rounded once.
    pub fn half_product(&self) -> Frac {
        self.alpha.representative_product(self.beta, 1)
    }

    /// The translation element `T = (α, β, γ + αβ/2)`.
    pub fn translation(&self) -> HeisPoint {
        HeisPoint {
            x: self.alpha.to_real(),
            y: self.beta.to_real(),
            z: (self.gamma + self.half_product()).to_real(),
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= MAX_THETA_TOL {
        Ok(())
    } else {
        Err(Error::Precondition(format!("theta tolerance must lie in (0, {MAX_THETA_TOL}], got {tol}")))
    }
}

/// One step `gΓ ↦ (T·g)Γ`, returned reduced.
pub fn nil_step(g: HeisPoint, params: &NilParams) -> HeisPoint {
    reduce_mod_lattice(heis_mul(params.translation(), g))
}

/// Truncation radius `M` of the Θ series for an absolute tail error `tol`.
pub fn theta_cutoff(tol: f64) -> Result<u32> {
    check_tol(tol)?;
    let inner = (2.0 / (tol * (1.0 - (-PI).exp()))).ln() / PI;
    Ok(inner.sqrt().ceil() as u32 + 1)
}

fn gaussian_range(y: f64, cutoff: f64) -> std::ops::RangeInclusive<i64> {
    ((-y - cutoff).ceil() as i64)..=((cutoff - y).floor() as i64)
}

/// `F(x, y, z) = e^{2πiz} Σ_m e^{2πimx} e^{-π(m+y)²}`, truncated to
/// `|m + y| ≤ M` with tail error at most `tol`.
pub fn theta_eval(g: HeisPoint, tol: f64) -> Result<Complex64> {
    let cutoff = theta_cutoff(tol)? as f64;
    let x = g.x - g.x.floor();
    let mut sum = Complex64::new(0.0, 0.0);
    for m in gaussian_range(g.y, cutoff) {
        let weight = (-PI * (m as f64 + g.y).powi(2)).exp();
        let phase = (m as f64 * x).rem_euclid(1.0);
        sum += Complex64::from_polar(weight, TAU * phase);
    }
    let z = g.z - g.z.floor();
    Ok(sum * Complex64::from_polar(1.0, TAU * z))
}

/// `Σ_m e^{-π(m+y)²}` over the same window, an upper bound for `|F(·, y, ·)|`
/// up to the tail tolerance.
pub fn theta_bound(y: f64, tol: f64) -> Result<f64> {
    let cutoff = theta_cutoff(tol)? as f64;
    Ok(gaussian_range(y, cutoff).map(|m| (-PI * (m as f64 + y).powi(2)).exp()).sum())
}

/// The reduced point of the coset `T^n Γ`, computed in closed form.
///
/// `T^n = (nα, nβ, nγ + n²·αβ/2)`; reducing the `y` coordinate with
/// `q = -floor(nβ)` adds `nq·α` to `z`. All phases are formed in [`Frac`].
pub fn nil_orbit_point(n: i64, params: &NilParams) -> Result<HeisPoint> {
    if n.unsigned_abs() > MAX_NIL_INDEX as u64 {
        return Err(Error::Precondition(format!("|n| must be at most {MAX_NIL_INDEX}, got {n}")));
    }
    let q = -params.beta.floor_mul(n);
    let nq = i64::try_from(n as i128 * q).map_err(|_| Error::Overflow(format!("n·q at n = {n}")))?;
    let x = params.alpha.int_mul(n);
    let y = params.beta.int_mul(n);
    let z = params.gamma.int_mul(n) + params.half_product().int_mul(n * n) + params.alpha.int_mul(nq);
    Ok(HeisPoint { x: x.to_real(), y: y.to_real(), z: z.to_real() })
}

/// The sequence `f(n) = F(T^n e)`.
pub fn nil_function(n: i64, params: &NilParams) -> Result<Complex64> {
    theta_eval(nil_orbit_point(n, params)?, params.theta_tol)
}
