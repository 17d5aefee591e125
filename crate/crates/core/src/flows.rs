//! Declarative flow specifications and exact orbit iteration.
//!
//! Affine variants (rotations, Weyl systems, the Anzai map) are iterated with
//! wrap-around additions only and are bit-exact. Skew products driven by a
//! lacunary cocycle round the real cocycle value onto the circle once per step.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lacunary::LacunaryParams;
use crate::nilflow::{nil_step, HeisPoint, NilParams};
use crate::torus::{Frac, TorusPoint};

/// Largest supported Weyl degree.
pub const MAX_WEYL_DEGREE: usize = 8;

/// A flow `T` on a torus or on the Heisenberg nilmanifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum FlowSpec {
    /// `x ↦ x + δ` on `𝕋^d`.
    Rotation { d: usize, delta: TorusPoint },
    /// The unipotent affine map on `𝕋^L` whose orbit of 0 is `(nβ, n²β, …, n^Lβ)`:
    /// `x_j ↦ β + Σ_{i ≤ j} C(j, i) x_i`.
    Weyl {
        beta: Frac,
        #[serde(rename = "L")]
        degree: usize,
    },
    /// `(x, z) ↦ (x + α, z + x)`.
    Anzai { alpha: Frac },
    /// `(x, y) ↦ (x + α, y + φ(x))`; `alpha` defaults to the lacunary α.
    CocycleSkew {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<Frac>,
        cocycle: LacunaryParams,
    },
    /// `(x, y, z) ↦ (x + α, y + φ(x), z + x)`; `alpha` defaults to the lacunary α.
    SFlow {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<Frac>,
        cocycle: LacunaryParams,
    },
    /// Left translation on `N/Γ`.
    Heisenberg(NilParams),
    /// Componentwise product of torus flows.
    Product { specs: Vec<FlowSpec> },
}

impl FlowSpec {
    /// State dimension.
    pub fn dim(&self) -> usize {
        match self {
            FlowSpec::Rotation { d, .. } => *d,
            FlowSpec::Weyl { degree, .. } => *degree,
            FlowSpec::Anzai { .. } | FlowSpec::CocycleSkew { .. } => 2,
            FlowSpec::SFlow { .. } | FlowSpec::Heisenberg(_) => 3,
            FlowSpec::Product { specs } => specs.iter().map(FlowSpec::dim).sum(),
        }
    }

    /// Whether every step is a composition of exact circle additions.
    pub fn is_affine(&self) -> bool {
        match self {
            FlowSpec::Rotation { .. } | FlowSpec::Weyl { .. } | FlowSpec::Anzai { .. } => true,
            FlowSpec::Product { specs } => specs.iter().all(FlowSpec::is_affine),
            _ => false,
        }
    }

    /// Base rotation number of a skew product.
    pub fn skew_alpha(&self) -> Option<Frac> {
        match self {
            FlowSpec::CocycleSkew { alpha, cocycle } | FlowSpec::SFlow { alpha, cocycle } => {
                Some(alpha.unwrap_or_else(|| cocycle.alpha()))
            }
            FlowSpec::Anzai { alpha } => Some(*alpha),
            _ => None,
        }
    }

    /// Canonical JSON text of the spec.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("flow specs always serialize")
    }

    /// Short content digest (first 16 hex digits of SHA-256 of the canonical JSON).
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_json().as_bytes());
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn validate(&self) -> Result<()> {
        match self {
            FlowSpec::Rotation { d, delta } => {
                if *d == 0 {
                    return Err(Error::Precondition("rotation dimension must be at least 1".into()));
                }
                if delta.dim() != *d {
                    return Err(Error::DimensionMismatch { expected: *d, got: delta.dim() });
                }
            }
            FlowSpec::Weyl { degree, .. } => {
                if *degree == 0 || *degree > MAX_WEYL_DEGREE {
                    return Err(Error::Precondition(format!(
                        "Weyl degree must lie in 1..={MAX_WEYL_DEGREE}, got {degree}"
                    )));
                }
            }
            FlowSpec::Product { specs } => {
                if specs.is_empty() {
                    return Err(Error::Precondition("product of no flows".into()));
                }
                for s in specs {
                    if matches!(s, FlowSpec::Heisenberg(_)) {
                        return Err(Error::Unsupported("Heisenberg factor inside a product".into()));
                    }
                    s.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A state-space point: a torus point or a Heisenberg coset representative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Torus(TorusPoint),
    Heis(HeisPoint),
}

impl Point {
    pub fn as_torus(&self) -> Option<&TorusPoint> {
        match self {
            Point::Torus(p) => Some(p),
            Point::Heis(_) => None,
        }
    }

    pub fn into_torus(self) -> Option<TorusPoint> {
        match self {
            Point::Torus(p) => Some(p),
            Point::Heis(_) => None,
        }
    }

    pub fn as_heis(&self) -> Option<HeisPoint> {
        match self {
            Point::Heis(g) => Some(*g),
            Point::Torus(_) => None,
        }
    }

    /// Coordinates as reals.
    pub fn to_reals(&self) -> Vec<f64> {
        match self {
            Point::Torus(p) => p.to_reals(),
            Point::Heis(g) => vec![g.x, g.y, g.z],
        }
    }
}

impl From<TorusPoint> for Point {
    fn from(p: TorusPoint) -> Point {
        Point::Torus(p)
    }
}

impl From<HeisPoint> for Point {
    fn from(g: HeisPoint) -> Point {
        Point::Heis(g)
    }
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// The explicit degree-`L` affine map `x_j ↦ β + Σ_{i=1..j} C(j, i) x_i`.
pub fn weyl_affine_map(beta: Frac, p: &TorusPoint) -> TorusPoint {
    let x = p.coords();
    let next = (1..=x.len())
        .map(|j| {
            (1..=j).fold(beta, |acc, i| acc + x[i - 1].int_mul(binomial(j, i)))
        })
        .collect::<Vec<_>>();
    TorusPoint::new(next)
}

/// `(nβ, n²β, …, n^Lβ)`; powers are taken modulo `2^128`, which is exact on the circle.
pub fn weyl_closed_form(beta: Frac, degree: usize, n: i64) -> Result<TorusPoint> {
    if degree == 0 || degree > MAX_WEYL_DEGREE {
        return Err(Error::Precondition(format!("Weyl degree must lie in 1..={MAX_WEYL_DEGREE}")));
    }
    let m = n as i128 as u128;
    let mut power = 1u128;
    let coords = (0..degree)
        .map(|_| {
            power = power.wrapping_mul(m);
            Frac::from_bits(beta.bits().wrapping_mul(power))
        })
        .collect();
    Ok(TorusPoint::new(coords))
}

/// `(nα, C(n, 2)·α)`, the Anzai orbit of `(0, 0)`.
pub fn anzai_closed_form(alpha: Frac, n: i64) -> Result<TorusPoint> {
    if n.unsigned_abs() >= 1 << 31 {
        return Err(Error::Overflow(format!("n(n-1)/2 at n = {n}")));
    }
    Ok(TorusPoint::new(vec![alpha.int_mul(n), alpha.int_mul(n * (n - 1) / 2)]))
}

#[derive(Clone, Debug)]
enum Kernel {
    Rotation { delta: TorusPoint },
    /// `tables[j][m]` is the `m`-th forward difference of coordinate `j`.
    Weyl { tables: Vec<Vec<Frac>> },
    Anzai { alpha: Frac },
    CocycleSkew { alpha: Frac, cocycle: LacunaryParams },
    SFlow { alpha: Frac, cocycle: LacunaryParams },
    Heisenberg { params: NilParams },
    Product { parts: Vec<OrbitState> },
}

/// Current point, step index and (for Weyl systems) difference tables.
#[derive(Clone, Debug)]
pub struct OrbitState {
    point: Point,
    step_index: u64,
    kernel: Kernel,
}

/// Initial state at `n = 0`.
///
/// For Heisenberg flows a 3-dimensional torus start is read as the coset
/// representative with the same coordinates.
pub fn make_flow(spec: &FlowSpec, start: impl Into<Point>) -> Result<OrbitState> {
    spec.validate()?;
    let start = start.into();
    let dim = spec.dim();
    if let FlowSpec::Heisenberg(params) = spec {
        let g = match start {
            Point::Heis(g) => g,
            Point::Torus(p) => {
                if p.dim() != 3 {
                    return Err(Error::DimensionMismatch { expected: 3, got: p.dim() });
                }
                let r = p.to_reals();
                HeisPoint::new(r[0], r[1], r[2])
            }
        };
        return Ok(OrbitState {
            point: Point::Heis(g),
            step_index: 0,
            kernel: Kernel::Heisenberg { params: params.clone() },
        });
    }
    let start = start
        .into_torus()
        .ok_or_else(|| Error::Unsupported("Heisenberg point as start of a torus flow".into()))?;
    if start.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: start.dim() });
    }
    let kernel = match spec {
        FlowSpec::Rotation { delta, .. } => Kernel::Rotation { delta: delta.clone() },
        FlowSpec::Weyl { beta, degree } => Kernel::Weyl { tables: weyl_tables(*beta, *degree, &start) },
        FlowSpec::Anzai { alpha } => Kernel::Anzai { alpha: *alpha },
        FlowSpec::CocycleSkew { cocycle, .. } => Kernel::CocycleSkew {
            alpha: spec.skew_alpha().unwrap(),
            cocycle: cocycle.clone(),
        },
        FlowSpec::SFlow { cocycle, .. } => Kernel::SFlow {
            alpha: spec.skew_alpha().unwrap(),
            cocycle: cocycle.clone(),
        },
        FlowSpec::Product { specs } => {
            let mut parts = Vec::with_capacity(specs.len());
            let mut offset = 0;
            for s in specs {
                let piece = TorusPoint::new(start.coords()[offset..offset + s.dim()].to_vec());
                offset += s.dim();
                parts.push(make_flow(s, piece)?);
            }
            Kernel::Product { parts }
        }
        FlowSpec::Heisenberg(_) => unreachable!(),
    };
    Ok(OrbitState { point: Point::Torus(start), step_index: 0, kernel })
}

/// Difference tables from the affine iterates `p(0), …, p(L)`:
/// `Δ^m p_j(0) = Σ_i (-1)^{m-i} C(m, i) p_j(i)`.
fn weyl_tables(beta: Frac, degree: usize, start: &TorusPoint) -> Vec<Vec<Frac>> {
    let mut iterates = vec![start.clone()];
    for _ in 0..degree {
        let next = weyl_affine_map(beta, iterates.last().unwrap());
        iterates.push(next);
    }
    (0..degree)
        .map(|j| {
            // coordinate j has polynomial degree j + 1
            (0..=j + 1)
                .map(|m| {
                    (0..=m).fold(Frac::ZERO, |acc, i| {
                        let sign = if (m - i) % 2 == 0 { 1 } else { -1 };
                        acc + iterates[i][j].int_mul(sign * binomial(m, i))
                    })
                })
                .collect()
        })
        .collect()
}

impl OrbitState {
    pub fn point(&self) -> &Point {
        &self.point
    }

    /// Torus coordinates of the current point (`None` on the nilmanifold).
    pub fn torus_point(&self) -> Option<&TorusPoint> {
        self.point.as_torus()
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Forward-difference tables of a Weyl orbit, one row per coordinate.
    pub fn diff_table(&self) -> Option<&[Vec<Frac>]> {
        match &self.kernel {
            Kernel::Weyl { tables } => Some(tables),
            _ => None,
        }
    }

    /// Applies the flow map once.
    pub fn step(&mut self) {
        self.step_index += 1;
        if let Kernel::Heisenberg { params } = &self.kernel {
            let g = self.point.as_heis().unwrap();
            self.point = Point::Heis(nil_step(g, params));
            return;
        }
        let Point::Torus(p) = &mut self.point else { unreachable!() };
        let c = p.coords_mut();
        match &mut self.kernel {
            Kernel::Rotation { delta } => {
                for (x, d) in c.iter_mut().zip(delta.coords()) {
                    *x += *d;
                }
            }
            Kernel::Weyl { tables } => {
                for (x, row) in c.iter_mut().zip(tables.iter_mut()) {
                    for m in 0..row.len() - 1 {
                        let next = row[m + 1];
                        row[m] += next;
                    }
                    *x = row[0];
                }
            }
            Kernel::Anzai { alpha } => {
                let x = c[0];
                c[0] += *alpha;
                c[1] += x;
            }
            Kernel::CocycleSkew { alpha, cocycle } => {
                let x = c[0];
                c[0] += *alpha;
                c[1] += cocycle.phi_frac(x);
            }
            Kernel::SFlow { alpha, cocycle } => {
                let x = c[0];
                c[0] += *alpha;
                c[1] += cocycle.phi_frac(x);
                c[2] += x;
            }
            Kernel::Product { parts } => {
                let mut offset = 0;
                for part in parts.iter_mut() {
                    part.step();
                    let q = part.torus_point().unwrap().coords();
                    c[offset..offset + q.len()].copy_from_slice(q);
                    offset += q.len();
                }
            }
            Kernel::Heisenberg { .. } => unreachable!(),
        }
    }
}

/// Lazy orbit `T^0 x, …, T^{N-1} x` in constant memory.
#[derive(Clone, Debug)]
pub struct Orbit {
    state: OrbitState,
    remaining: u64,
}

impl Iterator for Orbit {
    type Item = Point;
    fn next(&mut self) -> Option<Point> {
        if self.remaining == 0 {
            return None;
        }
        let out = self.state.point.clone();
        self.remaining -= 1;
        if self.remaining > 0 {
            self.state.step();
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

pub fn orbit(spec: &FlowSpec, start: impl Into<Point>, n: u64) -> Result<Orbit> {
    if n == 0 {
        return Err(Error::Precondition("orbit length must be at least 1".into()));
    }
    Ok(Orbit { state: make_flow(spec, start)?, remaining: n })
}

/// Torus-only orbit, yielding [`TorusPoint`]s.
pub fn torus_orbit(spec: &FlowSpec, start: TorusPoint, n: u64) -> Result<impl Iterator<Item = TorusPoint>> {
    if matches!(spec, FlowSpec::Heisenberg(_)) {
        return Err(Error::Unsupported("torus orbit of a Heisenberg flow".into()));
    }
    Ok(orbit(spec, start, n)?.map(|p| p.into_torus().unwrap()))
}

/// Size of the orbit of `start` under an affine flow, if it closes up
/// within `max_steps` steps. Affine maps are invertible, so the orbit is
/// finite exactly when it returns to `start`.
pub fn orbit_cardinality(spec: &FlowSpec, start: &TorusPoint, max_steps: u64) -> Result<Option<u64>> {
    if !spec.is_affine() {
        return Err(Error::Unsupported("orbit cardinality of a non-affine flow".into()));
    }
    let mut state = make_flow(spec, start.clone())?;
    for n in 1..=max_steps {
        state.step();
        if state.torus_point() == Some(start) {
            return Ok(Some(n));
        }
    }
    Ok(None)
}
