//! Products, fiber products and the self-joining demonstrations.
//!
//! A joining here is the synchronized orbit of a pair of points. In fiber
//! mode the pair must lie over a common factor: the selected coordinates of
//! the two starts agree, and for exact factor dynamics they keep agreeing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{box_cells, cell_index, default_checkpoints, format_real, CompensatedMean, DiagnosticReport, Observable, ReportRow};
use crate::error::{Error, Result};
use crate::flows::{make_flow, FlowSpec, OrbitState, Point};
use crate::lacunary::LacunaryParams;
use crate::torus::{Frac, TorusPoint};

/// Largest state dimension accepted by [`minimality_probe`].
pub const MAX_PROBE_DIM: usize = 6;

/// Caveat attached to every joining report.
pub const TRUNCATION_CAVEAT: &str = "at finite truncation the cocycle is a coboundary and the skew product is \
conjugate to a rotation pair; non-strict ergodicity of the joining is not numerically demonstrable";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JoinMode {
    FullProduct,
    /// Pairs whose listed coordinates agree.
    Fiber { left_factor_coords: Vec<usize>, right_factor_coords: Vec<usize> },
}

/// Two flows, a pairing mode and the pair of starting points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JoinSpec {
    pub left: FlowSpec,
    pub right: FlowSpec,
    pub mode: JoinMode,
    /// `[left_start, right_start]`.
    pub starts: [TorusPoint; 2],
}

impl JoinSpec {
    pub fn new(left: FlowSpec, right: FlowSpec, mode: JoinMode, left_start: TorusPoint, right_start: TorusPoint) -> JoinSpec {
        JoinSpec { left, right, mode, starts: [left_start, right_start] }
    }

    pub fn dim(&self) -> usize {
        self.left.dim() + self.right.dim()
    }

    /// Whether the factor coordinates of a pair agree (always true for full products).
    pub fn factor_agrees(&self, left: &TorusPoint, right: &TorusPoint) -> bool {
        match &self.mode {
            JoinMode::FullProduct => true,
            JoinMode::Fiber { left_factor_coords, right_factor_coords } => left_factor_coords
                .iter()
                .zip(right_factor_coords)
                .all(|(&i, &j)| left[i] == right[j]),
        }
    }

    fn validate(&self) -> Result<()> {
        for (spec, start) in [(&self.left, &self.starts[0]), (&self.right, &self.starts[1])] {
            if matches!(spec, FlowSpec::Heisenberg(_)) {
                return Err(Error::Unsupported("joinings of nilmanifold flows".into()));
            }
            if start.dim() != spec.dim() {
                return Err(Error::DimensionMismatch { expected: spec.dim(), got: start.dim() });
            }
        }
        if let JoinMode::Fiber { left_factor_coords: l, right_factor_coords: r } = &self.mode {
            if l.len() != r.len() || l.is_empty() {
                return Err(Error::Precondition("factor coordinate lists must be nonempty and of equal length".into()));
            }
            if l.iter().any(|&i| i >= self.left.dim()) || r.iter().any(|&j| j >= self.right.dim()) {
                return Err(Error::Precondition("factor coordinate index out of range".into()));
            }
            if !self.factor_agrees(&self.starts[0], &self.starts[1]) {
                return Err(Error::Precondition("starts do not lie over a common factor point".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOrbitPoint {
    pub left: TorusPoint,
    pub right: TorusPoint,
    pub n: u64,
}

impl PairOrbitPoint {
    /// Concatenated coordinates `(left, right)`.
    pub fn joined(&self) -> TorusPoint {
        TorusPoint::new([self.left.coords(), self.right.coords()].concat())
    }
}

/// Synchronized orbit of both components.
#[derive(Clone, Debug)]
pub struct JoinOrbit {
    left: OrbitState,
    right: OrbitState,
    remaining: u64,
}

impl Iterator for JoinOrbit {
    type Item = PairOrbitPoint;
    fn next(&mut self) -> Option<PairOrbitPoint> {
        if self.remaining == 0 {
            return None;
        }
        let out = PairOrbitPoint {
            left: self.left.torus_point().unwrap().clone(),
            right: self.right.torus_point().unwrap().clone(),
            n: self.left.step_index(),
        };
        self.remaining -= 1;
        if self.remaining > 0 {
            self.left.step();
            self.right.step();
        }
        Some(out)
    }
}

pub fn join_orbit(spec: &JoinSpec, n: u64) -> Result<JoinOrbit> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Precondition("orbit length must be at least 1".into()));
    }
    Ok(JoinOrbit {
        left: make_flow(&spec.left, spec.starts[0].clone())?,
        right: make_flow(&spec.right, spec.starts[1].clone())?,
        remaining: n,
    })
}

/// The offset `β` of an Anzai pair started at `(x, z)` and `(x + β, z)`.
pub fn anzai_offset(spec: &JoinSpec) -> Result<Frac> {
    match (&spec.left, &spec.right) {
        (FlowSpec::Anzai { alpha: a }, FlowSpec::Anzai { alpha: b }) if a == b => {}
        _ => return Err(Error::Precondition("not an Anzai pair with a common rotation number".into())),
    }
    spec.validate()?;
    let [l, r] = &spec.starts;
    if l[1] != r[1] {
        return Err(Error::Precondition("Anzai pair starts must share the z coordinate".into()));
    }
    Ok(r[0] - l[0])
}

/// The factor map `((x, z), (x', z')) ↦ z' − z` along the Anzai joining.
pub fn anzai_joining_factor(spec: &JoinSpec, n: u64) -> Result<impl Iterator<Item = Frac>> {
    anzai_offset(spec)?;
    Ok(join_orbit(spec, n)?.map(|p| p.right[1] - p.left[1]))
}

fn character_grid() -> Vec<Observable> {
    [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [0, 1, 1], [1, 0, 1], [1, 1, 1], [2, 0, 1]]
        .iter()
        .map(|c| Observable::Character { coeffs: c.to_vec() })
        .collect()
}

/// The joining of the S-flow `(x, y, z) ↦ (x + α, y + φ(x), z + x)` from
/// `(0, 0, 0)` and `(β, 0, 0)`.
///
/// Checks `x'_n − x_n = β` and `z'_n − z_n = nβ` bit for bit, reports the
/// fiber offset `y'_n − y_n` and, for a grid of characters, the distance
/// between the Birkhoff averages of the two components at `N/4, N/2, N`.
pub fn m_joining_demo(params: &LacunaryParams, alpha: Frac, n: u64) -> Result<DiagnosticReport> {
    let beta = params.beta;
    let flow = FlowSpec::SFlow { alpha: Some(alpha), cocycle: params.clone() };
    let spec = JoinSpec::new(
        flow.clone(),
        flow.clone(),
        JoinMode::FullProduct,
        TorusPoint::zeros(3),
        TorusPoint::new(vec![beta, Frac::ZERO, Frac::ZERO]),
    );
    let checkpoints = default_checkpoints(n);
    let observables = character_grid();
    let mut left_means = vec![CompensatedMean::new(); observables.len()];
    let mut right_means = vec![CompensatedMean::new(); observables.len()];
    let mut x_bad = 0u64;
    let mut z_bad = 0u64;
    let mut max_y = 0.0f64;
    let mut report = DiagnosticReport::new(flow.digest(), "m_joining", n);
    report.metadata.insert("caveat".into(), TRUNCATION_CAVEAT.into());
    report.metadata.insert("beta".into(), beta.to_string());
    for p in join_orbit(&spec, n)? {
        if p.right[0] - p.left[0] != beta {
            x_bad += 1;
        }
        if p.right[2] - p.left[2] != beta.int_mul(p.n as i64) {
            z_bad += 1;
        }
        let y_off = p.right[1] - p.left[1];
        max_y = max_y.max(y_off.dist(Frac::ZERO));
        let (lp, rp) = (Point::Torus(p.left), Point::Torus(p.right));
        for (k, obs) in observables.iter().enumerate() {
            left_means[k].push(obs.eval(&lp));
            right_means[k].push(obs.eval(&rp));
        }
        let count = p.n + 1;
        if checkpoints.contains(&count) {
            report.push(ReportRow::real("y_offset", count, y_off.to_real(), format!("max_dist={}", format_real(max_y))));
            for (k, obs) in observables.iter().enumerate() {
                let d: Complex64 = left_means[k].mean() - right_means[k].mean();
                report.push(ReportRow::real("pair_deviation", count, d.norm(), obs.descriptor()));
            }
        }
    }
    report.push(ReportRow::real("x_offset_mismatches", n, x_bad as f64, "x'_n - x_n = beta"));
    report.push(ReportRow::real("z_offset_mismatches", n, z_bad as f64, "z'_n - z_n = n*beta"));
    Ok(report)
}

/// Visited-cell fractions of an orbit in the `cells^d` grid, at each
/// (increasing) checkpoint.
pub fn visited_fraction_curve(
    points: impl IntoIterator<Item = TorusPoint>,
    dim: usize,
    cells: u64,
    checkpoints: &[u64],
) -> Result<Vec<f64>> {
    if cells == 0 {
        return Err(Error::Precondition("grid must have at least one cell per axis".into()));
    }
    let total = box_cells(dim, cells, MAX_PROBE_DIM)?;
    let mut seen = vec![0u64; total.div_ceil(64) as usize];
    let mut visited = 0u64;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for (i, p) in points.into_iter().enumerate() {
        if next.peek().is_none() {
            break;
        }
        if p.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
        }
        let c = cell_index(&p, cells);
        let (word, bit) = ((c / 64) as usize, 1u64 << (c % 64));
        if seen[word] & bit == 0 {
            seen[word] |= bit;
            visited += 1;
        }
        while next.peek() == Some(&&(i as u64 + 1)) {
            out.push(visited as f64 / total as f64);
            next.next();
        }
    }
    Ok(out)
}

/// What a minimality probe runs on.
#[derive(Clone, Debug)]
pub enum ProbeTarget<'a> {
    Flow(&'a FlowSpec, TorusPoint),
    Join(&'a JoinSpec),
}

/// Fraction of `cells^d` grid cells visited by the first `N` orbit points.
pub fn minimality_probe(target: ProbeTarget<'_>, n: u64, cells: u64) -> Result<f64> {
    Ok(minimality_curve(target, &[n], cells)?[0])
}

/// [`minimality_probe`] at several increasing sample sizes from one orbit.
pub fn minimality_curve(target: ProbeTarget<'_>, checkpoints: &[u64], cells: u64) -> Result<Vec<f64>> {
    let n = *checkpoints.last().ok_or_else(|| Error::Precondition("no checkpoints".into()))?;
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0 {
        return Err(Error::Precondition("checkpoints must be positive and increasing".into()));
    }
    match target {
        ProbeTarget::Flow(spec, start) => {
            if matches!(spec, FlowSpec::Heisenberg(_)) {
                return Err(Error::Unsupported("grid probe of a nilmanifold orbit".into()));
            }
            let dim = spec.dim();
            box_cells(dim, cells, MAX_PROBE_DIM)?;
            let pts = crate::flows::torus_orbit(spec, start, n)?;
            visited_fraction_curve(pts, dim, cells, checkpoints)
        }
        ProbeTarget::Join(spec) => {
            let dim = spec.dim();
            box_cells(dim, cells, MAX_PROBE_DIM)?;
            let pts = join_orbit(spec, n)?.map(|p| p.joined());
            visited_fraction_curve(pts, dim, cells, checkpoints)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lacunary::Weights;
    use proptest::prelude::*;

    fn q(p: i128, d: i128) -> Frac {
        Frac::from_rational(p, d).unwrap()
    }

    fn beta() -> Frac {
        Frac::from_decimal("0.41421356237309504880168872420969807856967187537694").unwrap()
    }

    fn anzai_pair(alpha: Frac, b: Frac) -> JoinSpec {
        let a = FlowSpec::Anzai { alpha };
        JoinSpec::new(a.clone(), a, JoinMode::FullProduct, TorusPoint::zeros(2), TorusPoint::new(vec![b, Frac::ZERO]))
    }

    #[test]
    fn full_product_is_componentwise() {
        let l = FlowSpec::Rotation { d: 1, delta: TorusPoint::new(vec![q(1, 3)]) };
        let r = FlowSpec::Rotation { d: 1, delta: TorusPoint::new(vec![beta()]) };
        let spec = JoinSpec::new(l, r, JoinMode::FullProduct, TorusPoint::zeros(1), TorusPoint::new(vec![q(1, 2)]));
        for p in join_orbit(&spec, 100).unwrap() {
            assert_eq!(p.left[0], q(1, 3).int_mul(p.n as i64));
            assert_eq!(p.right[0], beta().int_mul(p.n as i64) + q(1, 2));
        }
    }

    #[test]
    fn anzai_pair_offsets() {
        let (a, b) = (q(1, 7) + beta(), beta());
        let spec = anzai_pair(a, b);
        for p in join_orbit(&spec, 1000).unwrap() {
            assert_eq!(p.right[0] - p.left[0], b);
        }
        let factor: Vec<Frac> = anzai_joining_factor(&spec, 1000).unwrap().collect();
        assert_eq!(factor[0], Frac::ZERO);
        for (n, z) in factor.iter().enumerate() {
            assert_eq!(*z, b.int_mul(n as i64));
        }
        for w in factor.windows(2) {
            assert_eq!(w[1] - w[0], b);
        }
    }

    #[test]
    fn anzai_factor_preconditions() {
        let mut spec = anzai_pair(q(1, 3), beta());
        spec.starts[1] = TorusPoint::new(vec![beta(), q(1, 5)]);
        assert!(anzai_joining_factor(&spec, 10).is_err());
        let other = JoinSpec::new(
            FlowSpec::Anzai { alpha: q(1, 3) },
            FlowSpec::Anzai { alpha: q(1, 5) },
            JoinMode::FullProduct,
            TorusPoint::zeros(2),
            TorusPoint::zeros(2),
        );
        assert!(anzai_offset(&other).is_err());
    }

    #[test]
    fn fiber_product_over_shared_base() {
        let c = LacunaryParams::new(3, Weights::Inv, 1.0, beta()).unwrap();
        let alpha = c.alpha();
        let spec = JoinSpec::new(
            FlowSpec::CocycleSkew { alpha: None, cocycle: c },
            FlowSpec::Anzai { alpha },
            JoinMode::Fiber { left_factor_coords: vec![0], right_factor_coords: vec![0] },
            TorusPoint::new(vec![q(1, 9), Frac::ZERO]),
            TorusPoint::new(vec![q(1, 9), q(1, 2)]),
        );
        for p in join_orbit(&spec, 2000).unwrap() {
            assert!(spec.factor_agrees(&p.left, &p.right));
        }
        let mut bad = spec.clone();
        bad.starts[1] = TorusPoint::new(vec![q(1, 8), Frac::ZERO]);
        assert!(matches!(join_orbit(&bad, 10), Err(Error::Precondition(_))));
        let mut out_of_range = spec;
        out_of_range.mode = JoinMode::Fiber { left_factor_coords: vec![2], right_factor_coords: vec![0] };
        assert!(join_orbit(&out_of_range, 10).is_err());
    }

    #[test]
    fn m_joining_identities() {
        let c = LacunaryParams::new(3, Weights::Inv, 1.0, beta()).unwrap();
        let report = m_joining_demo(&c, c.alpha(), 4000).unwrap();
        let value = |name: &str| report.rows_named(name).next().unwrap().value_re;
        assert_eq!(value("x_offset_mismatches"), 0.0);
        assert_eq!(value("z_offset_mismatches"), 0.0);
        assert_eq!(report.rows_named("y_offset").count(), 3);
        assert_eq!(report.rows_named("pair_deviation").count(), 3 * 8);
        assert!(report.metadata["caveat"].contains("not numerically demonstrable"));
        for r in report.rows_named("pair_deviation") {
            assert!(r.value_re <= 2.0);
        }
    }

    #[test]
    fn probe_examples() {
        let half = FlowSpec::Rotation { d: 1, delta: TorusPoint::new(vec![Frac::HALF]) };
        let curve = minimality_curve(ProbeTarget::Flow(&half, TorusPoint::zeros(1)), &[1, 2, 10, 1000], 4).unwrap();
        assert_eq!(curve, vec![0.25, 0.5, 0.5, 0.5]);
        let w = FlowSpec::Weyl { beta: beta(), degree: 3 };
        assert_eq!(minimality_probe(ProbeTarget::Flow(&w, TorusPoint::zeros(3)), 1, 10).unwrap(), 1e-3);
        assert!(matches!(
            minimality_probe(ProbeTarget::Flow(&FlowSpec::Weyl { beta: beta(), degree: 7 }, TorusPoint::zeros(7)), 1, 2),
            Err(Error::ResourceLimit(_))
        ));
        assert!(matches!(
            minimality_probe(ProbeTarget::Flow(&w, TorusPoint::zeros(3)), 1, 1000),
            Err(Error::ResourceLimit(_))
        ));
        let pair = anzai_pair(beta(), q(1, 3));
        let f = minimality_probe(ProbeTarget::Join(&pair), 100_000, 5).unwrap();
        assert!(f > 0.0 && f <= 1.0);
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{
            "left": {"variant": "anzai", "params": {"alpha": "0.1"}},
            "right": {"variant": "anzai", "params": {"alpha": "0.1"}},
            "mode": {"kind": "fiber", "left_factor_coords": [0], "right_factor_coords": [0]},
            "starts": [["0", "0"], ["0", "0.5"]]
        }"#;
        let spec: JoinSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.dim(), 4);
        let again: JoinSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }

    proptest! {
        #[test]
        fn probe_is_monotone(bits in any::<u128>(), cells in 1u64..12) {
            let spec = FlowSpec::Anzai { alpha: Frac::from_bits(bits) };
            let cps: Vec<u64> = (1..=20).map(|k| k * 50).collect();
            let curve = minimality_curve(ProbeTarget::Flow(&spec, TorusPoint::zeros(2)), &cps, cells).unwrap();
            prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(curve.iter().all(|&f| (0.0..=1.0).contains(&f)));
        }

        #[test]
        fn anzai_factor_is_closed_form(a in any::<u128>(), b in any::<u128>(), x0 in any::<u128>()) {
            let alpha = Frac::from_bits(a);
            let off = Frac::from_bits(b);
            let x = Frac::from_bits(x0);
            let f = FlowSpec::Anzai { alpha };
            let spec = JoinSpec::new(f.clone(), f, JoinMode::FullProduct,
                TorusPoint::new(vec![x, Frac::ZERO]), TorusPoint::new(vec![x + off, Frac::ZERO]));
            for (n, z) in anzai_joining_factor(&spec, 200).unwrap().enumerate() {
                prop_assert_eq!(z, off.int_mul(n as i64));
            }
        }
    }
}
