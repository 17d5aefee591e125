//! Birkhoff averages, uniform-deviation statistics, discrepancy and
//! eigenvalue-correlation scans along exact orbits.
//!
//! All means are compensated: `v_0 + (1/N)·Σ(v_n − v_0)` with a Neumaier sum,
//! so a constant observable averages to itself bit for bit.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{make_flow, FlowSpec, Point};
use crate::nilflow::{theta_bound, theta_eval, HeisPoint, DEFAULT_THETA_TOL};
use crate::precise::sin_cos_turns_f64;
use crate::torus::{Frac, TorusPoint};

/// Largest sample accepted by [`star_discrepancy_1d`].
pub const MAX_DISCREPANCY_POINTS: usize = 10_000_000;

/// Largest cell count accepted by [`box_discrepancy`].
pub const MAX_BOX_CELLS: u64 = 100_000_000;

/// Largest dimension accepted by [`box_discrepancy`].
pub const MAX_BOX_DIM: usize = 4;

/// Number of default deviation starts.
pub const DEFAULT_START_COUNT: usize = 100;

/// Modulus and generator of the default start lattice.
const LATTICE_MODULUS: u64 = 101;
const LATTICE_GENERATOR: u64 = 12;

/// A continuous function on the state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// `x ↦ e^{2πi⟨coeffs, x⟩}`; all-zero coefficients give the constant 1.
    Character { coeffs: Vec<i64> },
    /// The Θ-function `F` on the Heisenberg nilmanifold.
    Theta {
        #[serde(default = "default_tol", with = "real_string")]
        tol: f64,
    },
}

fn default_tol() -> f64 {
    DEFAULT_THETA_TOL
}

/// Reals in configs are decimal strings.
pub(crate) mod real_string {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:e}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| D::Error::custom(format!("malformed real `{s}`")))
    }
}

impl Observable {
    /// The first coordinate character `e^{2πi x_0}` on `𝕋^d`.
    pub fn coordinate(dim: usize, axis: usize) -> Observable {
        let mut coeffs = vec![0; dim];
        coeffs[axis] = 1;
        Observable::Character { coeffs }
    }

    pub fn constant(dim: usize) -> Observable {
        Observable::Character { coeffs: vec![0; dim] }
    }

    /// Checks the observable against the flow's state space.
    pub fn check(&self, spec: &FlowSpec) -> Result<()> {
        let heis = matches!(spec, FlowSpec::Heisenberg(_));
        match self {
            Observable::Character { coeffs } => {
                if heis {
                    return Err(Error::Unsupported("character observable on the nilmanifold".into()));
                }
                if coeffs.len() != spec.dim() {
                    return Err(Error::DimensionMismatch { expected: spec.dim(), got: coeffs.len() });
                }
            }
            Observable::Theta { tol } => {
                if !heis {
                    return Err(Error::Unsupported("Θ observable on a torus flow".into()));
                }
                theta_bound(0.0, *tol)?;
            }
        }
        Ok(())
    }

    /// `sup |obs|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Observable::Character { .. } => 1.0,
            Observable::Theta { tol } => theta_bound(0.0, *tol).unwrap_or(f64::INFINITY) + tol,
        }
    }

    /// Short human-readable descriptor.
    pub fn descriptor(&self) -> String {
        match self {
            Observable::Character { coeffs } => {
                let c: Vec<String> = coeffs.iter().map(i64::to_string).collect();
                format!("character({})", c.join(","))
            }
            Observable::Theta { tol } => format!("theta(tol={tol:e})"),
        }
    }

    /// Exact phase of a character at a torus point.
    fn phase(&self, p: &Point) -> Option<Frac> {
        match (self, p) {
            (Observable::Character { coeffs }, Point::Torus(t)) => Some(
                coeffs
                    .iter()
                    .zip(t.coords())
                    .fold(Frac::ZERO, |acc, (&k, &x)| acc + x.int_mul(k)),
            ),
            _ => None,
        }
    }

    /// Value at a point; the observable must have passed [`Observable::check`].
    pub fn eval(&self, p: &Point) -> Complex64 {
        self.eval_twisted(p, Frac::ZERO)
    }

    /// `obs(p) · e^{2πi·twist}`; for characters the twist joins the exact phase.
    fn eval_twisted(&self, p: &Point, twist: Frac) -> Complex64 {
        if let Some(phase) = self.phase(p) {
            let (s, c) = sin_cos_turns_f64(phase + twist);
            return Complex64::new(c, s);
        }
        let value = match (self, p) {
            (Observable::Theta { tol }, Point::Heis(g)) => theta_eval(*g, *tol).expect("checked tolerance"),
            (Observable::Theta { tol }, Point::Torus(t)) => {
                let r = t.to_reals();
                theta_eval(HeisPoint::new(r[0], r[1], r[2]), *tol).expect("checked tolerance")
            }
            _ => unreachable!("checked observable"),
        };
        if twist == Frac::ZERO {
            value
        } else {
            let (s, c) = sin_cos_turns_f64(twist);
            value * Complex64::new(c, s)
        }
    }
}

/// Neumaier-compensated sum of reals.
#[derive(Clone, Copy, Debug, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Running mean `v_0 + (1/n)·Σ(v_i − v_0)` of complex samples.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedMean {
    first: Complex64,
    re: CompensatedSum,
    im: CompensatedSum,
    count: u64,
}

impl CompensatedMean {
    pub fn new() -> CompensatedMean {
        CompensatedMean::default()
    }

    pub fn push(&mut self, v: Complex64) {
        if self.count == 0 {
            self.first = v;
        }
        let d = v - self.first;
        self.re.add(d.re);
        self.im.add(d.im);
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Complex64 {
        if self.count == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let n = self.count as f64;
        self.first + Complex64::new(self.re.value() / n, self.im.value() / n)
    }
}

/// Checkpoint sample sizes `⌊fN⌋` (at least 1) for fractions `f ∈ (0, 1]`,
/// sorted and deduplicated; `N` itself is always included.
pub fn checkpoint_sizes(n: u64, fractions: &[f64]) -> Result<Vec<u64>> {
    let mut sizes = Vec::with_capacity(fractions.len() + 1);
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Precondition(format!("checkpoint fraction {f} outside (0, 1]")));
        }
        sizes.push(((f * n as f64).floor() as u64).max(1));
    }
    sizes.push(n);
    sizes.sort_unstable();
    sizes.dedup();
    Ok(sizes)
}

/// The standard checkpoints `N/4, N/2, N`.
pub fn default_checkpoints(n: u64) -> Vec<u64> {
    checkpoint_sizes(n, &[0.25, 0.5]).expect("fixed fractions")
}

fn require_len(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::Precondition("sample length must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Twisted averages `(1/n) Σ_{m<n} obs(T^m x) e^{-2πimθ}` at each checkpoint `n`.
fn twisted_averages(
    spec: &FlowSpec,
    start: &Point,
    obs: &Observable,
    theta: Frac,
    checkpoints: &[u64],
) -> Result<Vec<Complex64>> {
    obs.check(spec)?;
    let total = *checkpoints.last().ok_or_else(|| Error::Precondition("no checkpoints".into()))?;
    require_len(total)?;
    let mut state = make_flow(spec, start.clone())?;
    let mut mean = CompensatedMean::new();
    let mut twist = Frac::ZERO;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for m in 0..total {
        if m > 0 {
            state.step();
        }
        mean.push(obs.eval_twisted(state.point(), twist));
        twist -= theta;
        while next.peek() == Some(&&(m + 1)) {
            out.push(mean.mean());
            next.next();
        }
    }
    Ok(out)
}

/// `(1/N) Σ_{n<N} obs(T^n x)`.
pub fn birkhoff_average(spec: &FlowSpec, start: impl Into<Point>, obs: &Observable, n: u64) -> Result<Complex64> {
    require_len(n)?;
    Ok(twisted_averages(spec, &start.into(), obs, Frac::ZERO, &[n])?[0])
}

/// Birkhoff averages at each of the given (sorted) sample sizes.
pub fn birkhoff_checkpoints(
    spec: &FlowSpec,
    start: impl Into<Point>,
    obs: &Observable,
    checkpoints: &[u64],
) -> Result<Vec<Complex64>> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints.first() == Some(&0) {
        return Err(Error::Precondition("checkpoints must be positive and increasing".into()));
    }
    twisted_averages(spec, &start.into(), obs, Frac::ZERO, checkpoints)
}

/// Deterministic starts on `𝕋^dim`: the rank-1 lattice
/// `x_k = (k·g^j mod 101) / 101` for `k = 0, …, count−1`, `g = 12`.
pub fn default_starts(dim: usize, count: usize) -> Vec<TorusPoint> {
    let m = LATTICE_MODULUS;
    (0..count as u64)
        .map(|k| {
            let mut mult = 1u64;
            let coords = (0..dim)
                .map(|_| {
                    let c = Frac::from_rational(((k * mult) % m) as i128, m as i128).expect("valid lattice point");
                    mult = mult * LATTICE_GENERATOR % m;
                    c
                })
                .collect();
            TorusPoint::new(coords)
        })
        .collect()
}

/// `max_{x, x'} |A_n(x) − A_n(x')|` at every checkpoint `n`.
///
/// Orbits of the starts run in parallel; the result does not depend on the
/// number of worker threads.
pub fn uniform_deviation(
    spec: &FlowSpec,
    starts: &[Point],
    obs: &Observable,
    checkpoints: &[u64],
) -> Result<Vec<f64>> {
    if starts.len() < 2 {
        return Err(Error::Precondition(format!("deviation needs at least 2 starts, got {}", starts.len())));
    }
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0 {
        return Err(Error::Precondition("checkpoints must be positive and increasing".into()));
    }
    let averages: Vec<Vec<Complex64>> = starts
        .par_iter()
        .map(|s| twisted_averages(spec, s, obs, Frac::ZERO, checkpoints))
        .collect::<Result<_>>()?;
    Ok((0..checkpoints.len())
        .map(|c| {
            let mut worst = 0.0f64;
            for (i, a) in averages.iter().enumerate() {
                for b in &averages[i + 1..] {
                    worst = worst.max((a[c] - b[c]).norm());
                }
            }
            worst
        })
        .collect())
}

/// Exact 1-D star discrepancy `max_i max(i/N − u_(i), u_(i) − (i−1)/N)`.
pub fn star_discrepancy_1d(points: &[Frac]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Precondition("empty sample".into()));
    }
    if points.len() > MAX_DISCREPANCY_POINTS {
        return Err(Error::ResourceLimit(format!("{} points exceed {MAX_DISCREPANCY_POINTS}", points.len())));
    }
    let mut sorted: Vec<Frac> = points.to_vec();
    sorted.par_sort_unstable();
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let u = u.to_real();
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// `max` over the `grid^d` boxes of `|empirical mass − volume|`.
pub fn box_discrepancy(points: impl IntoIterator<Item = TorusPoint>, grid: u64) -> Result<f64> {
    let mut points = points.into_iter().peekable();
    let dim = points.peek().ok_or_else(|| Error::Precondition("empty sample".into()))?.dim();
    if grid == 0 {
        return Err(Error::Precondition("grid must have at least one cell per axis".into()));
    }
    let cells = box_cells(dim, grid, MAX_BOX_DIM)?;
    let mut counts = vec![0u32; cells as usize];
    let mut total = 0u64;
    for p in points {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
        }
        counts[cell_index(&p, grid) as usize] += 1;
        total += 1;
    }
    let volume = 1.0 / cells as f64;
    let n = total as f64;
    Ok(counts.iter().map(|&c| (c as f64 / n - volume).abs()).fold(0.0, f64::max))
}

pub(crate) fn box_cells(dim: usize, grid: u64, max_dim: usize) -> Result<u64> {
    if dim == 0 || dim > max_dim {
        return Err(Error::ResourceLimit(format!("dimension {dim} exceeds {max_dim}")));
    }
    grid.checked_pow(dim as u32)
        .filter(|&c| c <= MAX_BOX_CELLS)
        .ok_or_else(|| Error::ResourceLimit(format!("{grid}^{dim} cells exceed {MAX_BOX_CELLS}")))
}

pub(crate) fn cell_index(p: &TorusPoint, grid: u64) -> u64 {
    p.coords().iter().fold(0u64, |acc, x| acc * grid + x.cell(grid))
}

/// `|(1/N) Σ_{n<N} obs(T^n x) e^{-2πinθ}|`.
pub fn eigen_correlation(spec: &FlowSpec, start: impl Into<Point>, obs: &Observable, theta: Frac, n: u64) -> Result<f64> {
    require_len(n)?;
    Ok(twisted_averages(spec, &start.into(), obs, theta, &[n])?[0].norm())
}

/// One row of a diagnostic report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub statistic: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub value_re: f64,
    pub value_im: f64,
    pub meta: String,
}

impl ReportRow {
    pub fn real(statistic: &str, n: u64, value: f64, meta: impl Into<String>) -> ReportRow {
        ReportRow { statistic: statistic.into(), n, value_re: value, value_im: 0.0, meta: meta.into() }
    }

    pub fn complex(statistic: &str, n: u64, value: Complex64, meta: impl Into<String>) -> ReportRow {
        ReportRow { statistic: statistic.into(), n, value_re: value.re, value_im: value.im, meta: meta.into() }
    }
}

/// Results of one diagnostic run. Carries no wall-clock or thread-count
/// data, so identical inputs give identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub flow_digest: String,
    pub observable: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub rows: Vec<ReportRow>,
    pub metadata: BTreeMap<String, String>,
}

impl DiagnosticReport {
    pub fn new(flow_digest: impl Into<String>, observable: impl Into<String>, n: u64) -> DiagnosticReport {
        let mut metadata = BTreeMap::new();
        metadata.insert("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
        DiagnosticReport {
            flow_digest: flow_digest.into(),
            observable: observable.into(),
            n,
            rows: Vec::new(),
            metadata,
        }
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    /// Rows whose statistic matches `name`.
    pub fn rows_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.statistic == name)
    }

    /// CSV with header `statistic,N,value_re,value_im,meta` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["statistic", "N", "value_re", "value_im", "meta"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.statistic.clone(),
                r.n.to_string(),
                format_real(r.value_re),
                format_real(r.value_im),
                r.meta.clone(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// Lossless decimal form of a double (17 significant digits).
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Scans `θ` values, flagging those with correlation at least `threshold`.
pub fn eigen_scan(
    spec: &FlowSpec,
    start: impl Into<Point>,
    obs: &Observable,
    thetas: &[Frac],
    n: u64,
    threshold: f64,
) -> Result<DiagnosticReport> {
    if thetas.is_empty() {
        return Err(Error::Precondition("empty θ grid".into()));
    }
    require_len(n)?;
    let start = start.into();
    let values: Vec<f64> = thetas
        .par_iter()
        .map(|&t| Ok(twisted_averages(spec, &start, obs, t, &[n])?[0].norm()))
        .collect::<Result<_>>()?;
    let mut report = DiagnosticReport::new(spec.digest(), obs.descriptor(), n);
    report.metadata.insert("threshold".into(), format_real(threshold));
    for (t, v) in thetas.iter().zip(values) {
        let peak = if v >= threshold { ";peak" } else { "" };
        report.push(ReportRow::real("eigen_correlation", n, v, format!("theta={t}{peak}")));
    }
    Ok(report)
}

/// Indices of flagged peaks in an [`eigen_scan`] report.
pub fn scan_peaks(report: &DiagnosticReport) -> Vec<usize> {
    report
        .rows_named("eigen_correlation")
        .enumerate()
        .filter(|(_, r)| r.meta.ends_with(";peak"))
        .map(|(i, _)| i)
        .collect()
}

/// Birkhoff report with checkpoint rows.
pub fn birkhoff_report(spec: &FlowSpec, start: impl Into<Point>, obs: &Observable, checkpoints: &[u64]) -> Result<DiagnosticReport> {
    let values = birkhoff_checkpoints(spec, start, obs, checkpoints)?;
    let n = *checkpoints.last().unwrap();
    let mut report = DiagnosticReport::new(spec.digest(), obs.descriptor(), n);
    for (&c, v) in checkpoints.iter().zip(values) {
        report.push(ReportRow::complex("birkhoff_mean", c, v, ""));
    }
    Ok(report)
}

/// Uniform-deviation report with checkpoint rows.
pub fn deviation_report(spec: &FlowSpec, starts: &[Point], obs: &Observable, checkpoints: &[u64]) -> Result<DiagnosticReport> {
    let values = uniform_deviation(spec, starts, obs, checkpoints)?;
    let n = *checkpoints.last().unwrap();
    let mut report = DiagnosticReport::new(spec.digest(), obs.descriptor(), n);
    report.metadata.insert("starts".into(), starts.len().to_string());
    for (&c, v) in checkpoints.iter().zip(values) {
        report.push(ReportRow::real("uniform_deviation", c, v, ""));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::torus_orbit;
    use crate::nilflow::NilParams;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn q(p: i128, d: i128) -> Frac {
        Frac::from_rational(p, d).unwrap()
    }

    fn beta() -> Frac {
        Frac::from_decimal("0.41421356237309504880168872420969807856967187537694").unwrap()
    }

    fn rotation(a: Frac) -> FlowSpec {
        FlowSpec::Rotation { d: 1, delta: TorusPoint::new(vec![a]) }
    }

    fn origin(d: usize) -> Point {
        Point::Torus(TorusPoint::zeros(d))
    }

    #[test]
    fn constant_is_exact() {
        let spec = FlowSpec::Weyl { beta: beta(), degree: 3 };
        let a = birkhoff_average(&spec, origin(3), &Observable::constant(3), 12_345).unwrap();
        assert_eq!(a, Complex64::new(1.0, 0.0));
        let mut m = CompensatedMean::new();
        for _ in 0..1000 {
            m.push(Complex64::new(0.1, -0.3));
        }
        assert_eq!(m.mean(), Complex64::new(0.1, -0.3));
    }

    #[test]
    fn half_rotation_alternates() {
        let obs = Observable::coordinate(1, 0);
        let a = birkhoff_average(&rotation(Frac::HALF), origin(1), &obs, 1000).unwrap();
        assert_eq!(a.norm(), 0.0);
        let odd = birkhoff_average(&rotation(Frac::HALF), origin(1), &obs, 5).unwrap();
        assert!((odd.re - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rotation_geometric_sum_oracle() {
        let obs = Observable::coordinate(1, 0);
        for a in [beta(), q(1, 3), Frac::from_decimal("0.001").unwrap()] {
            let at = a.to_real();
            for n in [10u64, 1000, 100_000] {
                let avg = birkhoff_average(&rotation(a), origin(1), &obs, n).unwrap();
                // |Σ e^{2πimα}| = |sin(πNα)/sin(πα)|
                let exact = ((PI * n as f64 * at).sin() / (PI * at).sin()).abs() / n as f64;
                assert!((avg.norm() - exact).abs() <= n as f64 * 1e-15 + 1e-12);
                assert!(avg.norm() <= 1.0 / (n as f64 * (PI * at).sin().abs()) + n as f64 * 1e-16);
            }
        }
    }

    #[test]
    fn full_cycle_of_roots_of_unity() {
        let obs = Observable::coordinate(1, 0);
        for d in [3i128, 7, 64, 1000] {
            let a = birkhoff_average(&rotation(q(1, d)), origin(1), &obs, d as u64).unwrap();
            assert!(a.norm() <= d as f64 * 1e-16, "q = {d}: {a}");
        }
    }

    #[test]
    fn checkpoints_match_prefix_averages() {
        let spec = FlowSpec::Anzai { alpha: beta() };
        let obs = Observable::Character { coeffs: vec![1, 2] };
        let cps = default_checkpoints(1000);
        assert_eq!(cps, vec![250, 500, 1000]);
        let vals = birkhoff_checkpoints(&spec, origin(2), &obs, &cps).unwrap();
        for (c, v) in cps.iter().zip(vals) {
            assert_eq!(v, birkhoff_average(&spec, origin(2), &obs, *c).unwrap());
        }
        assert!(checkpoint_sizes(10, &[0.0]).is_err());
        assert!(checkpoint_sizes(10, &[1.5]).is_err());
        assert_eq!(checkpoint_sizes(3, &[0.1, 1.0]).unwrap(), vec![1, 3]);
    }

    #[test]
    fn observable_checks() {
        let spec = FlowSpec::Anzai { alpha: beta() };
        assert!(Observable::coordinate(3, 0).check(&spec).is_err());
        assert!(Observable::Theta { tol: 1e-12 }.check(&spec).is_err());
        let nil = FlowSpec::Heisenberg(NilParams::new(q(1, 3), q(1, 5), Frac::ZERO, 1e-12).unwrap());
        assert!(Observable::Theta { tol: 1e-12 }.check(&nil).is_ok());
        assert!(Observable::Theta { tol: 1.0 }.check(&nil).is_err());
        assert!(Observable::coordinate(3, 0).check(&nil).is_err());
        let json = r#"{"kind": "theta"}"#;
        assert_eq!(serde_json::from_str::<Observable>(json).unwrap(), Observable::Theta { tol: 1e-12 });
        let json = r#"{"kind": "character", "coeffs": [0, 1]}"#;
        assert_eq!(serde_json::from_str::<Observable>(json).unwrap(), Observable::coordinate(2, 1));
    }

    #[test]
    fn theta_average_along_nilflow_is_bounded() {
        let nil = FlowSpec::Heisenberg(NilParams::new(beta(), q(1, 7), q(1, 10), 1e-12).unwrap());
        let obs = Observable::Theta { tol: 1e-12 };
        let a = birkhoff_average(&nil, HeisPoint::IDENTITY, &obs, 2000).unwrap();
        assert!(a.norm() <= obs.sup_bound());
    }

    #[test]
    fn deviation_basics() {
        let spec = rotation(beta());
        let obs = Observable::coordinate(1, 0);
        let same = vec![origin(1); 5];
        assert_eq!(uniform_deviation(&spec, &same, &obs, &[10, 100]).unwrap(), vec![0.0, 0.0]);
        assert!(uniform_deviation(&spec, &same[..1], &obs, &[10]).is_err());
        let starts: Vec<Point> = default_starts(1, 20).into_iter().map(Point::Torus).collect();
        let n = 10_000;
        let dev = uniform_deviation(&spec, &starts, &obs, &[n]).unwrap()[0];
        let s = (PI * beta().to_real()).sin().abs();
        assert!(dev <= 2.0 / (n as f64 * s) + 1e-12);
        let mut reversed = starts.clone();
        reversed.reverse();
        assert_eq!(uniform_deviation(&spec, &reversed, &obs, &[n]).unwrap()[0], dev);
    }

    #[test]
    fn default_start_lattice() {
        let s = default_starts(3, 100);
        assert_eq!(s.len(), 100);
        assert_eq!(s[0], TorusPoint::zeros(3));
        assert_eq!(s[1].coords(), &[q(1, 101), q(12, 101), q(144 % 101, 101)]);
        let mut firsts: Vec<_> = s.iter().map(|p| p[0]).collect();
        firsts.dedup();
        assert_eq!(firsts.len(), 100);
    }

    #[test]
    fn star_discrepancy_examples() {
        let n = 1000;
        let grid: Vec<Frac> = (0..n).map(|i| q(i, n)).collect();
        assert!((star_discrepancy_1d(&grid).unwrap() - 1.0 / n as f64).abs() < 1e-15);
        assert_eq!(star_discrepancy_1d(&[Frac::ZERO]).unwrap(), 1.0);
        assert!(star_discrepancy_1d(&[]).is_err());
        let golden = Frac::from_decimal("0.61803398874989484820458683436563811772030917980576").unwrap();
        let pts: Vec<Frac> = (0..1000).map(|i| golden.int_mul(i)).collect();
        // independent oracle: brute force over anchored intervals at sample points
        let mut reals: Vec<f64> = pts.iter().map(|p| p.to_real()).collect();
        reals.sort_by(f64::total_cmp);
        let mut brute = 0.0f64;
        for (i, &u) in reals.iter().enumerate() {
            let below = reals.iter().filter(|&&v| v < u).count() as f64;
            let upto = (i + 1) as f64;
            brute = brute.max((upto / 1000.0 - u).abs()).max((below / 1000.0 - u).abs());
        }
        let d = star_discrepancy_1d(&pts).unwrap();
        assert!((d - brute).abs() < 1e-12);
        assert!(d <= 0.01);
    }

    #[test]
    fn box_discrepancy_examples() {
        let one_cell = vec![TorusPoint::new(vec![q(1, 10)]); 7];
        assert_eq!(box_discrepancy(one_cell, 2).unwrap(), 0.5);
        let uniform: Vec<TorusPoint> = (0..4)
            .flat_map(|i| (0..4).map(move |j| TorusPoint::new(vec![q(2 * i + 1, 8), q(2 * j + 1, 8)])))
            .collect();
        assert_eq!(box_discrepancy(uniform, 4).unwrap(), 0.0);
        assert!(matches!(box_discrepancy(vec![TorusPoint::zeros(5)], 2), Err(Error::ResourceLimit(_))));
        assert!(matches!(box_discrepancy(vec![TorusPoint::zeros(4)], 101), Err(Error::ResourceLimit(_))));
        let spec = FlowSpec::Weyl { beta: beta(), degree: 3 };
        let d = box_discrepancy(torus_orbit(&spec, TorusPoint::zeros(3), 200_000).unwrap(), 10).unwrap();
        assert!(d <= 0.01, "{d}");
    }

    #[test]
    fn eigen_correlation_examples() {
        let b = beta();
        let spec = FlowSpec::Weyl { beta: b, degree: 3 };
        let obs = Observable::coordinate(3, 0);
        let n = 10_000;
        let at_beta = eigen_correlation(&spec, origin(3), &obs, b, n).unwrap();
        assert_eq!(at_beta, 1.0);
        let off = eigen_correlation(&spec, origin(3), &obs, b + q(1, 100), n).unwrap();
        assert!(off <= 1.0 / (n as f64 * (PI / 100.0).sin()) + 1e-12);
        let c = Observable::constant(3);
        assert_eq!(eigen_correlation(&spec, origin(3), &c, Frac::ZERO, n).unwrap(), 1.0);
        let z = Observable::coordinate(3, 2);
        let avg = birkhoff_average(&spec, origin(3), &z, n).unwrap();
        assert_eq!(eigen_correlation(&spec, origin(3), &z, Frac::ZERO, n).unwrap(), avg.norm());
    }

    #[test]
    fn scan_flags_the_eigenvalue() {
        let b = beta();
        let spec = FlowSpec::Weyl { beta: b, degree: 3 };
        let obs = Observable::coordinate(3, 0);
        let thetas: Vec<Frac> = (0..10).map(|k| b + q(k, 10)).collect();
        let report = eigen_scan(&spec, origin(3), &obs, &thetas, 20_000, 0.5).unwrap();
        assert_eq!(scan_peaks(&report), vec![0]);
        let c = eigen_scan(&spec, origin(3), &Observable::constant(3), &[q(1, 3), Frac::ZERO, q(1, 2)], 1000, 0.5)
            .unwrap();
        assert_eq!(scan_peaks(&c), vec![1]);
        assert_eq!(c.rows[1].value_re, 1.0);
        assert!(eigen_scan(&spec, origin(3), &obs, &[], 10, 0.5).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut r = DiagnosticReport::new("abc", "character(1)", 4);
        r.push(ReportRow::complex("birkhoff_mean", 4, Complex64::new(0.1, -2.0), "x"));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "statistic,N,value_re,value_im,meta\nbirkhoff_mean,4,1.0000000000000001e-1,-2.0000000000000000e0,x\n"
        );
        let parsed: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(parsed, 0.1);
        let mut json = Vec::new();
        r.write_json(&mut json).unwrap();
        let back: DiagnosticReport = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn star_discrepancy_is_permutation_invariant(mut bits in proptest::collection::vec(any::<u128>(), 1..200), seed in any::<u64>()) {
            let pts: Vec<Frac> = bits.iter().map(|&b| Frac::from_bits(b)).collect();
            let d = star_discrepancy_1d(&pts).unwrap();
            let k = seed as usize % bits.len();
            bits.rotate_left(k);
            bits.reverse();
            let shuffled: Vec<Frac> = bits.iter().map(|&b| Frac::from_bits(b)).collect();
            prop_assert_eq!(star_discrepancy_1d(&shuffled).unwrap(), d);
            prop_assert!(d >= 1.0 / (2.0 * pts.len() as f64) - 1e-15 && d <= 1.0);
        }

        #[test]
        fn averages_are_bounded(bits in any::<u128>(), k0 in -3i64..=3, k1 in -3i64..=3, n in 1u64..2000) {
            let spec = FlowSpec::Anzai { alpha: Frac::from_bits(bits) };
            let obs = Observable::Character { coeffs: vec![k0, k1] };
            let a = birkhoff_average(&spec, origin(2), &obs, n).unwrap();
            prop_assert!(a.norm() <= 1.0 + n as f64 * 1e-15);
        }

        #[test]
        fn deviation_is_symmetric(bits in any::<u128>(), n in 1u64..500) {
            let spec = rotation(Frac::from_bits(bits));
            let obs = Observable::coordinate(1, 0);
            let starts: Vec<Point> = default_starts(1, 4).into_iter().map(Point::Torus).collect();
            let mut rev = starts.clone();
            rev.reverse();
            prop_assert_eq!(
                uniform_deviation(&spec, &starts, &obs, &[n]).unwrap(),
                uniform_deviation(&spec, &rev, &obs, &[n]).unwrap()
            );
        }
    }
}
