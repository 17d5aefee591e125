//! Named verification runs behind `ergodlab demo`.
//!
//! Each demo measures the residual of one or more identities and compares it
//! to a fixed tolerance. Random sample points come from a seeded ChaCha
//! generator, so every run is reproducible.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diagnostics::{format_real, DiagnosticReport, ReportRow};
use crate::error::Result;
use crate::joinings::{anzai_joining_factor, m_joining_demo, JoinMode, JoinSpec, TRUNCATION_CAVEAT};
use crate::lacunary::{furstenberg_sequence, small_divisor_bound, small_divisor_gap, LacunaryParams, Weights};
use crate::nilflow::{heis_mul, nil_function, nil_step, theta_eval, HeisPoint, NilParams, DEFAULT_THETA_TOL};
use crate::torus::{Frac, TorusPoint};
use crate::flows::FlowSpec;

pub const COBOUNDARY_TOL: f64 = 1e-12;
pub const REALITY_TOL: f64 = 1e-15;
pub const CONJUGACY_TOL: f64 = 1e-10;
pub const THETA_ORIGIN_TOL: f64 = 1e-10;
/// Drift allowance per step of the iterated nilflow orbit.
pub const NIL_DRIFT_PER_STEP: f64 = 1e-8;

/// `frac(√2)` to 50 digits.
pub const SQRT2_FRAC: &str = "0.41421356237309504880168872420969807856967187537694";
/// `frac(golden ratio)` to 50 digits.
pub const GOLDEN_FRAC: &str = "0.61803398874989484820458683436563811772030917980576";

/// One verified identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn within(name: &str, residual: f64, tol: f64, detail: impl Into<String>) -> Check {
        Check { name: name.into(), residual, tol, pass: residual <= tol, detail: detail.into() }
    }

    pub fn exact(name: &str, mismatches: u64, detail: impl Into<String>) -> Check {
        Check { name: name.into(), residual: mismatches as f64, tol: 0.0, pass: mismatches == 0, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("{verdict} {} residual={} tol={}", self.name, format_real(self.residual), format_real(self.tol));
        if !self.detail.is_empty() {
            s.push(' ');
            s.push_str(&self.detail);
        }
        s
    }
}

/// Result of a demo: checks, informational notes and a report of the residuals.
#[derive(Clone, Debug)]
pub struct DemoOutcome {
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
    pub report: DiagnosticReport,
}

impl DemoOutcome {
    fn new(name: &str, digest: String, n: u64, notes: Vec<String>, checks: Vec<Check>) -> DemoOutcome {
        let mut report = DiagnosticReport::new(digest, name, n);
        for c in &checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            report.push(ReportRow::real(&c.name, n, c.residual, format!("{verdict};tol={}", format_real(c.tol))));
        }
        DemoOutcome { notes, checks, report }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn default_beta() -> Frac {
    Frac::from_decimal(SQRT2_FRAC).expect("valid constant")
}

pub fn default_lacunary() -> LacunaryParams {
    LacunaryParams::new(3, Weights::Inv, 1.0, default_beta()).expect("valid constant")
}

pub fn default_nil() -> NilParams {
    NilParams::new(
        default_beta(),
        Frac::from_decimal(GOLDEN_FRAC).expect("valid constant"),
        Frac::from_rational(1, 10).expect("valid constant"),
        DEFAULT_THETA_TOL,
    )
    .expect("valid constant")
}

/// `max` that keeps a NaN residual instead of discarding it.
fn worst(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn random_frac(rng: &mut ChaCha8Rng) -> Frac {
    Frac::from_bits(rng.gen())
}

/// The sequence `v_k`, `n_k`, `α_K` and the small-divisor gaps.
pub fn fur_seq(level: usize) -> Result<DemoOutcome> {
    let seq = furstenberg_sequence(level)?;
    let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    let notes = vec![
        format!("v=({})", join(seq.v())),
        format!("n=({})", join(seq.n())),
        format!("alpha={}", seq.alpha_exact()),
    ];
    let mut checks = Vec::new();
    for k in 1..level {
        let gap = small_divisor_gap(&seq, k)?;
        let bound = small_divisor_bound(&seq, k)?;
        let to_f = |r: num_rational::Ratio<u64>| *r.numer() as f64 / *r.denom() as f64;
        checks.push(Check {
            name: format!("gap_k{k}"),
            residual: to_f(gap),
            tol: to_f(bound),
            pass: gap < bound,
            detail: format!("frac(n_{k}*alpha)={gap} < {bound}"),
        });
    }
    Ok(DemoOutcome::new("fur-seq", String::new(), level as u64, notes, checks))
}

/// `h = H(· + α) − H` and reality of the complex sum at `points` random points.
pub fn coboundary(params: &LacunaryParams, points: u64, seed: u64) -> Result<DemoOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Frac> = (0..points).map(|_| random_frac(&mut rng)).collect();
    let alpha = params.alpha();
    let (cob, imag) = xs
        .par_iter()
        .map(|&x| {
            let r = (params.h_eval(x) - (params.transfer_eval(x + alpha) - params.transfer_eval(x))).abs();
            (r, params.h_complex(x).im.abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (worst(a.0, b.0), worst(a.1, b.1)));
    let checks = vec![
        Check::within("coboundary", cob, COBOUNDARY_TOL, format!("points={points}")),
        Check::within("reality", imag, REALITY_TOL, ""),
    ];
    let notes = vec![format!("K={} weights={:?} t={}", params.seq.level(), params.weights, params.t)];
    Ok(DemoOutcome::new("coboundary", String::new(), points, notes, checks))
}

/// Largest fiber discrepancy between `J(R^n p)` and `T_φ^n(J p)`.
pub fn conjugacy_residual(params: &LacunaryParams, starts: &[(Frac, Frac)], steps: u64) -> f64 {
    let alpha = params.alpha();
    starts
        .par_iter()
        .map(|&(x0, y0)| {
            let (mut rx, mut ry) = (x0, y0);
            let j = params.j_map(&TorusPoint::new(vec![x0, y0])).expect("planar point");
            let (mut sx, mut sy) = (j[0], j[1]);
            let mut largest = 0.0f64;
            for _ in 0..steps {
                rx += alpha;
                ry += params.beta;
                let (nx, ny) = params.skew_step(alpha, sx, sy);
                sx = nx;
                sy = ny;
                let lhs = params.j_map(&TorusPoint::new(vec![rx, ry])).expect("planar point");
                debug_assert_eq!(lhs[0], sx);
                largest = worst(largest, lhs[1].dist(sy));
            }
            largest
        })
        .reduce(|| 0.0, worst)
}

/// `J ∘ R_{α,β} = T_φ ∘ J` along `points` random orbits of length `steps`.
pub fn conjugacy(params: &LacunaryParams, points: u64, steps: u64, seed: u64) -> Result<DemoOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(Frac, Frac)> = (0..points).map(|_| (random_frac(&mut rng), random_frac(&mut rng))).collect();
    let r = conjugacy_residual(params, &starts, steps);
    let checks = vec![Check::within("conjugacy", r, CONJUGACY_TOL, format!("points={points} steps={steps}"))];
    Ok(DemoOutcome::new("conjugacy", String::new(), steps, Vec::new(), checks))
}

/// `Σ_m e^{-πm²}` by plain summation over `|m| ≤ 20`.
pub fn theta_origin_oracle() -> f64 {
    (-20i32..=20).map(|m| (-PI * f64::from(m * m)).exp()).sum()
}

pub const LATTICE_GENERATORS: [HeisPoint; 6] = [
    HeisPoint::new(1.0, 0.0, 0.0),
    HeisPoint::new(-1.0, 0.0, 0.0),
    HeisPoint::new(0.0, 1.0, 0.0),
    HeisPoint::new(0.0, -1.0, 0.0),
    HeisPoint::new(0.0, 0.0, 1.0),
    HeisPoint::new(0.0, 0.0, -1.0),
];

/// Largest `|F(g·γ) − F(g)|` over the lattice generators and random `g ∈ [0,1)^3`.
pub fn automorphy_residual(tol: f64, points: u64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut largest = 0.0f64;
    for _ in 0..points {
        let g = HeisPoint::new(rng.gen(), rng.gen(), rng.gen());
        let f = theta_eval(g, tol)?;
        for gamma in LATTICE_GENERATORS {
            largest = worst(largest, (theta_eval(heis_mul(g, gamma), tol)? - f).norm());
        }
    }
    Ok(largest)
}

/// Largest drift-adjusted gap `|f_closed(n) − F(T^n e)| − c·n` for `n ≤ n_max`,
/// with `T^n e` obtained by iterating the nil-translation.
pub fn two_path_excess(params: &NilParams, n_max: u64) -> Result<f64> {
    let mut g = HeisPoint::IDENTITY;
    let mut largest = 0.0f64;
    for n in 0..=n_max {
        let orbit: Complex64 = theta_eval(g, params.theta_tol)?;
        let closed = nil_function(n as i64, params)?;
        largest = worst(largest, (orbit - closed).norm() - NIL_DRIFT_PER_STEP * n as f64);
        g = nil_step(g, params);
    }
    Ok(largest)
}

/// Θ at the origin, automorphy and the two-path agreement of the nil sequence.
pub fn theta(params: &NilParams, points: u64, n_max: u64, seed: u64) -> Result<DemoOutcome> {
    let tol = params.theta_tol;
    let f0 = theta_eval(HeisPoint::IDENTITY, tol)?;
    let origin = (f0 - Complex64::new(theta_origin_oracle(), 0.0)).norm();
    let checks = vec![
        Check::within("theta_origin", origin, THETA_ORIGIN_TOL, format!("F(0,0,0)={}", format_real(f0.re))),
        Check::within("automorphy", automorphy_residual(tol, points, seed)?, 2.0 * tol, format!("points={points}")),
        Check::within("two_path", two_path_excess(params, n_max)?, 10.0 * tol, format!("n_max={n_max}")),
    ];
    let digest = FlowSpec::Heisenberg(params.clone()).digest();
    Ok(DemoOutcome::new("theta", digest, n_max, Vec::new(), checks))
}

/// The Anzai joining factor `z'_n − z_n = nβ`.
pub fn joining_anzai(alpha: Frac, beta: Frac, n: u64) -> Result<DemoOutcome> {
    let flow = FlowSpec::Anzai { alpha };
    let spec = JoinSpec::new(
        flow.clone(),
        flow.clone(),
        JoinMode::FullProduct,
        TorusPoint::zeros(2),
        TorusPoint::new(vec![beta, Frac::ZERO]),
    );
    let mut closed_bad = 0u64;
    let mut step_bad = 0u64;
    let mut prev = None;
    for (k, z) in anzai_joining_factor(&spec, n)?.enumerate() {
        if z != beta.int_mul(k as i64) {
            closed_bad += 1;
        }
        if let Some(p) = prev {
            if z - p != beta {
                step_bad += 1;
            }
        }
        prev = Some(z);
    }
    let checks = vec![
        Check::exact("factor_closed_form", closed_bad, format!("n<{n}")),
        Check::exact("factor_increment", step_bad, ""),
    ];
    Ok(DemoOutcome::new("joining-anzai", flow.digest(), n, Vec::new(), checks))
}

/// The S-flow joining from `(0,0,0)` and `(β,0,0)`.
pub fn joining_m(params: &LacunaryParams, alpha: Frac, n: u64) -> Result<DemoOutcome> {
    let report = m_joining_demo(params, alpha, n)?;
    let mismatches = |name: &str| report.rows_named(name).next().map_or(u64::MAX, |r| r.value_re as u64);
    let checks = vec![
        Check::exact("x_offset", mismatches("x_offset_mismatches"), "x'_n - x_n = beta"),
        Check::exact("z_offset", mismatches("z_offset_mismatches"), "z'_n - z_n = n*beta"),
    ];
    let mut out = DemoOutcome::new("joining-m", report.flow_digest.clone(), n, vec![format!("caveat: {TRUNCATION_CAVEAT}")], checks);
    out.report.rows.extend(report.rows);
    out.report.metadata.extend(report.metadata);
    Ok(out)
}
