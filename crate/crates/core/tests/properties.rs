use num_complex::Complex64;
use proptest::prelude::*;

use ergodlab::diagnostics::{birkhoff_average, star_discrepancy_1d, uniform_deviation, Observable};
use ergodlab::flows::{anzai_closed_form, orbit, torus_orbit, FlowSpec, Point};
use ergodlab::nilflow::{HeisPoint, NilParams, DEFAULT_THETA_TOL};
use ergodlab::{Frac, TorusPoint};

fn frac() -> impl Strategy<Value = Frac> {
    any::<u128>().prop_map(Frac::from_bits)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frac_json_round_trip(a in frac()) {
        let text = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<Frac>(&text).unwrap(), a);
    }

    #[test]
    fn rotation_orbit_is_an_arithmetic_progression(d0 in frac(), d1 in frac(), x0 in frac(), x1 in frac(), n in 1u64..500) {
        let delta = TorusPoint::new(vec![d0, d1]);
        let spec = FlowSpec::Rotation { d: 2, delta };
        let last = torus_orbit(&spec, TorusPoint::new(vec![x0, x1]), n).unwrap().last().unwrap();
        let k = (n - 1) as i64;
        prop_assert_eq!(last.coords(), &[x0 + d0.int_mul(k), x1 + d1.int_mul(k)]);
    }

    #[test]
    fn anzai_orbit_from_origin_matches_closed_form(alpha in frac(), n in 1u64..2000) {
        let spec = FlowSpec::Anzai { alpha };
        let last = torus_orbit(&spec, TorusPoint::zeros(2), n).unwrap().last().unwrap();
        prop_assert_eq!(last, anzai_closed_form(alpha, n as i64 - 1).unwrap());
    }

    #[test]
    fn heisenberg_orbit_stays_in_the_fundamental_domain(a in frac(), b in frac(), c in frac(), n in 1u64..300) {
        let params = NilParams::new(a, b, c, DEFAULT_THETA_TOL).unwrap();
        let spec = FlowSpec::Heisenberg(params);
        for p in orbit(&spec, HeisPoint::IDENTITY, n).unwrap() {
            let h = p.as_heis().unwrap();
            prop_assert!(h.is_reduced(), "{:?}", h);
        }
    }

    #[test]
    fn constant_observable_averages_to_one(beta in frac(), n in 1u64..3000) {
        let spec = FlowSpec::Weyl { beta, degree: 2 };
        let a = birkhoff_average(&spec, TorusPoint::zeros(2), &Observable::constant(2), n).unwrap();
        prop_assert_eq!(a, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn deviation_ignores_start_order(beta in frac(), starts in prop::collection::vec(frac(), 2..6)) {
        let spec = FlowSpec::Rotation { d: 1, delta: TorusPoint::new(vec![beta]) };
        let obs = Observable::coordinate(1, 0);
        let mut pts: Vec<Point> = starts.iter().map(|&s| Point::Torus(TorusPoint::new(vec![s]))).collect();
        let forward = uniform_deviation(&spec, &pts, &obs, &[50, 100]).unwrap();
        pts.reverse();
        prop_assert_eq!(forward, uniform_deviation(&spec, &pts, &obs, &[50, 100]).unwrap());
    }

    #[test]
    fn star_discrepancy_is_at_least_half_over_n(points in prop::collection::vec(frac(), 1..200)) {
        let d = star_discrepancy_1d(&points).unwrap();
        let n = points.len() as f64;
        prop_assert!(d >= 0.5 / n - 1e-15 && d <= 1.0);
    }
}

#[test]
fn dyadic_rotation_is_periodic() {
    let spec = FlowSpec::Rotation { d: 1, delta: TorusPoint::new(vec![Frac::from_rational(3, 16).unwrap()]) };
    let pts: Vec<TorusPoint> = torus_orbit(&spec, TorusPoint::zeros(1), 33).unwrap().collect();
    assert_eq!(pts[16], pts[0]);
    assert_eq!(pts[32], pts[0]);
    assert!((1..16).all(|k| pts[k] != pts[0]));
}

#[test]
fn non_dyadic_rotation_returns_within_rounding() {
    let spec = FlowSpec::Rotation { d: 1, delta: TorusPoint::new(vec![Frac::from_rational(3, 7).unwrap()]) };
    let pts: Vec<TorusPoint> = torus_orbit(&spec, TorusPoint::zeros(1), 8).unwrap().collect();
    assert!(pts[7][0].dist(pts[0][0]) < 1e-37);
}
