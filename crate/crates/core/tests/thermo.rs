mod common;

use common::{defaults, f, fixtures, rel, water};
use distill_core::thermo::{
    antoine_psat, bubble_point_t, dew_point_t, raoult_y, vle_residual, wilson_gamma, WilsonParams,
};
use proptest::prelude::*;

const ATM: f64 = 101.325;

#[test]
fn water_boils_at_one_atmosphere() {
    let p = antoine_psat(373.15, &water()).unwrap();
    assert!((p - ATM).abs() < 0.5, "{p}");
    let fx = fixtures();
    assert!(rel(p, f(&fx["water_psat_373_15"])) < 1e-12);
}

#[test]
fn psat_is_increasing() {
    let sys = defaults().system;
    for c in [sys.heavy.antoine, sys.light.antoine, water()] {
        let mut prev = 0.0;
        for i in 0..100 {
            let p = antoine_psat(300.0 + i as f64, &c).unwrap();
            assert!(p > prev);
            prev = p;
        }
    }
}

#[test]
fn wilson_matches_hand_evaluation() {
    let w = WilsonParams {
        lambda_12: 0.7,
        lambda_21: 1.2,
    };
    let (g1, g2) = wilson_gamma(0.5, &w).unwrap();
    let fx = fixtures();
    let want = &fx["wilson_07_12_half"];
    assert!(rel(g1, f(&want[0])) < 1e-13, "{g1}");
    assert!(rel(g2, f(&want[1])) < 1e-13, "{g2}");
}

#[test]
fn wilson_pure_limits() {
    let w = defaults().system.wilson;
    assert_eq!(wilson_gamma(1.0, &w).unwrap().0, 1.0);
    assert_eq!(wilson_gamma(0.0, &w).unwrap().1, 1.0);
}

#[test]
fn pure_component_limits_are_exact() {
    let sys = defaults().system;
    for p in [60.0, ATM, 140.0] {
        let (tb_h, tb_l) = sys.pure_boiling_points(p);
        let th = bubble_point_t(1.0, p, &sys).unwrap();
        let tl = bubble_point_t(0.0, p, &sys).unwrap();
        assert!((th - tb_h).abs() < 1e-8 && (tl - tb_l).abs() < 1e-8, "{th} {tb_h} {tl} {tb_l}");
        assert!((dew_point_t(1.0, p, &sys).unwrap() - tb_h).abs() < 1e-8);
        assert!((dew_point_t(0.0, p, &sys).unwrap() - tb_l).abs() < 1e-8);
        let (y1, y2) = raoult_y(1.0, tb_h, p, &sys).unwrap();
        assert!((y1 - 1.0).abs() < 1e-12 && y2 == 0.0);
    }
}

#[test]
fn bubble_and_dew_match_oracle() {
    let sys = defaults().system;
    let fx = fixtures();
    for row in fx["bubble_dew_grid_atm"].as_array().unwrap() {
        let z = f(&row["z"]);
        let tb = bubble_point_t(z, ATM, &sys).unwrap();
        let td = dew_point_t(z, ATM, &sys).unwrap();
        assert!((tb - f(&row["bubble"])).abs() < 1e-6, "bubble z={z}: {tb}");
        assert!((td - f(&row["dew"])).abs() < 1e-6, "dew z={z}: {td}");
        assert!(td >= tb - 1e-9, "z={z}: dew {td} < bubble {tb}");
    }
}

#[test]
fn equimolar_bubble_point_enriches_light_vapor() {
    let sys = defaults().system;
    let fx = fixtures();
    let want = &fx["bubble_half_atm"];
    let t = bubble_point_t(0.5, ATM, &sys).unwrap();
    let (tb_h, tb_l) = sys.pure_boiling_points(ATM);
    assert!(tb_l < t && t < tb_h);
    assert!((t - f(&want["t"])).abs() < 1e-6);
    let (y1, y2) = raoult_y(0.5, t, ATM, &sys).unwrap();
    assert!(y2 > 0.5);
    assert!((y1 - f(&want["y_heavy"])).abs() < 1e-8 && (y2 - f(&want["y_light"])).abs() < 1e-8);
}

#[test]
fn bubble_vapor_sums_to_one_on_grid() {
    let sys = defaults().system;
    for i in 0..=20 {
        let x = i as f64 / 20.0;
        let t = bubble_point_t(x, ATM, &sys).unwrap();
        let (y1, y2) = raoult_y(x, t, ATM, &sys).unwrap();
        assert!((y1 + y2 - 1.0).abs() < 1e-9, "x={x}: {}", y1 + y2);
    }
}

#[test]
fn residual_matches_oracle_reevaluation() {
    let sys = defaults().system;
    let fx = fixtures();
    for c in fx["vle_residual_random"].as_array().unwrap() {
        let y = f(&c["y"]);
        let r = vle_residual([f(&c["x"]), 1.0 - f(&c["x"])], [y, 1.0 - y], f(&c["t"]), f(&c["p"]), &sys).unwrap();
        assert!(rel(r, f(&c["residual"])) < 1e-12, "{r} vs {}", c["residual"]);
    }
}

#[test]
fn residual_vanishes_at_equilibrium() {
    let sys = defaults().system;
    let (x, p) = (0.3, 95.0);
    let t = bubble_point_t(x, p, &sys).unwrap();
    let (y1, y2) = raoult_y(x, t, p, &sys).unwrap();
    assert!(vle_residual([x, 1.0 - x], [y1, y2], t, p, &sys).unwrap() < 1e-24);
    // off the bubble point the unnormalized vapor still satisfies its own definition
    let (e1, e2) = sys.raoult(x, 1.0 - x, 360.0, p);
    assert!(sys.vle_residual((x, 1.0 - x), (e1, e2), 360.0, p) < 1e-24);
}

#[test]
fn domain_errors_are_reported() {
    let sys = defaults().system;
    assert!(bubble_point_t(1.2, ATM, &sys).is_err());
    assert!(bubble_point_t(0.5, -1.0, &sys).is_err());
    assert!(dew_point_t(-0.1, ATM, &sys).is_err());
}

proptest! {
    #[test]
    fn bubble_and_dew_close(z in 0.0f64..=1.0, p in 50.0f64..150.0) {
        let sys = defaults().system;
        let tb = bubble_point_t(z, p, &sys).unwrap();
        let (y1, y2) = raoult_y(z, tb, p, &sys).unwrap();
        prop_assert!((y1 + y2 - 1.0).abs() < 1e-9);
        let d = sys.dew_point(z, p).unwrap();
        let (e1, e2) = raoult_y(d.x_heavy, d.t, p, &sys).unwrap();
        prop_assert!((e1 - z).abs() < 1e-9 && (e2 - (1.0 - z)).abs() < 1e-9);
        prop_assert!(d.t >= tb - 1e-9);
        let (tb_h, tb_l) = sys.pure_boiling_points(p);
        prop_assert!(tb >= tb_l - 1e-9 && d.t <= tb_h + 1e-9);
    }

    #[test]
    fn bubble_point_is_monotone_in_composition(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let sys = defaults().system;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        prop_assert!(bubble_point_t(lo, ATM, &sys).unwrap() < bubble_point_t(hi, ATM, &sys).unwrap());
    }

    #[test]
    fn dew_temperature_derivative_matches_finite_difference(y in 0.05f64..0.95, p in 60.0f64..140.0) {
        use distill_core::scalar::Dual;
        let sys = defaults().system;
        let t = sys.dew_point_scalar(Dual::<2>::var(y, 0), Dual::<2>::var(p, 1)).unwrap();
        // steps well above the solver round-off
        let h = 1e-4;
        let dy = (dew_point_t(y + h, p, &sys).unwrap() - dew_point_t(y - h, p, &sys).unwrap()) / (2.0 * h);
        let hp = 1e-2;
        let dp = (dew_point_t(y, p + hp, &sys).unwrap() - dew_point_t(y, p - hp, &sys).unwrap()) / (2.0 * hp);
        prop_assert!((t.d[0] - dy).abs() < 1e-4 * dy.abs().max(1.0), "{} {}", t.d[0], dy);
        prop_assert!((t.d[1] - dp).abs() < 1e-4 * dp.abs().max(0.1), "{} {}", t.d[1], dp);
    }
}
