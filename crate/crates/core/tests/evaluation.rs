mod common;

use common::{defaults, f, fixtures, short_run};
use distill_core::column::init_steady_state;
use distill_core::dataset::N_FEATURES;
use distill_core::evaluation::{
    compare, compute_metrics, evaluate, histogram, permutation_importance, permutation_importance_rows,
    physics_consistency, reconstruct_profile, vle_residuals, Model, StepInputs,
};
use distill_core::network::{Block, NetworkParams, H1};
use distill_core::physics::{vle_point, OutputScaling, PhysicsContext, Prediction};
use distill_core::sensors::{ch, clean_record};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn metrics_match_hand_fixture() {
    let fx = &fixtures()["metrics_four_points"];
    let v = |k: &str| -> Vec<f64> { fx[k].as_array().unwrap().iter().map(f).collect() };
    let m = compute_metrics(&v("pred"), &v("target"));
    for (got, key) in [(m.mse, "mse"), (m.rmse, "rmse"), (m.mae, "mae"), (m.r2, "r2"), (m.residual_std, "residual_std")] {
        assert!((got - f(&fx[key])).abs() < 1e-7, "{key}: {got}");
    }
}

#[test]
fn perfect_and_mean_predictors() {
    let t = [0.1, 0.4, 0.2, 0.9];
    let m = compute_metrics(&t, &t);
    assert_eq!((m.mse, m.r2), (0.0, 1.0));
    let mean = t.iter().sum::<f64>() / 4.0;
    assert!(compute_metrics(&[mean; 4], &t).r2.abs() < 1e-15);
}

proptest! {
    #[test]
    fn metric_identities(pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..64)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = compute_metrics(&p, &t);
        prop_assert!((m.rmse * m.rmse - m.mse).abs() <= 1e-15 * m.mse.max(f64::MIN_POSITIVE) + 1e-300);
        prop_assert!(m.mae <= m.rmse * (1.0 + 1e-15));
        prop_assert!(m.r2 <= 1.0);
    }
}

#[test]
fn physics_threshold_is_strict() {
    assert!(!physics_consistency(&[1e-4, 1e-4], 1e-4).pass);
    assert!(physics_consistency(&[0.5e-4, 1.4e-4], 1e-4).pass == (0.95e-4 < 1e-4));
    assert!(physics_consistency(&[0.9e-4], 1e-4).pass);
}

#[test]
fn equilibrium_states_are_physically_consistent() {
    let d = defaults();
    let st = init_steady_state(&d.column, &d.system).unwrap();
    let rec = clean_record(&st, &d.column, &d.system);
    let data = short_run(1);
    let ctx = PhysicsContext::new(&d.system, &d.column, &data.stats);
    let x = rec.sensors[ch::X_TOP];
    let p = rec.sensors[ch::P_TOP];
    let t = d.system.bubble_point_t(x, p).unwrap();
    let exact = Prediction { x_hx: rec.x_hx, x_tx: rec.x_tx, t, p };
    let r = vle_point(&exact, &rec.sensors, &d.system);
    assert!(physics_consistency(&[r], 1e-4).pass);
    assert!(r < 1e-10, "{r}");
    let off = Prediction { x_hx: rec.x_hx + 0.1, x_tx: rec.x_tx - 0.1, ..exact };
    let r = vle_point(&off, &rec.sensors, &d.system);
    assert!(r > 1e-3 && !physics_consistency(&[r], 1e-4).pass, "{r}");
    // the model path builds the residual the same way
    let model = model_on(&data, NetworkParams::init(2));
    let v = vle_residuals(&model, &ctx, &[rec]).unwrap()[0];
    let out = model.predict(&[rec])[0];
    let pred = ctx.predict(model.z_batch(&[model.features(&rec)])[0]);
    assert_eq!(v, vle_point(&pred, &rec.sensors, &d.system));
    assert_eq!(pred.x_hx, out.x_hx);
}

fn model_on(data: &distill_core::dataset::Prepared, params: NetworkParams) -> Model {
    let d = defaults();
    Model {
        params,
        stats: data.stats.clone(),
        scaling: OutputScaling::from_stats(&data.stats, &d.system),
        t_max: data.data.t_max,
    }
}

#[test]
fn steady_profile_matches_the_simulator() {
    let d = defaults();
    let st = init_steady_state(&d.column, &d.system).unwrap();
    let rec = clean_record(&st, &d.column, &d.system);
    let u = StepInputs::from_record(rec.x_hx, &rec.sensors, &d.system);
    let prof = reconstruct_profile(&u, d.column.n_trays, d.column.feed_tray, &d.system, 0.0).unwrap();
    assert!(!prof.truncated);
    assert_eq!(prof.trays.len(), d.column.n_trays);
    let mut worst = 0.0f64;
    for (p, s) in prof.trays.iter().zip(&st.trays) {
        worst = worst.max((p.x_heavy - s.x_heavy).abs());
    }
    assert!(worst < 0.05, "worst tray deviation {worst}");
    assert!(prof.trays.iter().filter(|t| t.is_feed).count() == 1);
}

#[test]
fn total_reflux_steps_on_the_diagonal() {
    let d = defaults();
    let u = StepInputs {
        x_d: 0.05,
        x_b: 0.95,
        reflux: 1e12,
        vapor: 100.0,
        feed: 0.0,
        p_top: 101.0,
        p_main: 102.0,
        p_bottom: 103.0,
    };
    let prof = reconstruct_profile(&u, 8, 8, &d.system, 0.0).unwrap();
    for w in prof.trays.windows(2) {
        assert!((w[1].y_heavy - w[0].x_heavy).abs() < 1e-10);
    }
}

#[test]
fn higher_reflux_flattens_the_rectifying_section() {
    // steady states of the simulated column; the distillate purifies as R rises
    let d = defaults();
    let mut prev = f64::INFINITY;
    for r in [0.8, 1.05, 2.0] {
        let mut cfg = d.column.clone();
        cfg.reflux_ratio = r;
        let st = init_steady_state(&cfg, &d.system).unwrap();
        let rec = clean_record(&st, &cfg, &d.system);
        let u = StepInputs::from_record(rec.x_hx, &rec.sensors, &d.system);
        let prof = reconstruct_profile(&u, cfg.n_trays, cfg.feed_tray, &d.system, 0.0).unwrap();
        assert!(!prof.truncated);
        let g = prof.rectifying_gradient();
        assert!(g < prev, "R {r}: {g} K/tray after {prev}");
        prev = g;
    }
}

#[test]
fn profile_sharpens_over_the_reflux_ramp() {
    let d = defaults();
    let mut prev = 0.0;
    for r in [0.55, 0.7, 0.8, 0.9, 1.05] {
        let mut cfg = d.column.clone();
        cfg.reflux_ratio = r;
        let st = init_steady_state(&cfg, &d.system).unwrap();
        let rec = clean_record(&st, &cfg, &d.system);
        let u = StepInputs::from_record(rec.x_hx, &rec.sensors, &d.system);
        let prof = reconstruct_profile(&u, cfg.n_trays, cfg.feed_tray, &d.system, 0.0).unwrap();
        for (p, s) in prof.trays.iter().zip(&st.trays) {
            assert!((p.x_heavy - s.x_heavy).abs() < 1e-3, "R {r} tray {}", p.index);
        }
        assert!(prof.separation() > prev, "R {r}");
        prev = prof.separation();
    }
}

#[test]
fn fixed_distillate_steepens_with_reflux() {
    // at a fixed x_D the operating line moves away from the equilibrium curve
    let d = defaults();
    let base = StepInputs {
        x_d: 0.05,
        x_b: 0.9,
        reflux: 1.5,
        vapor: 100.0,
        feed: 42.0,
        p_top: 102.0,
        p_main: 104.43,
        p_bottom: 110.49,
    };
    let low = reconstruct_profile(&base, 10, 10, &d.system, 0.0).unwrap();
    let high = reconstruct_profile(&StepInputs { reflux: 3.0, ..base }, 10, 10, &d.system, 0.0).unwrap();
    assert!(high.trays[3].x_heavy > low.trays[3].x_heavy);
}

proptest! {
    #[test]
    fn reconstructed_profiles_are_monotone(
        x_d in 0.01f64..0.3, x_b in 0.6f64..0.99, reflux in 0.3f64..5.0, feed in 10.0f64..80.0, vapor in 60.0f64..200.0,
    ) {
        let d = defaults();
        let u = StepInputs { x_d, x_b, reflux, vapor, feed, p_top: 102.0, p_main: 104.43, p_bottom: 110.49 };
        let prof = reconstruct_profile(&u, d.column.n_trays, d.column.feed_tray, &d.system, 0.0).unwrap();
        for w in prof.trays.windows(2) {
            prop_assert!(w[1].x_heavy >= w[0].x_heavy);
        }
        for t in &prof.trays {
            let (th, tl) = d.system.pure_boiling_points(t.p_kpa);
            let tk = t.t_c + 273.15;
            prop_assert!(tk >= tl - 1e-9 && tk <= th + 1e-9);
        }
    }
}

#[test]
fn constant_and_disconnected_features_carry_no_importance() {
    let data = short_run(4);
    let test = &data.data.records[data.bounds.test.clone()];
    let model = model_on(&data, NetworkParams::init(6));
    let imp = permutation_importance(&model, test, 10, 3);
    let duty = imp.iter().find(|i| i.feature == ch::DUTY).unwrap();
    assert_eq!(duty.score, 0.0);
    assert!(imp.windows(2).all(|w| w[0].score >= w[1].score));

    // a column the network never reads, filled with noise
    let mut params = NetworkParams::init(6);
    let j = ch::Z_TX;
    let w1 = Block::W1.range();
    params.data[w1.start + j * H1..w1.start + (j + 1) * H1].iter_mut().for_each(|w| *w = 0.0);
    let m = model_on(&data, params);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let rows: Vec<[f64; N_FEATURES]> = test
        .iter()
        .map(|r| {
            let mut x = m.features(r);
            x[j] = rng.gen();
            x
        })
        .collect();
    let target: Vec<f64> = test.iter().map(|r| r.x_hx).collect();
    let imp = permutation_importance_rows(&m, &rows, &target, 10, 3);
    let noise = imp.iter().find(|i| i.feature == j).unwrap();
    assert!(noise.score.abs() <= 2.0 * noise.std_err, "{noise:?}");
}

#[test]
fn comparison_of_a_run_with_itself() {
    let d = defaults();
    let data = short_run(4);
    let ctx = PhysicsContext::new(&d.system, &d.column, &data.stats);
    let model = model_on(&data, NetworkParams::init(1));
    let recs = &data.data.records[data.bounds.test.clone()];
    let a = evaluate(&model, &ctx, recs, None, 1e-4).unwrap().report;
    let c = compare(&a, &a);
    assert_eq!((c.rmse_hx.relative, c.mean_vle_residual.relative, c.rmse_ratio), (0.0, 0.0, 1.0));
    let other = evaluate(&model_on(&data, NetworkParams::init(2)), &ctx, recs, None, 1e-4).unwrap().report;
    let c = compare(&a, &other);
    assert_eq!(c.rmse_hx.relative, (other.x_hx.rmse - a.x_hx.rmse) / a.x_hx.rmse);
    assert_eq!(c.rmse_ratio, other.x_hx.rmse / a.x_hx.rmse);
}

#[test]
fn histogram_counts_every_value() {
    let v: Vec<f64> = (0..101).map(|i| (i as f64 * 0.37).sin()).collect();
    let h = histogram(&v, 40);
    assert_eq!(h.len(), 40);
    assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 101);
    assert!(h.windows(2).all(|w| w[0].hi == w[1].lo));
}
