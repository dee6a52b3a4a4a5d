mod common;

use common::{f, fixtures};
use distill_core::dataset::N_FEATURES;
use distill_core::network::{adam_step, heads, AdamState, Block, NetworkParams, Workspace, BLOCKS, N_OUT, N_PARAMS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fractions_are_valid_across_random_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ws = Workspace::default();
    let m = 1000;
    for batch in 0..100 {
        let span = if batch % 2 == 0 { 1.0 } else { 50.0 };
        let mut p = NetworkParams::init(batch);
        let gain = [1.0, 3.0, 10.0][batch as usize % 3];
        p.data.iter_mut().for_each(|w| *w *= gain);
        let x: Vec<f64> = (0..m * N_FEATURES).map(|_| span * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        ws.forward(&p, &x, m);
        for i in 0..m {
            let h = heads(ws.z_row(i));
            assert!(h.x_hx > 0.0 && h.x_hx < 1.0 && h.x_tx > 0.0 && h.x_tx < 1.0);
            assert!((h.x_hx + h.x_tx - 1.0).abs() <= 1e-15);
        }
    }
}

proptest! {
    #[test]
    fn heads_stay_inside_the_simplex(z0 in -800.0f64..800.0, z1 in -800.0f64..800.0) {
        let h = heads([z0, z1, 0.0, 0.0]);
        prop_assert!(h.x_hx > 0.0 && h.x_hx < 1.0 && h.x_tx > 0.0 && h.x_tx < 1.0);
        prop_assert!((h.x_hx + h.x_tx - 1.0).abs() <= 1e-15);
    }
}

#[test]
fn init_variance_matches_fan_in() {
    for seed in 0..10 {
        let p = NetworkParams::init(seed);
        for b in BLOCKS {
            let w = p.block(b);
            if b.is_bias() {
                assert!(w.iter().all(|v| *v == 0.0));
                continue;
            }
            let n = w.len() as f64;
            let mean = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let want = 1.0 / b.shape().0 as f64;
            assert!((var / want - 1.0).abs() < 0.2, "seed {seed} {b:?}: {var} vs {want}");
        }
    }
}

#[test]
fn same_seed_same_network() {
    assert_eq!(NetworkParams::init(3), NetworkParams::init(3));
    assert_ne!(NetworkParams::init(3), NetworkParams::init(4));
    assert_eq!(NetworkParams::init(0).data.len(), N_PARAMS);
}

#[test]
fn zero_network_is_neutral() {
    let out = NetworkParams::zeros().forward(&[0.3; N_FEATURES]).unwrap();
    assert_eq!((out.x_hx, out.x_tx, out.t_tray, out.p_tray), (0.5, 0.5, 0.0, 0.0));
}

#[test]
fn batched_and_single_forward_agree() {
    let p = NetworkParams::init(8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..7 * N_FEATURES).map(|_| rng.gen()).collect();
    let mut ws = Workspace::default();
    ws.forward(&p, &x, 7);
    for i in 0..7 {
        let row: [f64; N_FEATURES] = x[i * N_FEATURES..(i + 1) * N_FEATURES].try_into().unwrap();
        let single = p.forward(&row).unwrap();
        let h = heads(ws.z_row(i));
        assert!((single.x_hx - h.x_hx).abs() < 1e-14 && (single.t_tray - h.t).abs() < 1e-12);
    }
}

#[test]
fn non_finite_inputs_and_weights_are_rejected() {
    let p = NetworkParams::init(1);
    let mut x = [0.5; N_FEATURES];
    x[4] = f64::NAN;
    assert!(p.forward(&x).is_err());
    let mut bad = p.clone();
    bad.data[Block::W3.range().start] = f64::INFINITY;
    assert!(bad.forward(&[0.5; N_FEATURES]).is_err());
    assert!(NetworkParams::from_vec(vec![0.0; 10]).is_err());
}

#[test]
fn backward_matches_finite_differences() {
    let p = NetworkParams::init(21);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = 3;
    let x: Vec<f64> = (0..m * N_FEATURES).map(|_| rng.gen()).collect();
    let dz: Vec<f64> = (0..m * N_OUT).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut ws = Workspace::default();
    let objective = |q: &NetworkParams, ws: &mut Workspace| {
        ws.forward(q, &x, m);
        ws.z().iter().zip(&dz).map(|(a, b)| a * b).sum::<f64>()
    };
    objective(&p, &mut ws);
    let mut grad = vec![0.0; N_PARAMS];
    ws.backward(&p, &dz, &mut grad);
    for b in BLOCKS {
        let r = b.range();
        for k in 0..4 {
            let i = r.start + rng.gen_range(0..r.len());
            let h = 1e-5;
            let mut q = p.clone();
            q.data[i] += h;
            let up = objective(&q, &mut ws);
            q.data[i] -= 2.0 * h;
            let dn = objective(&q, &mut ws);
            let fd = (up - dn) / (2.0 * h);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            assert!(err < 1e-5, "{b:?} #{k}: fd {fd} vs {}", grad[i]);
        }
    }
}

#[test]
fn adam_follows_reference_trace() {
    let trace = fixtures()["adam_quadratic_trace"].as_array().unwrap().clone();
    let mut w = vec![1.0, -2.0];
    let mut st = AdamState::new(2);
    for step in trace {
        let g = vec![2.0 * w[0], 6.0 * w[1]];
        adam_step(&mut w, &g, &mut st, 0.1).unwrap();
        let want = step.as_array().unwrap();
        for k in 0..2 {
            assert!((w[k] - f(&want[k])).abs() < 1e-12, "{w:?} vs {want:?}");
        }
    }
    assert!(adam_step(&mut w, &[1.0], &mut st, 0.1).is_err());
}

#[test]
fn l2_gradient_is_twice_lambda_w() {
    let p = NetworkParams::init(4);
    let mut g = vec![0.0; N_PARAMS];
    p.l2_grad_acc(0.01, &mut g);
    for b in BLOCKS {
        for i in b.range() {
            let want = if b.is_bias() { 0.0 } else { 0.02 * p.data[i] };
            assert_eq!(g[i], want);
        }
    }
    let sq: f64 = BLOCKS.iter().filter(|b| !b.is_bias()).flat_map(|b| p.block(*b).iter()).map(|v| v * v).sum();
    assert!((p.weight_sq_sum() - sq).abs() < 1e-9 * sq);
}
