//! Feedforward network 17 -> 256 -> 256 -> 128 -> 64 -> 4 with Swish hidden
//! units and two learned skip projections (hidden 1 into the layer-3
//! pre-activation, hidden 2 into the layer-4 pre-activation).
//!
//! Parameters live in one flat vector; weights are stored `[in][out]`
//! row-major. Heads: two sigmoid units normalized to sum to one give the
//! mole fractions, two linear units give the scaled tray temperature and
//! pressure.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::N_FEATURES;
use crate::linalg::{col_sums_acc, gemm_acc, transpose};
use crate::rng::{self, Stream};
use crate::scalar::Scalar;

pub const N_OUT: usize = 4;
pub const H1: usize = 256;
pub const H2: usize = 256;
pub const H3: usize = 128;
pub const H4: usize = 64;

const fn layout() -> [usize; 13] {
    let sizes = [
        N_FEATURES * H1,
        H1,
        H1 * H2,
        H2,
        H2 * H3,
        H3,
        H3 * H4,
        H4,
        H4 * N_OUT,
        N_OUT,
        H1 * H3,
        H2 * H4,
    ];
    let mut off = [0; 13];
    let mut i = 0;
    while i < 12 {
        off[i + 1] = off[i] + sizes[i];
        i += 1;
    }
    off
}

const OFF: [usize; 13] = layout();
pub const N_PARAMS: usize = OFF[12];

/// Named parameter blocks, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    W1,
    B1,
    W2,
    B2,
    W3,
    B3,
    W4,
    B4,
    W5,
    B5,
    Skip13,
    Skip24,
}

pub const BLOCKS: [Block; 12] = [
    Block::W1,
    Block::B1,
    Block::W2,
    Block::B2,
    Block::W3,
    Block::B3,
    Block::W4,
    Block::B4,
    Block::W5,
    Block::B5,
    Block::Skip13,
    Block::Skip24,
];

impl Block {
    pub fn range(self) -> core::ops::Range<usize> {
        let i = self as usize;
        OFF[i]..OFF[i + 1]
    }

    pub fn is_bias(self) -> bool {
        matches!(self, Block::B1 | Block::B2 | Block::B3 | Block::B4 | Block::B5)
    }

    /// `(fan_in, fan_out)` for weight blocks, `(1, len)` for biases.
    pub fn shape(self) -> (usize, usize) {
        match self {
            Block::W1 => (N_FEATURES, H1),
            Block::W2 => (H1, H2),
            Block::W3 => (H2, H3),
            Block::W4 => (H3, H4),
            Block::W5 => (H4, N_OUT),
            Block::Skip13 => (H1, H3),
            Block::Skip24 => (H2, H4),
            Block::B1 => (1, H1),
            Block::B2 => (1, H2),
            Block::B3 => (1, H3),
            Block::B4 => (1, H4),
            Block::B5 => (1, N_OUT),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("non-finite value in parameter block {0:?}")]
    NonFinite(Block),
    #[error("non-finite input feature {0}")]
    NonFiniteInput(usize),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub data: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros() -> Self {
        Self {
            data: vec![0.0; N_PARAMS],
        }
    }

    /// Fan-in scaled uniform weights on `±sqrt(3 / fan_in)` (variance
    /// `1 / fan_in`), zero biases.
    pub fn init(seed: u64) -> Self {
        use rand::Rng;
        let mut rng = rng::stream(seed, Stream::Init, 0);
        let mut p = Self::zeros();
        for b in BLOCKS {
            if b.is_bias() {
                continue;
            }
            let bound = libm::sqrt(3.0 / b.shape().0 as f64);
            for w in &mut p.data[b.range()] {
                *w = bound * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        p
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self, NetworkError> {
        if data.len() != N_PARAMS {
            return Err(NetworkError::Shape {
                expected: N_PARAMS,
                got: data.len(),
            });
        }
        Ok(Self { data })
    }

    pub fn block(&self, b: Block) -> &[f64] {
        &self.data[b.range()]
    }

    pub fn block_mut(&mut self, b: Block) -> &mut [f64] {
        &mut self.data[b.range()]
    }

    pub fn check_finite(&self) -> Result<(), NetworkError> {
        for b in BLOCKS {
            if self.block(b).iter().any(|v| !v.is_finite()) {
                return Err(NetworkError::NonFinite(b));
            }
        }
        Ok(())
    }

    /// `sum(w^2)` over weights and skip projections (biases excluded).
    pub fn weight_sq_sum(&self) -> f64 {
        BLOCKS
            .iter()
            .filter(|b| !b.is_bias())
            .map(|b| self.block(*b).iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    /// Add `d/dw (lambda * sum(w^2)) = 2 lambda w` into `grad`.
    pub fn l2_grad_acc(&self, lambda: f64, grad: &mut [f64]) {
        for b in BLOCKS.iter().filter(|b| !b.is_bias()) {
            for (g, w) in grad[b.range()].iter_mut().zip(self.block(*b)) {
                *g += 2.0 * lambda * w;
            }
        }
    }

    /// Single-sample forward pass with finiteness checks.
    pub fn forward(&self, features: &[f64; N_FEATURES]) -> Result<ModelOutput, NetworkError> {
        self.check_finite()?;
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(NetworkError::NonFiniteInput(i));
        }
        let mut ws = Workspace::default();
        ws.forward(self, features, 1);
        Ok(ModelOutput::from_z(ws.z()[..N_OUT].try_into().unwrap()))
    }
}

/// Network outputs; `t_tray` and `p_tray` are on the scaled (0..1) axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub x_hx: f64,
    pub x_tx: f64,
    pub t_tray: f64,
    pub p_tray: f64,
}

impl ModelOutput {
    pub fn from_z(z: [f64; N_OUT]) -> Self {
        let h = heads(z);
        Self {
            x_hx: h.x_hx,
            x_tx: h.x_tx,
            t_tray: h.t,
            p_tray: h.p,
        }
    }
}

/// Head values as functions of the final pre-activations.
#[derive(Debug, Clone, Copy)]
pub struct Heads<S> {
    pub x_hx: S,
    pub x_tx: S,
    pub t: S,
    pub p: S,
}

fn log_sigmoid<S: Scalar>(z: S) -> S {
    // -softplus(-z), split by sign so exp never overflows.
    if z.value() >= 0.0 {
        -(S::cst(1.0) + (-z).exp()).ln()
    } else {
        z - (S::cst(1.0) + z.exp()).ln()
    }
}

/// Bound on the log-ratio; `sigmoid(±D_MAX)` is still strictly inside (0, 1)
/// in `f64`.
pub const D_MAX: f64 = 36.0;

/// `x_hx = s0 / (s0 + s1)` with `s_i = sigmoid(z_i)`, evaluated as a
/// sigmoid of the log-ratio. The log-ratio is held to `±D_MAX` so neither
/// fraction rounds to 0 or 1.
pub fn heads<S: Scalar>(z: [S; N_OUT]) -> Heads<S> {
    let mut d = log_sigmoid(z[0]) - log_sigmoid(z[1]);
    if d.value() > D_MAX {
        d = S::cst(D_MAX);
    } else if d.value() < -D_MAX {
        d = S::cst(-D_MAX);
    }
    Heads {
        x_hx: d.sigmoid(),
        x_tx: (-d).sigmoid(),
        t: z[2],
        p: z[3],
    }
}

/// Branch-free `exp` for the hidden units (vectorizes inside the Swish
/// loops). Cody–Waite reduction to `|r| <= ln2 / 2` and a degree-13 Taylor
/// polynomial; relative error is a few ulp over the clamped range.
#[inline(always)]
fn exp_hidden(x: f64) -> f64 {
    const LOG2E: f64 = core::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let x = x.clamp(-708.0, 709.0);
    let kf = (x * LOG2E + SHIFTER) - SHIFTER;
    let r = (x - kf * LN2_HI) - kf * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    // 2^k: two factors so that k near the clamp limits stays representable.
    let k = kf as i64;
    let k1 = k / 2;
    let k2 = k - k1;
    let s1 = f64::from_bits(((k1 + 1023) as u64) << 52);
    let s2 = f64::from_bits(((k2 + 1023) as u64) << 52);
    p * s1 * s2
}

#[inline(always)]
fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + exp_hidden(-a))
}

/// In place: `a` becomes `swish'(a) = s + h (1 - s)`, `h` the activation.
fn swish_into(a: &mut [f64], h: &mut [f64]) {
    for (hv, av) in h.iter_mut().zip(a.iter_mut()) {
        let s = sigmoid(*av);
        *hv = *av * s;
        *av = s + *hv * (1.0 - s);
    }
}

fn swish_back(slope: &[f64], dh: &[f64], da: &mut [f64]) {
    for ((d, s), g) in da.iter_mut().zip(slope).zip(dh) {
        *d = g * s;
    }
}

fn fill_bias(out: &mut [f64], bias: &[f64], m: usize) {
    let n = bias.len();
    for i in 0..m {
        out[i * n..(i + 1) * n].copy_from_slice(bias);
    }
}

/// Reusable activation and scratch buffers for batched passes.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    m: usize,
    x: Vec<f64>,
    // pre-activations, overwritten by the Swish slopes after each layer
    a1: Vec<f64>,
    h1: Vec<f64>,
    a2: Vec<f64>,
    h2: Vec<f64>,
    a3: Vec<f64>,
    h3: Vec<f64>,
    a4: Vec<f64>,
    h4: Vec<f64>,
    z: Vec<f64>,
    // backward scratch
    t_in: Vec<f64>,
    t_w: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
    d4: Vec<f64>,
    da: Vec<f64>,
}

fn resize(v: &mut Vec<f64>, n: usize) {
    v.clear();
    v.resize(n, 0.0);
}

impl Workspace {
    pub fn rows(&self) -> usize {
        self.m
    }

    /// Final pre-activations, `m x 4` row-major.
    pub fn z(&self) -> &[f64] {
        &self.z[..self.m * N_OUT]
    }

    pub fn z_row(&self, i: usize) -> [f64; N_OUT] {
        self.z[i * N_OUT..(i + 1) * N_OUT].try_into().unwrap()
    }

    /// Forward `m` rows of scaled features (`m x 17` row-major).
    pub fn forward(&mut self, p: &NetworkParams, x: &[f64], m: usize) {
        assert_eq!(x.len(), m * N_FEATURES);
        self.m = m;
        self.x.clear();
        self.x.extend_from_slice(x);
        resize(&mut self.a1, m * H1);
        resize(&mut self.h1, m * H1);
        resize(&mut self.a2, m * H2);
        resize(&mut self.h2, m * H2);
        resize(&mut self.a3, m * H3);
        resize(&mut self.h3, m * H3);
        resize(&mut self.a4, m * H4);
        resize(&mut self.h4, m * H4);
        resize(&mut self.z, m * N_OUT);

        fill_bias(&mut self.a1, p.block(Block::B1), m);
        gemm_acc(&self.x, p.block(Block::W1), &mut self.a1, m, N_FEATURES, H1);
        swish_into(&mut self.a1, &mut self.h1);

        fill_bias(&mut self.a2, p.block(Block::B2), m);
        gemm_acc(&self.h1, p.block(Block::W2), &mut self.a2, m, H1, H2);
        swish_into(&mut self.a2, &mut self.h2);

        fill_bias(&mut self.a3, p.block(Block::B3), m);
        gemm_acc(&self.h2, p.block(Block::W3), &mut self.a3, m, H2, H3);
        gemm_acc(&self.h1, p.block(Block::Skip13), &mut self.a3, m, H1, H3);
        swish_into(&mut self.a3, &mut self.h3);

        fill_bias(&mut self.a4, p.block(Block::B4), m);
        gemm_acc(&self.h3, p.block(Block::W4), &mut self.a4, m, H3, H4);
        gemm_acc(&self.h2, p.block(Block::Skip24), &mut self.a4, m, H2, H4);
        swish_into(&mut self.a4, &mut self.h4);

        fill_bias(&mut self.z, p.block(Block::B5), m);
        gemm_acc(&self.h4, p.block(Block::W5), &mut self.z, m, H4, N_OUT);
    }

    /// `grad[w] += sum_rows in^T * delta`, via an explicit transpose.
    fn weight_grad(t_in: &mut Vec<f64>, input: &[f64], delta: &[f64], m: usize, k: usize, n: usize, g: &mut [f64]) {
        resize(t_in, k * m);
        transpose(input, t_in, m, k);
        gemm_acc(t_in, delta, g, k, m, n);
    }

    /// `out[m x k] += delta[m x n] * W^T` for `W` stored `k x n`.
    fn input_grad(t_w: &mut Vec<f64>, delta: &[f64], w: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
        resize(t_w, n * k);
        transpose(w, t_w, k, n);
        gemm_acc(delta, t_w, out, m, n, k);
    }

    /// Accumulate parameter gradients for upstream gradients `dz` (`m x 4`)
    /// with respect to the final pre-activations of the last forward pass.
    pub fn backward(&mut self, p: &NetworkParams, dz: &[f64], grad: &mut [f64]) {
        let m = self.m;
        assert_eq!(dz.len(), m * N_OUT);
        assert_eq!(grad.len(), N_PARAMS);
        let (ti, tw) = (&mut self.t_in, &mut self.t_w);

        Self::weight_grad(ti, &self.h4, dz, m, H4, N_OUT, &mut grad[Block::W5.range()]);
        col_sums_acc(dz, &mut grad[Block::B5.range()], m, N_OUT);
        resize(&mut self.d4, m * H4);
        Self::input_grad(tw, dz, p.block(Block::W5), m, H4, N_OUT, &mut self.d4);

        resize(&mut self.da, m * H4);
        swish_back(&self.a4, &self.d4, &mut self.da);
        Self::weight_grad(ti, &self.h3, &self.da, m, H3, H4, &mut grad[Block::W4.range()]);
        Self::weight_grad(ti, &self.h2, &self.da, m, H2, H4, &mut grad[Block::Skip24.range()]);
        col_sums_acc(&self.da, &mut grad[Block::B4.range()], m, H4);
        resize(&mut self.d3, m * H3);
        Self::input_grad(tw, &self.da, p.block(Block::W4), m, H3, H4, &mut self.d3);
        resize(&mut self.d2, m * H2);
        Self::input_grad(tw, &self.da, p.block(Block::Skip24), m, H2, H4, &mut self.d2);

        resize(&mut self.da, m * H3);
        swish_back(&self.a3, &self.d3, &mut self.da);
        Self::weight_grad(ti, &self.h2, &self.da, m, H2, H3, &mut grad[Block::W3.range()]);
        Self::weight_grad(ti, &self.h1, &self.da, m, H1, H3, &mut grad[Block::Skip13.range()]);
        col_sums_acc(&self.da, &mut grad[Block::B3.range()], m, H3);
        Self::input_grad(tw, &self.da, p.block(Block::W3), m, H2, H3, &mut self.d2);
        resize(&mut self.d1, m * H1);
        Self::input_grad(tw, &self.da, p.block(Block::Skip13), m, H1, H3, &mut self.d1);

        resize(&mut self.da, m * H2);
        swish_back(&self.a2, &self.d2, &mut self.da);
        Self::weight_grad(ti, &self.h1, &self.da, m, H1, H2, &mut grad[Block::W2.range()]);
        col_sums_acc(&self.da, &mut grad[Block::B2.range()], m, H2);
        Self::input_grad(tw, &self.da, p.block(Block::W2), m, H1, H2, &mut self.d1);

        resize(&mut self.da, m * H1);
        swish_back(&self.a1, &self.d1, &mut self.da);
        Self::weight_grad(ti, &self.x, &self.da, m, N_FEATURES, H1, &mut grad[Block::W1.range()]);
        col_sums_acc(&self.da, &mut grad[Block::B1.range()], m, H1);
    }
}

/// Bias-corrected Adam with fixed `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), NetworkError> {
    let n = params.len();
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(NetworkError::Shape { expected: n, got: len });
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - libm::pow(ADAM_BETA1, t);
    let c2 = 1.0 - libm::pow(ADAM_BETA2, t);
    for i in 0..n {
        let g = grads[i];
        let m = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        let v = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        params[i] -= lr * (m / c1) / (libm::sqrt(v / c2) + ADAM_EPS);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_exp_matches_libm() {
        let mut worst = 0.0f64;
        let mut x = -700.0;
        while x < 700.0 {
            let e = libm::exp(x);
            worst = worst.max(((exp_hidden(x) - e) / e).abs());
            x += 0.0137;
        }
        assert!(worst < 4e-15, "relative error {worst}");
        assert!(exp_hidden(-1e4) > 0.0 && exp_hidden(1e4).is_finite());
    }

    #[test]
    fn parameter_count() {
        // 111,812 dense parameters plus 49,152 skip-projection weights.
        assert_eq!(N_PARAMS, 111_812 + 49_152);
    }

    #[test]
    fn zero_params_give_even_split() {
        let out = NetworkParams::zeros().forward(&[0.3; N_FEATURES]).unwrap();
        assert_eq!((out.x_hx, out.x_tx, out.t_tray, out.p_tray), (0.5, 0.5, 0.0, 0.0));
    }

    #[test]
    fn non_finite_parameter_is_reported() {
        let mut p = NetworkParams::zeros();
        p.block_mut(Block::W3)[5] = f64::NAN;
        assert_eq!(p.forward(&[0.0; N_FEATURES]), Err(NetworkError::NonFinite(Block::W3)));
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut p = [1.0, -2.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, 1e-3).unwrap();
        assert_eq!(p, [1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_is_lr_sign() {
        let mut p = [0.0, 0.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[3.0, -0.02], &mut st, 1e-3).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-5);
        assert!((p[1] - 1e-3).abs() < 1e-5);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut st = AdamState::new(3);
        assert!(adam_step(&mut [0.0; 2], &[0.0; 2], &mut st, 1e-3).is_err());
    }
}
