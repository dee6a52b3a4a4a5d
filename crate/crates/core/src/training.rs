//! Mini-batch training with the sigmoid weight schedule, step-decayed Adam,
//! best-epoch selection and exact resume.
//!
//! Each batch combines up to `batch_size` shuffled training records (data
//! term), the pairs formed by those records and their training-split
//! successors (balance terms) and one chunk of the fixed collocation set
//! (VLE, operating-line and boundary terms). The chunks are sized so that an
//! epoch visits every collocation point once. All randomness is drawn from
//! per-epoch substreams, so a run resumed from a saved [`TrainerState`]
//! repeats the uninterrupted run bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Prepared, N_FEATURES};
use crate::network::{adam_step, AdamState, NetworkError, NetworkParams, Workspace, N_OUT, N_PARAMS};
use crate::physics::{
    data_grad, schedule, CollocationSet, LossBreakdown, LossWeights, PairSensors, PhysicsContext, PhysicsError,
    Term,
};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pinn,
    #[serde(alias = "baseline")]
    BaselineMlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub lr0: f64,
    /// Multiplicative decay applied every `lr_decay_every` epochs.
    pub lr_decay: f64,
    pub lr_decay_every: u32,
    pub lr_floor: f64,
    pub l2: f64,
    pub collocation_n: usize,
    /// Collocation points cover the scaled training box widened by this
    /// fraction of its range on every side.
    #[serde(default)]
    pub collocation_margin: f64,
    pub mode: Mode,
    /// Fraction of the training block kept (low-data runs).
    #[serde(default = "one")]
    pub train_fraction: f64,
    /// Abort when an epoch's training total exceeds this multiple of the
    /// first epoch's.
    #[serde(default = "divergence_factor")]
    pub divergence_factor: f64,
}

fn one() -> f64 {
    1.0
}

fn divergence_factor() -> f64 {
    1e3
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 64,
            lr0: 1e-3,
            lr_decay: 0.5,
            lr_decay_every: 200,
            lr_floor: 5e-6,
            l2: 1e-4,
            collocation_n: 2000,
            collocation_margin: 0.0,
            mode: Mode::Pinn,
            train_fraction: 1.0,
            divergence_factor: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("training diverged at epoch {epoch}: total loss {total} exceeds {factor}x the first epoch ({first})")]
    Diverged {
        epoch: u32,
        total: f64,
        first: f64,
        factor: f64,
    },
    #[error("state was saved for a different run configuration")]
    StateMismatch,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr_decay_every == 0 {
            return Err(TrainError::Config("epochs, batch_size and lr_decay_every must be positive"));
        }
        if !(self.lr0 > 0.0 && self.lr_floor > 0.0 && self.lr_floor < self.lr0) {
            return Err(TrainError::Config("learning rates must satisfy 0 < lr_floor < lr0"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(TrainError::Config("lr_decay must lie in (0, 1]"));
        }
        if !(self.l2 >= 0.0) {
            return Err(TrainError::Config("l2 must be non-negative"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(TrainError::Config("train_fraction must lie in (0, 1]"));
        }
        if !(self.collocation_margin >= 0.0 && self.collocation_margin.is_finite()) {
            return Err(TrainError::Config("collocation_margin must be finite and non-negative"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(TrainError::Config("divergence_factor must exceed 1"));
        }
        Ok(())
    }
}

/// `max(lr0 * decay^floor(epoch / every), floor)`.
pub fn lr_at(epoch: u32, cfg: &TrainingConfig) -> f64 {
    let steps = (epoch / cfg.lr_decay_every) as f64;
    (cfg.lr0 * libm::pow(cfg.lr_decay, steps)).max(cfg.lr_floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train: LossBreakdown,
    pub val: LossBreakdown,
    /// Model-selection score on the validation block.
    pub val_score: f64,
    pub lr: f64,
    /// Seconds since the start of training (as reported by the caller's clock).
    pub wall_s: f64,
}

/// Everything needed to continue a run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub seed: u64,
    pub next_epoch: u32,
    pub params: NetworkParams,
    pub adam: AdamState,
    pub best_params: NetworkParams,
    pub best_epoch: u32,
    pub best_score: f64,
    pub first_total: Option<f64>,
    pub history: Vec<EpochRecord>,
    /// Wall time accumulated by earlier sessions, s.
    pub elapsed_s: f64,
}

impl TrainerState {
    pub fn new(seed: u64) -> Self {
        let params = NetworkParams::init(seed);
        Self {
            seed,
            next_epoch: 0,
            best_params: params.clone(),
            params,
            adam: AdamState::new(N_PARAMS),
            best_epoch: 0,
            best_score: f64::INFINITY,
            first_total: None,
            history: Vec::new(),
            elapsed_s: 0.0,
        }
    }
}

/// Score used for best-epoch selection: the unit-weighted validation loss
/// the mode optimizes (data only for the baseline).
pub fn selection_score(val: &LossBreakdown, mode: Mode) -> f64 {
    match mode {
        Mode::Pinn => val.l_data + val.l_phys() + crate::physics::LAMBDA_B * val.l_bc,
        Mode::BaselineMlp => val.l_data,
    }
}

#[derive(Default)]
struct Accum {
    sum: LossBreakdown,
    batches: usize,
}

impl Accum {
    fn add(&mut self, b: &LossBreakdown) {
        let s = &mut self.sum;
        s.l_data += b.l_data;
        s.l_vle += b.l_vle;
        s.l_mass += b.l_mass;
        s.l_energy += b.l_energy;
        s.l_mccabe += b.l_mccabe;
        s.l_bc += b.l_bc;
        s.l_reg += b.l_reg;
        self.batches += 1;
    }

    fn mean(&self, w: LossWeights) -> LossBreakdown {
        let n = self.batches.max(1) as f64;
        let s = &self.sum;
        LossBreakdown {
            l_data: s.l_data / n,
            l_vle: s.l_vle / n,
            l_mass: s.l_mass / n,
            l_energy: s.l_energy / n,
            l_mccabe: s.l_mccabe / n,
            l_bc: s.l_bc / n,
            l_reg: s.l_reg / n,
            ..Default::default()
        }
        .with_weights(w)
    }
}

/// Per-term gradient weights of a batch.
#[derive(Debug, Clone, Copy, Default)]
struct TermWeights {
    data: f64,
    vle: f64,
    mccabe: f64,
    mass: f64,
    energy: f64,
    bc: f64,
    l2: f64,
}

impl From<LossWeights> for TermWeights {
    fn from(w: LossWeights) -> Self {
        Self {
            data: w.lambda_d,
            vle: w.lambda_p,
            mccabe: w.lambda_p,
            mass: w.lambda_p,
            energy: w.lambda_p,
            bc: w.lambda_b,
            l2: 1.0,
        }
    }
}

pub struct Trainer<'a> {
    pub data: &'a Prepared,
    pub ctx: PhysicsContext,
    pub cfg: TrainingConfig,
    pub colloc: CollocationSet,
    scaled: Vec<[f64; N_FEATURES]>,
    colloc_sensors: Vec<[f64; crate::sensors::N_SENSORS]>,
    ws: Workspace,
    /// Record indices that have contributed to a gradient so far.
    pub touched: Vec<bool>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a Prepared, ctx: PhysicsContext, cfg: TrainingConfig, seed: u64) -> Result<Self, TrainError> {
        cfg.validate()?;
        let colloc = match cfg.mode {
            Mode::Pinn => CollocationSet::sample(cfg.collocation_n, cfg.collocation_margin, seed),
            Mode::BaselineMlp => CollocationSet { points: Vec::new() },
        };
        let scaled = (0..data.data.len()).map(|i| data.scaled(i)).collect();
        let colloc_sensors = (0..colloc.len()).map(|i| colloc.sensors(i, &data.stats)).collect();
        Ok(Self {
            touched: vec![false; data.data.len()],
            data,
            ctx,
            cfg,
            colloc,
            scaled,
            colloc_sensors,
            ws: Workspace::default(),
        })
    }

    fn n_train(&self) -> usize {
        self.data.bounds.train.len()
    }

    pub fn weights(&self, epoch: u32) -> LossWeights {
        match self.cfg.mode {
            Mode::Pinn => schedule(epoch),
            Mode::BaselineMlp => LossWeights::DATA_ONLY,
        }
    }

    /// Run epochs until `state.next_epoch == end` (capped at the configured
    /// epoch count). `clock` returns seconds since an arbitrary origin.
    pub fn train_until(
        &mut self,
        state: &mut TrainerState,
        end: u32,
        clock: &mut dyn FnMut() -> f64,
    ) -> Result<(), TrainError> {
        let end = end.min(self.cfg.epochs);
        let t0 = clock();
        let base = state.elapsed_s;
        while state.next_epoch < end {
            let epoch = state.next_epoch;
            let w = self.weights(epoch);
            let lr = lr_at(epoch, &self.cfg);
            let train = self.run_epoch(state, epoch, w, lr)?;
            let first = *state.first_total.get_or_insert(train.total);
            if !(train.total.is_finite()) || train.total > self.cfg.divergence_factor * first {
                return Err(TrainError::Diverged {
                    epoch,
                    total: train.total,
                    first,
                    factor: self.cfg.divergence_factor,
                });
            }
            let val = self.evaluate_block(&state.params, self.data.bounds.val.clone(), w)?;
            let score = selection_score(&val, self.cfg.mode);
            if score < state.best_score {
                state.best_score = score;
                state.best_epoch = epoch;
                state.best_params = state.params.clone();
            }
            state.elapsed_s = base + (clock() - t0);
            state.history.push(EpochRecord {
                epoch,
                train,
                val,
                val_score: score,
                lr,
                wall_s: state.elapsed_s,
            });
            state.next_epoch += 1;
        }
        Ok(())
    }

    pub fn train(&mut self, state: &mut TrainerState, clock: &mut dyn FnMut() -> f64) -> Result<(), TrainError> {
        let end = self.cfg.epochs;
        self.train_until(state, end, clock)
    }

    fn run_epoch(
        &mut self,
        state: &mut TrainerState,
        epoch: u32,
        w: LossWeights,
        lr: f64,
    ) -> Result<LossBreakdown, TrainError> {
        let n_train = self.n_train();
        let bs = self.cfg.batch_size;
        let mut order: Vec<usize> = self.data.bounds.train.clone().collect();
        let mut rng = rng::stream(state.seed, Stream::Shuffle, epoch);
        rng::shuffle(&mut order, &mut rng);
        let n_batches = n_train.div_ceil(bs);
        let chunk = self.colloc.len().div_ceil(n_batches.max(1));
        let mut acc = Accum::default();
        let mut grad = vec![0.0; N_PARAMS];
        for (b, batch) in order.chunks(bs).enumerate() {
            let c0 = (b * chunk).min(self.colloc.len());
            let c1 = ((b + 1) * chunk).min(self.colloc.len());
            grad.iter_mut().for_each(|g| *g = 0.0);
            let parts = self.batch_gradient(&state.params, batch, c0..c1, TermWeights::from(w), &mut grad)?;
            acc.add(&parts);
            adam_step(&mut state.params.data, &grad, &mut state.adam, lr)?;
        }
        Ok(acc.mean(w))
    }

    /// Value of one unit-weighted loss term on a batch (training record
    /// indices plus a range of collocation points); accumulates its gradient
    /// into `grad`. The L2 term includes the configured coefficient.
    pub fn term_gradient(
        &mut self,
        params: &NetworkParams,
        batch: &[usize],
        colloc: core::ops::Range<usize>,
        term: Term,
        grad: &mut [f64],
    ) -> Result<f64, TrainError> {
        let mut tw = TermWeights::default();
        match term {
            Term::Data => tw.data = 1.0,
            Term::Vle => tw.vle = 1.0,
            Term::McCabe => tw.mccabe = 1.0,
            Term::Mass => tw.mass = 1.0,
            Term::Energy => tw.energy = 1.0,
            Term::Bc => tw.bc = 1.0,
            Term::L2 => tw.l2 = 1.0,
        }
        let p = self.batch_gradient(params, batch, colloc, tw, grad)?;
        Ok(match term {
            Term::Data => p.l_data,
            Term::Vle => p.l_vle,
            Term::McCabe => p.l_mccabe,
            Term::Mass => p.l_mass,
            Term::Energy => p.l_energy,
            Term::Bc => p.l_bc,
            Term::L2 => p.l_reg,
        })
    }

    /// Loss parts of one batch (unweighted); accumulates the gradient of
    /// the `tw`-weighted sum into `grad`.
    fn batch_gradient(
        &mut self,
        params: &NetworkParams,
        batch: &[usize],
        colloc: core::ops::Range<usize>,
        tw: TermWeights,
        grad: &mut [f64],
    ) -> Result<LossBreakdown, TrainError> {
        let physics = self.cfg.mode == Mode::Pinn;
        let train_end = self.data.bounds.train.end;
        let pairs: Vec<usize> = if physics {
            batch.iter().copied().filter(|&i| i + 1 < train_end).collect()
        } else {
            Vec::new()
        };
        let colloc = if physics { colloc } else { 0..0 };
        let nb = batch.len();
        let np = pairs.len();
        let nc = colloc.len();
        let rows = nb + np + nc;

        let mut x = Vec::with_capacity(rows * N_FEATURES);
        for &i in batch {
            x.extend_from_slice(&self.scaled[i]);
            self.touched[i] = true;
        }
        for &i in &pairs {
            x.extend_from_slice(&self.scaled[i + 1]);
            self.touched[i + 1] = true;
        }
        for k in colloc.clone() {
            x.extend_from_slice(&self.colloc.points[k]);
        }
        self.ws.forward(params, &x, rows);

        let mut dz = vec![0.0; rows * N_OUT];
        let mut parts = LossBreakdown::default();
        let records = &self.data.data.records;

        for (r, &i) in batch.iter().enumerate() {
            let (v, g) = data_grad(self.ws.z_row(r), self.data.data.targets(i))?;
            parts.l_data += v / nb as f64;
            for q in 0..N_OUT {
                dz[r * N_OUT + q] += tw.data * g[q] / nb as f64;
            }
        }
        if physics {
            for (k, &i) in pairs.iter().enumerate() {
                // Row of record i is its position in the batch.
                let ra = batch.iter().position(|&j| j == i).unwrap();
                let rb = nb + k;
                let pair = PairSensors {
                    a: &records[i],
                    b: &records[i + 1],
                };
                let g = self.ctx.pair_grad(self.ws.z_row(ra), self.ws.z_row(rb), pair)?;
                parts.l_mass += g.mass / np as f64;
                parts.l_energy += g.energy / np as f64;
                let (sm, se) = (tw.mass / np as f64, tw.energy / np as f64);
                for q in 0..N_OUT {
                    dz[ra * N_OUT + q] += sm * g.d_mass[q] + se * g.d_energy[q];
                    dz[rb * N_OUT + q] += sm * g.d_mass[N_OUT + q] + se * g.d_energy[N_OUT + q];
                }
            }
            for (k, ci) in colloc.enumerate() {
                let r = nb + np + k;
                let g = self.ctx.point_grad(self.ws.z_row(r), &self.colloc_sensors[ci])?;
                parts.l_vle += g.vle / nc as f64;
                parts.l_mccabe += g.mccabe / nc as f64;
                parts.l_bc += g.bc / nc as f64;
                let (sv, sm, sb) = (tw.vle / nc as f64, tw.mccabe / nc as f64, tw.bc / nc as f64);
                for q in 0..N_OUT {
                    dz[r * N_OUT + q] += sv * g.d_vle[q] + sm * g.d_mccabe[q] + sb * g.d_bc[q];
                }
            }
        }
        if dz.iter().any(|v| !v.is_finite()) {
            return Err(PhysicsError::NonFinite(Term::Data).into());
        }
        self.ws.backward(params, &dz, grad);
        parts.l_reg = self.cfg.l2 * params.weight_sq_sum();
        params.l2_grad_acc(tw.l2 * self.cfg.l2, grad);
        Ok(parts)
    }

    /// Unweighted loss parts on a contiguous block of records: data on every
    /// record, point terms at each record's sensors, balance terms on the
    /// consecutive pairs inside the block.
    pub fn evaluate_block(
        &mut self,
        params: &NetworkParams,
        block: core::ops::Range<usize>,
        w: LossWeights,
    ) -> Result<LossBreakdown, TrainError> {
        evaluate_block(&mut self.ws, params, self.data, &self.ctx, &self.scaled, block, self.cfg.l2, w)
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate_block(
    ws: &mut Workspace,
    params: &NetworkParams,
    data: &Prepared,
    ctx: &PhysicsContext,
    scaled: &[[f64; N_FEATURES]],
    block: core::ops::Range<usize>,
    l2: f64,
    w: LossWeights,
) -> Result<LossBreakdown, TrainError> {
    let n = block.len();
    let mut parts = LossBreakdown::default();
    if n == 0 {
        return Ok(parts.with_weights(w));
    }
    let mut x = Vec::with_capacity(n * N_FEATURES);
    for i in block.clone() {
        x.extend_from_slice(&scaled[i]);
    }
    ws.forward(params, &x, n);
    let records = &data.data.records;
    for (r, i) in block.clone().enumerate() {
        let z = ws.z_row(r);
        parts.l_data += crate::physics::data_point(z, data.data.targets(i)) / n as f64;
        let [vle, mc, bc] = ctx.point_values(z, &records[i].sensors)?;
        parts.l_vle += vle / n as f64;
        parts.l_mccabe += mc / n as f64;
        parts.l_bc += bc / n as f64;
    }
    if n > 1 {
        for (r, i) in block.clone().enumerate().take(n - 1) {
            let pair = PairSensors {
                a: &records[i],
                b: &records[i + 1],
            };
            let [m, e] = ctx.pair_values(ws.z_row(r), ws.z_row(r + 1), pair)?;
            parts.l_mass += m / (n - 1) as f64;
            parts.l_energy += e / (n - 1) as f64;
        }
    }
    parts.l_reg = l2 * params.weight_sq_sum();
    Ok(parts.with_weights(w))
}

/// Loss parts of `params` on an arbitrary block (for reporting).
pub fn block_loss(
    params: &NetworkParams,
    data: &Prepared,
    ctx: &PhysicsContext,
    block: core::ops::Range<usize>,
    l2: f64,
    w: LossWeights,
) -> Result<LossBreakdown, TrainError> {
    let scaled: Vec<_> = (0..data.data.len()).map(|i| data.scaled(i)).collect();
    evaluate_block(&mut Workspace::default(), params, data, ctx, &scaled, block, l2, w)
}
