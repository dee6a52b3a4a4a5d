//! Metrics, physics consistency, run comparison, tray-profile reconstruction
//! and permutation feature importance.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::column::interpolate_pressure;
use crate::dataset::{raw_features, NormStats, Prepared, N_FEATURES};
use crate::network::{ModelOutput, NetworkParams, Workspace, N_OUT};
use crate::physics::{OutputScaling, PhysicsContext, PhysicsError};
use crate::rng::{self, Stream};
use crate::sensors::{ch, SensorRecord, N_SENSORS};
use crate::thermo::{BinarySystem, ThermoError};

/// A trained network together with everything needed to apply it to raw
/// records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: NetworkParams,
    pub stats: NormStats,
    pub scaling: OutputScaling,
    /// Time normalizer of the training dataset, s.
    pub t_max: f64,
}

impl Model {
    pub fn features(&self, r: &SensorRecord) -> [f64; N_FEATURES] {
        self.stats.apply(&raw_features(r, self.t_max))
    }

    /// Head pre-activations for a block of scaled feature rows.
    pub fn z_batch(&self, rows: &[[f64; N_FEATURES]]) -> Vec<[f64; N_OUT]> {
        let mut ws = Workspace::default();
        let x: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        ws.forward(&self.params, &x, rows.len());
        (0..rows.len()).map(|i| ws.z_row(i)).collect()
    }

    pub fn predict(&self, records: &[SensorRecord]) -> Vec<ModelOutput> {
        let rows: Vec<_> = records.iter().map(|r| self.features(r)).collect();
        self.z_batch(&rows).into_iter().map(ModelOutput::from_z).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    /// Standard deviation of `prediction - target`.
    pub residual_std: f64,
}

/// Standard regression metrics. `r2` uses the total sum of squares about the
/// target mean and is `-inf`/`nan`-free: a constant target gives `r2 = 0`
/// unless the fit is perfect (then 1).
pub fn compute_metrics(pred: &[f64], target: &[f64]) -> TargetMetrics {
    assert_eq!(pred.len(), target.len(), "prediction/target length mismatch");
    let n = pred.len();
    if n == 0 {
        return TargetMetrics::default();
    }
    let nf = n as f64;
    let mean_t = target.iter().sum::<f64>() / nf;
    let (mut ss_res, mut ss_tot, mut abs, mut sum_r) = (0.0, 0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        let r = p - t;
        ss_res += r * r;
        ss_tot += (t - mean_t) * (t - mean_t);
        abs += libm::fabs(r);
        sum_r += r;
    }
    let mean_r = sum_r / nf;
    let var_r = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t - mean_r;
            d * d
        })
        .sum::<f64>()
        / nf;
    let mse = ss_res / nf;
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    TargetMetrics {
        mse,
        rmse: libm::sqrt(mse),
        mae: abs / nf,
        r2,
        residual_std: libm::sqrt(var_r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConsistency {
    pub mean_vle_residual: f64,
    pub threshold: f64,
    /// `mean_vle_residual < threshold` (strict).
    pub pass: bool,
}

pub fn physics_consistency(residuals: &[f64], threshold: f64) -> PhysicsConsistency {
    let mean = if residuals.is_empty() {
        0.0
    } else {
        residuals.iter().sum::<f64>() / residuals.len() as f64
    };
    PhysicsConsistency {
        mean_vle_residual: mean,
        threshold,
        pass: mean < threshold,
    }
}

/// Per-record VLE residuals of `model` on `records`, built exactly as in the
/// training loss.
pub fn vle_residuals(model: &Model, ctx: &PhysicsContext, records: &[SensorRecord]) -> Result<Vec<f64>, PhysicsError> {
    let rows: Vec<_> = records.iter().map(|r| model.features(r)).collect();
    model
        .z_batch(&rows)
        .iter()
        .zip(records)
        .map(|(z, r)| ctx.point_values(*z, &r.sensors).map(|v| v[0]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_records: usize,
    pub x_hx: TargetMetrics,
    pub x_tx: TargetMetrics,
    pub r2_mean: f64,
    /// Metrics against the noise-free targets, when the dataset carries them.
    pub x_hx_clean: Option<TargetMetrics>,
    pub physics: PhysicsConsistency,
}

/// Predictions, residuals and the report for one block of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub predictions: Vec<ModelOutput>,
    pub residuals_hx: Vec<f64>,
    pub vle: Vec<f64>,
}

pub fn evaluate(
    model: &Model,
    ctx: &PhysicsContext,
    records: &[SensorRecord],
    clean: Option<&[SensorRecord]>,
    threshold: f64,
) -> Result<Evaluation, PhysicsError> {
    let predictions = model.predict(records);
    let p_hx: Vec<f64> = predictions.iter().map(|o| o.x_hx).collect();
    let p_tx: Vec<f64> = predictions.iter().map(|o| o.x_tx).collect();
    let t_hx: Vec<f64> = records.iter().map(|r| r.x_hx).collect();
    let t_tx: Vec<f64> = records.iter().map(|r| r.x_tx).collect();
    let x_hx = compute_metrics(&p_hx, &t_hx);
    let x_tx = compute_metrics(&p_tx, &t_tx);
    let x_hx_clean = clean.map(|c| {
        let t: Vec<f64> = c.iter().map(|r| r.x_hx).collect();
        compute_metrics(&p_hx, &t)
    });
    let vle = vle_residuals(model, ctx, records)?;
    Ok(Evaluation {
        report: EvalReport {
            n_records: records.len(),
            x_hx,
            x_tx,
            r2_mean: 0.5 * (x_hx.r2 + x_tx.r2),
            x_hx_clean,
            physics: physics_consistency(&vle, threshold),
        },
        residuals_hx: p_hx.iter().zip(&t_hx).map(|(p, t)| p - t).collect(),
        predictions,
        vle,
    })
}

/// Test-block evaluation of a prepared dataset.
pub fn evaluate_test(model: &Model, ctx: &PhysicsContext, data: &Prepared, threshold: f64) -> Result<Evaluation, PhysicsError> {
    let b = data.bounds.test.clone();
    let clean = data.clean.as_ref().map(|c| &c[b.clone()]);
    evaluate(model, ctx, &data.data.records[b], clean, threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricChange {
    pub a: f64,
    pub b: f64,
    /// `(b - a) / a`; zero when both are zero.
    pub relative: f64,
}

impl MetricChange {
    pub fn new(a: f64, b: f64) -> Self {
        let relative = if a == b { 0.0 } else { (b - a) / a };
        Self { a, b, relative }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rmse_hx: MetricChange,
    pub mae_hx: MetricChange,
    pub r2_hx: MetricChange,
    pub rmse_tx: MetricChange,
    pub mean_vle_residual: MetricChange,
    /// `rmse_b / rmse_a` on x_HX.
    pub rmse_ratio: f64,
    pub physics_pass_a: bool,
    pub physics_pass_b: bool,
}

pub fn compare(a: &EvalReport, b: &EvalReport) -> Comparison {
    Comparison {
        rmse_hx: MetricChange::new(a.x_hx.rmse, b.x_hx.rmse),
        mae_hx: MetricChange::new(a.x_hx.mae, b.x_hx.mae),
        r2_hx: MetricChange::new(a.x_hx.r2, b.x_hx.r2),
        rmse_tx: MetricChange::new(a.x_tx.rmse, b.x_tx.rmse),
        mean_vle_residual: MetricChange::new(a.physics.mean_vle_residual, b.physics.mean_vle_residual),
        rmse_ratio: if a.x_hx.rmse == b.x_hx.rmse { 1.0 } else { b.x_hx.rmse / a.x_hx.rmse },
        physics_pass_a: a.physics.pass,
        physics_pass_b: b.physics.pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over `[min, max]` of the values; the last bin is
/// closed on the right.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            lo: lo + k as f64 * width,
            hi: lo + (k + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        out[k].count += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileTray {
    /// 1-based from the top.
    pub index: usize,
    pub x_heavy: f64,
    pub y_heavy: f64,
    /// Celsius.
    pub t_c: f64,
    pub p_kpa: f64,
    pub is_feed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrayProfile {
    pub time_s: f64,
    pub trays: Vec<ProfileTray>,
    pub feed_tray: usize,
    /// Stepping left [0, 1] or reversed before the bottom tray; `trays` holds
    /// the valid part.
    pub truncated: bool,
}

impl TrayProfile {
    /// Heavy-fraction swing from the top tray to the last valid tray. An
    /// S-curve that resolves to purer ends at both sides swings further.
    pub fn separation(&self) -> f64 {
        match (self.trays.first(), self.trays.last()) {
            (Some(a), Some(b)) => b.x_heavy - a.x_heavy,
            _ => 0.0,
        }
    }

    /// Mean temperature rise per tray from tray 1 to the feed tray, K.
    pub fn rectifying_gradient(&self) -> f64 {
        let n = self.feed_tray.min(self.trays.len());
        if n < 2 {
            return 0.0;
        }
        (self.trays[n - 1].t_c - self.trays[0].t_c) / (n - 1) as f64
    }
}

/// Flows and compositions the stepping needs, read from one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInputs {
    pub x_d: f64,
    pub x_b: f64,
    pub reflux: f64,
    /// kmol/h
    pub vapor: f64,
    /// kmol/h
    pub feed: f64,
    pub p_top: f64,
    pub p_main: f64,
    pub p_bottom: f64,
}

impl StepInputs {
    /// Vapor from the top-vapor mass flow at distillate composition, feed
    /// from the feed mass flow at feed composition, reboiler composition
    /// from its analyser.
    pub fn from_record(x_d: f64, s: &[f64; N_SENSORS], sys: &BinarySystem) -> Self {
        let mw = |x: f64| sys.molar_mass(x, 1.0 - x);
        let z = s[ch::Z_HX].clamp(0.0, 1.0);
        Self {
            x_d,
            x_b: s[ch::X_REBOILER].clamp(0.0, 1.0),
            reflux: s[ch::REFLUX],
            vapor: s[ch::TOP_VAPOR_MASS] / mw(x_d),
            feed: s[ch::FEED_MASS] / mw(z),
            p_top: s[ch::P_TOP],
            p_main: s[ch::P_MAIN],
            p_bottom: s[ch::P_BOTTOM],
        }
    }
}

/// Largest backward step in liquid composition read as a pinch (the
/// pressure rise down the column moves the equilibrium curve slightly)
/// rather than as a failed stepping.
pub const PINCH_TOL: f64 = 1e-3;

/// McCabe–Thiele stepping from the distillate down the column. The vapor
/// entering the condenser equals the distillate; each tray's liquid is in
/// equilibrium with its vapor at the interpolated tray pressure; the vapor
/// from the tray below follows the rectifying line above the feed tray and
/// the stripping line (saturated-liquid feed) from the feed tray down.
pub fn reconstruct_profile(
    u: &StepInputs,
    n_trays: usize,
    feed_tray: usize,
    sys: &BinarySystem,
    time_s: f64,
) -> Result<TrayProfile, ThermoError> {
    let r = u.reflux;
    let l = r / (r + 1.0) * u.vapor;
    let slope_s = (l + u.feed) / u.vapor;
    let mut trays: Vec<ProfileTray> = Vec::with_capacity(n_trays);
    let mut y = u.x_d;
    let mut truncated = false;
    for n in 1..=n_trays {
        if !(0.0..=1.0).contains(&y) {
            truncated = true;
            break;
        }
        let p = interpolate_pressure(u.p_top, u.p_main, u.p_bottom, n, feed_tray, n_trays);
        let mut dp = sys.dew_point(y, p)?;
        if let Some(prev) = trays.last() {
            let back = prev.x_heavy - dp.x_heavy;
            if back > PINCH_TOL {
                // operating line on the wrong side of the equilibrium curve
                truncated = true;
                break;
            }
            if back > 0.0 {
                // pinch: the staircase stalls at the previous composition
                dp.x_heavy = prev.x_heavy;
            }
        }
        trays.push(ProfileTray {
            index: n,
            x_heavy: dp.x_heavy,
            y_heavy: y,
            t_c: dp.t - 273.15,
            p_kpa: p,
            is_feed: n == feed_tray,
        });
        y = if n < feed_tray {
            r / (r + 1.0) * dp.x_heavy + u.x_d / (r + 1.0)
        } else {
            u.x_b + slope_s * (dp.x_heavy - u.x_b)
        };
    }
    Ok(TrayProfile {
        time_s,
        trays,
        feed_tray,
        truncated,
    })
}

/// Profile at one record using the model's distillate prediction.
pub fn reconstruct_profiles(
    model: &Model,
    record: &SensorRecord,
    n_trays: usize,
    feed_tray: usize,
    sys: &BinarySystem,
) -> Result<TrayProfile, ThermoError> {
    let x_d = model.predict(core::slice::from_ref(record))[0].x_hx;
    let u = StepInputs::from_record(x_d, &record.sensors, sys);
    reconstruct_profile(&u, n_trays, feed_tray, sys, record.time_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub feature: usize,
    /// Mean RMSE increase on x_HX over the shuffles.
    pub score: f64,
    pub std_err: f64,
}

/// Increase in x_HX RMSE when each scaled feature column of the block is
/// permuted, averaged over `repeats` shuffles; sorted by descending score.
pub fn permutation_importance(
    model: &Model,
    records: &[SensorRecord],
    repeats: usize,
    seed: u64,
) -> Vec<Importance> {
    let rows: Vec<_> = records.iter().map(|r| model.features(r)).collect();
    let target: Vec<f64> = records.iter().map(|r| r.x_hx).collect();
    permutation_importance_rows(model, &rows, &target, repeats, seed)
}

/// [`permutation_importance`] on already scaled rows.
pub fn permutation_importance_rows(
    model: &Model,
    rows: &[[f64; N_FEATURES]],
    target: &[f64],
    repeats: usize,
    seed: u64,
) -> Vec<Importance> {
    let rmse = |rows: &[[f64; N_FEATURES]]| {
        let p: Vec<f64> = model.z_batch(rows).into_iter().map(|z| ModelOutput::from_z(z).x_hx).collect();
        compute_metrics(&p, target).rmse
    };
    let base = rmse(rows);
    let mut out: Vec<Importance> = (0..N_FEATURES)
        .map(|j| {
            let scores: Vec<f64> = (0..repeats)
                .map(|k| {
                    let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    let mut g = rng::stream(seed, Stream::Permutation, (j * repeats + k) as u32);
                    rng::shuffle(&mut col, &mut g);
                    let mut shuffled = rows.to_vec();
                    for (r, v) in shuffled.iter_mut().zip(col) {
                        r[j] = v;
                    }
                    rmse(&shuffled) - base
                })
                .collect();
            let (mean, se) = mean_and_se(&scores);
            Importance {
                feature: j,
                score: mean,
                std_err: se,
            }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.feature.cmp(&b.feature)));
    out
}

/// Mean and standard error of the mean.
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let mean = v.iter().sum::<f64>() / nf;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    (mean, libm::sqrt(var / nf))
}

/// Rank (0-based) of `feature` in a sorted importance list.
pub fn rank_of(importances: &[Importance], feature: usize) -> Option<usize> {
    importances.iter().position(|i| i.feature == feature)
}
