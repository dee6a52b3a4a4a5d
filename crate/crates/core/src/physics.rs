//! Composite training loss: data error, the four physics residuals and the
//! boundary penalty, plus the epoch-dependent weight schedule.
//!
//! Every residual is written once over [`Scalar`]. Evaluated with `f64` it
//! gives the loss value; evaluated with [`Dual`] seeded on the head
//! pre-activations it gives the exact gradient that the network backward
//! pass propagates.
//!
//! Head conventions: `x_hx`/`x_tx` are the distillate (condenser liquid)
//! mole fractions, `T`/`P` the temperature and pressure of the top tray.
//! The top-tray liquid is measured by the top-outlet composition channel,
//! the top-tray pressure by the top tower pressure channel.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::column::ColumnConfig;
use crate::dataset::{NormStats, N_FEATURES};
use crate::network::{heads, N_OUT};
use crate::scalar::{Dual, Scalar};
use crate::sensors::{ch, SensorRecord, N_SENSORS};
use crate::thermo::{BinarySystem, ThermoError};

pub const LAMBDA_B: f64 = 0.1;
const SCHEDULE_RATE: f64 = 0.02;
const SCHEDULE_CENTER: f64 = 300.0;
const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_p: f64,
    pub lambda_b: f64,
}

impl LossWeights {
    /// Data-only weights used by the baseline network.
    pub const DATA_ONLY: LossWeights = LossWeights {
        lambda_d: 1.0,
        lambda_p: 0.0,
        lambda_b: 0.0,
    };
}

/// `lambda_d = sigmoid(0.02 (k - 300))`, `lambda_p = 1 - lambda_d`,
/// `lambda_b = 0.1`.
pub fn schedule(epoch: u32) -> LossWeights {
    let lambda_d = 1.0 / (1.0 + libm::exp(-SCHEDULE_RATE * (epoch as f64 - SCHEDULE_CENTER)));
    LossWeights {
        lambda_d,
        lambda_p: 1.0 - lambda_d,
        lambda_b: LAMBDA_B,
    }
}

/// Per-term loss values and the weights they were combined with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_data: f64,
    pub l_vle: f64,
    pub l_mass: f64,
    pub l_energy: f64,
    pub l_mccabe: f64,
    pub l_bc: f64,
    pub l_reg: f64,
    pub lambda_d: f64,
    pub lambda_p: f64,
    pub lambda_b: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn l_phys(&self) -> f64 {
        self.l_vle + self.l_mass + self.l_energy + self.l_mccabe
    }

    pub fn weighted_total(&self) -> f64 {
        self.lambda_d * self.l_data + self.lambda_p * self.l_phys() + self.lambda_b * self.l_bc + self.l_reg
    }

    pub fn with_weights(mut self, w: LossWeights) -> Self {
        self.lambda_d = w.lambda_d;
        self.lambda_p = w.lambda_p;
        self.lambda_b = w.lambda_b;
        self.total = self.weighted_total();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Data,
    Vle,
    McCabe,
    Mass,
    Energy,
    Bc,
    L2,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhysicsError {
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error("non-finite {0:?} term")]
    NonFinite(Term),
}

/// Maps the linear temperature and pressure heads to physical units.
///
/// Temperature spans the two pure-component boiling points at the mean
/// training top pressure; pressure uses the training range of the top
/// pressure channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputScaling {
    pub t_lo: f64,
    pub t_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
}

impl OutputScaling {
    pub fn from_stats(stats: &NormStats, sys: &BinarySystem) -> Self {
        let (p_min, p_max) = (stats.min[ch::P_TOP], stats.max[ch::P_TOP]);
        let p_mid = 0.5 * (p_min + p_max);
        let (tb_h, tb_l) = sys.pure_boiling_points(p_mid);
        let p_hi = if p_max > p_min { p_max } else { p_min + 1.0 };
        Self {
            t_lo: tb_l.min(tb_h),
            t_hi: tb_h.max(tb_l),
            p_lo: p_min,
            p_hi,
        }
    }

    pub fn temperature<S: Scalar>(&self, t_scaled: S) -> S {
        S::cst(self.t_lo) + t_scaled * S::cst(self.t_hi - self.t_lo)
    }

    pub fn pressure<S: Scalar>(&self, p_scaled: S) -> S {
        S::cst(self.p_lo) + p_scaled * S::cst(self.p_hi - self.p_lo)
    }

    pub fn scale_temperature(&self, t: f64) -> f64 {
        (t - self.t_lo) / (self.t_hi - self.t_lo)
    }

    pub fn scale_pressure(&self, p: f64) -> f64 {
        (p - self.p_lo) / (self.p_hi - self.p_lo)
    }
}

/// Everything the residuals need besides the network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsContext {
    pub sys: BinarySystem,
    pub scaling: OutputScaling,
    /// Condenser holdup at 100 % level, kmol.
    pub condenser_capacity: f64,
    /// Reflux drum temperature, K.
    pub reflux_temperature: f64,
    /// Characteristic flow for the mass residual, kmol/h.
    pub flow_scale: f64,
    /// Characteristic duty for the energy residual, kW.
    pub duty_scale: f64,
}

/// Physical predictions at one record.
#[derive(Debug, Clone, Copy)]
pub struct Prediction<S> {
    pub x_hx: S,
    pub x_tx: S,
    /// K
    pub t: S,
    /// kPa
    pub p: S,
}

impl PhysicsContext {
    /// Context for a column configuration and train-fitted feature scaling;
    /// the balance residuals are scaled by the nominal feed flow and duty.
    pub fn new(sys: &BinarySystem, column: &ColumnConfig, stats: &NormStats) -> Self {
        Self {
            sys: sys.clone(),
            scaling: OutputScaling::from_stats(stats, sys),
            condenser_capacity: column.condenser_capacity,
            reflux_temperature: column.reflux_temperature,
            flow_scale: column.feed_flow,
            duty_scale: column.reboiler_duty,
        }
    }

    pub fn predict<S: Scalar>(&self, z: [S; N_OUT]) -> Prediction<S> {
        let h = heads(z);
        Prediction {
            x_hx: h.x_hx,
            x_tx: h.x_tx,
            t: self.scaling.temperature(h.t),
            p: self.scaling.pressure(h.p),
        }
    }
}

/// Squared deviation of `y_n` from the rectifying operating line
/// `y = R/(R+1) x_n + x_d/(R+1)`.
pub fn mccabe_residual<S: Scalar>(x_n: S, y_n: S, reflux: f64, x_d: S) -> S {
    let r = S::cst(reflux);
    let one = S::cst(1.0);
    (y_n - (r / (r + one) * x_n + x_d / (r + one))).square()
}

/// Rectifying operating line value at `x_n`.
pub fn operating_line<S: Scalar>(x_n: S, reflux: f64, x_d: S) -> S {
    let r = S::cst(reflux);
    let one = S::cst(1.0);
    r / (r + one) * x_n + x_d / (r + one)
}

fn top_liquid(sensors: &[f64; N_SENSORS]) -> f64 {
    sensors[ch::X_TOP].clamp(0.0, 1.0)
}

/// VLE residual at the top tray. The vapor leaving the top tray is read off
/// the operating line at the reflux point (`x_n = x_D`); the liquid is the
/// measured top-tray composition.
pub fn vle_point<S: Scalar>(pred: &Prediction<S>, sensors: &[f64; N_SENSORS], sys: &BinarySystem) -> S {
    let r = sensors[ch::REFLUX];
    let y_h = operating_line(pred.x_hx, r, pred.x_hx);
    let y_l = operating_line(pred.x_tx, r, pred.x_tx);
    let x = top_liquid(sensors);
    sys.vle_residual((S::cst(x), S::cst(1.0 - x)), (y_h, y_l), pred.t, pred.p)
}

/// Operating-line residual at the top tray: the heavy vapor leaving the
/// measured top-tray liquid at the predicted temperature and the measured
/// top pressure against the line through the predicted distillate.
pub fn mccabe_point<S: Scalar>(pred: &Prediction<S>, sensors: &[f64; N_SENSORS], sys: &BinarySystem) -> S {
    let x = top_liquid(sensors);
    let p_meas = S::cst(sensors[ch::P_TOP]);
    let (y_h, _) = sys.raoult(S::cst(x), S::cst(1.0 - x), pred.t, p_meas);
    mccabe_residual(pred.x_hx, y_h, sensors[ch::REFLUX], pred.x_hx)
}

/// `(x_hx + x_tx - 1)^2 + max(0, T_dew(y, P) - T)^2` in kelvin, with `y`
/// the operating-line vapor used by the VLE term.
pub fn bc_point<S: Scalar>(
    pred: &Prediction<S>,
    sensors: &[f64; N_SENSORS],
    sys: &BinarySystem,
) -> Result<S, ThermoError> {
    let closure = (pred.x_hx + pred.x_tx - S::cst(1.0)).square();
    let y_h = operating_line(pred.x_hx, sensors[ch::REFLUX], pred.x_hx);
    let y_h = if y_h.value() < 0.0 {
        S::cst(0.0)
    } else if y_h.value() > 1.0 {
        S::cst(1.0)
    } else {
        y_h
    };
    let t_dew = sys.dew_point_scalar(y_h, pred.p)?;
    Ok(closure + (t_dew - pred.t).relu().square())
}

/// Measurements of two consecutive records used by the balance residuals.
#[derive(Debug, Clone, Copy)]
pub struct PairSensors<'a> {
    pub a: &'a SensorRecord,
    pub b: &'a SensorRecord,
}

struct DrumSide<S> {
    holdup: f64,
    vapor: S,
    y_h: S,
    out: S,
}

impl PhysicsContext {
    fn drum_side<S: Scalar>(&self, pred: &Prediction<S>, s: &[f64; N_SENSORS], dmdt: f64) -> DrumSide<S> {
        let sys = &self.sys;
        let x = top_liquid(s);
        let (r1, r2) = sys.raoult(S::cst(x), S::cst(1.0 - x), pred.t, pred.p);
        let y_h = r1 / (r1 + r2);
        let mw = sys.molar_mass(y_h, S::cst(1.0) - y_h);
        let vapor = S::cst(s[ch::TOP_VAPOR_MASS]) / mw;
        DrumSide {
            holdup: s[ch::CONDENSER_LEVEL] / 100.0 * self.condenser_capacity,
            vapor,
            y_h,
            out: vapor - S::cst(dmdt),
        }
    }

    fn drum_sides<S: Scalar>(
        &self,
        pair: PairSensors<'_>,
        pa: &Prediction<S>,
        pb: &Prediction<S>,
    ) -> (f64, [DrumSide<S>; 2]) {
        let dt_h = (pair.b.time_s - pair.a.time_s) / SECONDS_PER_HOUR;
        let m = |r: &SensorRecord| r.sensors[ch::CONDENSER_LEVEL] / 100.0 * self.condenser_capacity;
        let dmdt = (m(pair.b) - m(pair.a)) / dt_h;
        (
            dt_h,
            [
                self.drum_side(pa, &pair.a.sensors, dmdt),
                self.drum_side(pb, &pair.b.sensors, dmdt),
            ],
        )
    }

    /// Heavy-component balance on the condenser/reflux-drum envelope over one
    /// sampling interval, (kmol/h)^2:
    /// `[(M x)_b - (M x)_a] / dt - mean(V y - (L + D) x)`.
    /// `V` follows from the top vapor mass flow and the equilibrium vapor of
    /// the measured top-tray liquid at the predicted `(T, P)`; `L + D` closes
    /// the total balance with the measured level change.
    pub fn mass_balance_residual<S: Scalar>(
        &self,
        pair: PairSensors<'_>,
        pa: &Prediction<S>,
        pb: &Prediction<S>,
    ) -> S {
        let (dt_h, [a, b]) = self.drum_sides(pair, pa, pb);
        let acc = (S::cst(b.holdup) * pb.x_hx - S::cst(a.holdup) * pa.x_hx) / S::cst(dt_h);
        let rate = |d: &DrumSide<S>, x: S| d.vapor * d.y_h - d.out * x;
        let mean_rate = (rate(&a, pa.x_hx) + rate(&b, pb.x_hx)) * S::cst(0.5);
        (acc - mean_rate).square()
    }

    /// Enthalpy balance on the same envelope, kW^2. Condensate enters and
    /// liquid leaves at the reflux temperature; the external duty is the
    /// duties channel.
    pub fn energy_balance_residual<S: Scalar>(
        &self,
        pair: PairSensors<'_>,
        pa: &Prediction<S>,
        pb: &Prediction<S>,
    ) -> S {
        let sys = &self.sys;
        let tc = S::cst(self.reflux_temperature);
        let h = |x: S| sys.liquid_enthalpy(x, S::cst(1.0) - x, tc);
        let (dt_h, [a, b]) = self.drum_sides(pair, pa, pb);
        let acc = (S::cst(b.holdup) * h(pb.x_hx) - S::cst(a.holdup) * h(pa.x_hx)) / S::cst(dt_h);
        let flow = |d: &DrumSide<S>, x: S| d.vapor * h(d.y_h) - d.out * h(x);
        let mean_flow = (flow(&a, pa.x_hx) + flow(&b, pb.x_hx)) * S::cst(0.5);
        let duty = 0.5 * (pair.a.sensors[ch::DUTY] + pair.b.sensors[ch::DUTY]) * SECONDS_PER_HOUR;
        ((acc - mean_flow - S::cst(duty)) / S::cst(SECONDS_PER_HOUR)).square()
    }
}

/// Per-sample data error `((x_hx - t_hx)^2 + (x_tx - t_tx)^2) / 2`.
pub fn data_point<S: Scalar>(z: [S; N_OUT], target: [f64; 2]) -> S {
    let h = heads(z);
    ((h.x_hx - S::cst(target[0])).square() + (h.x_tx - S::cst(target[1])).square()) * S::cst(0.5)
}

fn seeded<const N: usize>(z: &[f64], offset: usize) -> [Dual<N>; N_OUT] {
    core::array::from_fn(|i| Dual::var(z[i], offset + i))
}

fn check(v: f64, term: Term) -> Result<f64, PhysicsError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PhysicsError::NonFinite(term))
    }
}

fn check_grad(d: &[f64], term: Term) -> Result<(), PhysicsError> {
    if d.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PhysicsError::NonFinite(term))
    }
}

/// Value and head gradient of a point (collocation) evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointGrad {
    pub vle: f64,
    pub mccabe: f64,
    pub bc: f64,
    pub d_vle: [f64; N_OUT],
    pub d_mccabe: [f64; N_OUT],
    pub d_bc: [f64; N_OUT],
}

/// Value and head gradient of a pair evaluation; `d_*[0..4]` belong to the
/// earlier record, `d_*[4..8]` to the later one. Values are already divided
/// by the squared characteristic scales.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairGrad {
    pub mass: f64,
    pub energy: f64,
    pub d_mass: [f64; 2 * N_OUT],
    pub d_energy: [f64; 2 * N_OUT],
}

impl PhysicsContext {
    pub fn point_values(&self, z: [f64; N_OUT], sensors: &[f64; N_SENSORS]) -> Result<[f64; 3], PhysicsError> {
        let pred = self.predict(z);
        Ok([
            check(vle_point(&pred, sensors, &self.sys), Term::Vle)?,
            check(mccabe_point(&pred, sensors, &self.sys), Term::McCabe)?,
            check(bc_point(&pred, sensors, &self.sys)?, Term::Bc)?,
        ])
    }

    pub fn point_grad(&self, z: [f64; N_OUT], sensors: &[f64; N_SENSORS]) -> Result<PointGrad, PhysicsError> {
        let pred = self.predict(seeded::<4>(&z, 0));
        let vle = vle_point(&pred, sensors, &self.sys);
        let mc = mccabe_point(&pred, sensors, &self.sys);
        let bc = bc_point(&pred, sensors, &self.sys)?;
        check(vle.v, Term::Vle)?;
        check(mc.v, Term::McCabe)?;
        check(bc.v, Term::Bc)?;
        check_grad(&vle.d, Term::Vle)?;
        check_grad(&mc.d, Term::McCabe)?;
        check_grad(&bc.d, Term::Bc)?;
        Ok(PointGrad {
            vle: vle.v,
            mccabe: mc.v,
            bc: bc.v,
            d_vle: vle.d,
            d_mccabe: mc.d,
            d_bc: bc.d,
        })
    }

    /// Scaled `(mass, energy)` residuals of a record pair.
    pub fn pair_values(&self, za: [f64; N_OUT], zb: [f64; N_OUT], pair: PairSensors<'_>) -> Result<[f64; 2], PhysicsError> {
        let (pa, pb) = (self.predict(za), self.predict(zb));
        Ok([
            check(self.mass_balance_residual(pair, &pa, &pb) / (self.flow_scale * self.flow_scale), Term::Mass)?,
            check(self.energy_balance_residual(pair, &pa, &pb) / (self.duty_scale * self.duty_scale), Term::Energy)?,
        ])
    }

    pub fn pair_grad(&self, za: [f64; N_OUT], zb: [f64; N_OUT], pair: PairSensors<'_>) -> Result<PairGrad, PhysicsError> {
        let pa = self.predict(seeded::<8>(&za, 0));
        let pb = self.predict(seeded::<8>(&zb, N_OUT));
        let fs = 1.0 / (self.flow_scale * self.flow_scale);
        let qs = 1.0 / (self.duty_scale * self.duty_scale);
        let m = self.mass_balance_residual(pair, &pa, &pb) * Dual::cst(fs);
        let e = self.energy_balance_residual(pair, &pa, &pb) * Dual::cst(qs);
        check(m.v, Term::Mass)?;
        check(e.v, Term::Energy)?;
        check_grad(&m.d, Term::Mass)?;
        check_grad(&e.d, Term::Energy)?;
        Ok(PairGrad {
            mass: m.v,
            energy: e.v,
            d_mass: m.d,
            d_energy: e.d,
        })
    }
}

pub fn data_grad(z: [f64; N_OUT], target: [f64; 2]) -> Result<(f64, [f64; N_OUT]), PhysicsError> {
    let v = data_point(seeded::<4>(&z, 0), target);
    check(v.v, Term::Data)?;
    check_grad(&v.d, Term::Data)?;
    Ok((v.v, v.d))
}

/// Fixed set of points drawn uniformly from the scaled input box
/// `[-margin, 1 + margin]^17`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub points: Vec<[f64; N_FEATURES]>,
}

impl CollocationSet {
    pub fn sample(n: usize, margin: f64, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, crate::rng::Stream::Collocation, 0);
        let width = 1.0 + 2.0 * margin;
        let points = (0..n)
            .map(|_| core::array::from_fn(|_| rng.gen::<f64>() * width - margin))
            .collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sensor values of point `i` in physical units.
    pub fn sensors(&self, i: usize, stats: &NormStats) -> [f64; N_SENSORS] {
        let raw = stats.invert(&self.points[i]);
        raw[..N_SENSORS].try_into().unwrap()
    }
}
