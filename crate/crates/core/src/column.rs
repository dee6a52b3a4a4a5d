//! Dynamic tray-by-tray binary column with equimolar overflow.
//!
//! Trays are numbered 1..=N from the top. The condenser is total with a
//! level-controlled (constant) holdup; the reboiler holdup floats under a
//! proportional level controller on the bottoms draw. Boilup follows from
//! the reboiler duty and the latent heat of the reboiler liquid. Every tray
//! is an equilibrium stage: its temperature is the bubble point at the tray
//! pressure and the vapor leaving it follows modified Raoult's law.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::thermo::{BinarySystem, ThermoError};

const SECONDS_PER_HOUR: f64 = 3600.0;
/// Composition band outside which a step is reported as unstable.
const X_GUARD: (f64, f64) = (-0.01, 1.01);
/// Steady state: every holdup-weighted composition derivative below this (kmol/h).
pub const STEADY_TOL: f64 = 1e-8;
pub const MAX_INIT_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid column configuration: {0}")]
    Config(&'static str),
    #[error("invalid perturbation schedule: {0}")]
    Schedule(&'static str),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error("unstable integration at t = {time_s} s: {location} composition {value}")]
    Instability {
        time_s: f64,
        location: Location,
        value: f64,
    },
    #[error("negative {stream} flow {value} kmol/h at t = {time_s} s")]
    NegativeFlow {
        time_s: f64,
        stream: &'static str,
        value: f64,
    },
    #[error("no steady state after {steps} steps (max derivative {residual} kmol/h)")]
    NotConverged { steps: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Condenser,
    Tray(usize),
    Reboiler,
}

impl core::fmt::Display for Location {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Location::Condenser => f.write_str("condenser"),
            Location::Tray(j) => write!(f, "tray {j}"),
            Location::Reboiler => f.write_str("reboiler"),
        }
    }
}

/// Pressures (kPa) at the four measured locations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionPressures {
    pub condenser: f64,
    pub top: f64,
    pub main: f64,
    pub bottom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Condenser,
    Top,
    Main,
    Bottom,
}

impl SectionPressures {
    fn set(&mut self, section: Section, value: f64) {
        match section {
            Section::Condenser => self.condenser = value,
            Section::Top => self.top = value,
            Section::Main => self.main = value,
            Section::Bottom => self.bottom = value,
        }
    }

    /// Tray pressure by piecewise-linear interpolation: `top` on tray 1,
    /// `main` on the feed tray, `bottom` on tray `n_trays`.
    pub fn tray_pressure(&self, tray: usize, feed_tray: usize, n_trays: usize) -> f64 {
        interpolate_pressure(self.top, self.main, self.bottom, tray, feed_tray, n_trays)
    }
}

pub fn interpolate_pressure(
    top: f64,
    main: f64,
    bottom: f64,
    tray: usize,
    feed_tray: usize,
    n_trays: usize,
) -> f64 {
    if tray <= feed_tray {
        if feed_tray == 1 {
            return main;
        }
        let w = (tray - 1) as f64 / (feed_tray - 1) as f64;
        top + w * (main - top)
    } else {
        let w = (tray - feed_tray) as f64 / (n_trays - feed_tray) as f64;
        main + w * (bottom - main)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnConfig {
    pub n_trays: usize,
    /// 1-based, counted from the top.
    pub feed_tray: usize,
    /// kmol/h
    pub feed_flow: f64,
    /// (heavy, light)
    pub feed_z: [f64; 2],
    pub reflux_ratio: f64,
    /// kW
    pub reboiler_duty: f64,
    pub pressures: SectionPressures,
    /// kmol per tray
    pub tray_holdup: f64,
    /// kmol, held constant by the condenser level controller
    pub condenser_holdup: f64,
    /// kmol at 100 % level
    pub condenser_capacity: f64,
    /// kmol, reboiler level setpoint
    pub reboiler_holdup: f64,
    /// kmol at 100 % level
    pub reboiler_capacity: f64,
    /// Proportional gain of the bottoms level controller, 1/h.
    pub level_gain: f64,
    /// Reflux drum temperature, K (condensate is subcooled to it).
    pub reflux_temperature: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Step used while relaxing to the initial steady state, s. Only the
    /// fixed point matters there, so it may exceed `dt` within the Euler
    /// stability limit.
    pub init_dt: f64,
}

impl ColumnConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_trays < 2 {
            return Err(SimError::Config("n_trays must be at least 2"));
        }
        if !(1..=self.n_trays).contains(&self.feed_tray) {
            return Err(SimError::Config("feed_tray must lie in 1..=n_trays"));
        }
        let p = &self.pressures;
        if !(p.bottom > p.main && p.main > p.top && p.top > 0.0 && p.condenser > 0.0) {
            return Err(SimError::Config("pressures must satisfy bottom > main > top > 0"));
        }
        if !(self.tray_holdup > 0.0 && self.condenser_holdup > 0.0 && self.reboiler_holdup > 0.0)
        {
            return Err(SimError::Config("holdups must be positive"));
        }
        if !(self.condenser_capacity > self.condenser_holdup
            && self.reboiler_capacity > self.reboiler_holdup)
        {
            return Err(SimError::Config("capacities must exceed holdups"));
        }
        let [zh, zl] = self.feed_z;
        if !((0.0..=1.0).contains(&zh) && (0.0..=1.0).contains(&zl)) || (zh + zl - 1.0).abs() > 1e-12
        {
            return Err(SimError::Config("feed_z must be fractions summing to 1"));
        }
        if !(self.feed_flow > 0.0 && self.reboiler_duty > 0.0 && self.reflux_ratio >= 0.0) {
            return Err(SimError::Config("feed_flow, reboiler_duty must be positive, reflux_ratio >= 0"));
        }
        if !(self.level_gain >= 0.0 && self.reflux_temperature > 0.0) {
            return Err(SimError::Config("level_gain must be >= 0 and reflux_temperature > 0"));
        }
        if !(self.dt > 0.0 && self.init_dt > 0.0) {
            return Err(SimError::Config("dt and init_dt must be positive"));
        }
        Ok(())
    }

    pub fn nominal_inputs(&self) -> ColumnInputs {
        ColumnInputs {
            reflux_ratio: self.reflux_ratio,
            feed_flow: self.feed_flow,
            feed_z_heavy: self.feed_z[0],
            reboiler_duty: self.reboiler_duty,
            pressures: self.pressures,
        }
    }
}

/// Manipulated and disturbance inputs held over one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnInputs {
    pub reflux_ratio: f64,
    /// kmol/h
    pub feed_flow: f64,
    pub feed_z_heavy: f64,
    /// kW
    pub reboiler_duty: f64,
    pub pressures: SectionPressures,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationEvent {
    /// Linear reflux-ratio ramp between `start` and `end` (s); holds `to` afterwards.
    RefluxRamp { start: f64, end: f64, from: f64, to: f64 },
    /// New feed flow, kmol/h.
    FeedFlowStep { t: f64, value: f64 },
    /// New heavy feed fraction.
    FeedCompStep { t: f64, z_heavy: f64 },
    /// New section pressure, kPa.
    PressureStep { t: f64, section: Section, value: f64 },
}

impl PerturbationEvent {
    fn onset(&self) -> f64 {
        match *self {
            PerturbationEvent::RefluxRamp { start, .. } => start,
            PerturbationEvent::FeedFlowStep { t, .. }
            | PerturbationEvent::FeedCompStep { t, .. }
            | PerturbationEvent::PressureStep { t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSchedule {
    #[serde(default)]
    pub events: Vec<PerturbationEvent>,
}

impl PerturbationSchedule {
    pub fn validate(&self, duration_s: f64) -> Result<(), SimError> {
        for e in &self.events {
            let within = |t: f64| (0.0..=duration_s).contains(&t);
            match *e {
                PerturbationEvent::RefluxRamp { start, end, from, to } => {
                    if !(within(start) && within(end)) {
                        return Err(SimError::Schedule("ramp times outside [0, duration]"));
                    }
                    if !(start < end) {
                        return Err(SimError::Schedule("ramp requires start < end"));
                    }
                    if !(from >= 0.0 && to >= 0.0) {
                        return Err(SimError::Schedule("reflux ratio must be non-negative"));
                    }
                }
                PerturbationEvent::FeedFlowStep { t, value } => {
                    if !within(t) {
                        return Err(SimError::Schedule("event time outside [0, duration]"));
                    }
                    if !(value > 0.0) {
                        return Err(SimError::Schedule("feed flow must be positive"));
                    }
                }
                PerturbationEvent::FeedCompStep { t, z_heavy } => {
                    if !within(t) {
                        return Err(SimError::Schedule("event time outside [0, duration]"));
                    }
                    if !(0.0..=1.0).contains(&z_heavy) {
                        return Err(SimError::Schedule("feed composition outside [0, 1]"));
                    }
                }
                PerturbationEvent::PressureStep { t, value, .. } => {
                    if !within(t) {
                        return Err(SimError::Schedule("event time outside [0, duration]"));
                    }
                    if !(value > 0.0) {
                        return Err(SimError::Schedule("pressure must be positive"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Inputs in effect at `time_s`: nominal values with every event whose
    /// onset has passed applied in onset order.
    pub fn inputs_at(&self, time_s: f64, cfg: &ColumnConfig) -> ColumnInputs {
        let mut u = cfg.nominal_inputs();
        let mut order: Vec<&PerturbationEvent> = self.events.iter().collect();
        order.sort_by(|a, b| a.onset().total_cmp(&b.onset()));
        for e in order {
            if e.onset() > time_s {
                break;
            }
            match *e {
                PerturbationEvent::RefluxRamp { start, end, from, to } => {
                    let w = ((time_s - start) / (end - start)).min(1.0);
                    u.reflux_ratio = from + w * (to - from);
                }
                PerturbationEvent::FeedFlowStep { value, .. } => u.feed_flow = value,
                PerturbationEvent::FeedCompStep { z_heavy, .. } => u.feed_z_heavy = z_heavy,
                PerturbationEvent::PressureStep { section, value, .. } => {
                    u.pressures.set(section, value)
                }
            }
        }
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tray {
    pub x_heavy: f64,
    /// Heavy fraction of the vapor leaving the tray.
    pub y_heavy: f64,
    /// K
    pub t: f64,
    /// kPa
    pub p: f64,
    /// Liquid leaving, kmol/h.
    pub l: f64,
    /// Vapor leaving, kmol/h.
    pub v: f64,
    /// kmol
    pub m: f64,
}

impl Tray {
    pub fn x_light(&self) -> f64 {
        1.0 - self.x_heavy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drum {
    pub x_heavy: f64,
    /// Heavy fraction of the vapor in equilibrium (reboiler only; equal to
    /// `x_heavy` for the total condenser).
    pub y_heavy: f64,
    pub m: f64,
    pub t: f64,
    pub p: f64,
}

/// Column-wide molar flows, kmol/h.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Flows {
    pub feed: f64,
    pub vapor: f64,
    pub reflux: f64,
    pub distillate: f64,
    /// Liquid below the feed tray.
    pub stripping_liquid: f64,
    pub bottoms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrayState {
    pub time_s: f64,
    pub trays: Vec<Tray>,
    pub condenser: Drum,
    pub reboiler: Drum,
    pub flows: Flows,
    /// Level-controller bias on the bottoms draw, kmol/h.
    pub bottoms_bias: f64,
    /// Reboiler holdup setpoint, kmol.
    pub reboiler_setpoint: f64,
    /// Proportional gain of the bottoms level controller, 1/h.
    pub level_gain: f64,
    pub inputs: ColumnInputs,
    pub feed_tray: usize,
}

impl TrayState {
    pub fn n_trays(&self) -> usize {
        self.trays.len()
    }

    /// Heavy component in every holdup, kmol.
    pub fn heavy_inventory(&self) -> f64 {
        self.trays.iter().map(|t| t.m * t.x_heavy).sum::<f64>()
            + self.condenser.m * self.condenser.x_heavy
            + self.reboiler.m * self.reboiler.x_heavy
    }

    pub fn total_inventory(&self) -> f64 {
        self.trays.iter().map(|t| t.m).sum::<f64>() + self.condenser.m + self.reboiler.m
    }

    /// Net external heavy-component flow `F z - D x_D - B x_B`, kmol/h.
    pub fn heavy_net_inflow(&self) -> f64 {
        let f = &self.flows;
        f.feed * self.inputs.feed_z_heavy
            - f.distillate * self.condenser.x_heavy
            - f.bottoms * self.reboiler.x_heavy
    }

    pub fn total_net_inflow(&self) -> f64 {
        let f = &self.flows;
        f.feed - f.distillate - f.bottoms
    }

    /// Recompute pressures, bubble temperatures and vapor compositions.
    fn refresh_thermo(&mut self, sys: &BinarySystem) -> Result<(), SimError> {
        let n = self.trays.len();
        let p = self.inputs.pressures;
        for (i, tray) in self.trays.iter_mut().enumerate() {
            tray.p = p.tray_pressure(i + 1, self.feed_tray, n);
            tray.t = sys.bubble_point_t(tray.x_heavy, tray.p)?;
            tray.y_heavy = vapor_heavy(sys, tray.x_heavy, tray.t, tray.p);
        }
        let rb = &mut self.reboiler;
        rb.p = p.bottom;
        rb.t = sys.bubble_point_t(rb.x_heavy, rb.p)?;
        rb.y_heavy = vapor_heavy(sys, rb.x_heavy, rb.t, rb.p);
        self.condenser.p = p.condenser;
        self.condenser.y_heavy = self.condenser.x_heavy;
        Ok(())
    }

    fn refresh_flows(&mut self, sys: &BinarySystem) -> Result<(), SimError> {
        let u = self.inputs;
        let xb = self.reboiler.x_heavy;
        let latent = xb * sys.heavy.dh_vap + (1.0 - xb) * sys.light.dh_vap;
        let vapor = u.reboiler_duty * SECONDS_PER_HOUR / latent;
        let distillate = vapor / (u.reflux_ratio + 1.0);
        let reflux = vapor - distillate;
        let stripping_liquid = reflux + u.feed_flow;
        let bottoms = self.bottoms_bias + self.level_gain * (self.reboiler.m - self.reboiler_setpoint);
        if bottoms < 0.0 {
            return Err(SimError::NegativeFlow {
                time_s: self.time_s,
                stream: "bottoms",
                value: bottoms,
            });
        }
        self.flows = Flows {
            feed: u.feed_flow,
            vapor,
            reflux,
            distillate,
            stripping_liquid,
            bottoms,
        };
        let f = self.feed_tray;
        for (i, tray) in self.trays.iter_mut().enumerate() {
            tray.l = if i + 1 < f { reflux } else { stripping_liquid };
            tray.v = vapor;
        }
        Ok(())
    }

    /// Holdup-weighted heavy derivatives (kmol/h): condenser, trays, reboiler,
    /// plus the reboiler total-holdup derivative.
    fn derivatives(&self) -> Derivatives {
        let fl = &self.flows;
        let n = self.trays.len();
        let u = &self.inputs;
        let xd = self.condenser.x_heavy;
        let y1 = self.trays[0].y_heavy;
        let condenser = fl.vapor * (y1 - xd);
        let mut trays = Vec::with_capacity(n);
        for j in 0..n {
            let (l_in, x_in) = if j == 0 {
                (fl.reflux, xd)
            } else {
                (self.trays[j - 1].l, self.trays[j - 1].x_heavy)
            };
            let y_below = if j + 1 < n {
                self.trays[j + 1].y_heavy
            } else {
                self.reboiler.y_heavy
            };
            let t = &self.trays[j];
            let mut r = l_in * x_in - t.l * t.x_heavy + t.v * (y_below - t.y_heavy);
            if j + 1 == self.feed_tray {
                r += u.feed_flow * u.feed_z_heavy;
            }
            trays.push(r);
        }
        let last = &self.trays[n - 1];
        let rb = &self.reboiler;
        let reboiler = last.l * last.x_heavy - fl.vapor * rb.y_heavy - fl.bottoms * rb.x_heavy;
        let reboiler_total = last.l - fl.vapor - fl.bottoms;
        Derivatives {
            condenser,
            trays,
            reboiler,
            reboiler_total,
        }
    }
}

struct Derivatives {
    condenser: f64,
    trays: Vec<f64>,
    reboiler: f64,
    reboiler_total: f64,
}

impl Derivatives {
    fn max_abs(&self) -> f64 {
        self.trays
            .iter()
            .chain([self.condenser, self.reboiler, self.reboiler_total].iter())
            .fold(0.0_f64, |m, v| m.max(libm::fabs(*v)))
    }
}

fn vapor_heavy(sys: &BinarySystem, x: f64, t: f64, p: f64) -> f64 {
    let (y1, y2) = sys.raoult(x, 1.0 - x, t, p);
    y1 / (y1 + y2)
}

/// Build an unconverged starting state: every holdup at the feed composition.
fn initial_state(cfg: &ColumnConfig, sys: &BinarySystem) -> Result<TrayState, SimError> {
    let z = cfg.feed_z[0];
    let blank = Tray {
        x_heavy: z,
        y_heavy: z,
        t: 0.0,
        p: 0.0,
        l: 0.0,
        v: 0.0,
        m: cfg.tray_holdup,
    };
    let drum = |m| Drum {
        x_heavy: z,
        y_heavy: z,
        m,
        t: cfg.reflux_temperature,
        p: 0.0,
    };
    let mut state = TrayState {
        time_s: 0.0,
        trays: alloc::vec![blank; cfg.n_trays],
        condenser: drum(cfg.condenser_holdup),
        reboiler: drum(cfg.reboiler_holdup),
        flows: Flows::default(),
        bottoms_bias: 0.0,
        reboiler_setpoint: cfg.reboiler_holdup,
        level_gain: cfg.level_gain,
        inputs: cfg.nominal_inputs(),
        feed_tray: cfg.feed_tray,
    };
    state.refresh_thermo(sys)?;
    state.track_bias(sys);
    state.refresh_flows(sys)?;
    Ok(state)
}

impl TrayState {
    /// Set the bottoms bias so that the controller output equals `F - D` at
    /// the current holdup error of zero.
    fn track_bias(&mut self, sys: &BinarySystem) {
        let u = self.inputs;
        let xb = self.reboiler.x_heavy;
        let latent = xb * sys.heavy.dh_vap + (1.0 - xb) * sys.light.dh_vap;
        let vapor = u.reboiler_duty * SECONDS_PER_HOUR / latent;
        self.bottoms_bias = u.feed_flow - vapor / (u.reflux_ratio + 1.0);
    }

    /// Largest holdup-weighted derivative magnitude at the current state, kmol/h.
    pub fn max_derivative(&self) -> f64 {
        self.derivatives().max_abs()
    }
}

/// One explicit-Euler step of length `dt` seconds under `inputs`.
pub fn step(
    state: &TrayState,
    inputs: &ColumnInputs,
    dt: f64,
    sys: &BinarySystem,
) -> Result<TrayState, SimError> {
    let mut s = state.clone();
    if s.inputs != *inputs {
        s.inputs = *inputs;
        s.refresh_thermo(sys)?;
        s.refresh_flows(sys)?;
    }
    advance(&mut s, dt, sys)?;
    Ok(s)
}

fn advance(s: &mut TrayState, dt: f64, sys: &BinarySystem) -> Result<(), SimError> {
    let h = dt / SECONDS_PER_HOUR;
    let d = s.derivatives();
    let t_new = s.time_s + dt;

    s.condenser.x_heavy += h * d.condenser / s.condenser.m;
    for (tray, r) in s.trays.iter_mut().zip(d.trays.iter()) {
        tray.x_heavy += h * r / tray.m;
    }
    let heavy_b = s.reboiler.m * s.reboiler.x_heavy + h * d.reboiler;
    s.reboiler.m += h * d.reboiler_total;
    if !(s.reboiler.m > 0.0) {
        return Err(SimError::NegativeFlow {
            time_s: t_new,
            stream: "reboiler holdup",
            value: s.reboiler.m,
        });
    }
    s.reboiler.x_heavy = heavy_b / s.reboiler.m;
    s.time_s = t_new;

    guard(&mut s.condenser.x_heavy, Location::Condenser, t_new)?;
    for (j, tray) in s.trays.iter_mut().enumerate() {
        guard(&mut tray.x_heavy, Location::Tray(j + 1), t_new)?;
    }
    guard(&mut s.reboiler.x_heavy, Location::Reboiler, t_new)?;

    s.refresh_thermo(sys)?;
    s.refresh_flows(sys)
}

fn guard(x: &mut f64, location: Location, time_s: f64) -> Result<(), SimError> {
    if !(X_GUARD.0..=X_GUARD.1).contains(x) {
        return Err(SimError::Instability {
            time_s,
            location,
            value: *x,
        });
    }
    *x = x.clamp(0.0, 1.0);
    Ok(())
}

/// Integrate the column at nominal inputs until every holdup-weighted
/// derivative falls below [`STEADY_TOL`]. During the approach the bottoms
/// controller bias tracks `F - D`; it is frozen at the converged value.
pub fn init_steady_state(cfg: &ColumnConfig, sys: &BinarySystem) -> Result<TrayState, SimError> {
    init_steady_state_with(cfg, sys, cfg.init_dt, MAX_INIT_STEPS)
}

pub fn init_steady_state_with(
    cfg: &ColumnConfig,
    sys: &BinarySystem,
    dt: f64,
    max_steps: usize,
) -> Result<TrayState, SimError> {
    cfg.validate()?;
    sys.validate()?;
    let mut s = initial_state(cfg, sys)?;
    let mut residual = f64::INFINITY;
    for _ in 0..max_steps {
        residual = s.max_derivative();
        if residual < STEADY_TOL {
            s.time_s = 0.0;
            return Ok(s);
        }
        advance(&mut s, dt, sys)?;
        s.track_bias(sys);
        s.refresh_flows(sys)?;
    }
    Err(SimError::NotConverged {
        steps: max_steps,
        residual,
    })
}

/// Run the schedule from `state` for `duration_s`, calling `sample` at every
/// multiple of `sample_every_s` (including time zero).
pub fn simulate(
    state: &TrayState,
    cfg: &ColumnConfig,
    schedule: &PerturbationSchedule,
    sys: &BinarySystem,
    duration_s: f64,
    sample_every_s: f64,
    mut sample: impl FnMut(&TrayState),
) -> Result<TrayState, SimError> {
    let steps_per_sample = libm::round(sample_every_s / cfg.dt) as usize;
    let n_samples = libm::round(duration_s / sample_every_s) as usize;
    let mut s = state.clone();
    let t0 = s.time_s;
    sample(&s);
    let mut k = 0usize;
    for _ in 0..n_samples {
        for _ in 0..steps_per_sample {
            let t = t0 + k as f64 * cfg.dt;
            let u = schedule.inputs_at(t, cfg);
            s = step(&s, &u, cfg.dt, sys)?;
            // Avoid accumulated rounding in the clock.
            s.time_s = t0 + (k + 1) as f64 * cfg.dt;
            k += 1;
        }
        sample(&s);
    }
    Ok(s)
}
