//! Sensor records and dataset generation from the column simulator.
//!
//! Channel layout follows the plant historian export: a time index, sixteen
//! sensor channels and the two distillate mole-fraction targets.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::column::{self, ColumnConfig, PerturbationSchedule, SimError, TrayState};
use crate::rng::{self, Stream};
use crate::thermo::BinarySystem;

pub const N_SENSORS: usize = 16;
pub const KELVIN_OFFSET: f64 = 273.15;

/// Sensor column names, in channel order.
pub const SENSOR_NAMES: [&str; N_SENSORS] = [
    "liquid_pct_condenser",
    "condenser_pressure_kpa",
    "liquid_pct_reboiler",
    "mass_flow_feed_kg_h",
    "mass_flow_top_outlet_kg_h",
    "net_mass_flow_main_tower_kg_h",
    "hx_mole_fraction_reboiler",
    "hx_mole_fraction_top_outlet",
    "feed_mole_fraction_hx",
    "feed_mole_fraction_tx",
    "feed_tray_temperature_c",
    "main_tower_pressure_kpa",
    "bottom_tower_pressure_kpa",
    "top_tower_pressure_kpa",
    "reflux_ratio",
    "duties_summary_kw",
];
pub const TIME_NAME: &str = "time_s";
pub const TARGET_NAMES: [&str; 2] = ["mole_fraction_tx", "mole_fraction_hx"];

/// Zero-based channel indices used by the physics and evaluation code.
pub mod ch {
    pub const CONDENSER_LEVEL: usize = 0;
    pub const CONDENSER_PRESSURE: usize = 1;
    pub const REBOILER_LEVEL: usize = 2;
    pub const FEED_MASS: usize = 3;
    pub const TOP_VAPOR_MASS: usize = 4;
    pub const NET_MASS: usize = 5;
    pub const X_REBOILER: usize = 6;
    pub const X_TOP: usize = 7;
    pub const Z_HX: usize = 8;
    pub const Z_TX: usize = 9;
    pub const FEED_TRAY_T: usize = 10;
    pub const P_MAIN: usize = 11;
    pub const P_BOTTOM: usize = 12;
    pub const P_TOP: usize = 13;
    pub const REFLUX: usize = 14;
    pub const DUTY: usize = 15;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub time_s: f64,
    pub sensors: [f64; N_SENSORS],
    pub x_tx: f64,
    pub x_hx: f64,
}

/// Half-widths of the additive uniform noise, one per channel. The TX feed
/// fraction and the TX target are derived as complements of their noisy HX
/// counterparts, so they carry no amplitude of their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub liquid_pct_condenser: f64,
    pub condenser_pressure_kpa: f64,
    pub liquid_pct_reboiler: f64,
    pub mass_flow_feed_kg_h: f64,
    pub mass_flow_top_outlet_kg_h: f64,
    pub net_mass_flow_main_tower_kg_h: f64,
    pub hx_mole_fraction_reboiler: f64,
    pub hx_mole_fraction_top_outlet: f64,
    pub feed_mole_fraction_hx: f64,
    pub feed_tray_temperature_c: f64,
    pub main_tower_pressure_kpa: f64,
    pub bottom_tower_pressure_kpa: f64,
    pub top_tower_pressure_kpa: f64,
    pub reflux_ratio: f64,
    pub duties_summary_kw: f64,
    pub mole_fraction_hx: f64,
}

impl NoiseConfig {
    pub fn zero() -> Self {
        Self::uniform(0.0)
    }

    fn uniform(a: f64) -> Self {
        Self {
            liquid_pct_condenser: a,
            condenser_pressure_kpa: a,
            liquid_pct_reboiler: a,
            mass_flow_feed_kg_h: a,
            mass_flow_top_outlet_kg_h: a,
            net_mass_flow_main_tower_kg_h: a,
            hx_mole_fraction_reboiler: a,
            hx_mole_fraction_top_outlet: a,
            feed_mole_fraction_hx: a,
            feed_tray_temperature_c: a,
            main_tower_pressure_kpa: a,
            bottom_tower_pressure_kpa: a,
            top_tower_pressure_kpa: a,
            reflux_ratio: a,
            duties_summary_kw: a,
            mole_fraction_hx: a,
        }
    }

    /// Amplitudes in channel order; the derived TX feed channel gets 0.
    pub fn sensor_amplitudes(&self) -> [f64; N_SENSORS] {
        [
            self.liquid_pct_condenser,
            self.condenser_pressure_kpa,
            self.liquid_pct_reboiler,
            self.mass_flow_feed_kg_h,
            self.mass_flow_top_outlet_kg_h,
            self.net_mass_flow_main_tower_kg_h,
            self.hx_mole_fraction_reboiler,
            self.hx_mole_fraction_top_outlet,
            self.feed_mole_fraction_hx,
            0.0,
            self.feed_tray_temperature_c,
            self.main_tower_pressure_kpa,
            self.bottom_tower_pressure_kpa,
            self.top_tower_pressure_kpa,
            self.reflux_ratio,
            self.duties_summary_kw,
        ]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut all = self.sensor_amplitudes().to_vec();
        all.push(self.mole_fraction_hx);
        if all.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(SimError::Config("noise amplitudes must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub duration_s: f64,
    pub sample_interval_s: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            duration_s: 28_800.0,
            sample_interval_s: 30.0,
        }
    }
}

impl GenerationConfig {
    pub fn n_records(&self) -> usize {
        libm::round(self.duration_s / self.sample_interval_s) as usize + 1
    }

    pub fn validate(&self, dt: f64) -> Result<(), SimError> {
        let whole = |a: f64, b: f64| {
            let q = a / b;
            q >= 1.0 && libm::fabs(q - libm::round(q)) < 1e-9
        };
        if !(self.duration_s > 0.0 && self.sample_interval_s > 0.0) {
            return Err(SimError::Config("duration and sample interval must be positive"));
        }
        if !whole(self.duration_s, self.sample_interval_s) {
            return Err(SimError::Config("duration must be a multiple of the sample interval"));
        }
        if !whole(self.sample_interval_s, dt) {
            return Err(SimError::Config("sample interval must be a multiple of dt"));
        }
        Ok(())
    }
}

/// Noisy records together with the noise-free values they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub noisy: Vec<SensorRecord>,
    pub clean: Vec<SensorRecord>,
}

/// Noise-free sensor record for a simulator state.
pub fn clean_record(state: &TrayState, cfg: &ColumnConfig, sys: &BinarySystem) -> SensorRecord {
    let u = &state.inputs;
    let fl = &state.flows;
    let n = state.trays.len();
    let top = &state.trays[0];
    let bottom_tray = &state.trays[n - 1];
    let feed = &state.trays[state.feed_tray - 1];
    let rb = &state.reboiler;
    let mw = |x: f64| sys.molar_mass(x, 1.0 - x);
    let mut s = [0.0; N_SENSORS];
    s[ch::CONDENSER_LEVEL] = 100.0 * state.condenser.m / cfg.condenser_capacity;
    s[ch::CONDENSER_PRESSURE] = u.pressures.condenser;
    s[ch::REBOILER_LEVEL] = 100.0 * rb.m / cfg.reboiler_capacity;
    s[ch::FEED_MASS] = fl.feed * mw(u.feed_z_heavy);
    s[ch::TOP_VAPOR_MASS] = fl.vapor * mw(top.y_heavy);
    s[ch::NET_MASS] = fl.stripping_liquid * mw(bottom_tray.x_heavy) - fl.vapor * mw(rb.y_heavy);
    s[ch::X_REBOILER] = rb.x_heavy;
    s[ch::X_TOP] = top.x_heavy;
    s[ch::Z_HX] = u.feed_z_heavy;
    s[ch::Z_TX] = 1.0 - u.feed_z_heavy;
    s[ch::FEED_TRAY_T] = feed.t - KELVIN_OFFSET;
    s[ch::P_MAIN] = u.pressures.main;
    s[ch::P_BOTTOM] = u.pressures.bottom;
    s[ch::P_TOP] = u.pressures.top;
    s[ch::REFLUX] = u.reflux_ratio;
    s[ch::DUTY] = 0.0;
    SensorRecord {
        time_s: state.time_s,
        sensors: s,
        x_tx: 1.0 - state.condenser.x_heavy,
        x_hx: state.condenser.x_heavy,
    }
}

fn is_fraction_channel(i: usize) -> bool {
    matches!(i, ch::X_REBOILER | ch::X_TOP | ch::Z_HX | ch::Z_TX)
}

/// Superimpose uniform noise. Eighteen draws are consumed per record in
/// column order (sensors, then TX and HX targets) whatever the amplitudes,
/// so each channel's noise sequence is fixed by the seed alone.
pub fn add_noise(clean: &[SensorRecord], noise: &NoiseConfig, seed: u64) -> Vec<SensorRecord> {
    let amp = noise.sensor_amplitudes();
    let mut rng = rng::stream(seed, Stream::Noise, 0);
    clean
        .iter()
        .map(|r| {
            let mut draws = [0.0; N_SENSORS + 2];
            for d in draws.iter_mut() {
                *d = rng::symmetric_unit(&mut rng);
            }
            let mut s = r.sensors;
            for i in 0..N_SENSORS {
                s[i] += amp[i] * draws[i];
                if is_fraction_channel(i) {
                    s[i] = s[i].clamp(0.0, 1.0);
                }
            }
            s[ch::Z_TX] = 1.0 - s[ch::Z_HX];
            let x_hx = (r.x_hx + noise.mole_fraction_hx * draws[N_SENSORS + 1]).clamp(0.0, 1.0);
            SensorRecord {
                time_s: r.time_s,
                sensors: s,
                x_tx: 1.0 - x_hx,
                x_hx,
            }
        })
        .collect()
}

/// Simulate from the initial steady state under `schedule` and emit one
/// record every sample interval, `duration / interval + 1` in total.
pub fn generate_dataset(
    cfg: &ColumnConfig,
    schedule: &PerturbationSchedule,
    sys: &BinarySystem,
    gen: &GenerationConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<GeneratedData, SimError> {
    cfg.validate()?;
    gen.validate(cfg.dt)?;
    schedule.validate(gen.duration_s)?;
    noise.validate()?;
    let init = column::init_steady_state(cfg, sys)?;
    let mut clean = Vec::with_capacity(gen.n_records());
    column::simulate(
        &init,
        cfg,
        schedule,
        sys,
        gen.duration_s,
        gen.sample_interval_s,
        |s| clean.push(clean_record(s, cfg, sys)),
    )?;
    let noisy = add_noise(&clean, noise, seed);
    Ok(GeneratedData { noisy, clean })
}
